#include "chn/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "chn/data.hpp"
#include "chn/eval.hpp"
#include "chn/gradcheck.hpp"
#include "chn/hashing.hpp"
#include "chn/losses.hpp"
#include "chn/net.hpp"
#include "chn/training.hpp"

namespace chn {

namespace fs = std::filesystem;

namespace {

// Raised by subcommands whose verification finds a failure.
class VerificationFailed : public Error {
 public:
  using Error::Error;
};

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::vector<double> parse_grid(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    auto v = parse_double(tok);
    if (!v) throw ConfigError(std::string("invalid ") + what + " value '" + tok + "'");
    out.push_back(*v);
  }
  if (out.empty()) throw ConfigError(std::string(what) + " grid is empty");
  return out;
}

const std::vector<std::size_t>& subset_of(const SplitSpec& split, const std::string& name) {
  if (name == "train") return split.train;
  if (name == "query") return split.query;
  if (name == "val") return split.validation;
  throw ConfigError("unknown subset '" + name + "' (expected train, query or val)");
}

// ---------------------------------------------------------------- gen-data

struct GenDataArgs {
  SyntheticConfig synth;
  std::size_t query = 0;
  std::size_t val = 0;
  bool query_set = false;
  bool val_set = false;
  std::string out;
};

void add_gen_data(CLI::App& app, GenDataArgs& a) {
  auto* sub = app.add_subcommand("gen-data", "Generate a synthetic bimodal dataset with a train/query/val split");
  sub->add_option("--n", a.synth.n, "Number of items")->capture_default_str();
  sub->add_option("--dx", a.synth.image_dim, "Image feature dimension")->capture_default_str();
  sub->add_option("--dy", a.synth.text_dim, "Text (tag) feature dimension")->capture_default_str();
  sub->add_option("--classes", a.synth.classes, "Number of classes")->capture_default_str();
  sub->add_option("--noise", a.synth.noise, "Gaussian noise scale on image features")->capture_default_str();
  sub->add_option("--multi-label-prob", a.synth.second_label_prob, "Probability of a second label")
      ->capture_default_str();
  sub->add_option("--seed", a.synth.seed, "Random seed")->capture_default_str();
  sub->add_option("--query", a.query, "Query split size (default n/10)");
  sub->add_option("--val", a.val, "Validation split size (default n/5)");
  sub->add_option("--out", a.out, "Output directory")->required();
}

int cmd_gen_data(GenDataArgs& a, const CLI::App& sub) {
  const BimodalDataset data = generate_synthetic(a.synth);
  const std::size_t query = sub.count("--query") ? a.query : a.synth.n / 10;
  const std::size_t val = sub.count("--val") ? a.val : a.synth.n / 5;
  const SplitSpec split = make_split(a.synth.n, query, val, a.synth.seed ^ 0x5bd1e995ULL);
  save_dataset(a.out, data, split);
  std::cout << "wrote " << data.size() << " items to " << a.out << " (train=" << split.train.size()
            << " query=" << split.query.size() << " val=" << split.validation.size() << ")\n";
  return kExitOk;
}

// ------------------------------------------------------------------- train

// Flags that override config-file keys; kept as text and routed through
// set_config_value so both paths share validation.
struct ConfigOverrides {
  std::vector<std::pair<std::string, std::string>> flags = {
      {"bits", ""},          {"epochs", ""},         {"lambda", ""},        {"gamma", ""},
      {"learning_rate", ""}, {"momentum", ""},       {"batch_size", ""},    {"seed", ""},
      {"variant", ""},       {"image_layer_dims", ""}, {"text_layer_dims", ""}, {"image_dropout", ""},
      {"text_dropout", ""},  {"output_lr_multiplier", ""}, {"lr_decay_every", ""}, {"lr_decay_factor", ""},
      {"track_validation", ""}};
  std::string config_path;

  void attach(CLI::App* sub) {
    sub->add_option("--config", config_path, "Config file of `key = value` lines");
    for (auto& [key, value] : flags) {
      std::string flag = "--" + key;
      for (char& c : flag)
        if (c == '_') c = '-';
      sub->add_option(flag, value, "Override config key '" + key + "'");
    }
  }

  TrainConfig resolve(const CLI::App& sub) const {
    // epochs has no meaningful default; the sentinel detects "never set".
    constexpr std::size_t kUnset = static_cast<std::size_t>(-1);
    TrainConfig cfg;
    cfg.epochs = kUnset;
    if (!config_path.empty()) cfg = load_train_config(config_path, cfg);
    for (const auto& [key, value] : flags) {
      std::string flag = "--" + key;
      for (char& c : flag)
        if (c == '_') c = '-';
      if (sub.count(flag) == 0) continue;
      set_config_value(cfg, key, value);
    }
    if (cfg.epochs == kUnset) throw ConfigError("epochs is required (--epochs or config file)");
    validate_config(cfg);
    return cfg;
  }
};

struct TrainArgs {
  std::string data;
  std::string out;
  ConfigOverrides overrides;
};

void add_train(CLI::App& app, TrainArgs& a) {
  auto* sub = app.add_subcommand("train", "Train the image and text hashing networks");
  sub->add_option("--data", a.data, "Dataset directory from gen-data")->required();
  sub->add_option("--out", a.out, "Output directory for image.chnm, text.chnm, history.csv (default: --data)");
  a.overrides.attach(sub);
}

int cmd_train(TrainArgs& a, const CLI::App& sub) {
  const TrainConfig cfg = a.overrides.resolve(sub);
  const BimodalDataset data = load_dataset(a.data);
  const SplitSpec split = load_dataset_split(a.data);
  const fs::path out = a.out.empty() ? fs::path(a.data) : fs::path(a.out);
  fs::create_directories(out);
  auto log = [](const EpochRecord& e) {
    std::cerr << "epoch " << e.epoch << " total=" << fixed(e.loss.total) << " c_xy=" << fixed(e.loss.c_xy)
              << " c_xx=" << fixed(e.loss.c_xx) << " c_yy=" << fixed(e.loss.c_yy) << " q_x=" << fixed(e.loss.q_x)
              << " q_y=" << fixed(e.loss.q_y);
    if (e.val_map_i2t) std::cerr << " val_map_i2t=" << fixed(*e.val_map_i2t, 4) << " val_map_t2i=" << fixed(*e.val_map_t2i, 4);
    std::cerr << " (" << fixed(e.seconds, 2) << "s)\n";
  };
  try {
    const TrainResult result = train(data, split, cfg, log);
    save_model(out / "image.chnm", result.image_net);
    save_model(out / "text.chnm", result.text_net);
    save_history_csv(out / "history.csv", result.history);
  } catch (const TrainingDiverged& e) {
    save_model(out / "image.lastgood.chnm", e.last_good().image_net);
    save_model(out / "text.lastgood.chnm", e.last_good().text_net);
    save_history_csv(out / "history.csv", e.last_good().history);
    throw;
  }
  std::cout << "wrote " << (out / "image.chnm").string() << ", " << (out / "text.chnm").string() << ", "
            << (out / "history.csv").string() << '\n';
  return kExitOk;
}

// ------------------------------------------------------------------ encode

struct EncodeArgs {
  std::string model;
  std::string features;
  std::string data;
  std::string modality = "image";
  std::string subset = "all";
  std::string out;
  std::string embeddings;
};

void add_encode(CLI::App& app, EncodeArgs& a) {
  auto* sub = app.add_subcommand("encode", "Encode features into a .chnb hash code file");
  sub->add_option("--model", a.model, "Model file (.chnm)")->required();
  auto* feat = sub->add_option("--features", a.features, "Feature TSV file");
  auto* data = sub->add_option("--data", a.data, "Dataset directory (alternative to --features)");
  feat->excludes(data);
  sub->add_option("--modality", a.modality, "With --data: image or text")->capture_default_str();
  sub->add_option("--subset", a.subset, "With --data: all, train, query or val")->capture_default_str();
  sub->add_option("--out", a.out, "Output code file")->required();
  sub->add_option("--embeddings", a.embeddings, "Also write continuous embeddings as TSV");
}

int cmd_encode(EncodeArgs& a) {
  const ModalityNet net = load_model(a.model);
  Matrix features;
  if (!a.features.empty()) {
    features = load_features(a.features);
  } else if (!a.data.empty()) {
    if (a.modality != "image" && a.modality != "text") throw ConfigError("--modality must be image or text");
    features = load_features(fs::path(a.data) / (a.modality + "_features.tsv"));
    if (a.subset != "all") features = select_rows(features, subset_of(load_dataset_split(a.data), a.subset));
  } else {
    throw ConfigError("encode needs --features or --data");
  }
  const Encoded enc = encode(net, features);
  save_codes(a.out, enc.codes);
  if (!a.embeddings.empty()) save_features(a.embeddings, enc.embeddings);
  std::cout << "encoded " << enc.codes.size() << " items at " << enc.codes.bits() << " bits\n";
  return kExitOk;
}

// ------------------------------------------------------------------ search

struct SearchArgs {
  std::string db;
  std::string queries;
  std::size_t R = 50;
  std::string out;
};

void add_search(CLI::App& app, SearchArgs& a) {
  auto* sub = app.add_subcommand("search", "Rank a code database for every query code by Hamming distance");
  sub->add_option("--db", a.db, "Database code file")->required();
  sub->add_option("--queries", a.queries, "Query code file")->required();
  sub->add_option("--R", a.R, "Results per query")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--out", a.out, "Results TSV")->required();
}

int cmd_search(SearchArgs& a) {
  const HashCodeMatrix db = load_codes(a.db);
  const HashCodeMatrix queries = load_codes(a.queries);
  const auto rankings = search_all(db, queries, a.R);
  std::ofstream out(a.out, std::ios::binary);
  if (!out) throw IoError("cannot open '" + a.out + "' for writing");
  out << "query_index\trank\tdb_index\tdistance\n";
  for (std::size_t q = 0; q < rankings.size(); ++q)
    for (std::size_t r = 0; r < rankings[q].size(); ++r)
      out << q << '\t' << (r + 1) << '\t' << rankings[q][r].index << '\t' << rankings[q][r].distance << '\n';
  if (!out) throw IoError("failed writing '" + a.out + "'");
  std::cout << "ranked " << queries.size() << " queries against " << db.size() << " items\n";
  return kExitOk;
}

// -------------------------------------------------------------------- eval

struct EvalArgs {
  std::string data;
  std::string models;
  std::string queries = "query";
  std::size_t R = 50;
  std::string out;
};

void add_eval(CLI::App& app, EvalArgs& a) {
  auto* sub = app.add_subcommand("eval", "Cross-modal MAP@R, precision-recall and precision@top-R");
  sub->add_option("--data", a.data, "Dataset directory")->required();
  sub->add_option("--models", a.models, "Directory holding image.chnm and text.chnm")->required();
  sub->add_option("--queries", a.queries, "Query subset: query or val (database is train)")->capture_default_str();
  sub->add_option("--R", a.R, "MAP cutoff")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--out", a.out, "Output directory for metrics.txt and curve CSVs")->required();
}

int cmd_eval(EvalArgs& a) {
  const BimodalDataset data = load_dataset(a.data);
  const SplitSpec split = load_dataset_split(a.data);
  validate_split(split, data.size());
  const ModalityNet image_net = load_model(fs::path(a.models) / "image.chnm");
  const ModalityNet text_net = load_model(fs::path(a.models) / "text.chnm");
  const auto& query_items = subset_of(split, a.queries);
  if (query_items.empty()) throw ConfigError("query subset is empty");

  const LabelMatrix q_labels = select_rows(data.labels, query_items);
  const LabelMatrix db_labels = select_rows(data.labels, split.train);
  const RelevanceJudge judge(q_labels, db_labels);
  const Encoded q_img = encode(image_net, select_rows(data.image, query_items));
  const Encoded q_txt = encode(text_net, select_rows(data.text, query_items));
  const Encoded db_img = encode(image_net, select_rows(data.image, split.train));
  const Encoded db_txt = encode(text_net, select_rows(data.text, split.train));

  std::vector<std::size_t> grid;
  for (std::size_t R : {1, 5, 10, 20, 50, 100, 200, 500, 1000, 2000, 5000})
    if (R <= split.train.size()) grid.push_back(R);

  fs::create_directories(a.out);
  std::ofstream metrics(fs::path(a.out) / "metrics.txt", std::ios::binary);
  if (!metrics) throw IoError("cannot write metrics.txt");
  const std::string tag = "map@" + std::to_string(a.R);
  struct Task {
    const char* name;
    const HashCodeMatrix& db;
    const HashCodeMatrix& queries;
  };
  for (const Task& t : {Task{"i2t", db_txt.codes, q_img.codes}, Task{"t2i", db_img.codes, q_txt.codes}}) {
    const auto rankings = search_all(t.db, t.queries, 0);
    const MapResult m = map_at_r(rankings, judge, a.R);
    metrics << tag << '_' << t.name << '=' << fixed(m.map) << '\n';
    metrics << "eligible_queries_" << t.name << '=' << m.eligible_queries << '\n';
    metrics << "excluded_queries_" << t.name << '=' << m.excluded_queries << '\n';
    save_curve_csv(fs::path(a.out) / (std::string("pr_") + t.name + ".csv"),
                   precision_recall_curve(rankings, judge, t.db.bits()));
    save_curve_csv(fs::path(a.out) / (std::string("topr_") + t.name + ".csv"), precision_at_top_r(rankings, judge, grid));
    std::cout << tag << '_' << t.name << '=' << fixed(m.map, 4) << '\n';
  }
  return kExitOk;
}

// ------------------------------------------------------------------- sweep

struct SweepArgs {
  std::string data;
  std::string lambdas = "0.1,1";
  std::string gammas = "0,0.1";
  std::string out;
  ConfigOverrides overrides;
};

void add_sweep(CLI::App& app, SweepArgs& a) {
  auto* sub = app.add_subcommand("sweep", "Grid-search lambda and gamma by validation MAP@50");
  sub->add_option("--data", a.data, "Dataset directory")->required();
  sub->add_option("--lambdas", a.lambdas, "Comma-separated lambda grid")->capture_default_str();
  sub->add_option("--gammas", a.gammas, "Comma-separated gamma grid")->capture_default_str();
  sub->add_option("--out", a.out, "Result table (TSV)")->required();
  a.overrides.attach(sub);
}

int cmd_sweep(SweepArgs& a, const CLI::App& sub) {
  const TrainConfig cfg = a.overrides.resolve(sub);
  const auto lambdas = parse_grid(a.lambdas, "lambda");
  const auto gammas = parse_grid(a.gammas, "gamma");
  const BimodalDataset data = load_dataset(a.data);
  const SplitSpec split = load_dataset_split(a.data);
  const SweepResult result = sweep(data, split, cfg, lambdas, gammas);
  std::ofstream out(a.out, std::ios::binary);
  if (!out) throw IoError("cannot open '" + a.out + "' for writing");
  out << "lambda\tgamma\tmap@50_i2t\tmap@50_t2i\tmap@50_mean\n";
  for (const auto& c : result.cells)
    out << format_exact(c.lambda) << '\t' << format_exact(c.gamma) << '\t' << fixed(c.map.image_to_text) << '\t'
        << fixed(c.map.text_to_image) << '\t' << fixed(c.map.mean()) << '\n';
  const auto& best = result.cells[result.best];
  std::cout << "best lambda=" << format_exact(best.lambda) << " gamma=" << format_exact(best.gamma)
            << " map@50_mean=" << fixed(best.map.mean(), 4) << '\n';
  return kExitOk;
}

// -------------------------------------------------------------- grad-check

struct GradCheckArgs {
  std::size_t configs = 100;
  std::uint64_t seed = 1;
  double step = 1e-5;
  double threshold = 1e-4;
};

void add_grad_check(CLI::App& app, GradCheckArgs& a) {
  auto* sub = app.add_subcommand("grad-check", "Compare analytic gradients with central finite differences");
  sub->add_option("--configs", a.configs, "Random configurations to check")->capture_default_str();
  sub->add_option("--seed", a.seed, "Random seed")->capture_default_str();
  sub->add_option("--step", a.step, "Finite-difference step")->capture_default_str();
  sub->add_option("--threshold", a.threshold, "Fail above this relative error")->capture_default_str();
}

int cmd_grad_check(GradCheckArgs& a) {
  const GradCheckSuiteResult r = random_grad_checks(a.configs, a.seed, a.step);
  std::cout << "configurations=" << r.configurations << '\n'
            << "parameters_checked=" << r.parameters_checked << '\n'
            << "max_relative_error=" << format_exact(r.max_relative_error) << '\n';
  if (r.max_relative_error > a.threshold)
    throw VerificationFailed("gradient check failed: max relative error " + format_exact(r.max_relative_error) +
                             " > " + format_exact(a.threshold));
  return kExitOk;
}

// ------------------------------------------------------------ verify-bound

struct VerifyBoundArgs {
  std::size_t bits = 16;
  std::size_t samples = 10000;
  std::uint64_t seed = 1;
  std::string out;
};

void add_verify_bound(CLI::App& app, VerifyBoundArgs& a) {
  auto* sub = app.add_subcommand("verify-bound", "Check the ITQ-error identities and cosine quantization bound");
  sub->add_option("--bits", a.bits, "Code length")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--samples", a.samples, "Uniform interior samples")->capture_default_str();
  sub->add_option("--seed", a.seed, "Random seed")->capture_default_str();
  sub->add_option("--out", a.out, "BoundReport CSV")->required();
}

int cmd_verify_bound(VerifyBoundArgs& a) {
  std::mt19937_64 rng(a.seed);
  std::uniform_real_distribution<double> interior(-1.0, 1.0);
  Matrix inside(a.samples, a.bits);
  for (double& x : inside.flat()) {
    do x = interior(rng);
    while (x == -1.0);
  }
  const bool all_vertices = a.bits <= 12;
  const std::size_t vertex_count = all_vertices ? (std::size_t{1} << a.bits) : std::max<std::size_t>(a.samples, 1);
  Matrix vertices(vertex_count, a.bits);
  std::bernoulli_distribution coin(0.5);
  for (std::size_t v = 0; v < vertex_count; ++v)
    for (std::size_t k = 0; k < a.bits; ++k)
      vertices(v, k) = (all_vertices ? ((v >> k) & 1U) : coin(rng)) ? 1.0 : -1.0;

  const BoundReport in_report = quantization_bound_report(inside);
  const BoundReport vx_report = quantization_bound_report(vertices);
  std::ofstream out(a.out, std::ios::binary);
  if (!out) throw IoError("cannot open '" + a.out + "' for writing");
  out << "kind,itq_error,bound_rhs,identity_lhs,exact_rhs,violated\n";
  auto dump = [&](const char* kind, const BoundReport& rep) {
    for (const auto& r : rep.rows)
      out << kind << ',' << format_exact(r.itq_error) << ',' << format_exact(r.bound_rhs) << ','
          << format_exact(r.identity_lhs) << ',' << format_exact(r.exact_rhs) << ',' << (r.violated ? 1 : 0) << '\n';
  };
  dump("interior", in_report);
  dump("vertex", vx_report);
  if (!out) throw IoError("failed writing '" + a.out + "'");

  std::cout << "interior_samples=" << in_report.rows.size() << '\n'
            << "interior_violation_rate=" << fixed(in_report.violation_rate()) << '\n'
            << "vertex_samples=" << vx_report.rows.size() << '\n'
            << "vertex_violation_rate=" << fixed(vx_report.violation_rate()) << '\n'
            << "max_identity_deviation="
            << format_exact(std::max(in_report.max_identity_deviation, vx_report.max_identity_deviation)) << '\n';
  if (in_report.identity_failures + vx_report.identity_failures > 0)
    throw VerificationFailed("exact quantization identities failed on " +
                             std::to_string(in_report.identity_failures + vx_report.identity_failures) + " rows");
  return kExitOk;
}

// ------------------------------------------------------- verify-identities

struct VerifyIdentitiesArgs {
  std::string codes = "random";
  std::size_t bits = 8;
  bool exhaustive = false;
  std::size_t n = 1000;
  std::size_t pairs = 100000;
  std::uint64_t seed = 1;
};

void add_verify_identities(CLI::App& app, VerifyIdentitiesArgs& a) {
  auto* sub = app.add_subcommand("verify-identities", "Check the Hamming / inner-product / cosine identities");
  sub->add_option("--codes", a.codes, "'random' or a .chnb code file")->capture_default_str();
  sub->add_option("--bits", a.bits, "Code length for random codes")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_flag("--exhaustive", a.exhaustive, "Enumerate every pair of the 2^bits codes (bits <= 12)");
  sub->add_option("--n", a.n, "Number of random codes")->capture_default_str();
  sub->add_option("--pairs", a.pairs, "Sampled pairs")->capture_default_str();
  sub->add_option("--seed", a.seed, "Random seed")->capture_default_str();
}

int cmd_verify_identities(VerifyIdentitiesArgs& a) {
  IdentityReport report;
  if (a.codes == "random" && a.exhaustive) {
    report = verify_identities_exhaustive(a.bits);
  } else {
    HashCodeMatrix codes;
    if (a.codes == "random") {
      if (a.n < 2) throw ConfigError("--n must be at least 2");
      codes = HashCodeMatrix(a.n, a.bits);
      std::mt19937_64 rng(a.seed);
      std::bernoulli_distribution coin(0.5);
      for (std::size_t i = 0; i < a.n; ++i)
        for (std::size_t k = 0; k < a.bits; ++k) codes.set_bit(i, k, coin(rng));
    } else {
      codes = load_codes(a.codes);
    }
    report = verify_identities(codes, a.pairs, a.seed);
  }
  std::cout << "pairs_checked=" << report.pairs_checked << '\n'
            << "inner_product_failures=" << report.inner_product_failures << '\n'
            << "cosine_failures=" << report.cosine_failures << '\n'
            << "max_cosine_deviation=" << format_exact(report.max_cosine_deviation) << '\n';
  if (!report.ok()) throw VerificationFailed("Hamming identity check failed");
  return kExitOk;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kExitUsage;
  if (dynamic_cast<const DivergenceError*>(&e) || dynamic_cast<const MetricError*>(&e) ||
      dynamic_cast<const VerificationFailed*>(&e))
    return kExitNumerical;
  if (dynamic_cast<const Error*>(&e) || dynamic_cast<const std::filesystem::filesystem_error*>(&e)) return kExitData;
  return kExitNumerical;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Correlation hashing networks for cross-modal retrieval", "chn"};
  app.require_subcommand(1);

  GenDataArgs gen;
  TrainArgs train_args;
  EncodeArgs enc;
  SearchArgs srch;
  EvalArgs ev;
  SweepArgs sw;
  GradCheckArgs gc;
  VerifyBoundArgs vb;
  VerifyIdentitiesArgs vi;
  add_gen_data(app, gen);
  add_train(app, train_args);
  add_encode(app, enc);
  add_search(app, srch);
  add_eval(app, ev);
  add_sweep(app, sw);
  add_grad_check(app, gc);
  add_verify_bound(app, vb);
  add_verify_identities(app, vi);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  const CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  try {
    if (name == "gen-data") return cmd_gen_data(gen, *sub);
    if (name == "train") return cmd_train(train_args, *sub);
    if (name == "encode") return cmd_encode(enc);
    if (name == "search") return cmd_search(srch);
    if (name == "eval") return cmd_eval(ev);
    if (name == "sweep") return cmd_sweep(sw, *sub);
    if (name == "grad-check") return cmd_grad_check(gc);
    if (name == "verify-bound") return cmd_verify_bound(vb);
    if (name == "verify-identities") return cmd_verify_identities(vi);
  } catch (const std::exception& e) {
    const int code = exit_code_for(e);
    std::cerr << "chn " << name << ": " << e.what() << '\n';
    if (code == kExitUsage) std::cerr << "run 'chn " << name << " --help' for usage\n";
    return code;
  }
  return kExitUsage;
}

int run(const std::vector<std::string>& args) {
  std::vector<std::string> storage;
  storage.reserve(args.size() + 1);
  storage.emplace_back("chn");
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());
  argv.push_back(nullptr);
  return run(static_cast<int>(storage.size()), argv.data());
}

}  // namespace chn
