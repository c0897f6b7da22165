#include "chn/losses.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

namespace chn {

void validate_similarity(const SimilaritySet& pairs, std::size_t item_count) {
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto& pr = pairs[p];
    if (pr.i >= item_count || pr.j >= item_count)
      throw IndexError("similarity pair " + std::to_string(p) + " indexes past " + std::to_string(item_count) +
                       " items");
    if (pr.s != 1 && pr.s != -1) throw InputError("similarity label must be +1 or -1");
    if (pr.i == pr.j) throw InputError("self pair (" + std::to_string(pr.i) + "," + std::to_string(pr.j) + ")");
    if (!seen.emplace(pr.i, pr.j).second) throw InputError("duplicate similarity pair");
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("dot: length mismatch");
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) acc += a[k] * b[k];
  return acc;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

namespace {

double guarded(double n) { return std::max(n, kNormEpsilon); }

double clamp_unit(double c) { return std::clamp(c, -1.0, 1.0); }

void check_shapes(const Matrix& U, const Matrix& V, const SimilaritySet& pairs) {
  if (U.rows() != V.rows() || U.cols() != V.cols())
    throw ShapeError("embedding matrices must share row count and code length");
  for (const auto& p : pairs) {
    if (p.i >= U.rows() || p.j >= U.rows()) throw IndexError("similarity pair index out of range");
    if (p.s != 1 && p.s != -1) throw InputError("similarity label must be +1 or -1");
  }
}

// Everything a pair needs for either endpoint: the four raw inner products.
struct PairTerms {
  double uv = 0.0;  // <u_i, v_j>
  double vu = 0.0;  // <v_i, u_j>
  double uu = 0.0;  // <u_i, u_j>
  double vv = 0.0;  // <v_i, v_j>
};

struct RowStats {
  std::vector<double> u_norm, v_norm;   // guarded norms
  std::vector<double> u_quant, v_quant; // cos(|row|, 1)
};

RowStats row_stats(const Matrix& U, const Matrix& V) {
  RowStats st;
  const std::size_t n = U.rows();
  st.u_norm.resize(n);
  st.v_norm.resize(n);
  st.u_quant.resize(n);
  st.v_quant.resize(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(n); ++r) {
    st.u_norm[r] = guarded(norm(U.row(r)));
    st.v_norm[r] = guarded(norm(V.row(r)));
    st.u_quant[r] = abs_cosine_to_ones(U.row(r));
    st.v_quant[r] = abs_cosine_to_ones(V.row(r));
  }
  return st;
}

PairTerms pair_terms(const Matrix& U, const Matrix& V, const SimilarityPair& p, const LossWeights& w) {
  PairTerms t;
  if (w.cross != 0.0) {
    t.uv = dot(U.row(p.i), V.row(p.j));
    t.vu = dot(V.row(p.i), U.row(p.j));
  }
  if (w.lambda != 0.0) {
    t.uu = dot(U.row(p.i), U.row(p.j));
    t.vv = dot(V.row(p.i), V.row(p.j));
  }
  return t;
}

struct PairLoss {
  double cross = 0.0, within_x = 0.0, within_y = 0.0, quant_x = 0.0, quant_y = 0.0;
};

PairLoss pair_loss(const Matrix& U, const Matrix& V, const SimilarityPair& p, const RowStats& st) {
  const double s = p.s;
  const double c1 = clamp_unit(dot(U.row(p.i), V.row(p.j)) / (st.u_norm[p.i] * st.v_norm[p.j]));
  const double c2 = clamp_unit(dot(V.row(p.i), U.row(p.j)) / (st.v_norm[p.i] * st.u_norm[p.j]));
  const double c3 = clamp_unit(dot(U.row(p.i), U.row(p.j)) / (st.u_norm[p.i] * st.u_norm[p.j]));
  const double c4 = clamp_unit(dot(V.row(p.i), V.row(p.j)) / (st.v_norm[p.i] * st.v_norm[p.j]));
  PairLoss l;
  l.cross = (s - c1) * (s - c1) + (s - c2) * (s - c2);
  l.within_x = (s - c3) * (s - c3);
  l.within_y = (s - c4) * (s - c4);
  l.quant_x = -(st.u_quant[p.i] + st.u_quant[p.j]);
  l.quant_y = -(st.v_quant[p.i] + st.v_quant[p.j]);
  return l;
}

LossReport reduce_losses(std::span<const PairLoss> terms, const LossWeights& w) {
  LossReport r;
  for (const auto& t : terms) {
    r.c_xy += t.cross;
    r.c_xx += t.within_x;
    r.c_yy += t.within_y;
    r.q_x += t.quant_x;
    r.q_y += t.quant_y;
  }
  r.cross_weight = w.cross;
  r.lambda = w.lambda;
  r.gamma = w.gamma;
  r.total = w.cross * r.c_xy + w.lambda * (r.c_xx + r.c_yy) + w.gamma * (r.q_x + r.q_y);
  return r;
}

void check_weights(const LossWeights& w) {
  if (!std::isfinite(w.cross) || !std::isfinite(w.lambda) || !std::isfinite(w.gamma))
    throw ConfigError("loss weights must be finite");
}

// out += coef * d cos(a, b) / da, with guarded norms na, nb and raw <a, b>.
void add_cos_grad(std::span<double> out, double coef, std::span<const double> a, double na,
                  std::span<const double> b, double nb, double ab) {
  const double inv = 1.0 / (na * nb);
  const double along = ab / (na * na * na * nb);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] += coef * (b[k] * inv - a[k] * along);
}

// out += scale * d[-cos(|a|,1)]/da
void add_quant_grad(std::span<double> out, double scale, std::span<const double> a, double na, double quant) {
  const double root_b = std::sqrt(static_cast<double>(a.size()));
  const double inv = 1.0 / (root_b * na);
  // <|a|, 1> / (sqrt(b) |a|^3) = quant / |a|^2
  const double along = quant / (na * na);
  for (std::size_t k = 0; k < out.size(); ++k) {
    const double sgn = a[k] > 0.0 ? 1.0 : -1.0;
    out[k] -= scale * (sgn * inv - a[k] * along);
  }
}

// Adds the contribution of pair p to the embedding-gradient rows of one
// endpoint. first=true means the endpoint is p.i.
void add_endpoint(const Matrix& U, const Matrix& V, const SimilarityPair& p, const PairTerms& t, bool first,
                  const RowStats& st, const LossWeights& w, std::span<double> du, std::span<double> dv) {
  const double s = p.s;
  const std::size_t me = first ? p.i : p.j;
  const std::size_t other = first ? p.j : p.i;
  auto u_me = U.row(me), v_me = V.row(me), u_other = U.row(other), v_other = V.row(other);
  const double nu_me = st.u_norm[me], nv_me = st.v_norm[me];
  const double nu_other = st.u_norm[other], nv_other = st.v_norm[other];

  if (w.cross != 0.0) {
    // Cross terms: (s - cos(u_i, v_j))^2 touches u_i and v_j; (s - cos(v_i, u_j))^2 touches v_i and u_j.
    const double c1 = clamp_unit(t.uv / (st.u_norm[p.i] * st.v_norm[p.j]));
    const double c2 = clamp_unit(t.vu / (st.v_norm[p.i] * st.u_norm[p.j]));
    const double coef_u = 2.0 * w.cross * ((first ? c1 : c2) - s);
    const double coef_v = 2.0 * w.cross * ((first ? c2 : c1) - s);
    const double dot_u = first ? t.uv : t.vu;  // <u_me, v_other>
    const double dot_v = first ? t.vu : t.uv;  // <v_me, u_other>
    add_cos_grad(du, coef_u, u_me, nu_me, v_other, nv_other, dot_u);
    add_cos_grad(dv, coef_v, v_me, nv_me, u_other, nu_other, dot_v);
  }
  if (w.lambda != 0.0) {
    const double c3 = clamp_unit(t.uu / (nu_me * nu_other));
    const double c4 = clamp_unit(t.vv / (nv_me * nv_other));
    add_cos_grad(du, 2.0 * w.lambda * (c3 - s), u_me, nu_me, u_other, nu_other, t.uu);
    add_cos_grad(dv, 2.0 * w.lambda * (c4 - s), v_me, nv_me, v_other, nv_other, t.vv);
  }
  if (w.gamma != 0.0) {
    add_quant_grad(du, w.gamma, u_me, nu_me, st.u_quant[me]);
    add_quant_grad(dv, w.gamma, v_me, nv_me, st.v_quant[me]);
  }
}

// Chain rule through tanh: dL/du_hat = dL/du * (1 - u^2).
void apply_tanh_slope(const Matrix& E, Matrix& grad) {
  constexpr double kEdge = 1.0 - 1e-12;
  auto e = E.flat();
  auto g = grad.flat();
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double u = std::clamp(e[k], -kEdge, kEdge);
    g[k] *= 1.0 - u * u;
  }
}

}  // namespace

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw ShapeError("cosine: length mismatch");
  return clamp_unit(dot(u, v) / (guarded(norm(u)) * guarded(norm(v))));
}

double abs_cosine_to_ones(std::span<const double> u) {
  double l1 = 0.0;
  for (double x : u) l1 += std::abs(x);
  return clamp_unit(l1 / (std::sqrt(static_cast<double>(u.size())) * guarded(norm(u))));
}

CosineGradient grad_cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw ShapeError("grad_cosine: length mismatch");
  const double nu = guarded(norm(u)), nv = guarded(norm(v)), uv = dot(u, v);
  CosineGradient g{std::vector<double>(u.size(), 0.0), std::vector<double>(v.size(), 0.0)};
  add_cos_grad(g.du, 1.0, u, nu, v, nv, uv);
  add_cos_grad(g.dv, 1.0, v, nv, u, nu, uv);
  return g;
}

std::vector<double> grad_quant(std::span<const double> u) {
  std::vector<double> g(u.size(), 0.0);
  add_quant_grad(g, 1.0, u, guarded(norm(u)), abs_cosine_to_ones(u));
  return g;
}

LossReport joint_loss(const Matrix& U, const Matrix& V, const SimilaritySet& pairs, double lambda, double gamma) {
  return joint_loss(U, V, pairs, LossWeights{1.0, lambda, gamma});
}

LossReport joint_loss(const Matrix& U, const Matrix& V, const SimilaritySet& pairs, const LossWeights& weights) {
  check_shapes(U, V, pairs);
  check_weights(weights);
  const RowStats st = row_stats(U, V);
  std::vector<PairLoss> terms(pairs.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < static_cast<std::ptrdiff_t>(pairs.size()); ++p)
    terms[p] = pair_loss(U, V, pairs[p], st);
  return reduce_losses(terms, weights);
}

LossReport joint_loss_serial(const Matrix& U, const Matrix& V, const SimilaritySet& pairs,
                             const LossWeights& weights) {
  check_shapes(U, V, pairs);
  check_weights(weights);
  const RowStats st = row_stats(U, V);
  std::vector<PairLoss> terms;
  terms.reserve(pairs.size());
  for (const auto& p : pairs) terms.push_back(pair_loss(U, V, p, st));
  return reduce_losses(terms, weights);
}

ResidualPair output_residuals(const Matrix& U, const Matrix& V, const SimilaritySet& pairs, double lambda,
                              double gamma) {
  return output_residuals(U, V, pairs, LossWeights{1.0, lambda, gamma});
}

ResidualPair output_residuals(const Matrix& U, const Matrix& V, const SimilaritySet& pairs,
                              const LossWeights& weights) {
  check_shapes(U, V, pairs);
  check_weights(weights);
  const std::size_t n = U.rows();
  const RowStats st = row_stats(U, V);

  std::vector<PairTerms> terms(pairs.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < static_cast<std::ptrdiff_t>(pairs.size()); ++p)
    terms[p] = pair_terms(U, V, pairs[p], weights);

  // CSR incidence: for every row, the (pair, side) entries in pair order.
  std::vector<std::size_t> offsets(n + 1, 0);
  for (const auto& p : pairs) {
    ++offsets[p.i + 1];
    ++offsets[p.j + 1];
  }
  for (std::size_t r = 0; r < n; ++r) offsets[r + 1] += offsets[r];
  std::vector<std::size_t> incident(offsets.back());
  {
    std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      incident[cursor[pairs[p].i]++] = 2 * p;
      incident[cursor[pairs[p].j]++] = 2 * p + 1;
    }
  }

  ResidualPair out{Matrix(n, U.cols()), Matrix(n, V.cols())};
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(n); ++r) {
    for (std::size_t e = offsets[r]; e < offsets[r + 1]; ++e) {
      const std::size_t p = incident[e] / 2;
      const bool first = (incident[e] % 2) == 0;
      add_endpoint(U, V, pairs[p], terms[p], first, st, weights, out.image.row(r), out.text.row(r));
    }
  }
  apply_tanh_slope(U, out.image);
  apply_tanh_slope(V, out.text);
  return out;
}

ResidualPair output_residuals_serial(const Matrix& U, const Matrix& V, const SimilaritySet& pairs,
                                     const LossWeights& weights) {
  check_shapes(U, V, pairs);
  check_weights(weights);
  const RowStats st = row_stats(U, V);
  ResidualPair out{Matrix(U.rows(), U.cols()), Matrix(V.rows(), V.cols())};
  for (const auto& p : pairs) {
    const PairTerms t = pair_terms(U, V, p, weights);
    add_endpoint(U, V, p, t, true, st, weights, out.image.row(p.i), out.text.row(p.i));
    add_endpoint(U, V, p, t, false, st, weights, out.image.row(p.j), out.text.row(p.j));
  }
  apply_tanh_slope(U, out.image);
  apply_tanh_slope(V, out.text);
  return out;
}

namespace {

Matrix embed_all(const ModalityNet& net, const Matrix& inputs, std::vector<ForwardTrace>* traces) {
  Matrix out(inputs.rows(), net.output_dim());
  for (std::size_t r = 0; r < inputs.rows(); ++r) {
    ForwardTrace t = forward(net, inputs.row(r), Mode::kEval);
    auto dst = out.row(r);
    std::copy(t.output().begin(), t.output().end(), dst.begin());
    if (traces) traces->push_back(std::move(t));
  }
  return out;
}

// Weighted objective split per pair, evaluated straight from the loss
// definition. Central differences are taken term by term so cancellation
// error scales with a single term rather than with the whole batch loss.
std::vector<double> objective_terms(const ModalityNet& image_net, const ModalityNet& text_net,
                                    const GradCheckBatch& b, const LossWeights& w) {
  const Matrix U = embed_all(image_net, *b.image_inputs, nullptr);
  const Matrix V = embed_all(text_net, *b.text_inputs, nullptr);
  std::vector<double> terms;
  terms.reserve(b.pairs->size());
  for (const auto& p : *b.pairs) {
    const double s = p.s;
    auto sq = [s](double c) { return (s - c) * (s - c); };
    const auto ui = U.row(p.i), uj = U.row(p.j), vi = V.row(p.i), vj = V.row(p.j);
    const double cross = sq(cosine(ui, vj)) + sq(cosine(vi, uj));
    const double within = sq(cosine(ui, uj)) + sq(cosine(vi, vj));
    const double quant = abs_cosine_to_ones(ui) + abs_cosine_to_ones(uj) + abs_cosine_to_ones(vi) +
                         abs_cosine_to_ones(vj);
    terms.push_back(w.cross * cross + w.lambda * within - w.gamma * quant);
  }
  return terms;
}

void accumulate_error(double analytic, double numeric, GradCheckResult& result) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  result.max_relative_error = std::max(result.max_relative_error, std::abs(analytic - numeric) / denom);
  ++result.parameters_checked;
}

}  // namespace

GradCheckResult finite_diff_check(const GradCheckBatch& batch, const LossWeights& weights, double step,
                                  const ResidualFn& residuals) {
  if (!(step >= 1e-7 && step <= 1e-3)) throw ConfigError("finite-difference step must lie in [1e-7, 1e-3]");
  if (!batch.image_net || !batch.text_net || !batch.image_inputs || !batch.text_inputs || !batch.pairs)
    throw ConfigError("finite_diff_check: incomplete batch");

  std::vector<ForwardTrace> image_traces, text_traces;
  const Matrix U = embed_all(*batch.image_net, *batch.image_inputs, &image_traces);
  const Matrix V = embed_all(*batch.text_net, *batch.text_inputs, &text_traces);
  const ResidualPair res =
      residuals ? residuals(U, V, *batch.pairs, weights) : output_residuals_serial(U, V, *batch.pairs, weights);

  Gradients image_grad = Gradients::zeros_like(*batch.image_net);
  Gradients text_grad = Gradients::zeros_like(*batch.text_net);
  for (std::size_t r = 0; r < U.rows(); ++r) {
    image_grad.add(backward(*batch.image_net, image_traces[r], res.image.row(r)));
    text_grad.add(backward(*batch.text_net, text_traces[r], res.text.row(r)));
  }

  GradCheckResult result;
  ModalityNet image_net = *batch.image_net;
  ModalityNet text_net = *batch.text_net;
  auto probe = [&](double& param, double analytic) {
    const double saved = param;
    param = saved + step;
    const std::vector<double> plus = objective_terms(image_net, text_net, batch, weights);
    param = saved - step;
    const std::vector<double> minus = objective_terms(image_net, text_net, batch, weights);
    param = saved;
    double diff = 0.0;
    for (std::size_t k = 0; k < plus.size(); ++k) diff += plus[k] - minus[k];
    accumulate_error(analytic, diff / (2.0 * step), result);
  };
  auto check_net = [&](ModalityNet& net, const Gradients& g) {
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      auto w = net.weights[l].flat();
      auto gw = g.weights[l].flat();
      for (std::size_t k = 0; k < w.size(); ++k) probe(w[k], gw[k]);
      for (std::size_t k = 0; k < net.biases[l].size(); ++k) probe(net.biases[l][k], g.biases[l][k]);
    }
  };
  check_net(image_net, image_grad);
  check_net(text_net, text_grad);
  return result;
}

}  // namespace chn
