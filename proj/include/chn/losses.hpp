#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "chn/matrix.hpp"
#include "chn/net.hpp"

namespace chn {

// Norm floor for every cosine denominator.
inline constexpr double kNormEpsilon = 1e-12;

struct SimilarityPair {
  std::size_t i = 0;
  std::size_t j = 0;
  int s = 1;  // +1 similar, -1 dissimilar

  bool operator==(const SimilarityPair&) const = default;
};

using SimilaritySet = std::vector<SimilarityPair>;

// Checks index range, s in {-1,+1}, no self pairs and no duplicate (i,j).
void validate_similarity(const SimilaritySet& pairs, std::size_t item_count);

// Relative weights of the three loss families. cross_weight is 1 for the
// full objective and 0 only for the within-modal-only ablation.
struct LossWeights {
  double cross = 1.0;
  double lambda = 1.0;
  double gamma = 0.1;
};

struct LossReport {
  double c_xy = 0.0;
  double c_xx = 0.0;
  double c_yy = 0.0;
  double q_x = 0.0;
  double q_y = 0.0;
  double total = 0.0;
  double cross_weight = 1.0;
  double lambda = 0.0;
  double gamma = 0.0;
};

struct ResidualPair {
  Matrix image;  // dL/d(pre-activation) for each U row
  Matrix text;   // same for V
};

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);

// <u,v> / (max(|u|,eps) max(|v|,eps)), clamped to [-1, 1].
double cosine(std::span<const double> u, std::span<const double> v);

// cos(|u|, 1) = sum|u_k| / (sqrt(b) |u|)
double abs_cosine_to_ones(std::span<const double> u);

struct CosineGradient {
  std::vector<double> du;
  std::vector<double> dv;
};

// d cos(u,v)/du_k = v_k/(|u||v|) - u_k <u,v>/(|u|^3 |v|), symmetric in v.
CosineGradient grad_cosine(std::span<const double> u, std::span<const double> v);

// Gradient of -cos(|u|, 1). sgn(0) is taken as -1.
std::vector<double> grad_quant(std::span<const double> u);

LossReport joint_loss(const Matrix& U, const Matrix& V, const SimilaritySet& pairs, double lambda, double gamma);
LossReport joint_loss(const Matrix& U, const Matrix& V, const SimilaritySet& pairs, const LossWeights& weights);
LossReport joint_loss_serial(const Matrix& U, const Matrix& V, const SimilaritySet& pairs,
                             const LossWeights& weights);

// Exact gradient of joint_loss w.r.t. the tanh pre-activations of U and V.
// Pairs contribute per endpoint; the parallel kernel gathers each row's
// incident pairs in pair order so its result is bit-identical to the serial
// scatter loop for any thread count.
ResidualPair output_residuals(const Matrix& U, const Matrix& V, const SimilaritySet& pairs, double lambda,
                              double gamma);
ResidualPair output_residuals(const Matrix& U, const Matrix& V, const SimilaritySet& pairs,
                              const LossWeights& weights);
ResidualPair output_residuals_serial(const Matrix& U, const Matrix& V, const SimilaritySet& pairs,
                                     const LossWeights& weights);

// A pair of modality nets plus the batch they are checked on.
struct GradCheckBatch {
  const ModalityNet* image_net = nullptr;
  const ModalityNet* text_net = nullptr;
  const Matrix* image_inputs = nullptr;
  const Matrix* text_inputs = nullptr;
  const SimilaritySet* pairs = nullptr;
};

using ResidualFn = std::function<ResidualPair(const Matrix&, const Matrix&, const SimilaritySet&, const LossWeights&)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t parameters_checked = 0;
};

// Compares backpropagated gradients (eval-mode forward) against central
// differences of joint_loss, perturbing every parameter of both nets by
// +-step. Relative error uses max(|analytic|, |numeric|, 1e-8). The residual
// function is injectable so a corrupted residual can be shown to fail.
GradCheckResult finite_diff_check(const GradCheckBatch& batch, const LossWeights& weights, double step,
                                  const ResidualFn& residuals = {});

}  // namespace chn
