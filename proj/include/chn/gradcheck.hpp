#pragma once

#include <cstddef>
#include <cstdint>

#include "chn/losses.hpp"

namespace chn {

struct GradCheckSuiteResult {
  std::size_t configurations = 0;
  std::size_t parameters_checked = 0;
  double max_relative_error = 0.0;
  std::size_t worst_configuration = 0;
};

// Runs finite_diff_check over `configurations` random problems: small
// relu/tanh stacks on both modalities, 3-6 items, random pairs, lambda in
// [0, 2] and gamma in [0, 1]. Problems that land near a relu or |u| kink, or
// produce a near-zero embedding, are redrawn. When weights_override is set every problem uses
// those weights instead.
GradCheckSuiteResult random_grad_checks(std::size_t configurations, std::uint64_t seed, double step,
                                        const ResidualFn& residuals = {},
                                        const LossWeights* weights_override = nullptr);

}  // namespace chn
