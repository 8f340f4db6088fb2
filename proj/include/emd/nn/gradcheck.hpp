#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "emd/nn/tape.hpp"

namespace emd::nn {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coordinates = 0;
  std::size_t skipped = 0;
};

// Builds the scalar loss on a fresh tape from the given parameters.
using LossBuilder = std::function<Var<double>(Tape<double>&)>;

// Compares reverse-mode gradients against central differences. The error of
// one coordinate is |a - n| / max(|a|, |n|, 1e-8); the maximum is returned.
// max_coords_per_param > 0 checks a seeded random subset of each parameter.
GradCheckResult grad_check(const LossBuilder& loss, const std::vector<Parameter<double>*>& wrt,
                           double eps = 1e-5, std::size_t max_coords_per_param = 0,
                           std::uint64_t seed = 0);

// For losses with relu/abs kinks. A coordinate whose central differences at
// eps and eps / 4 disagree by more than kink_tol (relative) straddles a kink
// or is lost in round-off; it is counted in `skipped` and not scored.
GradCheckResult grad_check_away_from_kinks(const LossBuilder& loss, const std::vector<Parameter<double>*>& wrt,
                                           double eps = 1e-6, std::size_t max_coords_per_param = 0,
                                           std::uint64_t seed = 0, double kink_tol = 1e-3);

// sum(out * weights) with fixed pseudo-random weights, turning any tensor
// into a scalar whose gradient exercises every output element.
Var<double> random_projection(const Var<double>& out, std::uint64_t seed);

}  // namespace emd::nn
