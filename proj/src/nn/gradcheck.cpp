#include "emd/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "emd/common/error.hpp"
#include "emd/nn/ops.hpp"

namespace emd::nn {

namespace {

GradCheckResult run_check(const LossBuilder& loss, const std::vector<Parameter<double>*>& wrt, double eps,
                          std::size_t max_coords_per_param, std::uint64_t seed, double kink_tol) {
  for (auto* p : wrt) p->zero_grad();
  {
    Tape<double> tape;
    const Var<double> out = loss(tape);
    if (out.size() != 1) throw ConfigError("grad_check: loss must be a single element");
    tape.backward(out);
  }
  auto evaluate = [&]() {
    Tape<double> tape;
    return loss(tape).item();
  };
  auto central = [&](Parameter<double>* p, std::size_t i, double h) {
    const double saved = p->value[i];
    p->value[i] = saved + h;
    const double up = evaluate();
    p->value[i] = saved - h;
    const double down = evaluate();
    p->value[i] = saved;
    return (up - down) / (2.0 * h);
  };
  auto rel = [](double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
  };

  std::mt19937_64 rng(seed);
  GradCheckResult result;
  for (auto* p : wrt) {
    std::vector<std::size_t> coords(p->size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (max_coords_per_param > 0 && coords.size() > max_coords_per_param) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(max_coords_per_param);
    }
    for (std::size_t i : coords) {
      const double numeric = central(p, i, eps);
      if (kink_tol > 0.0 && rel(numeric, central(p, i, eps / 4.0)) > kink_tol) {
        ++result.skipped;
        continue;
      }
      const double analytic = p->grad[i];
      const double err = rel(analytic, numeric);
      ++result.coordinates;
      if (err > result.max_rel_error || result.coordinates == 1) {
        result.max_rel_error = err;
        result.worst_parameter = p->name;
        result.worst_index = i;
        result.analytic = analytic;
        result.numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace

GradCheckResult grad_check(const LossBuilder& loss, const std::vector<Parameter<double>*>& wrt,
                           double eps, std::size_t max_coords_per_param, std::uint64_t seed) {
  return run_check(loss, wrt, eps, max_coords_per_param, seed, 0.0);
}

GradCheckResult grad_check_away_from_kinks(const LossBuilder& loss, const std::vector<Parameter<double>*>& wrt,
                                           double eps, std::size_t max_coords_per_param, std::uint64_t seed,
                                           double kink_tol) {
  return run_check(loss, wrt, eps, max_coords_per_param, seed, kink_tol);
}

Var<double> random_projection(const Var<double>& out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> w(out.size());
  for (double& v : w) v = dist(rng);
  const Var<double> weights = out.tape().constant(out.shape(), std::move(w));
  return sum(mul(out, weights));
}

}  // namespace emd::nn
