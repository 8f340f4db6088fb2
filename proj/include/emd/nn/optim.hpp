#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "emd/nn/tape.hpp"

namespace emd::nn {

struct AdamWConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

// Decoupled-weight-decay Adam. Moment buffers are bound to the parameter
// list given at construction.
template <typename T>
class AdamW {
 public:
  AdamW(std::vector<Parameter<T>*> params, AdamWConfig cfg);

  // Applies one update from the accumulated gradients. Throws NumericError
  // naming the parameter when a gradient is not finite.
  void step();
  void zero_grad();

  std::uint64_t steps() const { return step_; }
  const AdamWConfig& config() const { return cfg_; }
  void set_lr(double lr) { cfg_.lr = lr; }

 private:
  std::vector<Parameter<T>*> params_;
  std::vector<std::vector<T>> m_;
  std::vector<std::vector<T>> v_;
  AdamWConfig cfg_;
  std::uint64_t step_ = 0;
};

// Rescales gradients so their global L2 norm is at most max_norm; returns the
// norm before clipping.
template <typename T>
double clip_grad_norm(const std::vector<Parameter<T>*>& params, double max_norm);

using Rng = std::mt19937_64;

// uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
template <typename T>
void init_xavier_uniform(Parameter<T>& p, std::size_t fan_in, std::size_t fan_out, Rng& rng);
template <typename T>
void init_constant(Parameter<T>& p, T value);
template <typename T>
void init_uniform(Parameter<T>& p, double bound, Rng& rng);

extern template class AdamW<float>;
extern template class AdamW<double>;

}  // namespace emd::nn
