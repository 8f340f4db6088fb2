#include "emd/nn/optim.hpp"

#include <algorithm>
#include <cmath>

#include "emd/common/error.hpp"

namespace emd::nn {

template <typename T>
AdamW<T>::AdamW(std::vector<Parameter<T>*> params, AdamWConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto* p : params_) {
    m_.emplace_back(p->size(), T(0));
    v_.emplace_back(p->size(), T(0));
  }
}

template <typename T>
void AdamW<T>::step() {
  for (const auto* p : params_) {
    for (T g : p->grad) {
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in parameter " + p->name);
    }
  }
  ++step_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
  const T step_size = static_cast<T>(cfg_.lr / bc1);
  const T inv_sqrt_bc2 = static_cast<T>(1.0 / std::sqrt(bc2));
  const T decay = static_cast<T>(1.0 - cfg_.lr * cfg_.weight_decay);
  const T eps = static_cast<T>(cfg_.eps);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = *params_[i];
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      const T g = p.grad[j];
      m[j] = b1 * m[j] + (T(1) - b1) * g;
      v[j] = b2 * v[j] + (T(1) - b2) * g * g;
      p.value[j] *= decay;
      p.value[j] -= step_size * m[j] / (std::sqrt(v[j]) * inv_sqrt_bc2 + eps);
    }
  }
}

template <typename T>
void AdamW<T>::zero_grad() {
  for (auto* p : params_) p->zero_grad();
}

template <typename T>
double clip_grad_norm(const std::vector<Parameter<T>*>& params, double max_norm) {
  double sq = 0.0;
  for (const auto* p : params)
    for (T g : p->grad) sq += static_cast<double>(g) * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const T s = static_cast<T>(max_norm / norm);
    for (auto* p : params)
      for (T& g : p->grad) g *= s;
  }
  return norm;
}

template <typename T>
void init_xavier_uniform(Parameter<T>& p, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  init_uniform(p, std::sqrt(6.0 / static_cast<double>(fan_in + fan_out)), rng);
}

template <typename T>
void init_constant(Parameter<T>& p, T value) {
  std::fill(p.value.begin(), p.value.end(), value);
}

template <typename T>
void init_uniform(Parameter<T>& p, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (T& v : p.value) v = static_cast<T>(dist(rng));
}

template class AdamW<float>;
template class AdamW<double>;
template double clip_grad_norm(const std::vector<Parameter<float>*>&, double);
template double clip_grad_norm(const std::vector<Parameter<double>*>&, double);
template void init_xavier_uniform(Parameter<float>&, std::size_t, std::size_t, Rng&);
template void init_xavier_uniform(Parameter<double>&, std::size_t, std::size_t, Rng&);
template void init_constant(Parameter<float>&, float);
template void init_constant(Parameter<double>&, double);
template void init_uniform(Parameter<float>&, double, Rng&);
template void init_uniform(Parameter<double>&, double, Rng&);

}  // namespace emd::nn
