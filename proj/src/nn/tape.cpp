#include "emd/nn/tape.hpp"

#include <algorithm>
#include <cmath>

#include "emd/common/error.hpp"

namespace emd::nn {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

template <typename T>
Parameter<T>::Parameter(std::string n, Shape s)
    : name(std::move(n)), shape(std::move(s)), value(numel(shape), T(0)), grad(numel(shape), T(0)) {}

template <typename T>
void Parameter<T>::zero_grad() {
  std::fill(grad.begin(), grad.end(), T(0));
}

template <typename T>
Parameter<T>& ParameterStore<T>::add(std::string name, Shape shape) {
  for (const auto& p : params_) {
    if (p.name == name) throw ConfigError("duplicate parameter name " + name);
  }
  return params_.emplace_back(std::move(name), std::move(shape));
}

template <typename T>
Parameter<T>& ParameterStore<T>::get(const std::string& name) {
  for (auto& p : params_) {
    if (p.name == name) return p;
  }
  throw ConfigError("unknown parameter " + name);
}

template <typename T>
const Parameter<T>& ParameterStore<T>::get(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) return p;
  }
  throw ConfigError("unknown parameter " + name);
}

template <typename T>
std::vector<Parameter<T>*> ParameterStore<T>::all() {
  std::vector<Parameter<T>*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(&p);
  return out;
}

template <typename T>
std::vector<const Parameter<T>*> ParameterStore<T>::all() const {
  std::vector<const Parameter<T>*> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(&p);
  return out;
}

template <typename T>
std::size_t ParameterStore<T>::count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.size();
  return n;
}

template <typename T>
void ParameterStore<T>::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

template <typename T>
const Shape& Var<T>::shape() const {
  return tape_->node(id_).shape;
}

template <typename T>
std::size_t Var<T>::size() const {
  return numel(shape());
}

template <typename T>
std::span<const T> Var<T>::value() const {
  return tape_->value(id_);
}

template <typename T>
std::span<const T> Var<T>::grad() const {
  const auto& n = tape_->node(id_);
  if (n.param) return n.param->grad;
  return n.grad;
}

template <typename T>
bool Var<T>::requires_grad() const {
  return tape_->requires_grad(id_);
}

template <typename T>
T Var<T>::item() const {
  const auto v = value();
  if (v.size() != 1) throw ConfigError("item() on a node of shape " + to_string(shape()));
  return v[0];
}

template <typename T>
Var<T> Tape<T>::constant(Shape shape, std::vector<T> value) {
  return record("constant", std::move(shape), std::move(value), false, nullptr);
}

template <typename T>
Var<T> Tape<T>::variable(Shape shape, std::vector<T> value) {
  return record("variable", std::move(shape), std::move(value), true, nullptr);
}

template <typename T>
Var<T> Tape<T>::param(Parameter<T>& p) {
  Node& n = nodes_.emplace_back();
  n.op = "param";
  n.shape = p.shape;
  n.requires_grad = true;
  n.param = &p;
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Tape<T>::record(const char* op, Shape shape, std::vector<T> value, bool requires_grad,
                       BackwardFn backward) {
  if (value.size() != numel(shape)) {
    throw ConfigError(std::string(op) + ": value size " + std::to_string(value.size()) +
                      " does not match shape " + to_string(shape));
  }
  if (check_finite_) {
    for (std::size_t i = 0; i < value.size(); ++i) {
      if (!std::isfinite(value[i])) {
        throw NumericError(std::string(op) + ": produced a non-finite value at index " +
                           std::to_string(i) + " (shape " + to_string(shape) + ")");
      }
    }
  }
  Node& n = nodes_.emplace_back();
  n.op = op;
  n.shape = std::move(shape);
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.backward = std::move(backward);
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
std::span<const T> Tape<T>::value(std::size_t id) const {
  const Node& n = nodes_.at(id);
  if (n.param) return n.param->value;
  return n.value;
}

template <typename T>
std::vector<T>& Tape<T>::grad(std::size_t id) {
  Node& n = nodes_[id];
  if (n.param) return n.param->grad;
  return n.grad;
}

template <typename T>
void Tape<T>::backward(const Var<T>& out) {
  const T one(1);
  backward(out, std::span<const T>(&one, 1));
}

template <typename T>
void Tape<T>::backward(const Var<T>& out, std::span<const T> seed) {
  if (!out.valid() || &out.tape() != this || out.id() >= nodes_.size()) {
    throw ConfigError("backward called before a forward pass recorded the output on this tape");
  }
  const std::size_t root = out.id();
  Node& root_node = nodes_[root];
  if (seed.size() != numel(root_node.shape)) {
    throw ConfigError("backward seed size " + std::to_string(seed.size()) +
                      " does not match output shape " + to_string(root_node.shape));
  }
  if (!root_node.requires_grad) return;
  for (std::size_t i = 0; i <= root; ++i) {
    Node& n = nodes_[i];
    if (n.requires_grad && !n.param) n.grad.assign(numel(n.shape), T(0));
  }
  auto& g = grad(root);
  for (std::size_t i = 0; i < seed.size(); ++i) g[i] += seed[i];
  for (std::size_t i = root + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.requires_grad && n.backward) n.backward(*this, i);
  }
}

template struct Parameter<float>;
template struct Parameter<double>;
template class ParameterStore<float>;
template class ParameterStore<double>;
template class Var<float>;
template class Var<double>;
template class Tape<float>;
template class Tape<double>;

}  // namespace emd::nn
