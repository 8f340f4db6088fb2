#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace emd::nn {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

// Trainable tensor owned by a model. Gradients accumulate across backward
// passes until zero_grad() is called.
template <typename T>
struct Parameter {
  std::string name;
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;

  Parameter(std::string name, Shape shape);
  std::size_t size() const { return value.size(); }
  void zero_grad();
};

// Named parameters with stable addresses, in creation order.
template <typename T>
class ParameterStore {
 public:
  Parameter<T>& add(std::string name, Shape shape);
  Parameter<T>& get(const std::string& name);
  const Parameter<T>& get(const std::string& name) const;

  std::vector<Parameter<T>*> all();
  std::vector<const Parameter<T>*> all() const;
  std::size_t count() const;  // total scalar count
  std::size_t size() const { return params_.size(); }
  void zero_grad();

 private:
  std::deque<Parameter<T>> params_;
};

template <typename T>
class Tape;

// Handle to a node recorded on a tape.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

  bool valid() const { return tape_ != nullptr; }
  Tape<T>& tape() const { return *tape_; }
  std::size_t id() const { return id_; }

  const Shape& shape() const;
  std::size_t size() const;
  std::size_t dim(std::size_t axis) const { return shape().at(axis); }
  std::span<const T> value() const;
  std::span<const T> grad() const;
  bool requires_grad() const;
  T item() const;  // value of a single-element node

 private:
  Tape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Reverse-mode tape. Nodes are appended during the forward pass; backward()
// walks them in reverse order. Nodes that do not require gradients (inputs
// entered as constants) never allocate a gradient buffer.
template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  struct Node {
    const char* op = "";
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;
    bool requires_grad = false;
    Parameter<T>* param = nullptr;
    BackwardFn backward;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> constant(Shape shape, std::vector<T> value);
  // Leaf whose gradient is kept on the tape (readable through Var::grad()).
  Var<T> variable(Shape shape, std::vector<T> value);
  // Leaf aliasing a parameter; backward accumulates into Parameter::grad.
  Var<T> param(Parameter<T>& p);

  // Appends an op result. Throws NumericError naming `op` on NaN/Inf when
  // finiteness checks are enabled.
  Var<T> record(const char* op, Shape shape, std::vector<T> value, bool requires_grad,
                BackwardFn backward);

  // Seeds a single-element output with 1.
  void backward(const Var<T>& out);
  void backward(const Var<T>& out, std::span<const T> seed);

  std::span<const T> value(std::size_t id) const;
  // Gradient buffer of a node that requires grad (parameter-aliased for
  // parameter leaves). Only valid during or after backward().
  std::vector<T>& grad(std::size_t id);
  const Node& node(std::size_t id) const { return nodes_.at(id); }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  void set_check_finite(bool on) { check_finite_ = on; }
  bool check_finite() const { return check_finite_; }

 private:
  std::deque<Node> nodes_;
  bool check_finite_ = true;
};

extern template struct Parameter<float>;
extern template struct Parameter<double>;
extern template class ParameterStore<float>;
extern template class ParameterStore<double>;
extern template class Var<float>;
extern template class Var<double>;
extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace emd::nn
