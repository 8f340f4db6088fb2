#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "emd/common/error.hpp"
#include "emd/nn/ops.hpp"

namespace emd::nn::detail {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Map = Eigen::Map<MatRM<T>>;
template <typename T>
using CMap = Eigen::Map<const MatRM<T>>;
template <typename T>
using StridedMap = Eigen::Map<MatRM<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using CStridedMap = Eigen::Map<const MatRM<T>, 0, Eigen::OuterStride<>>;

[[noreturn]] inline void shape_error(const char* op, const Shape& a, const Shape& b) {
  throw ConfigError(std::string(op) + ": shape mismatch " + to_string(a) + " vs " + to_string(b));
}

[[noreturn]] inline void arg_error(const char* op, const std::string& what) {
  throw ConfigError(std::string(op) + ": " + what);
}

template <typename T>
Tape<T>& tape_of(const char* op, const Var<T>& a) {
  if (!a.valid()) arg_error(op, "input is not recorded on a tape");
  return a.tape();
}

template <typename T>
Tape<T>& tape_of(const char* op, const Var<T>& a, const Var<T>& b) {
  Tape<T>& t = tape_of(op, a);
  if (!b.valid() || &b.tape() != &t) arg_error(op, "inputs live on different tapes");
  return t;
}

template <typename T>
void require_rank(const char* op, const Var<T>& a, std::size_t rank) {
  if (a.shape().size() != rank) {
    arg_error(op, "expected rank " + std::to_string(rank) + " input, got " + to_string(a.shape()));
  }
}

}  // namespace emd::nn::detail
