#include <cmath>

#include "ops_common.hpp"

namespace emd::nn {
namespace {

using detail::CMap;
using detail::CStridedMap;
using detail::Map;
using detail::MatRM;
using detail::shape_error;
using detail::StridedMap;
using detail::tape_of;

template <typename T>
void softmax_inplace(T* row, std::size_t n) {
  T mx = row[0];
  for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
  T z(0);
  for (std::size_t j = 0; j < n; ++j) {
    row[j] = std::exp(row[j] - mx);
    z += row[j];
  }
  for (std::size_t j = 0; j < n; ++j) row[j] /= z;
}

}  // namespace

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& bias) {
  const char* op = bias.valid() ? "linear" : "matmul";
  Tape<T>& tape = tape_of(op, x, w);
  detail::require_rank(op, x, 2);
  detail::require_rank(op, w, 2);
  const std::size_t m = x.dim(0), k = x.dim(1), n = w.dim(1);
  if (w.dim(0) != k) shape_error(op, x.shape(), w.shape());
  if (bias.valid()) {
    if (&bias.tape() != &tape) detail::arg_error(op, "inputs live on different tapes");
    if (bias.size() != n) shape_error(op, w.shape(), bias.shape());
  }
  std::vector<T> out(m * n);
  Map<T> y(out.data(), m, n);
  y.noalias() = CMap<T>(x.value().data(), m, k) * CMap<T>(w.value().data(), k, n);
  if (bias.valid()) {
    const auto b = bias.value();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += b[j];
  }
  const std::size_t ix = x.id(), iw = w.id();
  const bool has_bias = bias.valid();
  const std::size_t ib = has_bias ? bias.id() : 0;
  const bool needs = x.requires_grad() || w.requires_grad() || (has_bias && bias.requires_grad());
  return tape.record(op, Shape{m, n}, std::move(out), needs,
                     [=](Tape<T>& t, std::size_t self) {
                       CMap<T> g(t.grad(self).data(), m, n);
                       if (t.requires_grad(ix)) {
                         Map<T> gx(t.grad(ix).data(), m, k);
                         gx.noalias() += g * CMap<T>(t.value(iw).data(), k, n).transpose();
                       }
                       if (t.requires_grad(iw)) {
                         Map<T> gw(t.grad(iw).data(), k, n);
                         gw.noalias() += CMap<T>(t.value(ix).data(), m, k).transpose() * g;
                       }
                       if (has_bias && t.requires_grad(ib)) {
                         auto& gb = t.grad(ib);
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t j = 0; j < n; ++j) gb[j] += g(i, j);
                       }
                     });
}

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  return linear(a, b, Var<T>());
}

template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gain, const Var<T>& bias, T eps) {
  Tape<T>& tape = tape_of("layer_norm", x, gain);
  if (!bias.valid() || &bias.tape() != &tape) detail::arg_error("layer_norm", "bias missing");
  detail::require_rank("layer_norm", x, 2);
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (gain.size() != n) shape_error("layer_norm", x.shape(), gain.shape());
  if (bias.size() != n) shape_error("layer_norm", x.shape(), bias.shape());
  const auto xv = x.value(), gv = gain.value(), bv = bias.value();
  std::vector<T> out(m * n), xhat(m * n), rstd(m);
  for (std::size_t i = 0; i < m; ++i) {
    const T* row = xv.data() + i * n;
    T mu(0);
    for (std::size_t j = 0; j < n; ++j) mu += row[j];
    mu /= static_cast<T>(n);
    T var(0);
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<T>(n);
    rstd[i] = T(1) / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat[i * n + j] = (row[j] - mu) * rstd[i];
      out[i * n + j] = xhat[i * n + j] * gv[j] + bv[j];
    }
  }
  const std::size_t ix = x.id(), ig = gain.id(), ib = bias.id();
  const bool needs = x.requires_grad() || gain.requires_grad() || bias.requires_grad();
  return tape.record(
      "layer_norm", x.shape(), std::move(out), needs,
      [=, xhat = std::move(xhat), rstd = std::move(rstd)](Tape<T>& t, std::size_t self) {
        const auto& g = t.grad(self);
        const auto gv = t.value(ig);
        if (t.requires_grad(ig)) {
          auto& gg = t.grad(ig);
          for (std::size_t i = 0; i < m * n; ++i) gg[i % n] += g[i] * xhat[i];
        }
        if (t.requires_grad(ib)) {
          auto& gb = t.grad(ib);
          for (std::size_t i = 0; i < m * n; ++i) gb[i % n] += g[i];
        }
        if (t.requires_grad(ix)) {
          auto& gx = t.grad(ix);
          std::vector<T> dxhat(n);
          for (std::size_t i = 0; i < m; ++i) {
            T mean_d(0), mean_dx(0);
            for (std::size_t j = 0; j < n; ++j) {
              dxhat[j] = g[i * n + j] * gv[j];
              mean_d += dxhat[j];
              mean_dx += dxhat[j] * xhat[i * n + j];
            }
            mean_d /= static_cast<T>(n);
            mean_dx /= static_cast<T>(n);
            for (std::size_t j = 0; j < n; ++j) {
              gx[i * n + j] += rstd[i] * (dxhat[j] - mean_d - xhat[i * n + j] * mean_dx);
            }
          }
        }
      });
}

template <typename T>
Var<T> softmax_rows(const Var<T>& x) {
  Tape<T>& tape = tape_of("softmax_rows", x);
  detail::require_rank("softmax_rows", x, 2);
  const std::size_t m = x.dim(0), n = x.dim(1);
  const auto xv = x.value();
  std::vector<T> out(xv.begin(), xv.end());
  for (std::size_t i = 0; i < m; ++i) softmax_inplace(out.data() + i * n, n);
  const std::size_t ix = x.id();
  return tape.record("softmax_rows", x.shape(), std::move(out), x.requires_grad(),
                     [=](Tape<T>& t, std::size_t self) {
                       const auto y = t.value(self);
                       const auto& g = t.grad(self);
                       auto& gx = t.grad(ix);
                       for (std::size_t i = 0; i < m; ++i) {
                         T dot(0);
                         for (std::size_t j = 0; j < n; ++j) dot += g[i * n + j] * y[i * n + j];
                         for (std::size_t j = 0; j < n; ++j)
                           gx[i * n + j] += y[i * n + j] * (g[i * n + j] - dot);
                       }
                     });
}

template <typename T>
std::vector<T> attention_weights(std::span<const T> q, std::span<const T> k, std::size_t frames,
                                 std::size_t dim, std::size_t heads) {
  if (heads == 0 || dim % heads != 0) {
    detail::arg_error("attention", "dim " + std::to_string(dim) + " is not divisible by heads " +
                                       std::to_string(heads));
  }
  const std::size_t dh = dim / heads;
  const T inv = T(1) / std::sqrt(static_cast<T>(dh));
  std::vector<T> probs(heads * frames * frames);
  for (std::size_t h = 0; h < heads; ++h) {
    CStridedMap<T> qh(q.data() + h * dh, frames, dh, Eigen::OuterStride<>(dim));
    CStridedMap<T> kh(k.data() + h * dh, frames, dh, Eigen::OuterStride<>(dim));
    Map<T> p(probs.data() + h * frames * frames, frames, frames);
    p.noalias() = (qh * kh.transpose()) * inv;
    for (std::size_t i = 0; i < frames; ++i) softmax_inplace(p.data() + i * frames, frames);
  }
  return probs;
}

template <typename T>
Var<T> attention(const Var<T>& q, const Var<T>& k, const Var<T>& v, std::size_t heads) {
  Tape<T>& tape = tape_of("attention", q, k);
  if (!v.valid() || &v.tape() != &tape) detail::arg_error("attention", "inputs live on different tapes");
  detail::require_rank("attention", q, 2);
  if (k.shape() != q.shape()) shape_error("attention", q.shape(), k.shape());
  if (v.shape() != q.shape()) shape_error("attention", q.shape(), v.shape());
  const std::size_t frames = q.dim(0), dim = q.dim(1);
  auto probs = attention_weights<T>(q.value(), k.value(), frames, dim, heads);
  const std::size_t dh = dim / heads;
  std::vector<T> out(frames * dim);
  for (std::size_t h = 0; h < heads; ++h) {
    CMap<T> p(probs.data() + h * frames * frames, frames, frames);
    CStridedMap<T> vh(v.value().data() + h * dh, frames, dh, Eigen::OuterStride<>(dim));
    StridedMap<T> oh(out.data() + h * dh, frames, dh, Eigen::OuterStride<>(dim));
    oh.noalias() = p * vh;
  }
  const std::size_t iq = q.id(), ik = k.id(), iv = v.id();
  const bool needs = q.requires_grad() || k.requires_grad() || v.requires_grad();
  const T inv = T(1) / std::sqrt(static_cast<T>(dh));
  return tape.record(
      "attention", q.shape(), std::move(out), needs,
      [=, probs = std::move(probs)](Tape<T>& t, std::size_t self) {
        const auto& g = t.grad(self);
        const auto qv = t.value(iq), kv = t.value(ik), vv = t.value(iv);
        MatRM<T> dp(frames, frames), ds(frames, frames);
        for (std::size_t h = 0; h < heads; ++h) {
          CMap<T> p(probs.data() + h * frames * frames, frames, frames);
          CStridedMap<T> gh(g.data() + h * dh, frames, dh, Eigen::OuterStride<>(dim));
          CStridedMap<T> vh(vv.data() + h * dh, frames, dh, Eigen::OuterStride<>(dim));
          if (t.requires_grad(iv)) {
            StridedMap<T> gv(t.grad(iv).data() + h * dh, frames, dh, Eigen::OuterStride<>(dim));
            gv.noalias() += p.transpose() * gh;
          }
          if (!t.requires_grad(iq) && !t.requires_grad(ik)) continue;
          dp.noalias() = gh * vh.transpose();
          for (std::size_t i = 0; i < frames; ++i) {
            T dot(0);
            for (std::size_t j = 0; j < frames; ++j) dot += dp(i, j) * p(i, j);
            for (std::size_t j = 0; j < frames; ++j) ds(i, j) = p(i, j) * (dp(i, j) - dot) * inv;
          }
          if (t.requires_grad(iq)) {
            CStridedMap<T> kh(kv.data() + h * dh, frames, dh, Eigen::OuterStride<>(dim));
            StridedMap<T> gq(t.grad(iq).data() + h * dh, frames, dh, Eigen::OuterStride<>(dim));
            gq.noalias() += ds * kh;
          }
          if (t.requires_grad(ik)) {
            CStridedMap<T> qh(qv.data() + h * dh, frames, dh, Eigen::OuterStride<>(dim));
            StridedMap<T> gk(t.grad(ik).data() + h * dh, frames, dh, Eigen::OuterStride<>(dim));
            gk.noalias() += ds.transpose() * qh;
          }
        }
      });
}

#define EMD_INSTANTIATE(T)                                                              \
  template Var<T> linear(const Var<T>&, const Var<T>&, const Var<T>&);                  \
  template Var<T> matmul(const Var<T>&, const Var<T>&);                                 \
  template Var<T> layer_norm(const Var<T>&, const Var<T>&, const Var<T>&, T);           \
  template Var<T> softmax_rows(const Var<T>&);                                          \
  template Var<T> attention(const Var<T>&, const Var<T>&, const Var<T>&, std::size_t);  \
  template std::vector<T> attention_weights(std::span<const T>, std::span<const T>,     \
                                            std::size_t, std::size_t, std::size_t);

EMD_INSTANTIATE(float)
EMD_INSTANTIATE(double)
#undef EMD_INSTANTIATE

}  // namespace emd::nn
