#include <cmath>
#include <numbers>

#include "ops_common.hpp"

namespace emd::nn {
namespace {

using detail::shape_error;
using detail::tape_of;

// f(x) forward, df(x, y) derivative given input and output.
template <typename T, typename F, typename D>
Var<T> unary(const char* op, const Var<T>& a, F f, D df) {
  Tape<T>& tape = tape_of(op, a);
  const auto x = a.value();
  std::vector<T> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  const std::size_t ia = a.id();
  return tape.record(op, a.shape(), std::move(y), a.requires_grad(),
                     [ia, df](Tape<T>& t, std::size_t self) {
                       const auto x = t.value(ia);
                       const auto y = t.value(self);
                       const auto& g = t.grad(self);
                       auto& ga = t.grad(ia);
                       for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * df(x[i], y[i]);
                     });
}

template <typename T>
void require_same(const char* op, const Var<T>& a, const Var<T>& b) {
  if (a.shape() != b.shape()) shape_error(op, a.shape(), b.shape());
}

}  // namespace

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  Tape<T>& tape = tape_of("add", a, b);
  require_same("add", a, b);
  const auto x = a.value(), y = b.value();
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record("add", a.shape(), std::move(out), a.requires_grad() || b.requires_grad(),
                     [ia, ib](Tape<T>& t, std::size_t self) {
                       const auto& g = t.grad(self);
                       for (std::size_t p : {ia, ib}) {
                         if (!t.requires_grad(p)) continue;
                         auto& gp = t.grad(p);
                         for (std::size_t i = 0; i < g.size(); ++i) gp[i] += g[i];
                       }
                     });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  Tape<T>& tape = tape_of("sub", a, b);
  require_same("sub", a, b);
  const auto x = a.value(), y = b.value();
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record("sub", a.shape(), std::move(out), a.requires_grad() || b.requires_grad(),
                     [ia, ib](Tape<T>& t, std::size_t self) {
                       const auto& g = t.grad(self);
                       if (t.requires_grad(ia)) {
                         auto& ga = t.grad(ia);
                         for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                       }
                       if (t.requires_grad(ib)) {
                         auto& gb = t.grad(ib);
                         for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
                       }
                     });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  Tape<T>& tape = tape_of("mul", a, b);
  require_same("mul", a, b);
  const auto x = a.value(), y = b.value();
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record("mul", a.shape(), std::move(out), a.requires_grad() || b.requires_grad(),
                     [ia, ib](Tape<T>& t, std::size_t self) {
                       const auto& g = t.grad(self);
                       const auto x = t.value(ia), y = t.value(ib);
                       if (t.requires_grad(ia)) {
                         auto& ga = t.grad(ia);
                         for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
                       }
                       if (t.requires_grad(ib)) {
                         auto& gb = t.grad(ib);
                         for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * x[i];
                       }
                     });
}

template <typename T>
Var<T> scale(const Var<T>& a, T s) {
  return unary("scale", a, [s](T x) { return s * x; }, [s](T, T) { return s; });
}

template <typename T>
Var<T> add_scalar(const Var<T>& a, T s) {
  return unary("add_scalar", a, [s](T x) { return x + s; }, [](T, T) { return T(1); });
}

template <typename T>
Var<T> neg(const Var<T>& a) {
  return unary("neg", a, [](T x) { return -x; }, [](T, T) { return T(-1); });
}

template <typename T>
Var<T> square(const Var<T>& a) {
  return unary("square", a, [](T x) { return x * x; }, [](T x, T) { return T(2) * x; });
}

template <typename T>
Var<T> sqrt(const Var<T>& a) {
  return unary(
      "sqrt", a, [](T x) { return std::sqrt(x); }, [](T, T y) { return T(0.5) / y; });
}

template <typename T>
Var<T> abs(const Var<T>& a) {
  return unary(
      "abs", a, [](T x) { return std::abs(x); },
      [](T x, T) { return x > T(0) ? T(1) : (x < T(0) ? T(-1) : T(0)); });
}

template <typename T>
Var<T> exp(const Var<T>& a) {
  return unary("exp", a, [](T x) { return std::exp(x); }, [](T, T y) { return y; });
}

template <typename T>
Var<T> log(const Var<T>& a) {
  return unary("log", a, [](T x) { return std::log(x); }, [](T x, T) { return T(1) / x; });
}

template <typename T>
Var<T> cos(const Var<T>& a) {
  return unary("cos", a, [](T x) { return std::cos(x); }, [](T x, T) { return -std::sin(x); });
}

template <typename T>
Var<T> sin(const Var<T>& a) {
  return unary("sin", a, [](T x) { return std::sin(x); }, [](T x, T) { return std::cos(x); });
}

template <typename T>
Var<T> tanh(const Var<T>& a) {
  return unary(
      "tanh", a, [](T x) { return std::tanh(x); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Var<T> sigmoid(const Var<T>& a) {
  return unary(
      "sigmoid", a, [](T x) { return T(1) / (T(1) + std::exp(-x)); },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Var<T> relu(const Var<T>& a) {
  return unary(
      "relu", a, [](T x) { return x > T(0) ? x : T(0); },
      [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <typename T>
Var<T> leaky_relu(const Var<T>& a, T slope) {
  return unary(
      "leaky_relu", a, [slope](T x) { return x > T(0) ? x : slope * x; },
      [slope](T x, T) { return x > T(0) ? T(1) : slope; });
}

template <typename T>
Var<T> gelu(const Var<T>& a) {
  const T inv_sqrt2 = T(1) / std::numbers::sqrt2_v<T>;
  const T inv_sqrt2pi = T(1) / std::sqrt(T(2) * std::numbers::pi_v<T>);
  return unary(
      "gelu", a, [inv_sqrt2](T x) { return T(0.5) * x * (T(1) + std::erf(x * inv_sqrt2)); },
      [inv_sqrt2, inv_sqrt2pi](T x, T) {
        const T cdf = T(0.5) * (T(1) + std::erf(x * inv_sqrt2));
        return cdf + x * inv_sqrt2pi * std::exp(T(-0.5) * x * x);
      });
}

template <typename T>
Var<T> clamp_min(const Var<T>& a, T lo) {
  return unary(
      "clamp_min", a, [lo](T x) { return x < lo ? lo : x; },
      [lo](T x, T) { return x < lo ? T(0) : T(1); });
}

template <typename T>
Var<T> clamp_max(const Var<T>& a, T hi) {
  return unary(
      "clamp_max", a, [hi](T x) { return x > hi ? hi : x; },
      [hi](T x, T) { return x > hi ? T(0) : T(1); });
}

template <typename T>
Var<T> add_row(const Var<T>& x, const Var<T>& row) {
  Tape<T>& tape = tape_of("add_row", x, row);
  detail::require_rank("add_row", x, 2);
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (row.size() != n) shape_error("add_row", x.shape(), row.shape());
  const auto xv = x.value(), rv = row.value();
  std::vector<T> out(xv.begin(), xv.end());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += rv[j];
  const std::size_t ix = x.id(), ir = row.id();
  return tape.record("add_row", x.shape(), std::move(out),
                     x.requires_grad() || row.requires_grad(),
                     [ix, ir, m, n](Tape<T>& t, std::size_t self) {
                       const auto& g = t.grad(self);
                       if (t.requires_grad(ix)) {
                         auto& gx = t.grad(ix);
                         for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                       }
                       if (t.requires_grad(ir)) {
                         auto& gr = t.grad(ir);
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t j = 0; j < n; ++j) gr[j] += g[i * n + j];
                       }
                     });
}

template <typename T>
Var<T> mul_row(const Var<T>& x, const Var<T>& row) {
  Tape<T>& tape = tape_of("mul_row", x, row);
  detail::require_rank("mul_row", x, 2);
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (row.size() != n) shape_error("mul_row", x.shape(), row.shape());
  const auto xv = x.value(), rv = row.value();
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = xv[i * n + j] * rv[j];
  const std::size_t ix = x.id(), ir = row.id();
  return tape.record("mul_row", x.shape(), std::move(out),
                     x.requires_grad() || row.requires_grad(),
                     [ix, ir, m, n](Tape<T>& t, std::size_t self) {
                       const auto& g = t.grad(self);
                       const auto xv = t.value(ix), rv = t.value(ir);
                       if (t.requires_grad(ix)) {
                         auto& gx = t.grad(ix);
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += g[i * n + j] * rv[j];
                       }
                       if (t.requires_grad(ir)) {
                         auto& gr = t.grad(ir);
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t j = 0; j < n; ++j) gr[j] += g[i * n + j] * xv[i * n + j];
                       }
                     });
}

template <typename T>
Var<T> sum(const Var<T>& a) {
  Tape<T>& tape = tape_of("sum", a);
  T acc(0);
  for (T v : a.value()) acc += v;
  const std::size_t ia = a.id();
  return tape.record("sum", Shape{1}, {acc}, a.requires_grad(), [ia](Tape<T>& t, std::size_t self) {
    const T g = t.grad(self)[0];
    for (T& v : t.grad(ia)) v += g;
  });
}

template <typename T>
Var<T> mean(const Var<T>& a) {
  Tape<T>& tape = tape_of("mean", a);
  if (a.size() == 0) detail::arg_error("mean", "empty input");
  T acc(0);
  for (T v : a.value()) acc += v;
  const T inv = T(1) / static_cast<T>(a.size());
  const std::size_t ia = a.id();
  return tape.record("mean", Shape{1}, {acc * inv}, a.requires_grad(),
                     [ia, inv](Tape<T>& t, std::size_t self) {
                       const T g = t.grad(self)[0] * inv;
                       for (T& v : t.grad(ia)) v += g;
                     });
}

template <typename T>
Var<T> mse(const Var<T>& a, const Var<T>& b) {
  if (a.shape() != b.shape()) shape_error("mse", a.shape(), b.shape());
  return mean(square(sub(a, b)));
}

template <typename T>
Var<T> l1(const Var<T>& a, const Var<T>& b) {
  if (a.shape() != b.shape()) shape_error("l1", a.shape(), b.shape());
  return mean(abs(sub(a, b)));
}

#define EMD_INSTANTIATE(T)                                   \
  template Var<T> add(const Var<T>&, const Var<T>&);         \
  template Var<T> sub(const Var<T>&, const Var<T>&);         \
  template Var<T> mul(const Var<T>&, const Var<T>&);         \
  template Var<T> scale(const Var<T>&, T);                   \
  template Var<T> add_scalar(const Var<T>&, T);              \
  template Var<T> neg(const Var<T>&);                        \
  template Var<T> square(const Var<T>&);                     \
  template Var<T> sqrt(const Var<T>&);                       \
  template Var<T> abs(const Var<T>&);                        \
  template Var<T> exp(const Var<T>&);                        \
  template Var<T> log(const Var<T>&);                        \
  template Var<T> cos(const Var<T>&);                        \
  template Var<T> sin(const Var<T>&);                        \
  template Var<T> tanh(const Var<T>&);                       \
  template Var<T> sigmoid(const Var<T>&);                    \
  template Var<T> relu(const Var<T>&);                       \
  template Var<T> leaky_relu(const Var<T>&, T);              \
  template Var<T> gelu(const Var<T>&);                       \
  template Var<T> clamp_min(const Var<T>&, T);               \
  template Var<T> clamp_max(const Var<T>&, T);               \
  template Var<T> add_row(const Var<T>&, const Var<T>&);     \
  template Var<T> mul_row(const Var<T>&, const Var<T>&);     \
  template Var<T> sum(const Var<T>&);                        \
  template Var<T> mean(const Var<T>&);                       \
  template Var<T> mse(const Var<T>&, const Var<T>&);         \
  template Var<T> l1(const Var<T>&, const Var<T>&);

EMD_INSTANTIATE(float)
EMD_INSTANTIATE(double)
#undef EMD_INSTANTIATE

}  // namespace emd::nn
