#include "emd/dsp/stft.hpp"
#include "ops_common.hpp"

namespace emd::nn {
namespace {

using detail::shape_error;
using detail::tape_of;

// Output element i reads input element index[i]; backward scatters.
template <typename T>
Var<T> gather(const char* op, const Var<T>& x, Shape shape, std::vector<std::size_t> index) {
  Tape<T>& tape = tape_of(op, x);
  const auto xv = x.value();
  std::vector<T> out(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) out[i] = xv[index[i]];
  const std::size_t ix = x.id();
  return tape.record(op, std::move(shape), std::move(out), x.requires_grad(),
                     [ix, index = std::move(index)](Tape<T>& t, std::size_t self) {
                       const auto& g = t.grad(self);
                       auto& gx = t.grad(ix);
                       for (std::size_t i = 0; i < index.size(); ++i) gx[index[i]] += g[i];
                     });
}

}  // namespace

template <typename T>
Var<T> reshape(const Var<T>& x, Shape shape) {
  Tape<T>& tape = tape_of("reshape", x);
  if (numel(shape) != x.size()) shape_error("reshape", x.shape(), shape);
  const auto xv = x.value();
  const std::size_t ix = x.id();
  return tape.record("reshape", std::move(shape), std::vector<T>(xv.begin(), xv.end()),
                     x.requires_grad(), [ix](Tape<T>& t, std::size_t self) {
                       const auto& g = t.grad(self);
                       auto& gx = t.grad(ix);
                       for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                     });
}

template <typename T>
Var<T> transpose(const Var<T>& x) {
  detail::require_rank("transpose", x, 2);
  const std::size_t m = x.dim(0), n = x.dim(1);
  std::vector<std::size_t> index(m * n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < m; ++i) index[j * m + i] = i * n + j;
  return gather("transpose", x, Shape{n, m}, std::move(index));
}

template <typename T>
Var<T> slice_cols(const Var<T>& x, std::size_t begin, std::size_t end) {
  detail::require_rank("slice_cols", x, 2);
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (begin >= end || end > n) {
    detail::arg_error("slice_cols", "range [" + std::to_string(begin) + ", " + std::to_string(end) +
                                        ") out of bounds for " + to_string(x.shape()));
  }
  const std::size_t w = end - begin;
  std::vector<std::size_t> index(m * w);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < w; ++j) index[i * w + j] = i * n + begin + j;
  return gather("slice_cols", x, Shape{m, w}, std::move(index));
}

template <typename T>
Var<T> slice_rows(const Var<T>& x, std::size_t begin, std::size_t end) {
  detail::require_rank("slice_rows", x, 2);
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (begin >= end || end > m) {
    detail::arg_error("slice_rows", "range [" + std::to_string(begin) + ", " + std::to_string(end) +
                                        ") out of bounds for " + to_string(x.shape()));
  }
  std::vector<std::size_t> index((end - begin) * n);
  for (std::size_t i = 0; i < index.size(); ++i) index[i] = begin * n + i;
  return gather("slice_rows", x, Shape{end - begin, n}, std::move(index));
}

template <typename T>
Var<T> concat_cols(const Var<T>& a, const Var<T>& b) {
  Tape<T>& tape = tape_of("concat_cols", a, b);
  detail::require_rank("concat_cols", a, 2);
  detail::require_rank("concat_cols", b, 2);
  if (a.dim(0) != b.dim(0)) shape_error("concat_cols", a.shape(), b.shape());
  const std::size_t m = a.dim(0), na = a.dim(1), nb = b.dim(1), n = na + nb;
  const auto av = a.value(), bv = b.value();
  std::vector<T> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    std::copy_n(av.data() + i * na, na, out.data() + i * n);
    std::copy_n(bv.data() + i * nb, nb, out.data() + i * n + na);
  }
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record("concat_cols", Shape{m, n}, std::move(out),
                     a.requires_grad() || b.requires_grad(),
                     [=](Tape<T>& t, std::size_t self) {
                       const auto& g = t.grad(self);
                       if (t.requires_grad(ia)) {
                         auto& ga = t.grad(ia);
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t j = 0; j < na; ++j) ga[i * na + j] += g[i * n + j];
                       }
                       if (t.requires_grad(ib)) {
                         auto& gb = t.grad(ib);
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t j = 0; j < nb; ++j) gb[i * nb + j] += g[i * n + na + j];
                       }
                     });
}

template <typename T>
Var<T> upsample_nearest(const Var<T>& x, std::size_t frames_out) {
  detail::require_rank("upsample_nearest", x, 2);
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (m == 0 || frames_out == 0) detail::arg_error("upsample_nearest", "empty sequence");
  std::vector<std::size_t> index(frames_out * n);
  for (std::size_t j = 0; j < frames_out; ++j) {
    const std::size_t src = j * m / frames_out;
    for (std::size_t c = 0; c < n; ++c) index[j * n + c] = src * n + c;
  }
  return gather("upsample_nearest", x, Shape{frames_out, n}, std::move(index));
}

template <typename T>
Var<T> reflect_pad(const Var<T>& x, std::size_t left, std::size_t right) {
  detail::require_rank("reflect_pad", x, 1);
  const std::size_t n = x.dim(0);
  if (n == 0) detail::arg_error("reflect_pad", "empty input");
  std::vector<std::size_t> index(left + n + right);
  for (std::size_t i = 0; i < index.size(); ++i) {
    index[i] = dsp::reflect_index(static_cast<long long>(i) - static_cast<long long>(left), n);
  }
  const std::size_t total = index.size();
  return gather("reflect_pad", x, Shape{total}, std::move(index));
}

template <typename T>
Var<T> detach(const Var<T>& x) {
  Tape<T>& tape = tape_of("detach", x);
  const auto xv = x.value();
  return tape.constant(x.shape(), std::vector<T>(xv.begin(), xv.end()));
}

#define EMD_INSTANTIATE(T)                                                  \
  template Var<T> reshape(const Var<T>&, Shape);                            \
  template Var<T> transpose(const Var<T>&);                                 \
  template Var<T> slice_cols(const Var<T>&, std::size_t, std::size_t);      \
  template Var<T> slice_rows(const Var<T>&, std::size_t, std::size_t);      \
  template Var<T> concat_cols(const Var<T>&, const Var<T>&);                \
  template Var<T> upsample_nearest(const Var<T>&, std::size_t);             \
  template Var<T> reflect_pad(const Var<T>&, std::size_t, std::size_t);     \
  template Var<T> detach(const Var<T>&);

EMD_INSTANTIATE(float)
EMD_INSTANTIATE(double)
#undef EMD_INSTANTIATE

}  // namespace emd::nn
