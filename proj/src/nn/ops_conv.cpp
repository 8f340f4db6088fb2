#include "ops_common.hpp"

namespace emd::nn {
namespace {

using detail::CMap;
using detail::Map;
using detail::MatRM;
using detail::shape_error;
using detail::tape_of;

}  // namespace

template <typename T>
Var<T> conv1d(const Var<T>& x, const Var<T>& w, const Var<T>& bias, std::size_t stride,
              std::size_t padding) {
  Tape<T>& tape = tape_of("conv1d", x, w);
  if (!bias.valid() || &bias.tape() != &tape) detail::arg_error("conv1d", "bias missing");
  detail::require_rank("conv1d", x, 2);
  detail::require_rank("conv1d", w, 3);
  const std::size_t len = x.dim(0), cin = x.dim(1), kern = w.dim(0), cout = w.dim(2);
  if (w.dim(1) != cin) shape_error("conv1d", x.shape(), w.shape());
  if (bias.size() != cout) shape_error("conv1d", w.shape(), bias.shape());
  if (stride == 0) detail::arg_error("conv1d", "stride must be positive");
  if (len + 2 * padding < kern) {
    detail::arg_error("conv1d", "input of " + std::to_string(len) + " frames is shorter than kernel " +
                                    std::to_string(kern));
  }
  const std::size_t out_len = (len + 2 * padding - kern) / stride + 1;
  const std::size_t width = kern * cin;

  // im2col: cols[t, k * cin + c] = x[t * stride + k - padding, c]
  MatRM<T> cols = MatRM<T>::Zero(out_len, width);
  const auto xv = x.value();
  for (std::size_t t = 0; t < out_len; ++t) {
    for (std::size_t k = 0; k < kern; ++k) {
      const long long src = static_cast<long long>(t * stride + k) - static_cast<long long>(padding);
      if (src < 0 || src >= static_cast<long long>(len)) continue;
      std::copy_n(xv.data() + static_cast<std::size_t>(src) * cin, cin, cols.data() + t * width + k * cin);
    }
  }
  std::vector<T> out(out_len * cout);
  Map<T> y(out.data(), out_len, cout);
  y.noalias() = cols * CMap<T>(w.value().data(), width, cout);
  const auto bv = bias.value();
  for (std::size_t t = 0; t < out_len; ++t)
    for (std::size_t c = 0; c < cout; ++c) out[t * cout + c] += bv[c];

  const std::size_t ix = x.id(), iw = w.id(), ib = bias.id();
  const bool needs = x.requires_grad() || w.requires_grad() || bias.requires_grad();
  return tape.record(
      "conv1d", Shape{out_len, cout}, std::move(out), needs,
      [=, cols = std::move(cols)](Tape<T>& t, std::size_t self) {
        CMap<T> g(t.grad(self).data(), out_len, cout);
        if (t.requires_grad(iw)) {
          Map<T> gw(t.grad(iw).data(), width, cout);
          gw.noalias() += cols.transpose() * g;
        }
        if (t.requires_grad(ib)) {
          auto& gb = t.grad(ib);
          for (std::size_t r = 0; r < out_len; ++r)
            for (std::size_t c = 0; c < cout; ++c) gb[c] += g(r, c);
        }
        if (t.requires_grad(ix)) {
          MatRM<T> dcols = g * CMap<T>(t.value(iw).data(), width, cout).transpose();
          auto& gx = t.grad(ix);
          for (std::size_t r = 0; r < out_len; ++r) {
            for (std::size_t k = 0; k < kern; ++k) {
              const long long src =
                  static_cast<long long>(r * stride + k) - static_cast<long long>(padding);
              if (src < 0 || src >= static_cast<long long>(len)) continue;
              T* dst = gx.data() + static_cast<std::size_t>(src) * cin;
              const T* from = dcols.data() + r * width + k * cin;
              for (std::size_t c = 0; c < cin; ++c) dst[c] += from[c];
            }
          }
        }
      });
}

template <typename T>
Var<T> depthwise_conv1d(const Var<T>& x, const Var<T>& w, const Var<T>& bias,
                        std::size_t padding) {
  Tape<T>& tape = tape_of("depthwise_conv1d", x, w);
  if (!bias.valid() || &bias.tape() != &tape) detail::arg_error("depthwise_conv1d", "bias missing");
  detail::require_rank("depthwise_conv1d", x, 2);
  detail::require_rank("depthwise_conv1d", w, 2);
  const std::size_t len = x.dim(0), ch = x.dim(1), kern = w.dim(0);
  if (w.dim(1) != ch) shape_error("depthwise_conv1d", x.shape(), w.shape());
  if (bias.size() != ch) shape_error("depthwise_conv1d", x.shape(), bias.shape());
  if (len + 2 * padding < kern) detail::arg_error("depthwise_conv1d", "input shorter than kernel");
  const std::size_t out_len = len + 2 * padding - kern + 1;
  const auto xv = x.value(), wv = w.value(), bv = bias.value();
  std::vector<T> out(out_len * ch);
  for (std::size_t t = 0; t < out_len; ++t) {
    T* o = out.data() + t * ch;
    for (std::size_t c = 0; c < ch; ++c) o[c] = bv[c];
    for (std::size_t k = 0; k < kern; ++k) {
      const long long src = static_cast<long long>(t + k) - static_cast<long long>(padding);
      if (src < 0 || src >= static_cast<long long>(len)) continue;
      const T* xi = xv.data() + static_cast<std::size_t>(src) * ch;
      const T* wk = wv.data() + k * ch;
      for (std::size_t c = 0; c < ch; ++c) o[c] += wk[c] * xi[c];
    }
  }
  const std::size_t ix = x.id(), iw = w.id(), ib = bias.id();
  const bool needs = x.requires_grad() || w.requires_grad() || bias.requires_grad();
  return tape.record("depthwise_conv1d", Shape{out_len, ch}, std::move(out), needs,
                     [=](Tape<T>& t, std::size_t self) {
                       const auto& g = t.grad(self);
                       const auto xv = t.value(ix), wv = t.value(iw);
                       const bool gx_on = t.requires_grad(ix), gw_on = t.requires_grad(iw);
                       T* gx = gx_on ? t.grad(ix).data() : nullptr;
                       T* gw = gw_on ? t.grad(iw).data() : nullptr;
                       if (t.requires_grad(ib)) {
                         auto& gb = t.grad(ib);
                         for (std::size_t r = 0; r < out_len; ++r)
                           for (std::size_t c = 0; c < ch; ++c) gb[c] += g[r * ch + c];
                       }
                       for (std::size_t r = 0; r < out_len; ++r) {
                         const T* gr = g.data() + r * ch;
                         for (std::size_t k = 0; k < kern; ++k) {
                           const long long src =
                               static_cast<long long>(r + k) - static_cast<long long>(padding);
                           if (src < 0 || src >= static_cast<long long>(len)) continue;
                           const std::size_t s = static_cast<std::size_t>(src) * ch;
                           for (std::size_t c = 0; c < ch; ++c) {
                             if (gw) gw[k * ch + c] += gr[c] * xv[s + c];
                             if (gx) gx[s + c] += gr[c] * wv[k * ch + c];
                           }
                         }
                       }
                     });
}

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& bias, Conv2dGeometry geom) {
  Tape<T>& tape = tape_of("conv2d", x, w);
  if (!bias.valid() || &bias.tape() != &tape) detail::arg_error("conv2d", "bias missing");
  detail::require_rank("conv2d", x, 3);
  detail::require_rank("conv2d", w, 4);
  const std::size_t cin = x.dim(0), hin = x.dim(1), win = x.dim(2);
  const std::size_t cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  if (w.dim(1) != cin) shape_error("conv2d", x.shape(), w.shape());
  if (bias.size() != cout) shape_error("conv2d", w.shape(), bias.shape());
  if (geom.stride_h == 0 || geom.stride_w == 0) detail::arg_error("conv2d", "stride must be positive");
  if (hin + 2 * geom.pad_h < kh || win + 2 * geom.pad_w < kw) {
    detail::arg_error("conv2d", "input " + to_string(x.shape()) + " smaller than kernel " +
                                    to_string(w.shape()));
  }
  const std::size_t hout = (hin + 2 * geom.pad_h - kh) / geom.stride_h + 1;
  const std::size_t wout = (win + 2 * geom.pad_w - kw) / geom.stride_w + 1;
  const std::size_t rows = cin * kh * kw, npos = hout * wout;

  // cols[(c, i, j), (oh, ow)] = x[c, oh * sh + i - ph, ow * sw + j - pw]
  auto for_each_tap = [=](auto&& fn) {
    for (std::size_t c = 0; c < cin; ++c)
      for (std::size_t i = 0; i < kh; ++i)
        for (std::size_t j = 0; j < kw; ++j) {
          const std::size_t row = (c * kh + i) * kw + j;
          for (std::size_t oh = 0; oh < hout; ++oh) {
            const long long hi = static_cast<long long>(oh * geom.stride_h + i) -
                                 static_cast<long long>(geom.pad_h);
            if (hi < 0 || hi >= static_cast<long long>(hin)) continue;
            for (std::size_t ow = 0; ow < wout; ++ow) {
              const long long wi = static_cast<long long>(ow * geom.stride_w + j) -
                                   static_cast<long long>(geom.pad_w);
              if (wi < 0 || wi >= static_cast<long long>(win)) continue;
              fn(row * npos + oh * wout + ow,
                 (c * hin + static_cast<std::size_t>(hi)) * win + static_cast<std::size_t>(wi));
            }
          }
        }
  };

  MatRM<T> cols = MatRM<T>::Zero(rows, npos);
  const auto xv = x.value();
  for_each_tap([&](std::size_t ci, std::size_t xi) { cols.data()[ci] = xv[xi]; });
  std::vector<T> out(cout * npos);
  Map<T> y(out.data(), cout, npos);
  y.noalias() = CMap<T>(w.value().data(), cout, rows) * cols;
  const auto bv = bias.value();
  for (std::size_t o = 0; o < cout; ++o)
    for (std::size_t p = 0; p < npos; ++p) out[o * npos + p] += bv[o];

  const std::size_t ix = x.id(), iw = w.id(), ib = bias.id();
  const bool needs = x.requires_grad() || w.requires_grad() || bias.requires_grad();
  return tape.record(
      "conv2d", Shape{cout, hout, wout}, std::move(out), needs,
      [=, cols = std::move(cols)](Tape<T>& t, std::size_t self) {
        CMap<T> g(t.grad(self).data(), cout, npos);
        if (t.requires_grad(iw)) {
          Map<T> gw(t.grad(iw).data(), cout, rows);
          gw.noalias() += g * cols.transpose();
        }
        if (t.requires_grad(ib)) {
          auto& gb = t.grad(ib);
          for (std::size_t o = 0; o < cout; ++o)
            for (std::size_t p = 0; p < npos; ++p) gb[o] += g(o, p);
        }
        if (t.requires_grad(ix)) {
          MatRM<T> dcols = CMap<T>(t.value(iw).data(), cout, rows).transpose() * g;
          auto& gx = t.grad(ix);
          for_each_tap([&](std::size_t ci, std::size_t xi) { gx[xi] += dcols.data()[ci]; });
        }
      });
}

#define EMD_INSTANTIATE(T)                                                                  \
  template Var<T> conv1d(const Var<T>&, const Var<T>&, const Var<T>&, std::size_t,          \
                         std::size_t);                                                      \
  template Var<T> depthwise_conv1d(const Var<T>&, const Var<T>&, const Var<T>&, std::size_t); \
  template Var<T> conv2d(const Var<T>&, const Var<T>&, const Var<T>&, Conv2dGeometry);

EMD_INSTANTIATE(float)
EMD_INSTANTIATE(double)
#undef EMD_INSTANTIATE

}  // namespace emd::nn
