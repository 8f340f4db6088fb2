#include <cmath>

#include "ops_common.hpp"

namespace emd::nn {
namespace {

using detail::CMap;
using detail::Map;
using detail::MatRM;
using detail::shape_error;
using detail::tape_of;

template <typename T>
T sigm(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

}  // namespace

template <typename T>
Var<T> lstm(const Var<T>& x, const Var<T>& w_ih, const Var<T>& w_hh, const Var<T>& b_ih,
            const Var<T>& b_hh, bool reverse) {
  Tape<T>& tape = tape_of("lstm", x, w_ih);
  for (const Var<T>* v : {&w_hh, &b_ih, &b_hh}) {
    if (!v->valid() || &v->tape() != &tape) detail::arg_error("lstm", "inputs live on different tapes");
  }
  detail::require_rank("lstm", x, 2);
  detail::require_rank("lstm", w_hh, 2);
  const std::size_t steps = x.dim(0), in = x.dim(1), hid = w_hh.dim(0), g4 = 4 * hid;
  if (w_ih.shape() != Shape{in, g4}) shape_error("lstm", x.shape(), w_ih.shape());
  if (w_hh.shape() != Shape{hid, g4}) shape_error("lstm", Shape{hid, g4}, w_hh.shape());
  if (b_ih.size() != g4) shape_error("lstm", Shape{g4}, b_ih.shape());
  if (b_hh.size() != g4) shape_error("lstm", Shape{g4}, b_hh.shape());

  // gates holds post-activation (i, f, g, o) per processed step; cells and
  // hidden are indexed by time position.
  MatRM<T> pre = CMap<T>(x.value().data(), steps, in) * CMap<T>(w_ih.value().data(), in, g4);
  const auto bi = b_ih.value(), bh = b_hh.value();
  CMap<T> whh(w_hh.value().data(), hid, g4);
  std::vector<T> gates(steps * g4), cells(steps * hid), out(steps * hid);
  Eigen::Matrix<T, 1, Eigen::Dynamic> h_prev = Eigen::Matrix<T, 1, Eigen::Dynamic>::Zero(hid);
  Eigen::Matrix<T, 1, Eigen::Dynamic> z(g4);
  std::vector<T> c_prev(hid, T(0));
  for (std::size_t s = 0; s < steps; ++s) {
    const std::size_t t = reverse ? steps - 1 - s : s;
    z.noalias() = h_prev * whh;
    T* gt = gates.data() + t * g4;
    for (std::size_t j = 0; j < hid; ++j) {
      const T zi = pre(t, j) + z(j) + bi[j] + bh[j];
      const T zf = pre(t, hid + j) + z(hid + j) + bi[hid + j] + bh[hid + j];
      const T zg = pre(t, 2 * hid + j) + z(2 * hid + j) + bi[2 * hid + j] + bh[2 * hid + j];
      const T zo = pre(t, 3 * hid + j) + z(3 * hid + j) + bi[3 * hid + j] + bh[3 * hid + j];
      const T ig = sigm(zi), fg = sigm(zf), gg = std::tanh(zg), og = sigm(zo);
      gt[j] = ig;
      gt[hid + j] = fg;
      gt[2 * hid + j] = gg;
      gt[3 * hid + j] = og;
      const T c = fg * c_prev[j] + ig * gg;
      cells[t * hid + j] = c;
      out[t * hid + j] = og * std::tanh(c);
    }
    for (std::size_t j = 0; j < hid; ++j) {
      c_prev[j] = cells[t * hid + j];
      h_prev(j) = out[t * hid + j];
    }
  }

  const std::size_t ix = x.id(), iwi = w_ih.id(), iwh = w_hh.id(), ibi = b_ih.id(),
                    ibh = b_hh.id();
  const bool needs = x.requires_grad() || w_ih.requires_grad() || w_hh.requires_grad() ||
                     b_ih.requires_grad() || b_hh.requires_grad();
  return tape.record(
      "lstm", Shape{steps, hid}, std::move(out), needs,
      [=, gates = std::move(gates), cells = std::move(cells)](Tape<T>& tp, std::size_t self) {
        const auto& g = tp.grad(self);
        const auto hv = tp.value(self);
        CMap<T> whh(tp.value(iwh).data(), hid, g4);
        MatRM<T> dz(steps, g4);
        MatRM<T> hprev = MatRM<T>::Zero(steps, hid);
        Eigen::Matrix<T, 1, Eigen::Dynamic> dh_next = Eigen::Matrix<T, 1, Eigen::Dynamic>::Zero(hid);
        std::vector<T> dc_next(hid, T(0));
        for (std::size_t s = steps; s-- > 0;) {
          const std::size_t t = reverse ? steps - 1 - s : s;
          const bool first = s == 0;
          const std::size_t tp_idx = reverse ? t + 1 : t - 1;  // previous step in time order
          const T* gt = gates.data() + t * g4;
          for (std::size_t j = 0; j < hid; ++j) {
            const T ig = gt[j], fg = gt[hid + j], gg = gt[2 * hid + j], og = gt[3 * hid + j];
            const T c = cells[t * hid + j];
            const T c_prev = first ? T(0) : cells[tp_idx * hid + j];
            const T tc = std::tanh(c);
            const T dh = g[t * hid + j] + dh_next(j);
            const T dc = dc_next[j] + dh * og * (T(1) - tc * tc);
            dz(t, j) = dc * gg * ig * (T(1) - ig);
            dz(t, hid + j) = dc * c_prev * fg * (T(1) - fg);
            dz(t, 2 * hid + j) = dc * ig * (T(1) - gg * gg);
            dz(t, 3 * hid + j) = dh * tc * og * (T(1) - og);
            dc_next[j] = dc * fg;
            if (!first) hprev(t, j) = hv[tp_idx * hid + j];
          }
          dh_next.noalias() = dz.row(t) * whh.transpose();
        }
        if (tp.requires_grad(ix)) {
          Map<T> gx(tp.grad(ix).data(), steps, in);
          gx.noalias() += dz * CMap<T>(tp.value(iwi).data(), in, g4).transpose();
        }
        if (tp.requires_grad(iwi)) {
          Map<T> gw(tp.grad(iwi).data(), in, g4);
          gw.noalias() += CMap<T>(tp.value(ix).data(), steps, in).transpose() * dz;
        }
        if (tp.requires_grad(iwh)) {
          Map<T> gw(tp.grad(iwh).data(), hid, g4);
          gw.noalias() += hprev.transpose() * dz;
        }
        for (std::size_t ib : {ibi, ibh}) {
          if (!tp.requires_grad(ib)) continue;
          auto& gb = tp.grad(ib);
          for (std::size_t t = 0; t < steps; ++t)
            for (std::size_t j = 0; j < g4; ++j) gb[j] += dz(t, j);
        }
      });
}

template Var<float> lstm(const Var<float>&, const Var<float>&, const Var<float>&,
                         const Var<float>&, const Var<float>&, bool);
template Var<double> lstm(const Var<double>&, const Var<double>&, const Var<double>&,
                          const Var<double>&, const Var<double>&, bool);

}  // namespace emd::nn
