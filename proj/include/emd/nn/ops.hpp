#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "emd/nn/tape.hpp"

// Differentiable primitives. Every op checks shapes and throws ConfigError
// naming the primitive and the offending shapes. Sequence tensors are
// time-major: [frames, channels].
namespace emd::nn {

// Element-wise.
template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> scale(const Var<T>& a, T s);
template <typename T> Var<T> add_scalar(const Var<T>& a, T s);
template <typename T> Var<T> neg(const Var<T>& a);
template <typename T> Var<T> square(const Var<T>& a);
template <typename T> Var<T> sqrt(const Var<T>& a);
template <typename T> Var<T> abs(const Var<T>& a);
template <typename T> Var<T> exp(const Var<T>& a);
template <typename T> Var<T> log(const Var<T>& a);
template <typename T> Var<T> cos(const Var<T>& a);
template <typename T> Var<T> sin(const Var<T>& a);
template <typename T> Var<T> tanh(const Var<T>& a);
template <typename T> Var<T> sigmoid(const Var<T>& a);
template <typename T> Var<T> relu(const Var<T>& a);
template <typename T> Var<T> leaky_relu(const Var<T>& a, T slope);
// Exact (erf) GeLU.
template <typename T> Var<T> gelu(const Var<T>& a);
// Gradient passes only where the input is inside the bound.
template <typename T> Var<T> clamp_min(const Var<T>& a, T lo);
template <typename T> Var<T> clamp_max(const Var<T>& a, T hi);

// Broadcasts a [N] vector over the rows of an [M, N] matrix.
template <typename T> Var<T> add_row(const Var<T>& x, const Var<T>& row);
template <typename T> Var<T> mul_row(const Var<T>& x, const Var<T>& row);

// Reductions to a single-element node.
template <typename T> Var<T> sum(const Var<T>& a);
template <typename T> Var<T> mean(const Var<T>& a);
template <typename T> Var<T> mse(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> l1(const Var<T>& a, const Var<T>& b);

// Linear algebra. Weights are stored [in, out].
template <typename T> Var<T> matmul(const Var<T>& a, const Var<T>& b);
// `bias` may be an invalid Var for no bias.
template <typename T> Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& bias);

// Normalizes each row of [M, N] over N.
template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gain, const Var<T>& bias, T eps = T(1e-5));

template <typename T> Var<T> softmax_rows(const Var<T>& x);

// Scaled dot-product multi-head attention over [T, D] projections.
template <typename T>
Var<T> attention(const Var<T>& q, const Var<T>& k, const Var<T>& v, std::size_t heads);
// Post-softmax weights, heads x T x T (no gradient).
template <typename T>
std::vector<T> attention_weights(std::span<const T> q, std::span<const T> k, std::size_t frames,
                                 std::size_t dim, std::size_t heads);

// Full-sequence LSTM layer over x [T, I]; gate order (input, forget, cell,
// output). w_ih [I, 4H], w_hh [H, 4H], b_ih/b_hh [4H]. Returns [T, H].
template <typename T>
Var<T> lstm(const Var<T>& x, const Var<T>& w_ih, const Var<T>& w_hh, const Var<T>& b_ih,
            const Var<T>& b_hh, bool reverse);

// x [T, Cin], w [K, Cin, Cout], bias [Cout]; zero padding on both ends.
template <typename T>
Var<T> conv1d(const Var<T>& x, const Var<T>& w, const Var<T>& bias, std::size_t stride,
              std::size_t padding);
// x [T, C], w [K, C], bias [C]; stride 1.
template <typename T>
Var<T> depthwise_conv1d(const Var<T>& x, const Var<T>& w, const Var<T>& bias,
                        std::size_t padding);

struct Conv2dGeometry {
  std::size_t stride_h = 1, stride_w = 1;
  std::size_t pad_h = 0, pad_w = 0;
};
// x [Cin, H, W], w [Cout, Cin, KH, KW], bias [Cout] -> [Cout, Ho, Wo].
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& bias, Conv2dGeometry geom);

// Repeats rows: output row j copies input row floor(j * T_in / T_out).
template <typename T> Var<T> upsample_nearest(const Var<T>& x, std::size_t frames_out);

// Shape manipulation.
template <typename T> Var<T> reshape(const Var<T>& x, Shape shape);
template <typename T> Var<T> transpose(const Var<T>& x);
template <typename T> Var<T> slice_cols(const Var<T>& x, std::size_t begin, std::size_t end);
template <typename T> Var<T> slice_rows(const Var<T>& x, std::size_t begin, std::size_t end);
template <typename T> Var<T> concat_cols(const Var<T>& a, const Var<T>& b);
// 1-D reflect padding.
template <typename T> Var<T> reflect_pad(const Var<T>& x, std::size_t left, std::size_t right);
// Copy without gradient.
template <typename T> Var<T> detach(const Var<T>& x);

// Hann-windowed STFT of a 1-D signal; output [frames, 2 * bins] holding the
// real parts followed by the imaginary parts. center=true reflect-pads by
// n_fft / 2.
template <typename T>
Var<T> stft(const Var<T>& x, std::size_t n_fft, std::size_t hop, bool center = true);
// Inverse of stft() with squared-window normalization; input [frames, 2 * bins].
template <typename T>
Var<T> istft(const Var<T>& spec, std::size_t n_fft, std::size_t hop, std::size_t length,
             bool center = true);

}  // namespace emd::nn
