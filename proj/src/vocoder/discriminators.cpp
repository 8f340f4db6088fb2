#include "emd/vocoder/discriminators.hpp"

#include "emd/common/error.hpp"
#include "emd/nn/ops.hpp"

namespace emd::voc {
namespace {

// Magnitudes get a small offset so the square root stays differentiable at
// exact zeros.
constexpr double kMagnitudeEps = 1e-8;

std::vector<Conv2dLayer> period_layers(const DiscriminatorConfig& cfg) {
  std::vector<Conv2dLayer> layers;
  std::size_t in = 1;
  for (std::size_t c : cfg.mpd_channels) {
    layers.push_back({in, c, 5, 1, {3, 1, 2, 0}});
    in = c;
  }
  layers.push_back({in, in, 5, 1, {1, 1, 2, 0}});
  layers.push_back({in, 1, 3, 1, {1, 1, 1, 0}});
  return layers;
}

std::vector<Conv2dLayer> resolution_layers(const DiscriminatorConfig& cfg) {
  const std::size_t c = cfg.mrd_channels;
  return {
      {1, c, 7, 5, {2, 2, 3, 2}},
      {c, c, 5, 3, {2, 1, 2, 1}},
      {c, c, 5, 3, {2, 2, 2, 1}},
      {c, c, 3, 3, {2, 1, 1, 1}},
      {c, c, 3, 3, {2, 2, 1, 1}},
      {c, 1, 3, 3, {1, 1, 1, 1}},
  };
}

template <typename T>
void require_waveform(const nn::Var<T>& x, const char* who) {
  if (x.shape().size() != 1) {
    throw ConfigError(std::string(who) + " expects a 1-D waveform, got " + nn::to_string(x.shape()));
  }
  if (x.size() == 0) throw ConfigError(std::string(who) + ": empty waveform");
}

}  // namespace

template <typename T>
ConvStack<T>::ConvStack(nn::ParameterStore<T>& store, const std::string& prefix,
                        const std::vector<Conv2dLayer>& layers, double slope, nn::Rng& rng)
    : layers_(layers), slope_(static_cast<T>(slope)) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    const bool post = i + 1 == layers_.size();
    const std::string name = prefix + (post ? "post" : "convs." + std::to_string(i));
    auto& w = store.add(name + ".weight", {l.out, l.in, l.kh, l.kw});
    nn::init_xavier_uniform(w, l.in * l.kh * l.kw, l.out * l.kh * l.kw, rng);
    weights_.push_back(&w);
    biases_.push_back(&store.add(name + ".bias", {l.out}));
  }
}

template <typename T>
nn::Var<T> ConvStack<T>::forward(nn::Tape<T>& tape, nn::Var<T> x,
                                 std::vector<nn::Var<T>>& features) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    x = nn::conv2d(x, tape.param(*weights_[i]), tape.param(*biases_[i]), layers_[i].geom);
    if (i + 1 < layers_.size()) x = nn::leaky_relu(x, slope_);
    features.push_back(x);
  }
  return nn::reshape(x, {x.size()});
}

template <typename T>
MultiPeriodDiscriminator<T>::MultiPeriodDiscriminator(const DiscriminatorConfig& cfg,
                                                      std::uint64_t seed)
    : cfg_(cfg) {
  cfg_.validate();
  nn::Rng rng(seed);
  const auto layers = period_layers(cfg_);
  for (std::size_t p : cfg_.periods) {
    stacks_.emplace_back(params_, "period" + std::to_string(p) + ".", layers, cfg_.leaky_slope, rng);
  }
}

template <typename T>
DiscriminatorOutput<T> MultiPeriodDiscriminator<T>::forward(nn::Tape<T>& tape,
                                                            const nn::Var<T>& x) const {
  require_waveform(x, "MPD");
  DiscriminatorOutput<T> out;
  const std::size_t len = x.size();
  for (std::size_t i = 0; i < stacks_.size(); ++i) {
    const std::size_t p = cfg_.periods[i];
    const std::size_t pad = (p - len % p) % p;
    if (pad >= len) throw ConfigError("MPD: waveform of " + std::to_string(len) + " samples is too short for period " + std::to_string(p));
    nn::Var<T> y = pad > 0 ? nn::reflect_pad(x, 0, pad) : x;
    y = nn::reshape(y, {1, (len + pad) / p, p});
    out.features.emplace_back();
    out.logits.push_back(stacks_[i].forward(tape, y, out.features.back()));
  }
  return out;
}

template <typename T>
MultiResolutionDiscriminator<T>::MultiResolutionDiscriminator(const DiscriminatorConfig& cfg,
                                                              std::uint64_t seed)
    : cfg_(cfg) {
  cfg_.validate();
  nn::Rng rng(seed);
  const auto layers = resolution_layers(cfg_);
  for (const auto& [n_fft, hop] : cfg_.resolutions) {
    stacks_.emplace_back(params_, "res" + std::to_string(n_fft) + ".", layers, cfg_.leaky_slope, rng);
  }
}

template <typename T>
DiscriminatorOutput<T> MultiResolutionDiscriminator<T>::forward(nn::Tape<T>& tape,
                                                                const nn::Var<T>& x) const {
  require_waveform(x, "MRD");
  DiscriminatorOutput<T> out;
  for (std::size_t i = 0; i < stacks_.size(); ++i) {
    const auto [n_fft, hop] = cfg_.resolutions[i];
    const nn::Var<T> spec = nn::stft(x, n_fft, hop, true);
    const std::size_t bins = n_fft / 2 + 1;
    const nn::Var<T> re = nn::slice_cols(spec, 0, bins);
    const nn::Var<T> im = nn::slice_cols(spec, bins, 2 * bins);
    nn::Var<T> mag = nn::sqrt(nn::add_scalar(nn::add(nn::square(re), nn::square(im)),
                                             static_cast<T>(kMagnitudeEps)));
    mag = nn::transpose(mag);
    mag = nn::reshape(mag, {1, bins, spec.dim(0)});
    out.features.emplace_back();
    out.logits.push_back(stacks_[i].forward(tape, mag, out.features.back()));
  }
  return out;
}

template class ConvStack<float>;
template class ConvStack<double>;
template class MultiPeriodDiscriminator<float>;
template class MultiPeriodDiscriminator<double>;
template class MultiResolutionDiscriminator<float>;
template class MultiResolutionDiscriminator<double>;

}  // namespace emd::voc
