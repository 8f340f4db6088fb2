#include "emd/denoiser/model.hpp"

#include <cmath>

#include "emd/common/error.hpp"
#include "emd/nn/checkpoint.hpp"
#include "emd/nn/ops.hpp"
#include "emd/nn/optim.hpp"

namespace emd::den {
namespace {

struct VariantName {
  Variant v;
  const char* name;
};

constexpr VariantName kNames[] = {
    {Variant::vit3, "vit3"},   {Variant::vit1, "vit1"}, {Variant::blstm3, "blstm3"},
    {Variant::lstm3, "lstm3"}, {Variant::mlp2, "mlp2"}, {Variant::mlp_vit3, "mlp_vit3"},
};

bool is_vit(Variant v) { return v == Variant::vit1 || v == Variant::vit3 || v == Variant::mlp_vit3; }
bool is_lstm(Variant v) { return v == Variant::lstm3 || v == Variant::blstm3; }

std::size_t linear_count(std::size_t in, std::size_t out) { return in * out + out; }

}  // namespace

std::string to_string(Variant v) {
  for (const auto& n : kNames) {
    if (n.v == v) return n.name;
  }
  return "unknown";
}

Variant parse_variant(const std::string& name) {
  for (const auto& n : kNames) {
    if (name == n.name) return n.v;
  }
  throw ConfigError("unknown denoiser architecture '" + name +
                    "' (expected vit3, vit1, blstm3, lstm3, mlp2 or mlp_vit3)");
}

const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> v = {Variant::vit3,  Variant::vit1, Variant::blstm3,
                                         Variant::lstm3, Variant::mlp2, Variant::mlp_vit3};
  return v;
}

DenoiserArch DenoiserArch::make(Variant v, std::size_t input_dim) {
  DenoiserArch a;
  a.variant = v;
  a.input_dim = input_dim != 0 ? input_dim
                               : (v == Variant::mlp_vit3 ? enc::kLmsDim : enc::kExternalDim);
  a.embed_dim = 768;
  a.heads = 8;
  a.mlp_ratio = 2.0;
  a.hidden = v == Variant::mlp2 ? 768 : 256;
  a.layers = (v == Variant::vit1) ? 1 : (v == Variant::mlp2 ? 2 : 3);
  a.validate();
  return a;
}

void DenoiserArch::validate() const {
  const std::string name = to_string(variant);
  if (input_dim == 0) throw ConfigError(name + ": input_dim must be positive");
  if (is_vit(variant)) {
    if (embed_dim == 0 || heads == 0 || embed_dim % heads != 0) {
      throw ConfigError(name + ": embed_dim " + std::to_string(embed_dim) +
                        " is not divisible by heads " + std::to_string(heads));
    }
    if (!(mlp_ratio > 0.0)) throw ConfigError(name + ": mlp_ratio must be positive");
    if (variant == Variant::mlp_vit3 && input_dim == embed_dim) {
      throw ConfigError("mlp_vit3 wraps the transformer with projections and needs input_dim != " +
                        std::to_string(embed_dim) + "; use vit3 for 768-dim embeddings");
    }
    if (variant != Variant::mlp_vit3 && input_dim != embed_dim) {
      throw ConfigError(name + " expects " + std::to_string(embed_dim) +
                        "-dim embeddings but input_dim is " + std::to_string(input_dim) +
                        "; use mlp_vit3 for other dims");
    }
  }
  if (is_lstm(variant) && hidden == 0) throw ConfigError(name + ": hidden must be positive");
  if (variant == Variant::mlp2 && hidden == 0) throw ConfigError("mlp2: hidden must be positive");
  if (layers == 0) throw ConfigError(name + ": layers must be positive");
}

nlohmann::json DenoiserArch::to_json() const {
  return {{"variant", to_string(variant)}, {"input_dim", input_dim}, {"embed_dim", embed_dim},
          {"heads", heads},                {"mlp_ratio", mlp_ratio}, {"hidden", hidden},
          {"layers", layers}};
}

DenoiserArch DenoiserArch::from_json(const nlohmann::json& j) {
  DenoiserArch a;
  try {
    a.variant = parse_variant(j.at("variant").get<std::string>());
    a.input_dim = j.at("input_dim").get<std::size_t>();
    a.embed_dim = j.at("embed_dim").get<std::size_t>();
    a.heads = j.at("heads").get<std::size_t>();
    a.mlp_ratio = j.at("mlp_ratio").get<double>();
    a.hidden = j.at("hidden").get<std::size_t>();
    a.layers = j.at("layers").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("denoiser architecture: ") + e.what());
  }
  a.validate();
  return a;
}

std::size_t closed_form_param_count(const DenoiserArch& a) {
  a.validate();
  const std::size_t d = a.embed_dim;
  const auto mlp_hidden = static_cast<std::size_t>(std::llround(a.mlp_ratio * d));
  const std::size_t h = a.hidden;
  switch (a.variant) {
    case Variant::mlp2:
      return linear_count(a.input_dim, h) + linear_count(h, a.input_dim) + a.input_dim;
    case Variant::vit1:
    case Variant::vit3:
    case Variant::mlp_vit3: {
      const std::size_t block = 4 * linear_count(d, d) + linear_count(d, mlp_hidden) +
                                linear_count(mlp_hidden, d) + 2 * 2 * d;
      std::size_t n = a.layers * block;
      if (a.variant == Variant::mlp_vit3) {
        n += linear_count(a.input_dim, d) + linear_count(d, a.input_dim);
      }
      return n;
    }
    case Variant::lstm3: {
      auto layer = [&](std::size_t in) { return in * 4 * h + h * 4 * h + 2 * 4 * h; };
      return linear_count(a.input_dim, h) + a.layers * layer(h) + linear_count(h, a.input_dim);
    }
    case Variant::blstm3: {
      auto layer = [&](std::size_t in) { return 2 * (in * 4 * h + h * 4 * h + 2 * 4 * h); };
      return linear_count(a.input_dim, h) + layer(h) + (a.layers - 1) * layer(2 * h) +
             linear_count(2 * h, a.input_dim);
    }
  }
  return 0;
}

template <typename T>
DenoiserModel<T>::DenoiserModel(const DenoiserArch& arch, std::uint64_t seed)
    : arch_(arch), seed_(seed) {
  arch_.validate();
  nn::Rng rng(seed);
  const std::size_t d = arch_.embed_dim;
  const std::size_t h = arch_.hidden;
  switch (arch_.variant) {
    case Variant::mlp2:
      fc1_ = make_linear("fc1", arch_.input_dim, h, rng);
      fc2_ = make_linear("fc2", h, arch_.input_dim, rng);
      gamma_ = &params_.add("gamma", {arch_.input_dim});
      nn::init_constant(*gamma_, T(1));
      break;
    case Variant::vit1:
    case Variant::vit3:
    case Variant::mlp_vit3: {
      if (arch_.variant == Variant::mlp_vit3) in_proj_ = make_linear("in_proj", arch_.input_dim, d, rng);
      const auto mlp_hidden = static_cast<std::size_t>(std::llround(arch_.mlp_ratio * d));
      for (std::size_t i = 0; i < arch_.layers; ++i) {
        const std::string p = "blocks." + std::to_string(i) + ".";
        VitBlock b;
        b.ln1 = make_norm(p + "ln1", d);
        b.q = make_linear(p + "attn.q", d, d, rng);
        b.k = make_linear(p + "attn.k", d, d, rng);
        b.v = make_linear(p + "attn.v", d, d, rng);
        b.o = make_linear(p + "attn.o", d, d, rng);
        b.ln2 = make_norm(p + "ln2", d);
        b.fc1 = make_linear(p + "mlp.fc1", d, mlp_hidden, rng);
        b.fc2 = make_linear(p + "mlp.fc2", mlp_hidden, d, rng);
        blocks_.push_back(b);
      }
      if (arch_.variant == Variant::mlp_vit3) out_proj_ = make_linear("out_proj", d, arch_.input_dim, rng);
      break;
    }
    case Variant::lstm3:
    case Variant::blstm3: {
      const bool bi = arch_.variant == Variant::blstm3;
      in_proj_ = make_linear("in_proj", arch_.input_dim, h, rng);
      for (std::size_t i = 0; i < arch_.layers; ++i) {
        const std::size_t in = (bi && i > 0) ? 2 * h : h;
        const std::string p = "lstm." + std::to_string(i);
        fwd_.push_back(make_lstm(p + ".fwd", in, rng));
        if (bi) bwd_.push_back(make_lstm(p + ".bwd", in, rng));
      }
      out_proj_ = make_linear("out_proj", bi ? 2 * h : h, arch_.input_dim, rng);
      break;
    }
  }
}

template <typename T>
typename DenoiserModel<T>::Linear DenoiserModel<T>::make_linear(const std::string& name,
                                                                 std::size_t in, std::size_t out,
                                                                 nn::Rng& rng) {
  Linear l;
  l.w = &params_.add(name + ".weight", {in, out});
  nn::init_xavier_uniform(*l.w, in, out, rng);
  l.b = &params_.add(name + ".bias", {out});
  return l;
}

template <typename T>
typename DenoiserModel<T>::Norm DenoiserModel<T>::make_norm(const std::string& name,
                                                             std::size_t dim) {
  Norm n;
  n.gain = &params_.add(name + ".gain", {dim});
  nn::init_constant(*n.gain, T(1));
  n.bias = &params_.add(name + ".bias", {dim});
  return n;
}

template <typename T>
typename DenoiserModel<T>::LstmLayer DenoiserModel<T>::make_lstm(const std::string& name,
                                                                  std::size_t in, nn::Rng& rng) {
  const std::size_t h = arch_.hidden;
  LstmLayer l;
  l.w_ih = &params_.add(name + ".w_ih", {in, 4 * h});
  nn::init_xavier_uniform(*l.w_ih, in, 4 * h, rng);
  l.w_hh = &params_.add(name + ".w_hh", {h, 4 * h});
  nn::init_xavier_uniform(*l.w_hh, h, 4 * h, rng);
  l.b_ih = &params_.add(name + ".b_ih", {4 * h});
  for (std::size_t j = h; j < 2 * h; ++j) l.b_ih->value[j] = T(1);  // forget gate
  l.b_hh = &params_.add(name + ".b_hh", {4 * h});
  return l;
}

template <typename T>
nn::Var<T> DenoiserModel<T>::apply(nn::Tape<T>& tape, const Linear& l, const nn::Var<T>& x) {
  return nn::linear(x, tape.param(*l.w), tape.param(*l.b));
}

template <typename T>
nn::Var<T> DenoiserModel<T>::apply(nn::Tape<T>& tape, const Norm& n, const nn::Var<T>& x) {
  return nn::layer_norm(x, tape.param(*n.gain), tape.param(*n.bias));
}

template <typename T>
nn::Var<T> DenoiserModel<T>::apply(nn::Tape<T>& tape, const LstmLayer& l, const nn::Var<T>& x,
                                   bool reverse) {
  return nn::lstm(x, tape.param(*l.w_ih), tape.param(*l.w_hh), tape.param(*l.b_ih),
                  tape.param(*l.b_hh), reverse);
}

template <typename T>
void DenoiserModel<T>::set_normalization(Normalization n) {
  if (n.enabled()) {
    if (n.mean.size() != arch_.input_dim || n.stddev.size() != arch_.input_dim) {
      throw ConfigError("normalization statistics must have " + std::to_string(arch_.input_dim) +
                        " entries");
    }
    for (float s : n.stddev) {
      if (!(s > 0.0f)) throw ConfigError("normalization stddev must be positive");
    }
  }
  norm_ = std::move(n);
}

template <typename T>
nn::Var<T> DenoiserModel<T>::forward(nn::Tape<T>& tape, const nn::Var<T>& input) {
  if (input.shape().size() != 2 || input.dim(1) != arch_.input_dim) {
    throw ConfigError(to_string(arch_.variant) + " expects [frames, " +
                      std::to_string(arch_.input_dim) + "] input, got " +
                      nn::to_string(input.shape()));
  }
  if (input.dim(0) == 0) throw ConfigError("denoiser input has zero frames");
  const std::size_t dim = arch_.input_dim;
  nn::Var<T> x = input;
  if (norm_.enabled()) {
    std::vector<T> shift(dim), inv(dim);
    for (std::size_t j = 0; j < dim; ++j) {
      shift[j] = -static_cast<T>(norm_.mean[j]);
      inv[j] = T(1) / static_cast<T>(norm_.stddev[j]);
    }
    x = nn::mul_row(nn::add_row(x, tape.constant({dim}, shift)), tape.constant({dim}, inv));
  }

  nn::Var<T> y;
  switch (arch_.variant) {
    case Variant::mlp2:
      y = nn::add(x, nn::mul_row(apply(tape, fc2_, nn::gelu(apply(tape, fc1_, x))), tape.param(*gamma_)));
      break;
    case Variant::vit1:
    case Variant::vit3:
    case Variant::mlp_vit3: {
      nn::Var<T> hcur = arch_.variant == Variant::mlp_vit3 ? apply(tape, in_proj_, x) : x;
      for (const auto& b : blocks_) {
        const nn::Var<T> a = apply(tape, b.ln1, hcur);
        const nn::Var<T> att =
            nn::attention(apply(tape, b.q, a), apply(tape, b.k, a), apply(tape, b.v, a), arch_.heads);
        hcur = nn::add(hcur, apply(tape, b.o, att));
        const nn::Var<T> m = apply(tape, b.ln2, hcur);
        hcur = nn::add(hcur, apply(tape, b.fc2, nn::gelu(apply(tape, b.fc1, m))));
      }
      y = arch_.variant == Variant::mlp_vit3 ? apply(tape, out_proj_, hcur) : hcur;
      break;
    }
    case Variant::lstm3:
    case Variant::blstm3: {
      nn::Var<T> hcur = apply(tape, in_proj_, x);
      for (std::size_t i = 0; i < fwd_.size(); ++i) {
        const nn::Var<T> f = apply(tape, fwd_[i], hcur, false);
        hcur = bwd_.empty() ? f : nn::concat_cols(f, apply(tape, bwd_[i], hcur, true));
      }
      y = apply(tape, out_proj_, hcur);
      break;
    }
  }

  if (norm_.enabled()) {
    std::vector<T> sd(dim), mu(dim);
    for (std::size_t j = 0; j < dim; ++j) {
      sd[j] = static_cast<T>(norm_.stddev[j]);
      mu[j] = static_cast<T>(norm_.mean[j]);
    }
    y = nn::add_row(nn::mul_row(y, tape.constant({dim}, sd)), tape.constant({dim}, mu));
  }
  return y;
}

template class DenoiserModel<float>;
template class DenoiserModel<double>;

enc::EmbeddingSequence denoise(DenoiserModel<float>& model, const enc::EmbeddingSequence& emb) {
  if (emb.frames == 0) throw ConfigError("denoise: embedding sequence has zero frames");
  if (emb.dim != model.input_dim()) {
    throw ConfigError("denoise: " + to_string(model.arch().variant) + " expects dim " +
                      std::to_string(model.input_dim()) + " but the embeddings have dim " +
                      std::to_string(emb.dim));
  }
  enc::validate(emb);
  nn::Tape<float> tape;
  const auto x = tape.constant({emb.frames, emb.dim}, emb.data);
  const auto y = model.forward(tape, x);
  enc::EmbeddingSequence out = emb;
  out.data.assign(y.value().begin(), y.value().end());
  return out;
}

void save_denoiser(const std::filesystem::path& path, const DenoiserModel<float>& model,
                   std::uint64_t step) {
  nlohmann::json config = model.arch().to_json();
  if (model.normalization().enabled()) {
    config["normalization"] = {{"mean", model.normalization().mean},
                               {"stddev", model.normalization().stddev}};
  }
  nn::write_checkpoint(path, nn::make_checkpoint(model.params(), to_string(model.arch().variant),
                                                 config, model.seed(), step));
}

DenoiserModel<float> load_denoiser(const std::filesystem::path& path) {
  const nn::Checkpoint ckpt = nn::read_checkpoint(path);
  const Variant v = parse_variant(ckpt.arch_id);
  DenoiserArch arch = DenoiserArch::from_json(ckpt.config);
  if (arch.variant != v) {
    throw FormatError("checkpoint arch_id " + ckpt.arch_id + " disagrees with its config");
  }
  DenoiserModel<float> model(arch, ckpt.seed);
  nn::load_parameters(ckpt, model.params());
  if (ckpt.config.contains("normalization")) {
    Normalization n;
    n.mean = ckpt.config["normalization"].at("mean").get<std::vector<float>>();
    n.stddev = ckpt.config["normalization"].at("stddev").get<std::vector<float>>();
    model.set_normalization(std::move(n));
  }
  return model;
}

}  // namespace emd::den
