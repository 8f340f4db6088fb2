#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "emd/encoders/embedding.hpp"
#include "emd/nn/optim.hpp"
#include "emd/nn/tape.hpp"

namespace emd::den {

enum class Variant { vit3, vit1, blstm3, lstm3, mlp2, mlp_vit3 };

std::string to_string(Variant v);
// Throws ConfigError for an unknown name.
Variant parse_variant(const std::string& name);
const std::vector<Variant>& all_variants();

struct DenoiserArch {
  Variant variant = Variant::mlp2;
  std::size_t input_dim = enc::kExternalDim;  // embedding dim entering the model
  std::size_t embed_dim = 768;
  std::size_t heads = 8;
  double mlp_ratio = 2.0;
  std::size_t hidden = 256;
  std::size_t layers = 3;

  // Canonical architecture for a variant. input_dim 0 picks the variant's
  // default (100 for mlp_vit3, 768 otherwise).
  static DenoiserArch make(Variant v, std::size_t input_dim = 0);
  // Throws ConfigError on an invalid variant/dim combination.
  void validate() const;

  nlohmann::json to_json() const;
  static DenoiserArch from_json(const nlohmann::json& j);
};

// Parameter count of an architecture computed from its dimensions alone.
std::size_t closed_form_param_count(const DenoiserArch& arch);

// Per-dimension affine normalization applied around the network.
struct Normalization {
  std::vector<float> mean;
  std::vector<float> stddev;
  bool enabled() const { return !mean.empty(); }
};

template <typename T>
class DenoiserModel {
 public:
  DenoiserModel(const DenoiserArch& arch, std::uint64_t seed);
  DenoiserModel(DenoiserModel&&) noexcept = default;
  DenoiserModel& operator=(DenoiserModel&&) noexcept = default;
  DenoiserModel(const DenoiserModel&) = delete;
  DenoiserModel& operator=(const DenoiserModel&) = delete;

  const DenoiserArch& arch() const { return arch_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t input_dim() const { return arch_.input_dim; }
  nn::ParameterStore<T>& params() { return params_; }
  const nn::ParameterStore<T>& params() const { return params_; }
  std::size_t count_params() const { return params_.count(); }

  // x [frames, input_dim] -> [frames, input_dim]. The normalization, when
  // set, is applied on the way in and undone on the way out.
  nn::Var<T> forward(nn::Tape<T>& tape, const nn::Var<T>& x);

  const Normalization& normalization() const { return norm_; }
  void set_normalization(Normalization n);

 private:
  struct Linear {
    nn::Parameter<T>* w = nullptr;
    nn::Parameter<T>* b = nullptr;
  };
  struct Norm {
    nn::Parameter<T>* gain = nullptr;
    nn::Parameter<T>* bias = nullptr;
  };
  struct VitBlock {
    Norm ln1, ln2;
    Linear q, k, v, o, fc1, fc2;
  };
  struct LstmLayer {
    nn::Parameter<T>* w_ih = nullptr;
    nn::Parameter<T>* w_hh = nullptr;
    nn::Parameter<T>* b_ih = nullptr;
    nn::Parameter<T>* b_hh = nullptr;
  };

  Linear make_linear(const std::string& name, std::size_t in, std::size_t out, nn::Rng& rng);
  Norm make_norm(const std::string& name, std::size_t dim);
  LstmLayer make_lstm(const std::string& name, std::size_t in, nn::Rng& rng);
  nn::Var<T> apply(nn::Tape<T>& tape, const Linear& l, const nn::Var<T>& x);
  nn::Var<T> apply(nn::Tape<T>& tape, const Norm& n, const nn::Var<T>& x);
  nn::Var<T> apply(nn::Tape<T>& tape, const LstmLayer& l, const nn::Var<T>& x, bool reverse);

  DenoiserArch arch_;
  std::uint64_t seed_;
  nn::ParameterStore<T> params_;
  Linear in_proj_, out_proj_, fc1_, fc2_;
  nn::Parameter<T>* gamma_ = nullptr;  // mlp2 residual branch gain
  std::vector<VitBlock> blocks_;
  std::vector<LstmLayer> fwd_, bwd_;
  Normalization norm_;
};

extern template class DenoiserModel<float>;
extern template class DenoiserModel<double>;

// Enhances an embedding sequence. Rejects empty sequences and dim mismatches.
enc::EmbeddingSequence denoise(DenoiserModel<float>& model, const enc::EmbeddingSequence& emb);

void save_denoiser(const std::filesystem::path& path, const DenoiserModel<float>& model,
                   std::uint64_t step);
DenoiserModel<float> load_denoiser(const std::filesystem::path& path);

}  // namespace emd::den
