#include "emd/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "emd/common/error.hpp"

namespace emd::nn {
namespace {

static_assert(std::endian::native == std::endian::little, "CKPT1 I/O assumes a little-endian host");

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const std::string& s, std::size_t pos) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(s[pos + i]);
  return v;
}

}  // namespace

const CheckpointTensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  nlohmann::json index = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& t : ckpt.tensors) {
    if (t.data.size() != numel(t.shape)) {
      throw ConfigError("checkpoint tensor " + t.name + " has " + std::to_string(t.data.size()) +
                        " values for shape " + to_string(t.shape));
    }
    index.push_back({{"name", t.name}, {"shape", t.shape}, {"offset", offset}});
    offset += t.data.size() * sizeof(float);
  }
  const nlohmann::json header = {{"format_version", kCheckpointVersion},
                                 {"arch_id", ckpt.arch_id},
                                 {"config", ckpt.config},
                                 {"seed", ckpt.seed},
                                 {"step", ckpt.step},
                                 {"tensor_index", index}};
  const std::string text = header.dump();
  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  put_u64(out, text.size());
  out += text;
  out.reserve(out.size() + offset);
  for (const auto& t : ckpt.tensors) {
    out.append(reinterpret_cast<const char*>(t.data.data()), t.data.size() * sizeof(float));
  }
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0) {
    throw FormatError("checkpoint: bad magic (expected EMDCKPT1)");
  }
  const std::uint64_t header_len = get_u64(bytes, 8);
  if (header_len > bytes.size() - 16) throw FormatError("checkpoint: truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(16, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: malformed JSON header: ") + e.what());
  }
  Checkpoint ckpt;
  std::size_t blob_start = 16 + header_len;
  try {
    const int version = header.at("format_version").get<int>();
    if (version != kCheckpointVersion) {
      throw FormatError("checkpoint: unsupported format_version " + std::to_string(version));
    }
    ckpt.arch_id = header.at("arch_id").get<std::string>();
    ckpt.config = header.at("config");
    ckpt.seed = header.at("seed").get<std::uint64_t>();
    ckpt.step = header.at("step").get<std::uint64_t>();
    std::uint64_t expected_offset = 0;
    for (const auto& entry : header.at("tensor_index")) {
      CheckpointTensor t;
      t.name = entry.at("name").get<std::string>();
      t.shape = entry.at("shape").get<Shape>();
      const auto offset = entry.at("offset").get<std::uint64_t>();
      if (offset != expected_offset) {
        throw FormatError("checkpoint: tensor " + t.name + " has non-contiguous offset");
      }
      const std::size_t nbytes = numel(t.shape) * sizeof(float);
      if (blob_start + offset + nbytes > bytes.size()) {
        throw FormatError("checkpoint: truncated payload in tensor " + t.name);
      }
      t.data.resize(numel(t.shape));
      std::memcpy(t.data.data(), bytes.data() + blob_start + offset, nbytes);
      expected_offset += nbytes;
      ckpt.tensors.push_back(std::move(t));
    }
    if (blob_start + expected_offset != bytes.size()) {
      throw FormatError("checkpoint: payload size does not match tensor index");
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: invalid header field: ") + e.what());
  }
  return ckpt;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::string bytes = encode_checkpoint(ckpt);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("write failed for " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

Checkpoint make_checkpoint(const ParameterStore<float>& params, std::string arch_id,
                           nlohmann::json config, std::uint64_t seed, std::uint64_t step) {
  Checkpoint ckpt;
  ckpt.arch_id = std::move(arch_id);
  ckpt.config = std::move(config);
  ckpt.seed = seed;
  ckpt.step = step;
  for (const auto* p : params.all()) ckpt.tensors.push_back({p->name, p->shape, p->value});
  return ckpt;
}

void load_parameters(const Checkpoint& ckpt, ParameterStore<float>& params) {
  if (ckpt.tensors.size() != params.size()) {
    throw FormatError("checkpoint has " + std::to_string(ckpt.tensors.size()) +
                      " tensors but architecture " + ckpt.arch_id + " expects " +
                      std::to_string(params.size()));
  }
  for (auto* p : params.all()) {
    const CheckpointTensor* t = ckpt.find(p->name);
    if (t == nullptr) throw FormatError("checkpoint is missing tensor " + p->name);
    if (t->shape != p->shape) {
      throw FormatError("checkpoint tensor " + p->name + " has shape " + to_string(t->shape) +
                        ", architecture expects " + to_string(p->shape));
    }
    p->value = t->data;
  }
}

}  // namespace emd::nn
