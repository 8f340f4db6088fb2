#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

#include "emd/common/error.hpp"
#include "emd/data/mixer.hpp"
#include "emd/denoiser/model.hpp"
#include "emd/dsp/resample.hpp"
#include "emd/dsp/stft.hpp"
#include "emd/dsp/wav.hpp"
#include "emd/encoders/embedding.hpp"
#include "emd/encoders/lms.hpp"
#include "emd/metrics/metrics.hpp"
#include "emd/pipeline/pipeline.hpp"

namespace py = pybind11;
using namespace emd;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

dsp::Waveform to_waveform(const FloatArray& a, int rate) {
  if (a.ndim() != 1) throw ConfigError("expected a 1-D sample array, got " + std::to_string(a.ndim()) + " dims");
  dsp::Waveform w;
  w.sample_rate_hz = rate;
  w.samples.assign(a.data(), a.data() + a.size());
  return w;
}

py::array_t<float> to_array(const std::vector<float>& v) {
  py::array_t<float> out(static_cast<py::ssize_t>(v.size()));
  std::memcpy(out.mutable_data(), v.data(), v.size() * sizeof(float));
  return out;
}

py::array_t<float> to_array(const enc::EmbeddingSequence& s) {
  py::array_t<float> out({static_cast<py::ssize_t>(s.frames), static_cast<py::ssize_t>(s.dim)});
  std::memcpy(out.mutable_data(), s.data.data(), s.data.size() * sizeof(float));
  return out;
}

enc::EmbeddingSequence to_sequence(const FloatArray& a, float frame_rate_hz, const std::string& encoder_id) {
  if (a.ndim() != 2) throw ConfigError("expected a [frames, dim] array");
  enc::EmbeddingSequence s;
  s.frames = static_cast<std::size_t>(a.shape(0));
  s.dim = static_cast<std::size_t>(a.shape(1));
  s.frame_rate_hz = frame_rate_hz;
  s.encoder_id = encoder_id;
  s.data.assign(a.data(), a.data() + a.size());
  return s;
}

py::dict sequence_dict(const enc::EmbeddingSequence& s) {
  py::dict d;
  d["data"] = to_array(s);
  d["frame_rate_hz"] = s.frame_rate_hz;
  d["encoder_id"] = s.encoder_id;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "embdenoise native core";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());
  auto io = py::register_exception<IoError>(m, "IoError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", io.ptr());

  // audio
  m.def(
      "read_wav",
      [](const std::filesystem::path& p) {
        const auto w = dsp::read_wav(p);
        return py::make_tuple(to_array(w.samples), w.sample_rate_hz);
      },
      py::arg("path"), "Returns (samples float32, sample_rate_hz).");
  m.def(
      "write_wav",
      [](const std::filesystem::path& p, const FloatArray& x, int rate) { dsp::write_wav(p, to_waveform(x, rate)); },
      py::arg("path"), py::arg("samples"), py::arg("sample_rate_hz") = 16000);
  m.def(
      "resample",
      [](const FloatArray& x, int from_hz, int to_hz) { return to_array(dsp::resample(to_waveform(x, from_hz), to_hz).samples); },
      py::arg("samples"), py::arg("from_hz"), py::arg("to_hz"));

  m.def(
      "stft",
      [](const DoubleArray& x, std::size_t n_fft, std::size_t hop) {
        if (x.ndim() != 1) throw ConfigError("stft expects a 1-D array");
        const auto s = dsp::stft(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())),
                                 dsp::StftConfig::make(n_fft, hop));
        py::array_t<std::complex<double>> out({static_cast<py::ssize_t>(s.frames), static_cast<py::ssize_t>(s.bins)});
        std::memcpy(out.mutable_data(), s.data.data(), s.data.size() * sizeof(std::complex<double>));
        return out;
      },
      py::arg("x"), py::arg("n_fft") = 1024, py::arg("hop") = 256, "Centered Hann STFT, [frames, bins] complex128.");
  m.def(
      "istft",
      [](const py::array_t<std::complex<double>, py::array::c_style | py::array::forcecast>& spec,
         std::size_t length, std::size_t n_fft, std::size_t hop) {
        if (spec.ndim() != 2) throw ConfigError("istft expects a [frames, bins] array");
        dsp::ComplexSpectrogram s;
        s.config = dsp::StftConfig::make(n_fft, hop);
        s.frames = static_cast<std::size_t>(spec.shape(0));
        s.bins = static_cast<std::size_t>(spec.shape(1));
        if (s.bins != s.config.bins()) throw ConfigError("istft: bin count does not match n_fft");
        s.data.assign(spec.data(), spec.data() + spec.size());
        const auto y = dsp::istft_samples(s, length);
        py::array_t<double> out(static_cast<py::ssize_t>(y.size()));
        std::memcpy(out.mutable_data(), y.data(), y.size() * sizeof(double));
        return out;
      },
      py::arg("spec"), py::arg("length"), py::arg("n_fft") = 1024, py::arg("hop") = 256);

  // embeddings
  m.def(
      "lms_encode", [](const FloatArray& x, int rate) { return to_array(enc::lms_encode(to_waveform(x, rate))); },
      py::arg("samples"), py::arg("sample_rate_hz") = 16000, "100-band log-mel embeddings, [frames, 100].");
  m.def(
      "write_embeddings",
      [](const std::filesystem::path& p, const FloatArray& data, float rate, const std::string& id) {
        enc::write_embeddings(to_sequence(data, rate, id), p);
      },
      py::arg("path"), py::arg("data"), py::arg("frame_rate_hz"), py::arg("encoder_id"));
  m.def(
      "read_embeddings", [](const std::filesystem::path& p) { return sequence_dict(enc::read_embeddings(p)); },
      py::arg("path"), "Returns {data, frame_rate_hz, encoder_id}.");
  m.def(
      "encode_embeddings",
      [](const FloatArray& data, float rate, const std::string& id) {
        return py::bytes(enc::encode_embeddings(to_sequence(data, rate, id)));
      },
      py::arg("data"), py::arg("frame_rate_hz"), py::arg("encoder_id"));
  m.def(
      "decode_embeddings", [](const py::bytes& b) { return sequence_dict(enc::decode_embeddings(std::string(b))); },
      py::arg("data"));

  // mixing
  m.def(
      "gain_for_snr",
      [](const FloatArray& clean, const FloatArray& noise, double snr_db) {
        return data::gain_for_snr(to_waveform(clean, 16000), to_waveform(noise, 16000), snr_db);
      },
      py::arg("clean"), py::arg("noise"), py::arg("snr_db"));
  m.def(
      "mix",
      [](const FloatArray& clean, const FloatArray& noise, double snr_db, std::uint64_t seed) {
        data::Rng rng = data::counter_rng(seed, 0, 0);
        const auto s = data::mix(to_waveform(clean, 16000), to_waveform(noise, 16000), snr_db, rng);
        py::dict d;
        d["clean"] = to_array(s.clean.samples);
        d["noise"] = to_array(s.noise.samples);
        d["mixture"] = to_array(s.mixture.samples);
        d["snr_db"] = s.snr_db;
        d["gain"] = s.gain;
        d["scale"] = s.scale;
        return d;
      },
      py::arg("clean"), py::arg("noise"), py::arg("snr_db"), py::arg("seed") = 0);

  // metrics
  m.def(
      "stoi", [](const FloatArray& c, const FloatArray& p, int rate) { return metrics::stoi(to_waveform(c, rate), to_waveform(p, rate)); },
      py::arg("clean"), py::arg("processed"), py::arg("sample_rate_hz") = 16000);
  m.def(
      "si_snr", [](const FloatArray& r, const FloatArray& e) { return metrics::si_snr(to_waveform(r, 16000), to_waveform(e, 16000)); },
      py::arg("ref"), py::arg("est"));
  m.def(
      "lsd", [](const FloatArray& r, const FloatArray& e) { return metrics::lsd(to_waveform(r, 16000), to_waveform(e, 16000)); },
      py::arg("ref"), py::arg("est"));

  // models
  m.def(
      "count_params",
      [](const std::string& variant, std::size_t input_dim) {
        return den::closed_form_param_count(den::DenoiserArch::make(den::parse_variant(variant), input_dim));
      },
      py::arg("variant"), py::arg("input_dim") = 0);

  py::class_<pipeline::Enhancer>(m, "Enhancer")
      .def(py::init([](const std::filesystem::path& config) {
             return std::make_unique<pipeline::Enhancer>(pipeline::PipelineConfig::load(config));
           }),
           py::arg("config"), "Loads the checkpoints named in a pipeline config file.")
      .def(
          "enhance",
          [](pipeline::Enhancer& e, const FloatArray& x, int rate) {
            dsp::Waveform out;
            {
              py::gil_scoped_release release;
              out = e.enhance(to_waveform(x, rate));
            }
            return to_array(out.samples);
          },
          py::arg("samples"), py::arg("sample_rate_hz") = 16000, "Enhanced 16 kHz audio of the input duration.")
      .def_property_readonly("encoder_id", [](pipeline::Enhancer& e) { return e.encoder().encoder_id; });
}
