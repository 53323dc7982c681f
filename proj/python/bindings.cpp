#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "tcd/config.hpp"
#include "tcd/engine.hpp"
#include "tcd/error.hpp"
#include "tcd/experiment.hpp"
#include "tcd/scripted_model.hpp"
#include "tcd/toy_model.hpp"

namespace py = pybind11;
using namespace tcd;

namespace {

Waveform to_waveform(std::vector<double> samples, int sample_rate) {
  Waveform x{std::move(samples), sample_rate};
  x.validate();
  return x;
}

py::dict trace_dict(const GateTrace& t) {
  py::dict d;
  d["step"] = t.step_index;
  d["r_t"] = t.r_t;
  d["entropy_hat"] = t.entropy_hat;
  d["gate"] = t.gate;
  d["candidates"] = t.candidate_ids;
  d["bias"] = t.applied_bias;
  d["chosen"] = t.chosen_token;
  return d;
}

}  // namespace

PYBIND11_MODULE(_tcd, m) {
  m.doc() = "Temporal contrastive decoding core";

  py::register_exception<config_error>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<state_error>(m, "StateError", PyExc_RuntimeError);

  py::enum_<Strategy>(m, "Strategy")
      .value("baseline", Strategy::baseline)
      .value("tcd", Strategy::tcd)
      .value("tcd_no_gate", Strategy::tcd_no_gate)
      .value("tcd_signed", Strategy::tcd_signed)
      .value("tcd_noise_ref", Strategy::tcd_noise_ref);

  py::enum_<SlowPath>(m, "SlowPath").value("waveform", SlowPath::waveform).value("states", SlowPath::states);

  py::class_<DecodeConfig>(m, "DecodeConfig")
      .def(py::init<>())
      .def_static(
          "load", [](std::optional<std::string> path, std::vector<std::string> sets) { return load_config(path, sets); },
          py::arg("path") = std::nullopt, py::arg("overrides") = std::vector<std::string>{})
      .def_static("parse", [](const std::string& text) { return parse_config(text); })
      .def("set", [](DecodeConfig& c, const std::string& key, const std::string& value) { apply_setting(c, key, value); })
      .def("validate", &DecodeConfig::validate)
      .def("serialize", [](const DecodeConfig& c) { return serialize_config(c); })
      .def_readwrite("W_min_ms", &DecodeConfig::W_min_ms)
      .def_readwrite("W_max_ms", &DecodeConfig::W_max_ms)
      .def_readwrite("lambda_min", &DecodeConfig::lambda_min)
      .def_readwrite("lambda_max", &DecodeConfig::lambda_max)
      .def_readwrite("K_orig", &DecodeConfig::K_orig)
      .def_readwrite("K_blur", &DecodeConfig::K_blur)
      .def_readwrite("K_ent", &DecodeConfig::K_ent)
      .def_readwrite("gamma_gate", &DecodeConfig::gamma_gate)
      .def_readwrite("alpha", &DecodeConfig::alpha)
      .def_readwrite("tau", &DecodeConfig::tau)
      .def_readwrite("L_attn", &DecodeConfig::L_attn)
      .def_readwrite("epsilon", &DecodeConfig::epsilon)
      .def_readwrite("strategy", &DecodeConfig::strategy)
      .def_readwrite("slow_path", &DecodeConfig::slow_path)
      .def_readwrite("noise_sigma", &DecodeConfig::noise_sigma)
      .def_readwrite("seed", &DecodeConfig::seed)
      .def("__repr__", [](const DecodeConfig& c) { return "DecodeConfig(" + serialize_config(c) + ")"; });

  py::class_<AudioLanguageModel, std::shared_ptr<AudioLanguageModel>>(m, "AudioLanguageModel")
      .def_property_readonly("vocab_size", &AudioLanguageModel::vocab_size)
      .def_property_readonly("num_encoder_layers", &AudioLanguageModel::num_encoder_layers)
      .def_property_readonly("num_decoder_layers", &AudioLanguageModel::num_decoder_layers)
      .def_property_readonly("frame_rate", &AudioLanguageModel::frame_rate);

  py::class_<ToyModel, AudioLanguageModel, std::shared_ptr<ToyModel>>(m, "ToyModel")
      .def(py::init([](std::uint64_t seed, bool mask_audio) {
             ToyModelConfig c;
             c.seed = seed;
             c.mask_audio = mask_audio;
             return std::make_shared<ToyModel>(c);
           }),
           py::arg("seed") = 1234, py::arg("mask_audio") = false)
      .def_static("load", [](const std::string& path) { return std::make_shared<ToyModel>(ToyModel::load(path)); })
      .def("save", &ToyModel::save)
      .def("encode", [](const ToyModel& model, std::vector<double> samples, int rate) {
        return model.encode(to_waveform(std::move(samples), rate)).layers;
      }, py::arg("samples"), py::arg("sample_rate") = 16000);

  py::class_<ScriptedModel, AudioLanguageModel, std::shared_ptr<ScriptedModel>>(m, "ScriptedModel")
      .def_static("load", [](const std::string& path) { return std::make_shared<ScriptedModel>(load_scripted_spec(path)); });

  m.def("tokenize", &vocab::tokenize);
  m.def("detokenize", [](const std::vector<TokenId>& ids) { return vocab::detokenize(ids); });

  m.def("hann_kernel", [](double ms, double rate) { return hann_kernel(ms, rate).weights; });
  m.def("blur_waveform", [](std::vector<double> samples, int rate, double ms, bool rescale) {
    return blur_waveform(to_waveform(std::move(samples), rate), ms, rescale).samples;
  }, py::arg("samples"), py::arg("sample_rate"), py::arg("window_ms"), py::arg("rescale") = true);
  m.def("synth", [](const std::string& script_text) {
    const auto x = synth_event_audio(parse_event_script(script_text));
    return py::make_tuple(x.samples, x.sample_rate);
  }, "Render an event script (text form) to (samples, sample_rate)");

  m.def("topk_entropy", [](const std::vector<double>& z, std::size_t k) { return topk_entropy(z, k); });
  m.def("gate", &gate, py::arg("r_t"), py::arg("entropy_hat"), py::arg("gamma_gate") = 2.0, py::arg("alpha") = 0.5);
  m.def("fuse_logits", [](const std::vector<double>& z, const std::vector<double>& zb, const std::vector<double>& ratios,
                          double lambda, const DecodeConfig& config) {
    auto f = fuse_logits(z, zb, ratios, lambda, config, 0);
    return py::make_tuple(f.logits, trace_dict(f.trace));
  }, py::arg("z"), py::arg("z_blur"), py::arg("ratios"), py::arg("lam"), py::arg("config") = DecodeConfig{});

  m.def("generate", [](std::shared_ptr<AudioLanguageModel> model, std::vector<double> samples, int rate,
                       const std::string& prompt, const DecodeConfig& config, std::size_t max_tokens) {
    Transcript t;
    {
      py::gil_scoped_release release;
      t = generate(model, to_waveform(std::move(samples), rate), vocab::tokenize(prompt), config, max_tokens);
    }
    py::dict d;
    d["tokens"] = t.tokens;
    d["text"] = t.text;
    py::list traces;
    for (const auto& tr : t.traces) traces.append(trace_dict(tr));
    d["traces"] = traces;
    d["stability"] = t.stability.pooled;
    d["window_ms"] = t.stability.window_ms;
    d["lambda"] = t.stability.lambda;
    d["encoder_forwards"] = t.counters.encoder_forwards;
    d["decoder_forwards"] = t.counters.decoder_forwards;
    d["trace_text"] = format_trace(t);
    return d;
  }, py::arg("model"), py::arg("samples"), py::arg("sample_rate"), py::arg("prompt"),
        py::arg("config") = DecodeConfig{}, py::arg("max_tokens") = 4);

  m.def("profile_ratios", [](std::shared_ptr<AudioLanguageModel> model, std::vector<double> samples, int rate,
                             const std::string& prompt, std::size_t steps) {
    const auto r = profile(model, to_waveform(std::move(samples), rate), vocab::tokenize(prompt), {}, steps);
    return py::make_tuple(*r.prefill_ratio(), *r.decode_ratio());
  });

  m.def("run_manifest", [](const std::string& path, std::optional<std::string> out_dir, std::size_t jobs) {
    auto manifest = load_manifest(path);
    if (out_dir) manifest.output_dir = *out_dir;
    RunOptions options;
    options.jobs = jobs;
    options.write_files = out_dir.has_value();
    ComparisonReport r;
    {
      py::gil_scoped_release release;
      r = run_experiment(manifest, options);
    }
    return py::make_tuple(r.to_csv(), r.summary_csv());
  }, py::arg("path"), py::arg("out_dir") = std::nullopt, py::arg("jobs") = 1);
}
