// tcd: batch decoding experiments, profiling and fixture utilities.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "tcd/config.hpp"
#include "tcd/engine.hpp"
#include "tcd/error.hpp"
#include "tcd/experiment.hpp"
#include "tcd/signal.hpp"
#include "tcd/toy_model.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitCaseFailed = 3;

tcd::EventScript default_profile_script() {
  tcd::EventScript s;
  s.duration_ms = 3000.0;
  s.noise_floor = 0.01;
  s.seed = 7;
  s.events = {{400.0, 80.0, "ring"}, {1300.0, 80.0, "ring"}, {2200.0, 80.0, "ring"}};
  return s;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temporal contrastive decoding over toy audio-language models"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "Decode every manifest case under each strategy");
  std::string manifest_path;
  std::optional<std::string> run_config;
  std::optional<std::string> run_out;
  std::optional<std::uint64_t> run_seed;
  std::vector<std::string> run_strategies;
  std::vector<std::string> run_sets;
  std::size_t run_jobs = 1;
  run->add_option("manifest", manifest_path, "JSON experiment manifest")->required()->check(CLI::ExistingFile);
  run->add_option("--config", run_config, "key=value decoding config file (defaults: reference hyperparameters)");
  run->add_option("--out", run_out, "Output directory (default: manifest output_dir)");
  run->add_option("--seed", run_seed, "Seed for stochastic slow paths (default: manifest seed)");
  run->add_option("--strategy", run_strategies,
                  "Strategy to run; repeatable (baseline, tcd, tcd_no_gate, tcd_signed, tcd_noise_ref). "
                  "Default: manifest strategies");
  run->add_option("--set", run_sets, "Config override key=value; repeatable, applied last");
  run->add_option("--jobs", run_jobs, "Parallel workers")->capture_default_str();

  // profile
  auto* prof = app.add_subcommand("profile", "Prefill/decode latency and forward-pass accounting");
  std::size_t prof_steps = 100;
  std::optional<std::string> prof_config;
  std::vector<std::string> prof_sets;
  std::optional<std::string> prof_wav;
  std::optional<std::string> prof_script;
  std::string prof_prompt = "how many times does the phone ring ?";
  std::optional<std::string> prof_weights;
  std::uint64_t prof_model_seed = 1234;
  prof->add_option("--steps", prof_steps, "Decode steps to time")->capture_default_str();
  prof->add_option("--config", prof_config, "key=value decoding config file");
  prof->add_option("--set", prof_sets, "Config override key=value; repeatable");
  prof->add_option("--wav", prof_wav, "16-bit mono WAV input (default: synthetic 3 s ring clip)");
  prof->add_option("--script", prof_script, "Event script input");
  prof->add_option("--prompt", prof_prompt, "Prompt text")->capture_default_str();
  prof->add_option("--weights", prof_weights, "Toy model weight fixture");
  prof->add_option("--model-seed", prof_model_seed, "Toy model weight seed")->capture_default_str();

  // synth
  auto* synth = app.add_subcommand("synth", "Render an event script to a WAV file");
  std::string synth_in, synth_out;
  synth->add_option("script", synth_in, "Event script")->required()->check(CLI::ExistingFile);
  synth->add_option("output", synth_out, "Output WAV path")->required();

  // trace-dump
  auto* dump = app.add_subcommand("trace-dump", "Pretty-print a step trace file");
  std::string dump_in;
  dump->add_option("trace", dump_in, "Trace file")->required()->check(CLI::ExistingFile);

  // config
  auto* cfg = app.add_subcommand("config", "Print the effective decoding config");
  std::optional<std::string> cfg_file;
  std::vector<std::string> cfg_sets;
  cfg->add_option("--config", cfg_file, "key=value decoding config file");
  cfg->add_option("--set", cfg_sets, "Config override key=value; repeatable");

  // weights
  auto* weights = app.add_subcommand("weights", "Write the toy model weight fixture");
  std::string weights_out;
  std::uint64_t weights_seed = 1234;
  weights->add_option("output", weights_out, "Fixture path")->required();
  weights->add_option("--model-seed", weights_seed, "Weight seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // --help and --version report success; any other usage error shares
    // the configuration exit code
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) {
      tcd::ExperimentManifest manifest = tcd::load_manifest(manifest_path);
      if (run_out) manifest.output_dir = *run_out;
      if (run_seed) manifest.seed = *run_seed;
      if (!run_strategies.empty()) {
        manifest.strategies.clear();
        for (const auto& s : run_strategies) manifest.strategies.push_back(tcd::parse_strategy(s));
      }
      tcd::RunOptions options;
      options.base_config = tcd::load_config(run_config, {});
      options.jobs = run_jobs;
      manifest.overrides.insert(manifest.overrides.end(), run_sets.begin(), run_sets.end());
      const auto report = tcd::run_experiment(manifest, options);
      std::cout << report.to_table();
      std::cout << "wrote " << (manifest.output_dir / "report.csv").string() << '\n';
      return report.any_failed() ? kExitCaseFailed : kExitOk;
    }
    if (*prof) {
      const auto config = tcd::load_config(prof_config, prof_sets);
      tcd::Waveform audio = prof_wav      ? tcd::read_wav(*prof_wav)
                            : prof_script ? tcd::synth_event_audio(tcd::load_event_script(*prof_script))
                                          : tcd::synth_event_audio(default_profile_script());
      tcd::ModelSpec spec;
      spec.seed = prof_model_seed;
      spec.path = prof_weights;
      const auto model = tcd::build_model(spec);
      const auto report = tcd::profile(model, audio, tcd::vocab::tokenize(prof_prompt), config, prof_steps);
      std::cout << tcd::format_profile_report(report);
      return kExitOk;
    }
    if (*synth) {
      tcd::write_wav(synth_out, tcd::synth_event_audio(tcd::load_event_script(synth_in)));
      return kExitOk;
    }
    if (*dump) {
      std::cout << tcd::pretty_print_trace(tcd::parse_trace(read_file(dump_in)));
      return kExitOk;
    }
    if (*cfg) {
      std::cout << tcd::serialize_config(tcd::load_config(cfg_file, cfg_sets));
      return kExitOk;
    }
    if (*weights) {
      tcd::ToyModelConfig config;
      config.seed = weights_seed;
      tcd::ToyModel(config).save(weights_out);
      return kExitOk;
    }
  } catch (const tcd::config_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kExitOk;
}
