#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tcd/engine.hpp"
#include "tcd/model.hpp"
#include "tcd/signal.hpp"

namespace tcd {

struct ModelSpec {
  enum class Kind { toy, scripted } kind = Kind::toy;
  std::uint64_t seed = 1234;          // toy: weight seed when no fixture is given
  std::optional<std::string> path;    // toy: weight fixture; scripted: table file
};

struct ExperimentCase {
  std::string name;
  std::optional<EventScript> script;
  std::optional<std::string> wav_path;
  std::string prompt;
  std::vector<std::string> expected;
};

struct ExperimentManifest {
  std::vector<ExperimentCase> cases;
  std::vector<Strategy> strategies = {Strategy::baseline, Strategy::tcd};
  std::vector<std::string> overrides;  // key=value, applied over the base config
  std::filesystem::path output_dir = "tcd_out";
  std::uint64_t seed = 0;
  std::size_t max_tokens = 4;
  std::optional<TokenId> stop_token = vocab::kEos;
  ModelSpec model;

  void validate() const;
};

/// JSON manifest. Relative paths resolve against `base_dir`.
ExperimentManifest parse_manifest(std::string_view json_text,
                                  const std::filesystem::path& base_dir = {});
ExperimentManifest load_manifest(const std::filesystem::path& path);

struct CaseResult {
  std::string case_name;
  Strategy strategy = Strategy::baseline;
  std::string expected;
  std::vector<TokenId> tokens;
  std::string answer;
  bool correct = false;
  std::string error;  // non-empty when the case failed
  std::size_t steps = 0;
  double gate_activation_rate = 0.0;  // fraction of steps with g_t > 0
  double mean_candidates = 0.0;       // mean |omega_t|
};

struct StrategySummary {
  Strategy strategy = Strategy::baseline;
  std::size_t cases = 0;
  std::size_t correct = 0;
  std::size_t errors = 0;
  double accuracy = 0.0;
  double mean_gate_activation = 0.0;
  double mean_candidates = 0.0;
};

struct ComparisonReport {
  std::vector<CaseResult> rows;  // case-major, strategies in manifest order
  std::vector<StrategySummary> summaries;

  bool any_failed() const;
  std::string to_csv() const;
  std::string summary_csv() const;
  std::string to_table() const;
};

std::shared_ptr<const AudioLanguageModel> build_model(const ModelSpec& spec);
Waveform case_audio(const ExperimentCase& c);

/// A case is correct when the generated tokens begin with the expected ones.
bool answer_matches(std::span<const TokenId> generated, const std::vector<std::string>& expected);

/// Recomputes the per-strategy summaries from the case rows.
std::vector<StrategySummary> summarize(const std::vector<CaseResult>& rows,
                                       const std::vector<Strategy>& strategies);

struct RunOptions {
  DecodeConfig base_config;
  std::size_t jobs = 1;
  bool write_files = true;
};

/// Decodes every (case, strategy) pair, writes traces/<case>__<strategy>.trace
/// and report.csv / summary.csv / report.txt under the output directory.
/// Case failures are recorded in the report rather than thrown.
ComparisonReport run_experiment(const ExperimentManifest& manifest, const RunOptions& options);

}  // namespace tcd
