#pragma once

#include <fstream>
#include <iterator>
#include <memory>
#include <string>

#include "tcd/experiment.hpp"
#include "tcd/scripted_model.hpp"
#include "tcd/signal.hpp"
#include "tcd/vocab.hpp"

namespace fixture {

inline const char* const kCountPrompt = "how many times does the phone ring ?";
inline const char* const kOrderPrompt = "which event is heard first ?";
inline const char* const kBeepPrompt = "is there a beep ?";
inline const char* const kNeutralPrompt = "what is heard in this clip ?";

/// 2 s clip with `n` 80 ms rings 190 ms apart over a 0.01 noise floor.
inline tcd::Waveform ring_clip(int n, std::uint64_t seed) {
  tcd::EventScript s;
  s.duration_ms = 2000;
  s.noise_floor = 0.01;
  s.seed = seed;
  for (int i = 0; i < n; ++i) s.events.push_back({100.0 + i * 190.0, 80.0, "ring"});
  return tcd::synth_event_audio(s);
}

inline std::shared_ptr<const tcd::ScriptedModel> transient_model() {
  return std::make_shared<const tcd::ScriptedModel>(
      tcd::load_scripted_spec(std::string(TCD_FIXTURE_DIR) + "/transient.scripted"));
}

inline std::vector<tcd::TokenId> prompt(const char* text) { return tcd::vocab::tokenize(text); }

/// Answer-level view of a report: one "case<TAB>strategy<TAB>answer<TAB>correct"
/// line per row, then one "accuracy<TAB>strategy<TAB>value" line per strategy.
inline std::string frozen_text(const tcd::ComparisonReport& r) {
  std::string out;
  for (const auto& row : r.rows)
    out += row.case_name + "\t" + std::string(tcd::to_string(row.strategy)) + "\t" + row.answer + "\t" +
           (row.correct ? "1" : "0") + "\n";
  for (const auto& s : r.summaries)
    out += "accuracy\t" + std::string(tcd::to_string(s.strategy)) + "\t" + tcd::format_real(s.accuracy) + "\n";
  return out;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace fixture
