#include "tcd/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <atomic>
#include <future>
#include <sstream>

#include <json.hpp>

#include "tcd/config.hpp"
#include "tcd/error.hpp"
#include "tcd/scripted_model.hpp"
#include "tcd/toy_model.hpp"

namespace tcd {

namespace {

using nlohmann::json;

std::string resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) path = base / path;
  return path.string();
}

std::string override_value(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  if (v.is_number_float()) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v.get<double>());
    return buf;
  }
  throw config_error("", "manifest: config values must be numbers or strings");
}

EventScript script_from_json(const json& j) {
  EventScript s;
  s.duration_ms = j.value("duration_ms", s.duration_ms);
  s.noise_floor = j.value("noise_floor", s.noise_floor);
  s.seed = j.value("seed", s.seed);
  s.sample_rate = j.value("sample_rate", s.sample_rate);
  for (const auto& e : j.value("events", json::array())) {
    s.events.push_back({e.at("onset_ms").get<double>(), e.at("length_ms").get<double>(),
                        e.at("class").get<std::string>()});
  }
  s.validate();
  return s;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) out += (out.empty() ? "" : " ") + w;
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
}

}  // namespace

void ExperimentManifest::validate() const {
  if (cases.empty()) throw config_error("cases", "manifest needs at least one case");
  if (strategies.empty()) throw config_error("strategies", "manifest needs at least one strategy");
  if (max_tokens < 1) throw config_error("max_tokens", "must be >= 1");
  for (const auto& c : cases) {
    if (c.name.empty()) throw config_error("cases", "every case needs a name");
    if (c.script.has_value() == c.wav_path.has_value())
      throw config_error("cases", "case '" + c.name + "' needs exactly one of script or wav");
    if (c.prompt.empty()) throw config_error("cases", "case '" + c.name + "' has no prompt");
  }
  for (std::size_t i = 0; i < cases.size(); ++i)
    for (std::size_t j = i + 1; j < cases.size(); ++j)
      if (cases[i].name == cases[j].name)
        throw config_error("cases", "duplicate case name '" + cases[i].name + "'");
}

ExperimentManifest parse_manifest(std::string_view json_text, const std::filesystem::path& base_dir) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw config_error("", std::string("manifest: ") + e.what());
  }
  ExperimentManifest m;
  try {
    m.seed = root.value("seed", m.seed);
    m.max_tokens = root.value("max_tokens", m.max_tokens);
    if (root.contains("output_dir"))
      m.output_dir = resolve(base_dir, root["output_dir"].get<std::string>());
    if (root.contains("stop_token")) {
      const auto& st = root["stop_token"];
      if (st.is_null()) m.stop_token.reset();
      else m.stop_token = vocab::token_id(st.get<std::string>());
    }
    if (root.contains("strategies")) {
      m.strategies.clear();
      for (const auto& s : root["strategies"]) m.strategies.push_back(parse_strategy(s.get<std::string>()));
    }
    if (root.contains("config")) {
      for (const auto& [key, value] : root["config"].items())
        m.overrides.push_back(key + "=" + override_value(value));
    }
    if (root.contains("model")) {
      const auto& mj = root["model"];
      const auto type = mj.value("type", std::string("toy"));
      if (type == "toy") m.model.kind = ModelSpec::Kind::toy;
      else if (type == "scripted") m.model.kind = ModelSpec::Kind::scripted;
      else throw config_error("model", "unknown model type '" + type + "'");
      m.model.seed = mj.value("seed", m.model.seed);
      if (mj.contains("path")) m.model.path = resolve(base_dir, mj["path"].get<std::string>());
    }
    for (const auto& cj : root.at("cases")) {
      ExperimentCase c;
      c.name = cj.at("name").get<std::string>();
      if (cj.contains("script")) {
        const auto& sj = cj["script"];
        c.script = sj.is_string() ? load_event_script(resolve(base_dir, sj.get<std::string>()))
                                  : script_from_json(sj);
      }
      if (cj.contains("wav")) c.wav_path = resolve(base_dir, cj["wav"].get<std::string>());
      c.prompt = cj.at("prompt").get<std::string>();
      for (const auto& e : cj.value("expect", json::array())) c.expected.push_back(e.get<std::string>());
      m.cases.push_back(std::move(c));
    }
  } catch (const json::exception& e) {
    throw config_error("", std::string("manifest: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw config_error("", std::string("manifest: ") + e.what());
  }
  m.validate();
  return m;
}

ExperimentManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw config_error("", "cannot open manifest '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_manifest(buf.str(), path.parent_path());
}

std::shared_ptr<const AudioLanguageModel> build_model(const ModelSpec& spec) {
  if (spec.kind == ModelSpec::Kind::scripted) {
    if (!spec.path) throw config_error("model", "scripted model needs a table path");
    return std::make_shared<ScriptedModel>(load_scripted_spec(*spec.path));
  }
  if (spec.path) return std::make_shared<ToyModel>(ToyModel::load(*spec.path));
  ToyModelConfig config;
  config.seed = spec.seed;
  return std::make_shared<ToyModel>(config);
}

Waveform case_audio(const ExperimentCase& c) {
  if (c.script) return synth_event_audio(*c.script);
  if (c.wav_path) return read_wav(*c.wav_path);
  throw std::invalid_argument("case '" + c.name + "' has no audio source");
}

bool answer_matches(std::span<const TokenId> generated, const std::vector<std::string>& expected) {
  if (expected.empty() || generated.size() < expected.size()) return false;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (!vocab::contains(expected[i])) return false;
    if (generated[i] != vocab::token_id(expected[i])) return false;
  }
  return true;
}

std::vector<StrategySummary> summarize(const std::vector<CaseResult>& rows,
                                       const std::vector<Strategy>& strategies) {
  std::vector<StrategySummary> out;
  for (Strategy s : strategies) {
    StrategySummary sum;
    sum.strategy = s;
    double gate_total = 0.0, omega_total = 0.0;
    std::size_t decoded = 0;
    for (const auto& r : rows) {
      if (r.strategy != s) continue;
      ++sum.cases;
      if (!r.error.empty()) {
        ++sum.errors;
        continue;
      }
      if (r.correct) ++sum.correct;
      gate_total += r.gate_activation_rate;
      omega_total += r.mean_candidates;
      ++decoded;
    }
    sum.accuracy = sum.cases ? static_cast<double>(sum.correct) / static_cast<double>(sum.cases) : 0.0;
    sum.mean_gate_activation = decoded ? gate_total / static_cast<double>(decoded) : 0.0;
    sum.mean_candidates = decoded ? omega_total / static_cast<double>(decoded) : 0.0;
    out.push_back(sum);
  }
  return out;
}

bool ComparisonReport::any_failed() const {
  return std::any_of(rows.begin(), rows.end(), [](const CaseResult& r) { return !r.error.empty(); });
}

std::string ComparisonReport::to_csv() const {
  std::string out = "case,strategy,expected,answer,correct,steps,gate_activation_rate,mean_candidates,error\n";
  for (const auto& r : rows) {
    out += csv_field(r.case_name) + "," + std::string(to_string(r.strategy)) + "," +
           csv_field(r.expected) + "," + csv_field(r.answer) + "," + (r.correct ? "1" : "0") + "," + std::to_string(r.steps) +
           "," + format_real(r.gate_activation_rate) + "," + format_real(r.mean_candidates) + "," +
           csv_field(r.error) + "\n";
  }
  return out;
}

std::string ComparisonReport::summary_csv() const {
  std::string out = "strategy,cases,correct,errors,accuracy,mean_gate_activation,mean_candidates\n";
  for (const auto& s : summaries) {
    out += std::string(to_string(s.strategy)) + "," + std::to_string(s.cases) + "," +
           std::to_string(s.correct) + "," + std::to_string(s.errors) + "," +
           format_real(s.accuracy) + "," + format_real(s.mean_gate_activation) + "," +
           format_real(s.mean_candidates) + "\n";
  }
  return out;
}

std::string ComparisonReport::to_table() const {
  std::ostringstream os;
  char line[512];
  std::snprintf(line, sizeof line, "%-16s %6s %8s %7s %10s %12s %14s\n", "strategy", "cases",
                "correct", "errors", "accuracy", "gate_rate", "mean_|omega|");
  os << line;
  const double base_acc = summaries.empty() ? 0.0 : summaries.front().accuracy;
  for (const auto& s : summaries) {
    std::snprintf(line, sizeof line, "%-16s %6zu %8zu %7zu %10.4f %12.4f %14.4f", 
                  std::string(to_string(s.strategy)).c_str(), s.cases, s.correct, s.errors,
                  s.accuracy, s.mean_gate_activation, s.mean_candidates);
    os << line;
    if (&s != &summaries.front()) {
      std::snprintf(line, sizeof line, "   (%+.4f vs %s)", s.accuracy - base_acc,
                    std::string(to_string(summaries.front().strategy)).c_str());
      os << line;
    }
    os << '\n';
  }
  os << '\n';
  std::size_t width = 4;
  for (const auto& r : rows) width = std::max(width, r.case_name.size());
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-*s %-16s %-3s %s\n", static_cast<int>(width),
                  r.case_name.c_str(), std::string(to_string(r.strategy)).c_str(),
                  r.error.empty() ? (r.correct ? "ok" : "--") : "ERR",
                  r.error.empty() ? r.answer.c_str() : r.error.c_str());
    os << line;
  }
  return os.str();
}

ComparisonReport run_experiment(const ExperimentManifest& manifest, const RunOptions& options) {
  manifest.validate();
  DecodeConfig base = options.base_config;
  for (const auto& item : manifest.overrides) {
    const auto eq = item.find('=');
    apply_setting(base, std::string_view(item).substr(0, eq), std::string_view(item).substr(eq + 1));
  }
  base.seed = manifest.seed;
  base.validate();

  const auto model = build_model(manifest.model);

  struct Job {
    std::size_t case_index;
    Strategy strategy;
  };
  std::vector<Job> jobs;
  for (std::size_t c = 0; c < manifest.cases.size(); ++c)
    for (Strategy s : manifest.strategies) jobs.push_back({c, s});

  std::vector<CaseResult> rows(jobs.size());
  std::vector<std::string> traces(jobs.size());

  auto run_job = [&](std::size_t i) {
    const auto& job = jobs[i];
    const auto& c = manifest.cases[job.case_index];
    CaseResult& row = rows[i];
    row.case_name = c.name;
    row.strategy = job.strategy;
    row.expected = join_words(c.expected);
    try {
      DecodeConfig config = base;
      config.strategy = job.strategy;
      const auto prompt = vocab::tokenize(c.prompt);
      const Waveform audio = case_audio(c);
      const Transcript t = generate(model, audio, prompt, config, manifest.max_tokens, manifest.stop_token);
      row.tokens = t.tokens;
      row.answer = t.text;
      row.correct = answer_matches(t.tokens, c.expected);
      row.steps = t.traces.size();
      std::size_t active = 0;
      double omega = 0.0;
      for (const auto& step : t.traces) {
        if (step.gate > 0.0) ++active;
        omega += static_cast<double>(step.candidate_ids.size());
      }
      if (row.steps) {
        row.gate_activation_rate = static_cast<double>(active) / static_cast<double>(row.steps);
        row.mean_candidates = omega / static_cast<double>(row.steps);
      }
      traces[i] = format_trace(t);
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, options.jobs);
  if (workers == 1) {
    for (std::size_t i = 0; i < jobs.size(); ++i) run_job(i);
  } else {
    std::vector<std::future<void>> pending;
    std::atomic<std::size_t> next{0};
    for (std::size_t w = 0; w < workers; ++w)
      pending.push_back(std::async(std::launch::async, [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) run_job(i);
      }));
    for (auto& f : pending) f.get();
  }

  ComparisonReport report;
  report.rows = std::move(rows);
  report.summaries = summarize(report.rows, manifest.strategies);

  if (options.write_files) {
    const auto trace_dir = manifest.output_dir / "traces";
    std::filesystem::create_directories(trace_dir);
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      if (traces[i].empty()) continue;
      write_text(trace_dir / (report.rows[i].case_name + "__" +
                              std::string(to_string(report.rows[i].strategy)) + ".trace"),
                 traces[i]);
    }
    write_text(manifest.output_dir / "report.csv", report.to_csv());
    write_text(manifest.output_dir / "summary.csv", report.summary_csv());
    write_text(manifest.output_dir / "report.txt", report.to_table());
  }
  return report;
}

}  // namespace tcd
