#include <doctest.h>

#include <filesystem>

#include "helpers.hpp"
#include "oracles.hpp"
#include "tcd/config.hpp"
#include "tcd/error.hpp"
#include "tcd/experiment.hpp"
#include "tcd/toy_model.hpp"

using namespace tcd;
namespace fs = std::filesystem;

namespace {

const std::string kFixtures = TCD_FIXTURE_DIR;

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("tcd_test_" + name);
  fs::remove_all(p);
  return p;
}

std::vector<std::string> listing(const fs::path& root) {
  std::vector<std::string> names;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) names.push_back(fs::relative(e.path(), root).string());
  std::sort(names.begin(), names.end());
  return names;
}

}  // namespace

TEST_CASE("manifest parsing") {
  const auto m = load_manifest(kFixtures + "/ring_count.json");
  CHECK(m.cases.size() == 10);
  CHECK(m.strategies.size() == 5);
  CHECK(m.max_tokens == 4);
  CHECK(m.model.kind == ModelSpec::Kind::toy);
  CHECK(m.cases[3].script->events.size() == 3);
  CHECK(m.cases[3].expected == std::vector<std::string>{"3"});

  const auto inline_cfg = parse_manifest(R"({"config": {"gamma_gate": 0, "strategy": "tcd"},
    "cases": [{"name": "a", "prompt": "is there a beep ?", "script": "three_rings.script"}]})", kFixtures);
  CHECK(inline_cfg.overrides.size() == 2);
  CHECK(inline_cfg.cases[0].script->events.size() == 3);

  CHECK_THROWS_AS(parse_manifest("{"), config_error);
  CHECK_THROWS_AS(parse_manifest(R"({"cases": []})"), config_error);
  CHECK_THROWS_AS(parse_manifest(R"({"strategies": ["beam"], "cases": [{"name": "a", "prompt": "x", "script": {}}]})"),
                  std::exception);
}

TEST_CASE("answer matching") {
  const auto ids = vocab::tokenize("3 <eos>");
  CHECK(answer_matches(ids, {"3"}));
  CHECK_FALSE(answer_matches(ids, {"2"}));
  CHECK_FALSE(answer_matches(ids, {"3", "ring", "times"}));
}

TEST_CASE("gate-off manifest gives identical answers") {
  auto m = parse_manifest(R"({"config": {"gamma_gate": 0}, "strategies": ["baseline", "tcd"],
    "cases": [{"name": "one", "prompt": "how many times does the phone ring ?", "expect": ["3"],
               "script": "three_rings.script"}]})", kFixtures);
  const auto r = run_experiment(m, {.write_files = false});
  REQUIRE(r.rows.size() == 2);
  CHECK(r.rows[0].tokens == r.rows[1].tokens);
  CHECK(r.summaries[0].accuracy == r.summaries[1].accuracy);
  CHECK(r.rows[1].gate_activation_rate == 0.0);
  CHECK_FALSE(r.any_failed());
}

TEST_CASE("experiment reruns are byte identical and parallel runs agree") {
  auto m = load_manifest(kFixtures + "/transient.json");
  const auto a = scratch("det_a"), b = scratch("det_b");
  m.output_dir = a;
  run_experiment(m, {});
  m.output_dir = b;
  run_experiment(m, {.jobs = 4});
  const auto files = listing(a);
  CHECK(files == listing(b));
  CHECK(std::find(files.begin(), files.end(), "report.csv") != files.end());
  CHECK(files.size() == 3 + 4 * 5);
  for (const auto& f : files)
    CHECK_MESSAGE(fixture::read_file((a / f).string()) == fixture::read_file((b / f).string()), f);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("transient manifest answers") {
  const auto r = run_experiment(load_manifest(kFixtures + "/transient.json"), {.write_files = false});
  auto answer = [&](const std::string& c, Strategy s) {
    for (const auto& row : r.rows)
      if (row.case_name == c && row.strategy == s) return row.answer;
    return std::string("?");
  };
  CHECK(answer("count", Strategy::baseline) == "2 <eos>");
  CHECK(answer("count", Strategy::tcd) == "3 <eos>");
  CHECK(answer("order", Strategy::tcd) == "beep <eos>");
  CHECK(answer("order", Strategy::tcd_no_gate) == "ring <eos>");
  CHECK(answer("beep", Strategy::tcd) == "yes <eos>");
  CHECK(answer("beep", Strategy::tcd_signed) == "no <eos>");
  for (const auto& row : r.rows) CHECK(row.mean_candidates <= 24.0);
}

TEST_CASE("case failures are recorded, not thrown") {
  auto m = parse_manifest(R"({"cases": [
      {"name": "ok", "prompt": "is there a beep ?", "script": "three_rings.script"},
      {"name": "missing", "prompt": "is there a beep ?", "wav": "does_not_exist.wav"}]})", kFixtures);
  const auto r = run_experiment(m, {.write_files = false});
  REQUIRE(r.rows.size() == 4);
  CHECK(r.any_failed());
  CHECK(r.rows[0].error.empty());
  CHECK_FALSE(r.rows[2].error.empty());
  CHECK(r.summaries[0].errors == 1);
  CHECK(r.to_csv().find("missing,baseline") != std::string::npos);
}

TEST_CASE("ring-counting manifest matches the reference decoder and the frozen answers") {
  const auto m = load_manifest(kFixtures + "/ring_count.json");
  const auto r = run_experiment(m, {.jobs = 2, .write_files = false});
  const ToyModel model;
  for (const auto& row : r.rows) {
    const auto& c = *std::find_if(m.cases.begin(), m.cases.end(), [&](const auto& k) { return k.name == row.case_name; });
    const auto ref = oracle::reference_decode(model, case_audio(c), vocab::tokenize(c.prompt), row.strategy, m.max_tokens);
    CHECK_MESSAGE(ref == row.tokens, row.case_name, " ", to_string(row.strategy));
  }
  CHECK(fixture::frozen_text(r) == fixture::read_file(kFixtures + "/ring_count.frozen"));
}
