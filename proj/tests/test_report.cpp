// Copyright 2026 The esceval Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "esceval/report.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <doctest.h>
#include <json.hpp>

#include "esceval/errors.hpp"
#include "esceval/textmetrics.hpp"
#include "testutil.hpp"

using namespace esceval;
using harness::EvalRunRecord;
using harness::ParseStatus;

namespace {

corpus::TestSets covering_sets(std::size_t dialogues, std::uint64_t seed) {
  const auto raw = testutil::make_synthetic_corpus(dialogues, seed);
  return corpus::build_test_sets(raw, seed, StageMapping::standard());
}

// One terminal record per instance; the responder decides the parsed
// strategy/utterance without any endpoint round trip.
std::vector<EvalRunRecord> synthetic_records(
    const corpus::TestSets& sets,
    const std::function<void(const corpus::TestInstance&, EvalRunRecord&)>&
        fill) {
  std::vector<EvalRunRecord> records;
  for (int s = 0; s < kNumStages; ++s) {
    for (const corpus::TestInstance& instance : sets.sets[s]) {
      EvalRunRecord record;
      record.instance_id = instance.instance_id;
      record.method = "synthetic";
      record.terminal = true;
      fill(instance, record);
      records.push_back(std::move(record));
    }
  }
  return records;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

TEST_SUITE_BEGIN("report");

TEST_CASE("score_run of an oracle echo is perfect") {
  const auto sets = covering_sets(80, 51);
  REQUIRE(sets.total() > 0);
  // All eight strategies must occur as gold for a perfect macro F1.
  std::set<Strategy> golds;
  for (int s = 0; s < kNumStages; ++s) {
    for (const auto& instance : sets.sets[s]) golds.insert(instance.gold_strategy);
  }
  REQUIRE(golds.size() == kNumStrategies);

  const auto records = synthetic_records(
      sets, [](const corpus::TestInstance& instance, EvalRunRecord& record) {
        record.parsed_strategy = instance.gold_strategy;
        record.parsed_utterance = instance.gold_response;
        record.parse_status = ParseStatus::kOk;
        record.raw_completion = "Strategy: " +
                                strategy_name(instance.gold_strategy) +
                                "\nUtterance: " + instance.gold_response;
      });
  const auto report = report::score_run(records, sets);
  CHECK(report.macro_f1 == doctest::Approx(100.0));
  CHECK(report.bias == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(report.bleu2 == doctest::Approx(100.0).epsilon(1e-9));
  CHECK(report.rouge_l == doctest::Approx(100.0).epsilon(1e-9));
  CHECK(report.invalid_rate == 0.0);
  for (int s = 0; s < kNumStages; ++s) {
    REQUIRE(report.weighted_f1[s].has_value());
    CHECK(*report.weighted_f1[s] == doctest::Approx(100.0));
  }

  // Scoring twice yields the identical report.
  const auto again = report::score_run(records, sets);
  CHECK(report::report_to_json(report) == report::report_to_json(again));
}

TEST_CASE("score_run matches standalone metric recomputation") {
  const auto sets = covering_sets(80, 52);
  const auto records = synthetic_records(
      sets, [](const corpus::TestInstance&, EvalRunRecord& record) {
        record.parsed_strategy = Strategy::kAffirmation;
        record.parsed_utterance = "You will get through this.";
        record.parse_status = ParseStatus::kOk;
      });
  const auto report = report::score_run(records, sets);

  // Corpus text scores are the arithmetic mean of the per-instance
  // sentence scores; re-mean them by brute force.
  double bleu2_sum = 0.0, rouge_sum = 0.0;
  std::size_t count = 0;
  for (int s = 0; s < kNumStages; ++s) {
    for (const auto& instance : sets.sets[s]) {
      const auto hyp = textmetrics::tokenize("You will get through this.");
      const auto ref = textmetrics::tokenize(instance.gold_response);
      bleu2_sum += textmetrics::bleu_n(hyp, ref, 2);
      rouge_sum += textmetrics::rouge_l(hyp, ref);
      ++count;
    }
  }
  CHECK(report.bleu2 ==
        doctest::Approx(100.0 * bleu2_sum / count).epsilon(1e-12));
  CHECK(report.rouge_l ==
        doctest::Approx(100.0 * rouge_sum / count).epsilon(1e-12));

  std::vector<std::optional<Strategy>> preds;
  std::vector<Strategy> golds;
  for (int s = 0; s < kNumStages; ++s) {
    for (const auto& instance : sets.sets[s]) {
      preds.emplace_back(Strategy::kAffirmation);
      golds.push_back(instance.gold_strategy);
    }
  }
  const auto cm = metrics::confusion(preds, golds);
  CHECK(report.cm == cm);
  CHECK(report.macro_f1 == metrics::per_strategy_f1(cm).macro);
  CHECK(report.bias == metrics::preference_bias(metrics::bt_fit(cm)));
  // A single-strategy predictor concentrates the whole preference mass:
  // the bias reaches its maximum sqrt(n-1).
  CHECK(report.bias == doctest::Approx(std::sqrt(7.0)).epsilon(1e-9));
}

TEST_CASE("score_run rejects unknown instance ids") {
  const auto sets = covering_sets(20, 5);
  EvalRunRecord rogue;
  rogue.instance_id = "zzz#999";
  rogue.method = "synthetic";
  rogue.terminal = true;
  rogue.parse_status = ParseStatus::kOk;
  rogue.parsed_strategy = Strategy::kQuestion;
  rogue.parsed_utterance = "hm";
  const std::vector<EvalRunRecord> records = {rogue};
  CHECK_THROWS_AS(report::score_run(records, sets), FormatError);
}

TEST_CASE("report JSON round-trips") {
  const auto sets = covering_sets(60, 53);
  const auto records = synthetic_records(
      sets, [](const corpus::TestInstance& instance, EvalRunRecord& record) {
        record.parsed_strategy = instance.gold_strategy;
        record.parsed_utterance = "a reply for " + instance.dialogue_id;
        record.parse_status = ParseStatus::kOk;
      });
  const auto report = report::score_run(records, sets);
  const auto text = report::report_to_json(report);
  const auto reloaded = report::report_from_json(text);
  CHECK(report::report_to_json(reloaded) == text);
}

TEST_CASE("emit_tables writes the three formats") {
  const auto sets = covering_sets(60, 54);
  const auto records = synthetic_records(
      sets, [](const corpus::TestInstance& instance, EvalRunRecord& record) {
        record.parsed_strategy = instance.gold_strategy;
        record.parsed_utterance = "a reply for " + instance.dialogue_id;
        record.parse_status = ParseStatus::kOk;
      });
  const auto report = report::score_run(records, sets);
  const auto dir = std::filesystem::temp_directory_path() / "esceval-tables";
  std::filesystem::remove_all(dir);
  const std::vector<report::Report> reports = {report};
  const std::vector<report::TableFormat> formats = {
      report::TableFormat::kJson, report::TableFormat::kCsv,
      report::TableFormat::kMarkdown};
  report::emit_tables(reports, dir, formats);

  const auto markdown = slurp(dir / "report.md");
  CHECK(markdown.find("| Q |") != std::string::npos);
  CHECK(markdown.find("| B |") != std::string::npos);
  CHECK(markdown.find("| B-2 |") != std::string::npos);
  CHECK(markdown.find("| R-L |") != std::string::npos);

  // json reload equals the in-memory report.
  const auto array = nlohmann::json::parse(slurp(dir / "report.json"));
  REQUIRE(array.is_array());
  const auto reloaded = report::report_from_json(array[0].dump());
  CHECK(report::report_to_json(reloaded) == report::report_to_json(report));

  // csv preference rows sum to 8 per method.
  std::istringstream csv(slurp(dir / "report.csv"));
  std::string line;
  double pref_sum = 0.0;
  int pref_rows = 0;
  bool in_pref_block = false;
  while (std::getline(csv, line)) {
    if (line.rfind("method,strategy,preference", 0) == 0) {
      in_pref_block = true;
      continue;
    }
    if (!in_pref_block || line.empty()) continue;
    const auto last_comma = line.rfind(',');
    pref_sum += std::stod(line.substr(last_comma + 1));
    ++pref_rows;
  }
  CHECK(pref_rows == kNumStrategies);
  CHECK(pref_sum == doctest::Approx(8.0).epsilon(1e-4));
  std::filesystem::remove_all(dir);
}

TEST_CASE("human_eval_pack stratifies, blinds, and keys the samples") {
  const auto sets = covering_sets(160, 55);
  REQUIRE(sets.sets[0].size() >= 40);
  REQUIRE(sets.sets[1].size() >= 40);
  REQUIRE(sets.sets[2].size() >= 40);
  const auto run_a = synthetic_records(
      sets, [](const corpus::TestInstance& instance, EvalRunRecord& record) {
        record.method = "method-alpha";
        record.parsed_strategy = instance.gold_strategy;
        record.parsed_utterance = "alpha reply " + instance.instance_id;
        record.parse_status = ParseStatus::kOk;
      });
  const auto run_b = synthetic_records(
      sets, [](const corpus::TestInstance& instance, EvalRunRecord& record) {
        record.method = "method-beta";
        record.parsed_strategy = Strategy::kAffirmation;
        record.parsed_utterance = "beta reply " + instance.instance_id;
        record.parse_status = ParseStatus::kOk;
      });

  const auto dir = std::filesystem::temp_directory_path() / "esceval-packet";
  std::filesystem::remove_all(dir);
  report::human_eval_pack(run_a, run_b, sets, 100, 9, dir);

  const auto packet = slurp(dir / "packet.jsonl");
  // Blinding: the packet never names a method.
  CHECK(packet.find("method-alpha") == std::string::npos);
  CHECK(packet.find("method-beta") == std::string::npos);

  std::istringstream lines(packet);
  std::string line;
  std::map<std::string, int> stage_counts;
  std::vector<nlohmann::json> samples;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    samples.push_back(nlohmann::json::parse(line));
  }
  CHECK(samples.size() == 100);

  const auto key = nlohmann::json::parse(slurp(dir / "sealed_key.json"));
  std::map<std::string, const corpus::TestInstance*> by_id;
  for (int s = 0; s < kNumStages; ++s) {
    for (const auto& instance : sets.sets[s]) {
      by_id[instance.instance_id] = &instance;
    }
  }
  for (const auto& sample : samples) {
    const std::string sid = sample.at("sample_id").get<std::string>();
    REQUIRE(key.at("samples").contains(sid));
    const auto& entry = key.at("samples").at(sid);
    const std::string instance_id = entry.at("instance_id").get<std::string>();
    REQUIRE(by_id.count(instance_id) == 1);
    ++stage_counts[stage_name(by_id[instance_id]->stage)];
    // The key resolves each side to its source run.
    const std::string a_source = entry.at("A").get<std::string>();
    const std::string response_a = sample.at("response_a").get<std::string>();
    if (a_source == "run_a") {
      CHECK(response_a == "alpha reply " + instance_id);
    } else {
      CHECK(response_a == "beta reply " + instance_id);
    }
  }
  // Largest-remainder thirds of 100: 34/33/33.
  for (const auto& [stage, count] : stage_counts) {
    CHECK(count >= 33);
    CHECK(count <= 34);
  }

  // Same seed, same packet.
  const auto dir2 = std::filesystem::temp_directory_path() / "esceval-packet2";
  std::filesystem::remove_all(dir2);
  report::human_eval_pack(run_a, run_b, sets, 100, 9, dir2);
  CHECK(slurp(dir2 / "packet.jsonl") == packet);
  CHECK(slurp(dir2 / "sealed_key.json") == slurp(dir / "sealed_key.json"));
  std::filesystem::remove_all(dir);
  std::filesystem::remove_all(dir2);
}

TEST_CASE("human_eval_pack rejects runs with too little overlap") {
  const auto sets = covering_sets(20, 56);
  const auto run_a = synthetic_records(
      sets, [](const corpus::TestInstance&, EvalRunRecord& record) {
        record.parsed_strategy = Strategy::kQuestion;
        record.parsed_utterance = "something";
        record.parse_status = ParseStatus::kOk;
      });
  const std::vector<EvalRunRecord> run_b;  // no shared instances at all
  const auto dir = std::filesystem::temp_directory_path() / "esceval-packet3";
  CHECK_THROWS_AS(report::human_eval_pack(run_a, run_b, sets, 10, 1, dir),
                  ConfigError);
}

TEST_SUITE_END();
