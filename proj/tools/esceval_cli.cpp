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
//
// Command-line front end; talks to the library through the C API only.

#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "esceval.h"

namespace {

int fail(esc_status status) {
  std::fprintf(stderr, "error: %s\n", esc_last_error());
  return status;
}

struct TestsetsHandle {
  esc_testsets* sets = nullptr;
  ~TestsetsHandle() { esc_testsets_free(sets); }
};

int cmd_build_corpus(const std::string& input, const std::string& out_dir,
                     std::uint64_t seed, double others_cap,
                     const std::string& stage_map) {
  esc_corpus* corpus = nullptr;
  if (esc_status s = esc_corpus_load(input.c_str(), &corpus)) return fail(s);
  std::unique_ptr<esc_corpus, decltype(&esc_corpus_free)> corpus_guard(
      corpus, esc_corpus_free);
  std::printf("loaded %d dialogues\n", esc_corpus_size(corpus));

  TestsetsHandle sets;
  if (esc_status s = esc_testsets_build(
          corpus, seed, others_cap,
          stage_map.empty() ? nullptr : stage_map.c_str(), &sets.sets)) {
    return fail(s);
  }
  if (esc_status s = esc_testsets_save(sets.sets, out_dir.c_str())) {
    return fail(s);
  }
  int64_t sizes[3] = {0, 0, 0};
  esc_testsets_sizes(sets.sets, sizes);
  std::printf("built test sets: D1=%lld D2=%lld D3=%lld -> %s\n",
              static_cast<long long>(sizes[0]),
              static_cast<long long>(sizes[1]),
              static_cast<long long>(sizes[2]), out_dir.c_str());
  char* stats = nullptr;
  if (esc_status s = esc_testsets_stats_json(sets.sets, &stats)) {
    return fail(s);
  }
  std::printf("%s\n", stats);
  esc_string_free(stats);
  return 0;
}

int cmd_run(const std::string& sets_dir, const std::string& method,
            int shots, int iterations, const std::string& knowledge,
            const std::string& planner, const std::string& planner_endpoint,
            const std::string& endpoint, std::uint64_t seed, int limit,
            const std::string& out) {
  TestsetsHandle sets;
  if (esc_status s = esc_testsets_load(sets_dir.c_str(), &sets.sets)) {
    return fail(s);
  }
  nlohmann::json method_json;
  method_json["kind"] = method;
  method_json["shots"] = shots;
  method_json["iterations"] = iterations;
  if (!knowledge.empty()) method_json["knowledge_path"] = knowledge;
  if (!planner.empty()) method_json["planner_path"] = planner;
  if (!planner_endpoint.empty()) {
    method_json["planner_endpoint"] = planner_endpoint;
  }
  char* summary = nullptr;
  if (esc_status s =
          esc_run(sets.sets, method_json.dump().c_str(), endpoint.c_str(),
                  seed, limit, out.c_str(), &summary)) {
    return fail(s);
  }
  const auto parsed = nlohmann::json::parse(summary);
  esc_string_free(summary);
  std::printf(
      "run complete: %lld instances (ok %lld, invalid_strategy %lld, "
      "malformed %lld; invalid rate %.2f%%) -> %s\n",
      parsed["terminal"].get<long long>(),
      parsed["parse_status"]["ok"].get<long long>(),
      parsed["parse_status"]["invalid_strategy"].get<long long>(),
      parsed["parse_status"]["malformed"].get<long long>(),
      parsed["invalid_rate"].get<double>(), out.c_str());
  return 0;
}

int cmd_score(const std::string& records, const std::string& sets_dir,
              const std::string& out) {
  TestsetsHandle sets;
  if (esc_status s = esc_testsets_load(sets_dir.c_str(), &sets.sets)) {
    return fail(s);
  }
  esc_report* report = nullptr;
  if (esc_status s = esc_score(records.c_str(), sets.sets, &report)) {
    return fail(s);
  }
  std::unique_ptr<esc_report, decltype(&esc_report_free)> report_guard(
      report, esc_report_free);
  if (esc_status s = esc_report_save_json(report, out.c_str())) {
    return fail(s);
  }
  char* json_text = nullptr;
  if (esc_status s = esc_report_to_json(report, &json_text)) return fail(s);
  const auto parsed = nlohmann::json::parse(json_text);
  esc_string_free(json_text);
  const std::string bias = parsed["bias"].is_null()
                               ? "undefined (degenerate fit)"
                               : nlohmann::json(parsed["bias"]).dump();
  std::printf("method %s: Q=%.2f B=%s invalid=%.2f%% -> %s\n",
              parsed["method"].get<std::string>().c_str(),
              parsed["macro_f1"].get<double>(), bias.c_str(),
              parsed["invalid_rate"].get<double>(), out.c_str());
  return 0;
}

int cmd_bt_fit(const std::string& confusion, const std::string& out) {
  if (esc_status s = esc_bt_fit_file(confusion.c_str(), out.c_str())) {
    return fail(s);
  }
  std::printf("preferences written to %s\n", out.c_str());
  return 0;
}

int cmd_report(const std::vector<std::string>& reports,
               const std::string& out_dir, const std::string& formats) {
  std::vector<const char*> paths;
  paths.reserve(reports.size());
  for (const std::string& path : reports) paths.push_back(path.c_str());
  if (esc_status s =
          esc_reports_emit(paths.data(), static_cast<int>(paths.size()),
                           out_dir.c_str(), formats.c_str())) {
    return fail(s);
  }
  std::printf("tables written to %s\n", out_dir.c_str());
  return 0;
}

int cmd_human_eval_pack(const std::string& records_a,
                        const std::string& records_b,
                        const std::string& sets_dir, int n,
                        std::uint64_t seed, const std::string& out_dir) {
  TestsetsHandle sets;
  if (esc_status s = esc_testsets_load(sets_dir.c_str(), &sets.sets)) {
    return fail(s);
  }
  if (esc_status s =
          esc_human_eval_pack(records_a.c_str(), records_b.c_str(), sets.sets,
                              n, seed, out_dir.c_str())) {
    return fail(s);
  }
  std::printf("packet written to %s (key in sealed_key.json)\n",
              out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "esceval: strategy proficiency, preference, and preference-bias "
      "evaluation for emotional-support dialogue models"};
  app.require_subcommand(1);

  // build-corpus
  std::string input, out_dir, stage_map;
  std::uint64_t seed = 0;
  double others_cap = 0.05;
  auto* build = app.add_subcommand(
      "build-corpus", "Parse an ESConv corpus and build the three test sets");
  build->add_option("--input", input, "ESConv JSON file")->required();
  build->add_option("--out-dir", out_dir, "output directory")->required();
  build->add_option("--seed", seed, "construction seed");
  build->add_option("--others-cap", others_cap,
                    "maximum Others ratio per set (default 0.05)");
  build->add_option("--stage-map", stage_map,
                    "stage mapping overrides, e.g. Que=Exploration,Oth=-");

  // run
  std::string sets_dir, method = "vanilla", knowledge, planner,
              planner_endpoint, endpoint, records_out;
  int shots = 0, iterations = 1, limit = -1;
  std::uint64_t run_seed = 0;
  auto* run = app.add_subcommand("run",
                                 "Evaluate a prompting method over the test "
                                 "sets against a chat endpoint");
  run->add_option("--sets", sets_dir, "test-set directory")->required();
  run->add_option("--method", method,
                  "vanilla | direct-refine | self-refine | emotional-cot | "
                  "with-knowledge | example-expansion | with-planner");
  run->add_option("--shots", shots, "few-shot examples for the base prompt");
  run->add_option("--iterations", iterations, "refine iterations");
  run->add_option("--knowledge", knowledge, "knowledge JSONL (with-knowledge)");
  run->add_option("--planner", planner, "planner predictions JSONL");
  run->add_option("--planner-endpoint", planner_endpoint,
                  "endpoint config for an endpoint-backed planner");
  run->add_option("--endpoint", endpoint, "endpoint config JSON")->required();
  run->add_option("--seed", run_seed, "sampling seed");
  run->add_option("--limit", limit, "evaluate only the first N instances");
  run->add_option("--out", records_out, "records JSONL output")->required();

  // score
  std::string score_records, score_sets, score_out;
  auto* score = app.add_subcommand("score", "Score a records file into a report");
  score->add_option("--records", score_records, "records JSONL")->required();
  score->add_option("--sets", score_sets, "test-set directory")->required();
  score->add_option("--out", score_out, "report JSON output")->required();

  // bt-fit
  std::string confusion_path, prefs_out;
  auto* bt =
      app.add_subcommand("bt-fit", "Fit preferences from a confusion matrix");
  bt->add_option("--confusion", confusion_path, "confusion matrix JSON")
      ->required();
  bt->add_option("--out", prefs_out, "preference JSON output")->required();

  // report
  std::vector<std::string> report_paths;
  std::string report_dir, formats = "json,csv,markdown";
  auto* report =
      app.add_subcommand("report", "Emit result tables from report files");
  report->add_option("--report", report_paths, "report JSON file(s)")
      ->required();
  report->add_option("--out-dir", report_dir, "output directory")->required();
  report->add_option("--formats", formats, "json,csv,markdown subset");

  // human-eval-pack
  std::string he_a, he_b, he_sets, he_out;
  int he_n = 100;
  std::uint64_t he_seed = 0;
  auto* pack = app.add_subcommand(
      "human-eval-pack", "Build a blinded A/B human-evaluation packet");
  pack->add_option("--records-a", he_a, "records JSONL for run A")->required();
  pack->add_option("--records-b", he_b, "records JSONL for run B")->required();
  pack->add_option("--sets", he_sets, "test-set directory")->required();
  pack->add_option("--n", he_n, "number of samples (default 100)");
  pack->add_option("--seed", he_seed, "sampling seed");
  pack->add_option("--out-dir", he_out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  if (build->parsed()) {
    return cmd_build_corpus(input, out_dir, seed, others_cap, stage_map);
  }
  if (run->parsed()) {
    return cmd_run(sets_dir, method, shots, iterations, knowledge, planner,
                   planner_endpoint, endpoint, run_seed, limit, records_out);
  }
  if (score->parsed()) return cmd_score(score_records, score_sets, score_out);
  if (bt->parsed()) return cmd_bt_fit(confusion_path, prefs_out);
  if (report->parsed()) return cmd_report(report_paths, report_dir, formats);
  if (pack->parsed()) {
    return cmd_human_eval_pack(he_a, he_b, he_sets, he_n, he_seed, he_out);
  }
  return 0;
}
