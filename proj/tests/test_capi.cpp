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
// End-to-end coverage of the extern-C surface: corpus in, records out,
// report emitted, numeric kernels callable with plain arrays.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include <doctest.h>
#include <json.hpp>

#include "esceval.h"
#include "esceval/corpus.hpp"
#include "testutil.hpp"

using namespace esceval;

namespace {

std::filesystem::path scratch_dir(const char* name) {
  const auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

void write_text(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  REQUIRE(out);
  out << body;
}

}  // namespace

TEST_SUITE_BEGIN("capi");

TEST_CASE("corpus and test sets flow through the C API") {
  const auto dir = scratch_dir("esceval-capi");
  const auto dialogues = testutil::make_synthetic_corpus(30, 13);
  write_text(dir / "corpus.json", corpus::serialize_corpus(dialogues));

  esc_corpus* corpus_handle = nullptr;
  REQUIRE(esc_corpus_load((dir / "corpus.json").string().c_str(),
                          &corpus_handle) == ESC_OK);
  CHECK(esc_corpus_size(corpus_handle) == 30);

  esc_testsets* sets = nullptr;
  REQUIRE(esc_testsets_build(corpus_handle, 13, 0.05, nullptr, &sets) ==
          ESC_OK);
  int64_t sizes[3] = {0, 0, 0};
  REQUIRE(esc_testsets_sizes(sets, sizes) == ESC_OK);
  CHECK(sizes[0] + sizes[1] + sizes[2] > 0);

  REQUIRE(esc_testsets_save(sets, (dir / "sets").string().c_str()) == ESC_OK);
  esc_testsets* reloaded = nullptr;
  REQUIRE(esc_testsets_load((dir / "sets").string().c_str(), &reloaded) ==
          ESC_OK);
  int64_t sizes2[3] = {0, 0, 0};
  REQUIRE(esc_testsets_sizes(reloaded, sizes2) == ESC_OK);
  CHECK(sizes2[0] == sizes[0]);
  CHECK(sizes2[1] == sizes[1]);
  CHECK(sizes2[2] == sizes[2]);

  char* stats = nullptr;
  REQUIRE(esc_testsets_stats_json(sets, &stats) == ESC_OK);
  const auto parsed = nlohmann::json::parse(stats);
  esc_string_free(stats);
  CHECK(parsed.contains("D1"));
  CHECK(parsed["D1"].contains("strategy_ratio"));

  esc_testsets_free(reloaded);
  esc_testsets_free(sets);
  esc_corpus_free(corpus_handle);
  std::filesystem::remove_all(dir);
}

TEST_CASE("esc_bt_fit and esc_preference_bias work on plain arrays") {
  const double counts[4] = {0.0, 2.0, 1.0, 0.0};
  double p[2] = {0.0, 0.0};
  int iterations = 0;
  double residual = 1.0;
  REQUIRE(esc_bt_fit(counts, 2, 0, 0.0, p, &iterations, &residual) == ESC_OK);
  CHECK(p[0] == doctest::Approx(4.0 / 3.0).epsilon(1e-9));
  CHECK(p[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
  CHECK(iterations >= 20);
  CHECK(residual < 1e-8);

  const double chatgpt[8] = {0.12, 0.27, 1.48, 0.14, 4.49, 0.61, 0.59, 0.29};
  double bias = 0.0;
  REQUIRE(esc_preference_bias(chatgpt, 8, &bias) == ESC_OK);
  CHECK(bias == doctest::Approx(1.38).epsilon(0.005));
}

TEST_CASE("the C API reports argument and data errors distinctly") {
  CHECK(esc_corpus_load(nullptr, nullptr) == ESC_ERR_ARGUMENT);
  esc_corpus* corpus_handle = nullptr;
  CHECK(esc_corpus_load("/nonexistent/corpus.json", &corpus_handle) ==
        ESC_ERR_IO);
  CHECK(std::string(esc_last_error()).find("cannot open") !=
        std::string::npos);

  const double bad[3] = {5.0, 5.0, 5.0};
  double bias = 0.0;
  CHECK(esc_preference_bias(bad, 3, &bias) == ESC_ERR_CONTRACT);
}

TEST_CASE("a full run and scoring pass works through the C API") {
  const auto dir = scratch_dir("esceval-capi-run");
  const auto dialogues = testutil::make_synthetic_corpus(40, 29);
  write_text(dir / "corpus.json", corpus::serialize_corpus(dialogues));

  esc_corpus* corpus_handle = nullptr;
  REQUIRE(esc_corpus_load((dir / "corpus.json").string().c_str(),
                          &corpus_handle) == ESC_OK);
  esc_testsets* sets = nullptr;
  REQUIRE(esc_testsets_build(corpus_handle, 29, 0.05, nullptr, &sets) ==
          ESC_OK);

  testutil::MockChatServer server([](const std::string&) {
    return std::string(
        "Strategy: Question\nUtterance: What has been on your mind?");
  });
  auto endpoint = server.endpoint();
  write_text(dir / "endpoint.json", endpoint.to_json());

  char* summary = nullptr;
  REQUIRE(esc_run(sets, R"({"kind":"vanilla","shots":0})",
                  (dir / "endpoint.json").string().c_str(), 7, 10,
                  (dir / "records.jsonl").string().c_str(),
                  &summary) == ESC_OK);
  const auto run_summary = nlohmann::json::parse(summary);
  esc_string_free(summary);
  CHECK(run_summary["terminal"].get<int>() == 10);
  CHECK(run_summary["parse_status"].contains("invalid_strategy"));
  CHECK(run_summary["parse_status"].contains("malformed"));

  esc_report* report = nullptr;
  REQUIRE(esc_score((dir / "records.jsonl").string().c_str(), sets,
                    &report) == ESC_OK);
  char* report_json = nullptr;
  REQUIRE(esc_report_to_json(report, &report_json) == ESC_OK);
  const auto parsed = nlohmann::json::parse(report_json);
  esc_string_free(report_json);
  CHECK(parsed["scored_instances"].get<int>() == 10);
  CHECK(parsed["method"] == "vanilla-0shot");

  REQUIRE(esc_report_save_json(report,
                               (dir / "report.json").string().c_str()) ==
          ESC_OK);
  const char* paths[1] = {nullptr};
  const std::string report_path = (dir / "report.json").string();
  paths[0] = report_path.c_str();
  REQUIRE(esc_reports_emit(paths, 1, (dir / "tables").string().c_str(),
                           "json,csv,markdown") == ESC_OK);
  CHECK(std::filesystem::exists(dir / "tables" / "report.md"));
  CHECK(std::filesystem::exists(dir / "tables" / "report.csv"));
  CHECK(std::filesystem::exists(dir / "tables" / "report.json"));

  esc_report_free(report);
  esc_testsets_free(sets);
  esc_corpus_free(corpus_handle);
  std::filesystem::remove_all(dir);
}

TEST_SUITE_END();
