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

#ifndef ESCEVAL_REPORT_HPP
#define ESCEVAL_REPORT_HPP

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "esceval/corpus.hpp"
#include "esceval/harness.hpp"
#include "esceval/metrics.hpp"

namespace esceval::report {

// Scores of one method over one run. All rates are on a 0-100 scale;
// every scalar is recomputable from the confusion matrix and the
// underlying records.
struct Report {
  std::string method;
  double macro_f1 = 0.0;  // proficiency over the union of the test sets
  double bias = 0.0;      // preference bias
  // Weighted F1 per stage set; absent when the run covered no instance of
  // that set.
  std::array<std::optional<double>, kNumStages> weighted_f1{};
  double bleu2 = 0.0;
  double bleu4 = 0.0;
  double rouge_l = 0.0;
  double distinct1 = 0.0;
  double distinct2 = 0.0;
  double invalid_rate = 0.0;  // percent of terminal records not parsed ok
  std::optional<double> pref_prof_pearson;
  metrics::PreferenceVector preferences;
  metrics::ConfusionMatrix cm{kNumStrategies};
  std::size_t scored_instances = 0;
};

// Folds the terminal records into a Report: confusion over parsed
// strategies (failures counted as invalid), Bradley-Terry preferences and
// bias, macro F1 over the union, weighted F1 per covered stage set, and
// text metrics of parsed utterances against the gold responses (sentence
// scores macro-averaged; Distinct computed corpus-wide). Records that
// reference unknown instance ids raise FormatError.
Report score_run(std::span<const harness::EvalRunRecord> records,
                 const corpus::TestSets& sets);

std::string report_to_json(const Report& report);
Report report_from_json(std::string_view json_text);

enum class TableFormat { kJson, kCsv, kMarkdown };

// Writes report.json / report.csv / report.md under `dir` for the chosen
// formats; the markdown is the summary results table and the CSV carries
// the per-strategy preference rows.
void emit_tables(std::span<const Report> reports,
                 const std::filesystem::path& dir,
                 std::span<const TableFormat> formats);

// Blinded A/B packet over the instances the two runs share: n samples
// stratified by stage (largest remainder), then by gold strategy within
// each stage; the A/B order is re-randomized per sample. Writes
// packet.jsonl, packet.md and sealed_key.json under `dir`. Neither packet
// file names a source run.
void human_eval_pack(std::span<const harness::EvalRunRecord> run_a,
                     std::span<const harness::EvalRunRecord> run_b,
                     const corpus::TestSets& sets, int n, std::uint64_t seed,
                     const std::filesystem::path& dir);

}  // namespace esceval::report

#endif  // ESCEVAL_REPORT_HPP
