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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>

#include <json.hpp>

#include "esceval/errors.hpp"
#include "esceval/rng.hpp"
#include "esceval/textmetrics.hpp"

namespace esceval::report {
namespace {

using harness::EvalRunRecord;
using harness::ParseStatus;
using nlohmann::json;

struct CriterionText {
  const char* key;
  const char* question;
};

constexpr CriterionText kCriteria[] = {
    {"acceptance",
     "Is the response accepted by the seeker without discomfort or "
     "resistance?"},
    {"effectiveness",
     "Is it expected that the response would mitigate or shift the seeker's "
     "negative emotional state or attitude toward a more positive "
     "direction?"},
    {"sensitivity",
     "Does the response take into consideration the seeker's state (mood, "
     "needs, resources, culture, attitude, etc.)?"},
    {"alignment", "Is the response fitting for the chosen strategy?"},
};

constexpr const char* kLikertRubric[] = {
    "1: The response would worsen the seeker's situation or distress.",
    "2: The response is unhelpful or partly inappropriate for the seeker.",
    "3: The response is acceptable but generic or only mildly supportive.",
    "4: The response is supportive and well suited to the seeker's state.",
    "5: The response is excellent emotional support at this point of the "
    "conversation.",
};

std::string format_number(double value, int decimals = 6) {
  if (std::isnan(value)) return "-";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
  return buf;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

json report_to_json_value(const Report& report) {
  json out;
  out["method"] = report.method;
  out["macro_f1"] = report.macro_f1;
  out["bias"] = report.bias;
  json weighted = json::object();
  const char* set_keys[kNumStages] = {"D1", "D2", "D3"};
  for (int s = 0; s < kNumStages; ++s) {
    weighted[set_keys[s]] = report.weighted_f1[s]
                                ? json(*report.weighted_f1[s])
                                : json(nullptr);
  }
  out["weighted_f1"] = std::move(weighted);
  out["bleu2"] = report.bleu2;
  out["bleu4"] = report.bleu4;
  out["rouge_l"] = report.rouge_l;
  out["distinct1"] = report.distinct1;
  out["distinct2"] = report.distinct2;
  out["invalid_rate"] = report.invalid_rate;
  out["pref_prof_pearson"] = report.pref_prof_pearson
                                 ? json(*report.pref_prof_pearson)
                                 : json(nullptr);
  out["preferences"] =
      report.preferences.p.empty()
          ? json(nullptr)
          : json::parse(metrics::preference_to_json(report.preferences));
  out["confusion"] = json::parse(metrics::confusion_to_json(report.cm));
  out["scored_instances"] = report.scored_instances;
  return out;
}

Report report_from_json_value(const json& in) {
  Report report;
  try {
    report.method = in.at("method").get<std::string>();
    report.macro_f1 = in.at("macro_f1").get<double>();
    report.bias = in.at("bias").is_null()
                      ? std::numeric_limits<double>::quiet_NaN()
                      : in.at("bias").get<double>();
    const char* set_keys[kNumStages] = {"D1", "D2", "D3"};
    for (int s = 0; s < kNumStages; ++s) {
      const json& value = in.at("weighted_f1").at(set_keys[s]);
      if (!value.is_null()) report.weighted_f1[s] = value.get<double>();
    }
    report.bleu2 = in.at("bleu2").get<double>();
    report.bleu4 = in.at("bleu4").get<double>();
    report.rouge_l = in.at("rouge_l").get<double>();
    report.distinct1 = in.at("distinct1").get<double>();
    report.distinct2 = in.at("distinct2").get<double>();
    report.invalid_rate = in.at("invalid_rate").get<double>();
    if (!in.at("pref_prof_pearson").is_null()) {
      report.pref_prof_pearson = in.at("pref_prof_pearson").get<double>();
    }
    if (!in.at("preferences").is_null()) {
      report.preferences =
          metrics::preference_from_json(in.at("preferences").dump());
    }
    report.cm = metrics::confusion_from_json(in.at("confusion").dump());
    report.scored_instances = in.at("scored_instances").get<std::size_t>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad report record: ") + e.what());
  }
  return report;
}

void write_file(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << body;
}

std::string render_markdown(std::span<const Report> reports) {
  std::string out;
  out += "| Methods | Q | B | B-2 | B-4 | R-L | D-1 | D-2 | F1 $D_1$ | "
         "F1 $D_2$ | F1 $D_3$ | Invalid % |\n";
  out += "|---|---|---|---|---|---|---|---|---|---|---|---|\n";
  for (const Report& r : reports) {
    const auto cell = [](const std::optional<double>& v) {
      return v ? format_number(*v, 2) : std::string("-");
    };
    out += "| " + r.method + " | " + format_number(r.macro_f1, 2) + " | " +
           format_number(r.bias, 2) + " | " + format_number(r.bleu2, 2) +
           " | " + format_number(r.bleu4, 2) + " | " +
           format_number(r.rouge_l, 2) + " | " +
           format_number(r.distinct1, 2) + " | " +
           format_number(r.distinct2, 2) + " | " + cell(r.weighted_f1[0]) +
           " | " + cell(r.weighted_f1[1]) + " | " + cell(r.weighted_f1[2]) +
           " | " + format_number(r.invalid_rate, 2) + " |\n";
  }
  return out;
}

std::string render_csv(std::span<const Report> reports) {
  std::string out;
  out += "method,Q,B,F1_D1,F1_D2,F1_D3,BLEU-2,BLEU-4,ROUGE-L,Distinct-1,"
         "Distinct-2,invalid_rate,scored_instances\n";
  for (const Report& r : reports) {
    const auto cell = [](const std::optional<double>& v) {
      return v ? format_number(*v) : std::string();
    };
    out += csv_escape(r.method) + ',' + format_number(r.macro_f1) + ',' +
           format_number(r.bias) + ',' + cell(r.weighted_f1[0]) + ',' +
           cell(r.weighted_f1[1]) + ',' + cell(r.weighted_f1[2]) + ',' +
           format_number(r.bleu2) + ',' + format_number(r.bleu4) + ',' +
           format_number(r.rouge_l) + ',' + format_number(r.distinct1) + ',' +
           format_number(r.distinct2) + ',' + format_number(r.invalid_rate) +
           ',' + std::to_string(r.scored_instances) + '\n';
  }
  out += '\n';
  out += "method,strategy,preference\n";
  for (const Report& r : reports) {
    if (r.preferences.p.empty()) continue;
    for (Strategy s : all_strategies()) {
      out += csv_escape(r.method) + ',' + strategy_name(s) + ',' +
             format_number(r.preferences.p[static_cast<int>(s)]) + '\n';
    }
  }
  return out;
}

json context_to_json(const corpus::TestInstance& instance) {
  json context = json::array();
  for (const corpus::Turn& turn : instance.context) {
    json t;
    t["speaker"] =
        turn.speaker == corpus::Speaker::kSeeker ? "seeker" : "supporter";
    t["utterance"] = turn.utterance;
    context.push_back(std::move(t));
  }
  // The final (gold) turn is the slot under evaluation; annotators see
  // only the lead-up.
  context.erase(context.end() - 1);
  return context;
}

}  // namespace

Report score_run(std::span<const EvalRunRecord> records,
                 const corpus::TestSets& sets) {
  std::map<std::string, const corpus::TestInstance*> instances;
  for (int s = 0; s < kNumStages; ++s) {
    for (const corpus::TestInstance& instance : sets.sets[s]) {
      instances[instance.instance_id] = &instance;
    }
  }

  std::vector<const EvalRunRecord*> terminal;
  std::set<std::string> seen;
  for (const EvalRunRecord& record : records) {
    if (!record.terminal) continue;
    if (!instances.contains(record.instance_id)) {
      throw FormatError("run record references unknown instance " +
                        record.instance_id);
    }
    if (!seen.insert(record.instance_id).second) {
      throw FormatError("duplicate terminal record for instance " +
                        record.instance_id);
    }
    terminal.push_back(&record);
  }
  if (terminal.empty()) {
    throw ContractViolation("score_run: no terminal records to score");
  }
  std::sort(terminal.begin(), terminal.end(),
            [](const EvalRunRecord* a, const EvalRunRecord* b) {
              return a->instance_id < b->instance_id;
            });

  Report report;
  report.method = terminal.front()->method;
  for (const EvalRunRecord* record : terminal) {
    if (record->method != report.method) {
      throw FormatError("records mix methods: " + report.method + " vs " +
                        record->method);
    }
  }
  report.scored_instances = terminal.size();

  std::vector<std::optional<Strategy>> preds;
  std::vector<Strategy> golds;
  std::array<std::vector<std::optional<Strategy>>, kNumStages> stage_preds;
  std::array<std::vector<Strategy>, kNumStages> stage_golds;
  std::vector<textmetrics::TokenSequence> hyps;
  double bleu2_sum = 0.0, bleu4_sum = 0.0, rouge_sum = 0.0;
  std::size_t text_count = 0, invalid = 0;

  for (const EvalRunRecord* record : terminal) {
    const corpus::TestInstance& instance = *instances.at(record->instance_id);
    const bool ok = record->parse_status == ParseStatus::kOk;
    if (!ok) ++invalid;
    const std::optional<Strategy> pred =
        ok ? record->parsed_strategy : std::nullopt;
    preds.push_back(pred);
    golds.push_back(instance.gold_strategy);
    const int s = static_cast<int>(instance.stage);
    stage_preds[s].push_back(pred);
    stage_golds[s].push_back(instance.gold_strategy);

    if (record->parsed_utterance) {
      const auto hyp = textmetrics::tokenize(*record->parsed_utterance);
      const auto ref = textmetrics::tokenize(instance.gold_response);
      bleu2_sum += textmetrics::bleu_n(hyp, ref, 2);
      bleu4_sum += textmetrics::bleu_n(hyp, ref, 4);
      rouge_sum += textmetrics::rouge_l(hyp, ref);
      hyps.push_back(hyp);
      ++text_count;
    }
  }

  report.cm = metrics::confusion(preds, golds);
  report.invalid_rate =
      100.0 * static_cast<double>(invalid) / static_cast<double>(terminal.size());
  const metrics::ProficiencyScores scores = metrics::per_strategy_f1(report.cm);
  report.macro_f1 = scores.macro;
  // Preferences have no finite fit when a predicted strategy never occurs
  // as gold (possible on small runs); the report then carries NaN rather
  // than aborting the whole scoring pass.
  report.bias = std::numeric_limits<double>::quiet_NaN();
  if (report.cm.total() > 0) {
    try {
      report.preferences = metrics::bt_fit(report.cm);
      report.bias = metrics::preference_bias(report.preferences);
      report.pref_prof_pearson =
          metrics::pearson(report.preferences.p, scores.q);
    } catch (const NumericError&) {
      report.pref_prof_pearson.reset();
    }
  }
  for (int s = 0; s < kNumStages; ++s) {
    if (stage_golds[s].empty()) continue;
    const auto stage_cm = metrics::confusion(stage_preds[s], stage_golds[s]);
    if (stage_cm.total() == 0) continue;
    report.weighted_f1[s] = metrics::weighted_f1(stage_cm);
  }
  if (text_count > 0) {
    const double denom = static_cast<double>(text_count);
    report.bleu2 = 100.0 * bleu2_sum / denom;
    report.bleu4 = 100.0 * bleu4_sum / denom;
    report.rouge_l = 100.0 * rouge_sum / denom;
    report.distinct1 = 100.0 * textmetrics::distinct_n(hyps, 1);
    report.distinct2 = 100.0 * textmetrics::distinct_n(hyps, 2);
  }
  return report;
}

std::string report_to_json(const Report& report) {
  return report_to_json_value(report).dump(2);
}

Report report_from_json(std::string_view json_text) {
  json in;
  try {
    in = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("report parse error: ") + e.what());
  }
  return report_from_json_value(in);
}

void emit_tables(std::span<const Report> reports,
                 const std::filesystem::path& dir,
                 std::span<const TableFormat> formats) {
  std::filesystem::create_directories(dir);
  for (TableFormat format : formats) {
    switch (format) {
      case TableFormat::kJson: {
        json array = json::array();
        for (const Report& r : reports) array.push_back(report_to_json_value(r));
        write_file(dir / "report.json", array.dump(2) + "\n");
        break;
      }
      case TableFormat::kCsv:
        write_file(dir / "report.csv", render_csv(reports));
        break;
      case TableFormat::kMarkdown:
        write_file(dir / "report.md", render_markdown(reports));
        break;
    }
  }
}

void human_eval_pack(std::span<const EvalRunRecord> run_a,
                     std::span<const EvalRunRecord> run_b,
                     const corpus::TestSets& sets, int n, std::uint64_t seed,
                     const std::filesystem::path& dir) {
  if (n <= 0) throw ContractViolation("human_eval_pack: n must be positive");

  const auto index_responses =
      [](std::span<const EvalRunRecord> records) {
        std::map<std::string, const EvalRunRecord*> by_instance;
        for (const EvalRunRecord& record : records) {
          if (record.terminal && record.parsed_utterance) {
            by_instance[record.instance_id] = &record;
          }
        }
        return by_instance;
      };
  const auto responses_a = index_responses(run_a);
  const auto responses_b = index_responses(run_b);

  std::map<std::string, const corpus::TestInstance*> instances;
  for (int s = 0; s < kNumStages; ++s) {
    for (const corpus::TestInstance& instance : sets.sets[s]) {
      instances[instance.instance_id] = &instance;
    }
  }

  // Shared instances with a usable response in both runs, per stage and
  // gold strategy.
  std::array<std::map<int, std::vector<const corpus::TestInstance*>>,
             kNumStages>
      cells;
  std::array<std::size_t, kNumStages> stage_avail{};
  for (const auto& [id, record] : responses_a) {
    if (!responses_b.contains(id)) continue;
    auto it = instances.find(id);
    if (it == instances.end()) continue;
    const corpus::TestInstance* instance = it->second;
    cells[static_cast<int>(instance->stage)]
        [static_cast<int>(instance->gold_strategy)]
            .push_back(instance);
    ++stage_avail[static_cast<int>(instance->stage)];
  }

  // Stage quotas: largest remainder over equal thirds.
  std::array<int, kNumStages> stage_quota{};
  int assigned = 0;
  for (int s = 0; s < kNumStages; ++s) {
    stage_quota[s] = n / kNumStages;
    assigned += stage_quota[s];
  }
  for (int s = 0; assigned < n; s = (s + 1) % kNumStages) {
    ++stage_quota[s];
    ++assigned;
  }
  for (int s = 0; s < kNumStages; ++s) {
    if (static_cast<std::size_t>(stage_quota[s]) > stage_avail[s]) {
      throw ConfigError(
          "human_eval_pack: insufficient shared instances for stage " +
          stage_name(static_cast<Stage>(s)) + " (need " +
          std::to_string(stage_quota[s]) + ", have " +
          std::to_string(stage_avail[s]) + ")");
    }
  }

  Rng rng(derive_seed(seed, "human-eval-pack"));
  struct Sample {
    const corpus::TestInstance* instance;
    bool a_is_run_a;
  };
  std::vector<Sample> samples;
  for (int s = 0; s < kNumStages; ++s) {
    // Strategy quotas within the stage: largest remainder proportional to
    // availability.
    std::vector<std::pair<int, std::vector<const corpus::TestInstance*>>>
        stage_cells(cells[s].begin(), cells[s].end());
    const double total = static_cast<double>(stage_avail[s]);
    std::vector<int> alloc(stage_cells.size(), 0);
    std::vector<double> fraction(stage_cells.size(), 0.0);
    int given = 0;
    for (std::size_t c = 0; c < stage_cells.size(); ++c) {
      const double quota =
          stage_quota[s] * static_cast<double>(stage_cells[c].second.size()) /
          total;
      alloc[c] = static_cast<int>(quota);
      fraction[c] = quota - alloc[c];
      given += alloc[c];
    }
    std::vector<std::size_t> by_fraction(stage_cells.size());
    for (std::size_t c = 0; c < by_fraction.size(); ++c) by_fraction[c] = c;
    std::stable_sort(by_fraction.begin(), by_fraction.end(),
                     [&](std::size_t a, std::size_t b) {
                       return fraction[a] > fraction[b];
                     });
    for (std::size_t k = 0; given < stage_quota[s];
         k = (k + 1) % by_fraction.size()) {
      const std::size_t c = by_fraction[k];
      if (alloc[c] <
          static_cast<int>(stage_cells[c].second.size())) {
        ++alloc[c];
        ++given;
      }
    }
    for (std::size_t c = 0; c < stage_cells.size(); ++c) {
      auto& pool = stage_cells[c].second;
      std::sort(pool.begin(), pool.end(),
                [](const corpus::TestInstance* a,
                   const corpus::TestInstance* b) {
                  return a->instance_id < b->instance_id;
                });
      rng.shuffle(pool);
      for (int k = 0; k < alloc[c]; ++k) {
        samples.push_back(Sample{pool[k], rng.next() % 2 == 0});
      }
    }
  }

  std::filesystem::create_directories(dir);
  json criteria = json::object();
  for (const CriterionText& criterion : kCriteria) {
    criteria[criterion.key] = criterion.question;
  }
  json rubric = json::array();
  for (const char* line : kLikertRubric) rubric.push_back(line);

  std::string packet_jsonl;
  std::string packet_md =
      "# Response comparison packet\n\n"
      "For each sample, read the dialogue background and context, then the "
      "two candidate supporter responses. For every criterion, mark Win (A), "
      "Tie, or Win (B), and rate each response on the 1-5 scale below.\n\n";
  for (const CriterionText& criterion : kCriteria) {
    packet_md += std::string("- **") + criterion.key + "**: " +
                 criterion.question + "\n";
  }
  packet_md += "\nRating rubric:\n";
  for (const char* line : kLikertRubric) {
    packet_md += std::string("- ") + line + "\n";
  }
  packet_md += "\n";

  json key;
  key["samples"] = json::object();
  std::size_t counter = 0;
  for (const Sample& sample : samples) {
    char sid[16];
    std::snprintf(sid, sizeof(sid), "s%04zu", counter++);
    const corpus::TestInstance& instance = *sample.instance;
    const EvalRunRecord* record_a = responses_a.at(instance.instance_id);
    const EvalRunRecord* record_b = responses_b.at(instance.instance_id);
    const std::string response_a = sample.a_is_run_a
                                       ? *record_a->parsed_utterance
                                       : *record_b->parsed_utterance;
    const std::string response_b = sample.a_is_run_a
                                       ? *record_b->parsed_utterance
                                       : *record_a->parsed_utterance;
    json entry;
    entry["sample_id"] = sid;
    entry["background"] = {
        {"emotion_type", instance.background.emotion_type},
        {"problem_type", instance.background.problem_type},
        {"situation", instance.background.situation},
    };
    entry["context"] = context_to_json(instance);
    entry["response_a"] = response_a;
    entry["response_b"] = response_b;
    entry["criteria"] = criteria;
    entry["likert_rubric"] = rubric;
    json blank = json::object();
    for (const CriterionText& criterion : kCriteria) {
      blank[criterion.key] = nullptr;
    }
    entry["win_tie_lose"] = blank;
    entry["rating_a"] = blank;
    entry["rating_b"] = blank;
    packet_jsonl += entry.dump() + "\n";

    packet_md += std::string("## Sample ") + sid + "\n\n";
    packet_md += "Background: " + instance.background.situation + "\n\n";
    packet_md += "Context:\n\n";
    for (std::size_t t = 0; t + 1 < instance.context.size(); ++t) {
      const corpus::Turn& turn = instance.context[t];
      packet_md += std::string("> ") +
                   (turn.speaker == corpus::Speaker::kSeeker ? "seeker: "
                                                             : "supporter: ") +
                   turn.utterance + "\n";
    }
    packet_md += "\nResponse A: " + response_a + "\n\n";
    packet_md += "Response B: " + response_b + "\n\n";
    packet_md +=
        "| Criterion | Win (A) / Tie / Win (B) | Rating A (1-5) | Rating B "
        "(1-5) |\n|---|---|---|---|\n";
    for (const CriterionText& criterion : kCriteria) {
      packet_md += std::string("| ") + criterion.key + " |  |  |  |\n";
    }
    packet_md += "\n";

    key["samples"][sid] = {
        {"instance_id", instance.instance_id},
        {"A", sample.a_is_run_a ? "run_a" : "run_b"},
        {"B", sample.a_is_run_a ? "run_b" : "run_a"},
    };
  }
  key["run_a_method"] =
      run_a.empty() ? std::string() : std::string(run_a.front().method);
  key["run_b_method"] =
      run_b.empty() ? std::string() : std::string(run_b.front().method);

  write_file(dir / "packet.jsonl", packet_jsonl);
  write_file(dir / "packet.md", packet_md);
  write_file(dir / "sealed_key.json", key.dump(2) + "\n");
}

}  // namespace esceval::report
