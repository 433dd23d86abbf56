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
// extern-C surface over the C++ core: opaque handles in, error codes out.

#include "esceval.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "esceval/corpus.hpp"
#include "esceval/errors.hpp"
#include "esceval/harness.hpp"
#include "esceval/metrics.hpp"
#include "esceval/report.hpp"

namespace {

thread_local std::string g_last_error;

void set_error(const std::string& message) { g_last_error = message; }

// Maps the C++ error taxonomy onto the C status codes.
template <typename Fn>
esc_status wrap(Fn&& fn) {
  try {
    fn();
    return ESC_OK;
  } catch (const esceval::IoError& e) {
    set_error(e.what());
    return ESC_ERR_IO;
  } catch (const esceval::FormatError& e) {
    set_error(e.what());
    return ESC_ERR_FORMAT;
  } catch (const esceval::ContractViolation& e) {
    set_error(e.what());
    return ESC_ERR_CONTRACT;
  } catch (const esceval::ConfigError& e) {
    set_error(e.what());
    return ESC_ERR_CONFIG;
  } catch (const esceval::EndpointError& e) {
    set_error(e.what());
    return ESC_ERR_ENDPOINT;
  } catch (const esceval::NumericError& e) {
    set_error(e.what());
    return ESC_ERR_NUMERIC;
  } catch (const std::exception& e) {
    set_error(e.what());
    return ESC_ERR_CONTRACT;
  }
}

esc_status require(bool condition, const char* message) {
  if (condition) return ESC_OK;
  set_error(message);
  return ESC_ERR_ARGUMENT;
}

char* copy_string(const std::string& text) {
  char* out = static_cast<char*>(std::malloc(text.size() + 1));
  std::memcpy(out, text.c_str(), text.size() + 1);
  return out;
}

std::string read_text_file(const char* path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw esceval::IoError(std::string("cannot open ") + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

struct esc_corpus {
  std::vector<esceval::corpus::Dialogue> dialogues;
};

struct esc_testsets {
  esceval::corpus::TestSets sets;
};

struct esc_report {
  esceval::report::Report report;
};

extern "C" {

const char* esc_last_error(void) { return g_last_error.c_str(); }

void esc_string_free(char* text) { std::free(text); }

esc_status esc_corpus_load(const char* path, esc_corpus** out) {
  if (esc_status s = require(path && out, "esc_corpus_load: null argument"))
    return s;
  return wrap([&] {
    auto handle = std::make_unique<esc_corpus>();
    handle->dialogues = esceval::corpus::load_corpus(path);
    *out = handle.release();
  });
}

void esc_corpus_free(esc_corpus* corpus) { delete corpus; }

int esc_corpus_size(const esc_corpus* corpus) {
  return corpus ? static_cast<int>(corpus->dialogues.size()) : 0;
}

esc_status esc_testsets_build(const esc_corpus* corpus, uint64_t seed,
                              double others_cap, const char* stage_mapping,
                              esc_testsets** out) {
  if (esc_status s = require(corpus && out, "esc_testsets_build: null argument"))
    return s;
  return wrap([&] {
    const auto mapping = stage_mapping != nullptr
                             ? esceval::StageMapping::parse(stage_mapping)
                             : esceval::StageMapping::standard();
    auto handle = std::make_unique<esc_testsets>();
    handle->sets = esceval::corpus::build_test_sets(corpus->dialogues, seed,
                                                    mapping, others_cap);
    *out = handle.release();
  });
}

esc_status esc_testsets_save(const esc_testsets* sets, const char* dir) {
  if (esc_status s = require(sets && dir, "esc_testsets_save: null argument"))
    return s;
  return wrap([&] { esceval::corpus::save_test_sets(sets->sets, dir); });
}

esc_status esc_testsets_load(const char* dir, esc_testsets** out) {
  if (esc_status s = require(dir && out, "esc_testsets_load: null argument"))
    return s;
  return wrap([&] {
    auto handle = std::make_unique<esc_testsets>();
    handle->sets = esceval::corpus::load_test_sets(dir);
    *out = handle.release();
  });
}

void esc_testsets_free(esc_testsets* sets) { delete sets; }

esc_status esc_testsets_sizes(const esc_testsets* sets, int64_t sizes[3]) {
  if (esc_status s = require(sets && sizes, "esc_testsets_sizes: null argument"))
    return s;
  for (int i = 0; i < ESC_STAGE_COUNT; ++i) {
    sizes[i] = static_cast<int64_t>(sets->sets.sets[i].size());
  }
  return ESC_OK;
}

esc_status esc_testsets_stats_json(const esc_testsets* sets, char** out_json) {
  if (esc_status s =
          require(sets && out_json, "esc_testsets_stats_json: null argument"))
    return s;
  return wrap([&] {
    nlohmann::json out = nlohmann::json::object();
    const char* keys[ESC_STAGE_COUNT] = {"D1", "D2", "D3"};
    for (int i = 0; i < ESC_STAGE_COUNT; ++i) {
      const auto stats = esceval::corpus::corpus_stats(sets->sets.sets[i]);
      nlohmann::json entry;
      entry["stage"] =
          esceval::stage_name(static_cast<esceval::Stage>(i));
      entry["samples"] = stats.samples;
      entry["dialogues"] = stats.dialogues;
      entry["avg_turns"] = stats.avg_turns;
      entry["avg_utterance_len"] = stats.avg_utterance_len;
      nlohmann::json ratios = nlohmann::json::object();
      for (esceval::Strategy strat : esceval::all_strategies()) {
        ratios[esceval::strategy_name(strat)] =
            stats.strategy_ratio[static_cast<int>(strat)];
      }
      entry["strategy_ratio"] = std::move(ratios);
      out[keys[i]] = std::move(entry);
    }
    *out_json = copy_string(out.dump(2));
  });
}

esc_status esc_run(const esc_testsets* sets, const char* method_json,
                   const char* endpoint_config_path, uint64_t seed, int limit,
                   const char* records_out_path, char** out_summary_json) {
  if (esc_status s =
          require(sets && method_json && endpoint_config_path &&
                      records_out_path,
                  "esc_run: null argument"))
    return s;
  return wrap([&] {
    const auto method = esceval::harness::Method::from_json(method_json);
    const auto endpoint =
        esceval::harness::EndpointConfig::from_file(endpoint_config_path);
    std::vector<esceval::corpus::TestInstance> all;
    for (int i = 0; i < ESC_STAGE_COUNT; ++i) {
      all.insert(all.end(), sets->sets.sets[i].begin(),
                 sets->sets.sets[i].end());
    }
    esceval::harness::RunOptions options;
    options.params = endpoint.gen_params();
    options.seed = seed;
    options.limit = limit;
    options.records_path = records_out_path;
    const auto records =
        esceval::harness::run_method(method, all, endpoint, options);
    if (out_summary_json != nullptr) {
      std::int64_t terminal = 0, ok = 0, invalid = 0, malformed = 0;
      for (const auto& record : records) {
        if (!record.terminal) continue;
        ++terminal;
        switch (record.parse_status) {
          case esceval::harness::ParseStatus::kOk: ++ok; break;
          case esceval::harness::ParseStatus::kInvalidStrategy:
            ++invalid;
            break;
          case esceval::harness::ParseStatus::kMalformed: ++malformed; break;
        }
      }
      nlohmann::json summary;
      summary["records"] = records.size();
      summary["terminal"] = terminal;
      summary["parse_status"] = {{"ok", ok},
                                 {"invalid_strategy", invalid},
                                 {"malformed", malformed}};
      summary["invalid_rate"] =
          terminal > 0
              ? 100.0 * static_cast<double>(invalid + malformed) /
                    static_cast<double>(terminal)
              : 0.0;
      *out_summary_json = copy_string(summary.dump());
    }
  });
}

esc_status esc_score(const char* records_path, const esc_testsets* sets,
                     esc_report** out) {
  if (esc_status s =
          require(records_path && sets && out, "esc_score: null argument"))
    return s;
  return wrap([&] {
    const auto records = esceval::harness::load_records(records_path);
    auto handle = std::make_unique<esc_report>();
    handle->report = esceval::report::score_run(records, sets->sets);
    *out = handle.release();
  });
}

void esc_report_free(esc_report* report) { delete report; }

esc_status esc_report_save_json(const esc_report* report, const char* path) {
  if (esc_status s =
          require(report && path, "esc_report_save_json: null argument"))
    return s;
  return wrap([&] {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw esceval::IoError(std::string("cannot write ") + path);
    out << esceval::report::report_to_json(report->report) << '\n';
  });
}

esc_status esc_report_to_json(const esc_report* report, char** out_json) {
  if (esc_status s =
          require(report && out_json, "esc_report_to_json: null argument"))
    return s;
  return wrap([&] {
    *out_json = copy_string(esceval::report::report_to_json(report->report));
  });
}

esc_status esc_reports_emit(const char* const* report_json_paths, int count,
                            const char* out_dir, const char* formats) {
  if (esc_status s = require(report_json_paths && out_dir && formats &&
                                 count > 0,
                             "esc_reports_emit: null argument"))
    return s;
  return wrap([&] {
    std::vector<esceval::report::Report> reports;
    reports.reserve(count);
    for (int i = 0; i < count; ++i) {
      reports.push_back(esceval::report::report_from_json(
          read_text_file(report_json_paths[i])));
    }
    std::vector<esceval::report::TableFormat> table_formats;
    std::string text = formats;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      std::size_t end = text.find(',', pos);
      if (end == std::string::npos) end = text.size();
      const std::string name = text.substr(pos, end - pos);
      pos = end + 1;
      if (name.empty()) continue;
      if (name == "json") {
        table_formats.push_back(esceval::report::TableFormat::kJson);
      } else if (name == "csv") {
        table_formats.push_back(esceval::report::TableFormat::kCsv);
      } else if (name == "markdown" || name == "md") {
        table_formats.push_back(esceval::report::TableFormat::kMarkdown);
      } else {
        throw esceval::ConfigError("unknown table format: " + name);
      }
    }
    if (table_formats.empty()) {
      throw esceval::ConfigError("no table formats requested");
    }
    esceval::report::emit_tables(reports, out_dir, table_formats);
  });
}

esc_status esc_bt_fit(const double* counts, int n, int max_iterations,
                      double tol, double* out_p, int* out_iterations,
                      double* out_residual) {
  if (esc_status s = require(counts && out_p && n > 0, "esc_bt_fit: null argument"))
    return s;
  return wrap([&] {
    esceval::metrics::ConfusionMatrix cm(n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const double value = counts[static_cast<std::size_t>(i) * n + j];
        if (value < 0 || value != static_cast<std::int64_t>(value)) {
          throw esceval::ContractViolation(
              "esc_bt_fit: counts must be non-negative integers");
        }
        cm.add(i, j, static_cast<std::int64_t>(value));
      }
    }
    const auto fit = esceval::metrics::bt_fit(
        cm, max_iterations > 0 ? max_iterations : 20, tol > 0 ? tol : 1e-10);
    for (int i = 0; i < n; ++i) out_p[i] = fit.p[i];
    if (out_iterations != nullptr) *out_iterations = fit.iterations_run;
    if (out_residual != nullptr) *out_residual = fit.stationarity_residual;
  });
}

esc_status esc_preference_bias(const double* p, int n, double* out_bias) {
  if (esc_status s =
          require(p && out_bias && n > 0, "esc_preference_bias: null argument"))
    return s;
  return wrap([&] {
    *out_bias = esceval::metrics::preference_bias(
        std::span<const double>(p, static_cast<std::size_t>(n)));
  });
}

esc_status esc_bt_fit_file(const char* confusion_json_path,
                           const char* out_json_path) {
  if (esc_status s = require(confusion_json_path && out_json_path,
                             "esc_bt_fit_file: null argument"))
    return s;
  return wrap([&] {
    const auto cm = esceval::metrics::confusion_from_json(
        read_text_file(confusion_json_path));
    const auto fit = esceval::metrics::bt_fit(cm);
    nlohmann::json out =
        nlohmann::json::parse(esceval::metrics::preference_to_json(fit));
    out["bias"] = esceval::metrics::preference_bias(fit);
    std::ofstream file(out_json_path, std::ios::binary | std::ios::trunc);
    if (!file) {
      throw esceval::IoError(std::string("cannot write ") + out_json_path);
    }
    file << out.dump(2) << '\n';
  });
}

esc_status esc_human_eval_pack(const char* records_a_path,
                               const char* records_b_path,
                               const esc_testsets* sets, int n, uint64_t seed,
                               const char* out_dir) {
  if (esc_status s = require(records_a_path && records_b_path && sets &&
                                 out_dir,
                             "esc_human_eval_pack: null argument"))
    return s;
  return wrap([&] {
    const auto run_a = esceval::harness::load_records(records_a_path);
    const auto run_b = esceval::harness::load_records(records_b_path);
    esceval::report::human_eval_pack(run_a, run_b, sets->sets, n, seed,
                                     out_dir);
  });
}

}  // extern "C"
