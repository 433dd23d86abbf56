/* Copyright 2026 The esceval Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C interface to the esceval shared library. Handles are opaque; every
 * function returns an esc_status, with ESC_OK (0) on success. On failure,
 * esc_last_error() returns a thread-local description of what went wrong.
 * Strings returned through char** are owned by the caller and must be
 * released with esc_string_free().
 */

#ifndef ESCEVAL_H
#define ESCEVAL_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef int esc_status;

#define ESC_OK 0
#define ESC_ERR_IO 1        /* filesystem failure */
#define ESC_ERR_FORMAT 2    /* malformed input data */
#define ESC_ERR_CONTRACT 3  /* precondition violated */
#define ESC_ERR_CONFIG 4    /* bad run configuration */
#define ESC_ERR_ENDPOINT 5  /* chat endpoint failure */
#define ESC_ERR_NUMERIC 6   /* quantity undefined on this input */
#define ESC_ERR_ARGUMENT 7  /* null pointer / bad argument */

#define ESC_STRATEGY_COUNT 8
#define ESC_STAGE_COUNT 3

typedef struct esc_corpus esc_corpus;
typedef struct esc_testsets esc_testsets;
typedef struct esc_report esc_report;

/* Thread-local message for the most recent failure in this thread. */
const char* esc_last_error(void);

void esc_string_free(char* text);

/* ----- corpus ----- */

esc_status esc_corpus_load(const char* path, esc_corpus** out);
void esc_corpus_free(esc_corpus* corpus);
int esc_corpus_size(const esc_corpus* corpus);

/* stage_mapping: NULL for the standard mapping, or overrides like
 * "Que=Exploration,Oth=-". */
esc_status esc_testsets_build(const esc_corpus* corpus, uint64_t seed,
                              double others_cap, const char* stage_mapping,
                              esc_testsets** out);
esc_status esc_testsets_save(const esc_testsets* sets, const char* dir);
esc_status esc_testsets_load(const char* dir, esc_testsets** out);
void esc_testsets_free(esc_testsets* sets);
/* Sizes of D1, D2, D3 into sizes[0..2]. */
esc_status esc_testsets_sizes(const esc_testsets* sets, int64_t sizes[3]);
/* Per-set statistics (sample counts, avg turns, strategy ratios) as JSON. */
esc_status esc_testsets_stats_json(const esc_testsets* sets, char** out_json);

/* ----- evaluation runs ----- */

/* method_json: {"kind":"vanilla","shots":2,...}; see docs/formats.md.
 * endpoint_config_path: JSON endpoint description; the API key is read
 * from the environment variable it names. limit < 0 runs the full sets.
 * Records are written (and resumed) at records_out_path. When
 * out_summary_json is non-NULL it receives the run summary (record and
 * parse-status counts, invalid rate). */
esc_status esc_run(const esc_testsets* sets, const char* method_json,
                   const char* endpoint_config_path, uint64_t seed, int limit,
                   const char* records_out_path, char** out_summary_json);

/* ----- scoring ----- */

esc_status esc_score(const char* records_path, const esc_testsets* sets,
                     esc_report** out);
void esc_report_free(esc_report* report);
esc_status esc_report_save_json(const esc_report* report, const char* path);
esc_status esc_report_to_json(const esc_report* report, char** out_json);

/* Emits report.json / report.csv / report.md for the listed report files.
 * formats: comma-separated subset of "json,csv,markdown". */
esc_status esc_reports_emit(const char* const* report_json_paths, int count,
                            const char* out_dir, const char* formats);

/* ----- preference fitting ----- */

/* counts: n*n row-major, counts[i*n + j] = times strategy i was predicted
 * when gold was j. Writes n fitted preferences (sum n) to out_p. */
esc_status esc_bt_fit(const double* counts, int n, int max_iterations,
                      double tol, double* out_p, int* out_iterations,
                      double* out_residual);
/* Population standard deviation of a preference vector scaled to mean 1. */
esc_status esc_preference_bias(const double* p, int n, double* out_bias);
/* Fits the confusion matrix stored at confusion_json_path (format of
 * esc_score's confusion section) and writes the preference JSON. */
esc_status esc_bt_fit_file(const char* confusion_json_path,
                           const char* out_json_path);

/* ----- human evaluation ----- */

esc_status esc_human_eval_pack(const char* records_a_path,
                               const char* records_b_path,
                               const esc_testsets* sets, int n, uint64_t seed,
                               const char* out_dir);

#ifdef __cplusplus
}
#endif

#endif /* ESCEVAL_H */
