/* SPDX-License-Identifier: Apache-2.0 */
#ifndef SYNTHAUG_SYNTHAUG_H
#define SYNTHAUG_SYNTHAUG_H

#include <stddef.h>

#if defined(SYNTHAUG_BUILDING)
#define SA_API __attribute__((visibility("default")))
#else
#define SA_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sa_status {
    SA_OK = 0,
    SA_ERR_CONFIG = 2,    /* bad configuration or usage */
    SA_ERR_DATA = 3,      /* malformed or insufficient data, divergent training */
    SA_ERR_PROVIDER = 4,  /* transport, credential or content failure */
    SA_ERR_SHORTFALL = 5, /* augmentation yield below the minimum */
    SA_ERR_INVALID_ARGUMENT = 64,
    SA_ERR_INTERNAL = 70
} sa_status;

typedef enum sa_match_kind { SA_MATCH_EXACT = 0, SA_MATCH_NORMALIZED = 1, SA_MATCH_INVALID = 2 } sa_match_kind;

typedef struct sa_pipeline sa_pipeline;
typedef struct sa_report sa_report;

typedef void (*sa_progress_fn)(const char *message, void *user_data);

SA_API const char *sa_version(void);
SA_API const char *sa_status_name(sa_status status);
/* Message of the last failed call on this thread; "" when none. */
SA_API const char *sa_last_error(void);
/* Frees strings returned through char ** out-parameters. */
SA_API void sa_string_free(char *s);

/* Pipeline ---------------------------------------------------------------- */

SA_API sa_status sa_pipeline_open(const char *config_path, sa_pipeline **out);
/* Relative paths in the config resolve against base_dir (may be NULL for "."). */
SA_API sa_status sa_pipeline_open_json(const char *config_json, const char *base_dir, sa_pipeline **out);
/* Dotted-key override, e.g. ("train.epochs", "3"). The value is read as JSON
 * when it parses and as a string otherwise. */
SA_API sa_status sa_pipeline_set_option(sa_pipeline *p, const char *key, const char *value);
SA_API sa_status sa_pipeline_set_progress(sa_pipeline *p, sa_progress_fn fn, void *user_data);
SA_API void sa_pipeline_close(sa_pipeline *p);

/* Each verb may return a JSON summary through *summary (NULL to skip). */
SA_API sa_status sa_pipeline_split(sa_pipeline *p, int force, char **summary);
/* strategy and model may be NULL for every configured value. */
SA_API sa_status sa_pipeline_augment(sa_pipeline *p, const char *strategy, const char *model, char **summary);
SA_API sa_status sa_pipeline_curve(sa_pipeline *p, char **summary);
SA_API sa_status sa_pipeline_zeroshot(sa_pipeline *p, const char *model, char **summary);
SA_API sa_status sa_pipeline_cost(sa_pipeline *p, char **summary);
/* Report over a predictions file, using the pipeline's task schema. */
SA_API sa_status sa_pipeline_report(const sa_pipeline *p, const char *predictions_path, sa_report **out);

/* Reports ----------------------------------------------------------------- */

SA_API sa_status sa_report_from_labels(const char *const *gold, const char *const *predicted, size_t n,
                                       sa_report **out);
/* Predictions file against a built-in task ("sentiment", "hate_speech", "social_dimensions"). */
SA_API sa_status sa_report_from_predictions(const char *predictions_path, const char *task_id, sa_report **out);
/* Averages recomputed from per-class rows: [{label, precision, recall, f1, support}, ...]. */
SA_API sa_status sa_report_from_rows_json(const char *rows_json, sa_report **out);
/* A report previously rendered with sa_report_render_json. */
SA_API sa_status sa_report_from_json(const char *report_json, sa_report **out);
SA_API void sa_report_free(sa_report *r);

SA_API size_t sa_report_class_count(const sa_report *r);
/* label stays valid until the report is freed. */
SA_API sa_status sa_report_class(const sa_report *r, size_t index, const char **label, double *precision,
                                 double *recall, double *f1, size_t *support);
SA_API double sa_report_accuracy(const sa_report *r);
SA_API void sa_report_macro(const sa_report *r, double *precision, double *recall, double *f1);
SA_API void sa_report_weighted(const sa_report *r, double *precision, double *recall, double *f1);
SA_API size_t sa_report_total_support(const sa_report *r);
SA_API size_t sa_report_invalid_count(const sa_report *r);
SA_API sa_status sa_report_render_text(const sa_report *r, char **out);
SA_API sa_status sa_report_render_json(const sa_report *r, char **out);
/* Number of cells differing by more than tolerance; details as a JSON array. */
SA_API sa_status sa_report_compare(const sa_report *a, const sa_report *b, double tolerance, size_t *differences,
                                   char **details);

/* Labels ------------------------------------------------------------------ */

/* Maps a free-text reply onto a built-in task's labels; *label is "<invalid>"
 * when no single label matches. */
SA_API sa_status sa_coerce_label(const char *task_id, const char *reply, char **label, sa_match_kind *kind);

#ifdef __cplusplus
}
#endif

#endif /* SYNTHAUG_SYNTHAUG_H */
