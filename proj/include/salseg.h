/*
 * salseg — saliency-driven foreground/background segmentation pipeline.
 *
 * C API over the C++ core. A session wraps one loaded configuration; every
 * operation reports a status code and keeps its message retrievable through
 * salseg_last_error(). The library never prints; callers own the output.
 */
#ifndef SALSEG_H
#define SALSEG_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef struct salseg_session salseg_session; /* opaque */

typedef enum salseg_status {
    SALSEG_OK = 0,
    SALSEG_CONFIG_ERROR = 1, /* bad config file, bad flags, refused overwrite */
    SALSEG_RUNTIME_ERROR = 2, /* pipeline failure: shapes, labels, divergence */
    SALSEG_IO_ERROR = 3       /* filesystem problems */
} salseg_status;

const char *salseg_version(void);

/* Opens a session from a flat `key = value` config file. seed_override < 0
 * keeps the file's seed. On failure returns the status and, when errbuf is
 * non-NULL, a NUL-terminated message. */
salseg_status salseg_open(const char *config_path, int64_t seed_override,
                          salseg_session **out, char *errbuf, size_t errbuf_len);

void salseg_close(salseg_session *s);

/* Message of the last failing call on this session; empty string if none. */
const char *salseg_last_error(const salseg_session *s);

/* Summary text of the last successful call (what the CLI prints). */
const char *salseg_last_summary(const salseg_session *s);

/* Writes the synthetic dataset (scene containers, config snapshot, content
 * hash) under out_dir. */
salseg_status salseg_gen_data(salseg_session *s, const char *out_dir);

/* Trains the full pipeline; writes checkpoint.nar, periodic checkpoints and
 * metrics.csv under out_dir. Refuses to overwrite an existing checkpoint
 * unless force is nonzero. */
salseg_status salseg_train(salseg_session *s, const char *out_dir, int force);

/* Evaluates a checkpoint on the session's dataset; writes eval.csv. miou_out
 * may be NULL. */
salseg_status salseg_eval(salseg_session *s, const char *checkpoint_path,
                          const char *out_dir, double *miou_out);

/* suite: "disentanglement" | "k_sweep" | "aggregation". taxonomy_path may be
 * NULL except for the disentanglement suite. Writes <suite>.csv. */
salseg_status salseg_ablate(salseg_session *s, const char *suite,
                            const char *taxonomy_path, const char *out_dir);

/* Parameter count, multiply-accumulate estimate and forward timings,
 * including the saliency-path share; writes efficiency.csv/.txt. */
salseg_status salseg_report_efficiency(salseg_session *s, const char *out_dir);

/* kind: "saliency" | "correlation" | "partition" | "prediction".
 * class_name may be NULL for kind "prediction". */
salseg_status salseg_visualize(salseg_session *s, const char *checkpoint_path,
                               int scene_index, const char *class_name,
                               const char *kind, const char *out_dir);

#ifdef __cplusplus
}
#endif

#endif /* SALSEG_H */
