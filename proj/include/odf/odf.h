/* C interface to the dataset ledger library.
 *
 * Every call returns a status code; nonzero codes double as the CLI's exit
 * codes. Operations that produce output write a NUL-terminated heap string
 * to *out which the caller releases with odf_string_free. On failure *out
 * is NULL (exception: odf_verify, which returns ODF_E_VERIFY *and* the
 * report) and odf_last_error() carries the message.
 */
#ifndef ODF_H
#define ODF_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#define ODF_OK 0
#define ODF_E_USER 1   /* bad arguments, invalid manifest, unknown dataset */
#define ODF_E_VERIFY 2 /* integrity or reproducibility failure */
#define ODF_E_IO 3     /* filesystem or repository trouble */

/* Output rendering, chosen per call. */
#define ODF_RENDER_TEXT 0 /* human readable */
#define ODF_RENDER_JSON 1 /* one canonical JSON document */

typedef struct odf_workspace odf_workspace;

/* Message for the last failing call on this thread. Never NULL; empty when
 * the last call succeeded. Valid until the next library call on the thread. */
const char* odf_last_error(void);

void odf_string_free(char* s);

/* Create a workspace in `dir` (a .odf directory inside it). */
int odf_workspace_init(const char* dir, odf_workspace** out);

/* Open the workspace governing `start_dir`: the ODF_WORKSPACE environment
 * variable if set, otherwise the nearest ancestor containing .odf. */
int odf_workspace_open(const char* start_dir, odf_workspace** out);

void odf_workspace_close(odf_workspace* ws);

/* Workspace root directory; owned by the handle, do not free. */
const char* odf_workspace_root(const odf_workspace* ws);

/* RFC 3339 UTC text (milliseconds optional) -> Unix milliseconds. */
int odf_parse_time(const char* text, int64_t* out_ms);

/* Register or update a dataset from a YAML manifest file. */
int odf_add(odf_workspace* ws, const char* manifest_path, int64_t now_ms,
            int render, char** out);

/* One polling round for a root dataset. `source_path` overrides the
 * manifest's configured file; pass NULL to use the configuration. */
int odf_ingest(odf_workspace* ws, const char* dataset,
               const char* source_path, int64_t now_ms, int render,
               char** out);

/* Refresh `dataset` and everything it depends on, inputs first. */
int odf_pull(odf_workspace* ws, const char* dataset, int64_t now_ms,
             int render, char** out);

/* The dataset's metadata chain, oldest block first. */
int odf_log(odf_workspace* ws, const char* dataset, int render, char** out);

/* Integrity audit (hashes, links, invariants) over the dataset and its
 * transitive inputs; unless `integrity_only`, also re-executes every
 * transform and byte-compares the results. Returns ODF_E_VERIFY with the
 * report in *out when verification fails. */
int odf_verify(odf_workspace* ws, const char* dataset, int integrity_only,
               int render, char** out);

/* Transitive input graph, inputs before consumers. */
int odf_lineage(odf_workspace* ws, const char* dataset, int render,
                char** out);

/* Which exact input records determined the record at `offset`. */
int odf_trace(odf_workspace* ws, const char* dataset, int64_t offset,
              int render, char** out);

/* Current (or as-of) state. `as_of` is RFC 3339 or NULL for now. */
int odf_project(odf_workspace* ws, const char* dataset, const char* as_of,
                int render, char** out);

/* Manually advance a root dataset's watermark. */
int odf_set_watermark(odf_workspace* ws, const char* dataset,
                      const char* watermark, int64_t now_ms, int render,
                      char** out);

/* Publish the dataset to a repository directory (fast-forward only). */
int odf_push(odf_workspace* ws, const char* dataset, const char* repo,
             int render, char** out);

/* Fetch a dataset from a repository; accepts a local name or a dataset id. */
int odf_pull_remote(odf_workspace* ws, const char* dataset_or_id,
                    const char* repo, int render, char** out);

/* The newest `n` records. */
int odf_tail(odf_workspace* ws, const char* dataset, int64_t n, int render,
             char** out);

#ifdef __cplusplus
}
#endif

#endif /* ODF_H */
