/* ke — schema-guided knowledge extraction pipeline, C API.
 *
 * The engine is an opaque handle configured from JSON. Calls return a status
 * code and, on success, a heap-allocated JSON string the caller releases with
 * ke_string_free(). On failure ke_engine_last_error() describes what happened.
 * Status values double as CLI exit codes.
 */
#ifndef KE_H
#define KE_H

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ke_status {
    KE_OK = 0,
    KE_ERR_USAGE = 2,      /* bad arguments or configuration */
    KE_ERR_INPUT = 3,      /* missing/unreadable/invalid input data */
    KE_ERR_BACKEND = 4,    /* LLM backend failure (auth, transport, fixture miss) */
    KE_ERR_EXTRACTION = 5, /* extraction failed on every chunk */
    KE_ERR_INTERNAL = 6
} ke_status;

typedef struct ke_engine ke_engine;

const char* ke_version(void);

/* config_json may be NULL or "{}" for defaults; see ke.config.json keys. */
ke_status ke_engine_open(const char* config_json, ke_engine** out_engine);
void ke_engine_close(ke_engine* engine);

/* Message for the most recent failing call on this engine. Owned by the
 * engine; valid until the next call. */
const char* ke_engine_last_error(ke_engine* engine);

/* request: {"instruction", "input" | "text", "format"?, "task_kind"?,
 *           "schema_id"?, "gold"? | "gold_path"?, "update_cases"?}
 * response: {"answer", "schema": {"id","provenance","definition"},
 *            "chunks": [...], "trace": [...], "timing_ms"} */
ke_status ke_extract(ke_engine* engine, const char* request_json, char** out_json);

/* request: {"dataset": "crossner"|"nyt11", "path", "modes": ["base",...]}
 * response: ablation report plus a rendered "table" string. */
ke_status ke_eval_run(ke_engine* engine, const char* request_json, char** out_json);

ke_status ke_schema_list(ke_engine* engine, char** out_json);
ke_status ke_schema_show(ke_engine* engine, const char* schema_id, char** out_json);
/* Adds a schema definition (JSON text); response: {"id": ...}. */
ke_status ke_schema_add(ke_engine* engine, const char* definition_json, char** out_json);

ke_status ke_cases_stats(ke_engine* engine, char** out_json);
ke_status ke_cases_export(ke_engine* engine, const char* dest_path, char** out_json);

void ke_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* KE_H */
