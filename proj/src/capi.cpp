#include "ke/ke.h"

#include "ke/error.hpp"
#include "ke/eval.hpp"
#include "ke/ingest.hpp"
#include "ke/pipeline.hpp"
#include "ke/util.hpp"

#include <cstring>
#include <memory>
#include <string>

using ke::json;

struct ke_engine {
    std::unique_ptr<ke::Engine> impl;
    std::string last_error;
};

namespace {

constexpr const char* kVersion = "0.1.0";

ke_status status_for(ke::ErrorCode code) {
    using EC = ke::ErrorCode;
    switch (code) {
        case EC::invalid_argument:
            return KE_ERR_USAGE;
        case EC::not_found:
        case EC::unsupported_format:
        case EC::empty_after_extraction:
        case EC::malformed_definition:
        case EC::invalid_schema:
        case EC::unknown_schema_id:
        case EC::malformed_line:
        case EC::invalid_record:
        case EC::schema_mismatch:
        case EC::persistence_error:
            return KE_ERR_INPUT;
        case EC::auth_error:
        case EC::rate_limited:
        case EC::timeout:
        case EC::fixture_miss:
        case EC::backend_error:
        case EC::empty_generation:
        case EC::deduction_parse_failure:
            return KE_ERR_BACKEND;
        case EC::no_valid_candidate:
        case EC::extraction_failed:
            return KE_ERR_EXTRACTION;
        case EC::dim_mismatch:
        case EC::internal:
            return KE_ERR_INTERNAL;
    }
    return KE_ERR_INTERNAL;
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out) std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

template <typename Fn>
ke_status guarded(ke_engine* engine, char** out_json, Fn&& fn) {
    if (!engine || !engine->impl) return KE_ERR_USAGE;
    if (out_json) *out_json = nullptr;
    try {
        std::string result = fn();
        if (out_json) *out_json = dup_string(result);
        engine->last_error.clear();
        return KE_OK;
    } catch (const ke::Error& e) {
        engine->last_error = e.what();
        return status_for(e.code());
    } catch (const std::exception& e) {
        engine->last_error = e.what();
        return KE_ERR_INTERNAL;
    }
}

json parse_request(const char* request_json) {
    if (!request_json) return json::object();
    json j = json::parse(request_json, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw ke::Error(ke::ErrorCode::invalid_argument, "request must be a JSON object");
    }
    return j;
}

json run_to_json(const ke::PipelineRun& run) {
    json chunks = json::array();
    for (const auto& r : run.chunk_results) {
        json c;
        c["answer"] = r.answer;
        c["reflected"] = r.reflected;
        c["agreement"] = r.preliminary_agreement;
        c["bad_cases_used"] = r.bad_cases_used;
        if (r.warning) c["warning"] = *r.warning;
        chunks.push_back(std::move(c));
    }
    json schema;
    schema["id"] = run.schema_id;
    schema["provenance"] = ke::schema_provenance_name(run.provenance);
    schema["definition"] = json::parse(ke::serialize_schema(run.schema));

    json out;
    out["answer"] = run.merged_answer;
    out["schema"] = std::move(schema);
    out["chunks"] = std::move(chunks);
    out["trace"] = run.trace;
    out["timing_ms"] = run.total_ms;
    return out;
}

}  // namespace

extern "C" {

const char* ke_version(void) { return kVersion; }

ke_status ke_engine_open(const char* config_json, ke_engine** out_engine) {
    if (!out_engine) return KE_ERR_USAGE;
    *out_engine = nullptr;
    auto handle = std::make_unique<ke_engine>();
    try {
        ke::PipelineConfig config;
        if (config_json && *config_json) {
            json j = json::parse(config_json, nullptr, false);
            if (j.is_discarded() || !j.is_object()) {
                throw ke::Error(ke::ErrorCode::invalid_argument, "config must be a JSON object");
            }
            config = ke::config_from_json(j);
        }
        ke::validate_config(config);
        handle->impl = std::make_unique<ke::Engine>(std::move(config));
    } catch (const ke::Error& e) {
        return status_for(e.code());
    } catch (const std::exception&) {
        return KE_ERR_INTERNAL;
    }
    *out_engine = handle.release();
    return KE_OK;
}

void ke_engine_close(ke_engine* engine) { delete engine; }

const char* ke_engine_last_error(ke_engine* engine) {
    return engine ? engine->last_error.c_str() : "";
}

ke_status ke_extract(ke_engine* engine, const char* request_json, char** out_json) {
    return guarded(engine, out_json, [&] {
        json req = parse_request(request_json);
        ke::ExtractionTask task;
        task.instruction = req.value("instruction", "");
        if (req.contains("task_kind")) {
            auto kind = ke::task_kind_from_name(req["task_kind"].get<std::string>());
            if (!kind) {
                throw ke::Error(ke::ErrorCode::invalid_argument,
                                "unknown task_kind '" + req["task_kind"].get<std::string>() + "'");
            }
            task.task_kind = *kind;
        }
        if (req.contains("schema_id")) task.schema_id = req["schema_id"].get<std::string>();

        if (req.contains("text")) {
            task.document.source_id = req.value("source_id", "inline");
            task.document.format = ke::DocFormat::plain_text;
            task.document.text = req["text"].get<std::string>();
            task.document.raw_bytes_len = task.document.text.size();
        } else if (req.contains("input")) {
            std::optional<ke::DocFormat> hint;
            if (req.contains("format")) {
                hint = ke::doc_format_from_name(req["format"].get<std::string>());
                if (!hint) {
                    throw ke::Error(ke::ErrorCode::invalid_argument,
                                    "unknown format '" + req["format"].get<std::string>() + "'");
                }
            }
            task.document = ke::load_document(req["input"].get<std::string>(), hint);
        } else {
            throw ke::Error(ke::ErrorCode::invalid_argument,
                            "request needs 'input' (path or URL) or 'text'");
        }

        ke::RunOptions options;
        if (req.contains("update_cases")) options.update_cases = req["update_cases"].get<bool>();
        if (req.contains("gold")) {
            options.gold = req["gold"];
        } else if (req.contains("gold_path")) {
            json gold = json::parse(ke::read_text_file(req["gold_path"].get<std::string>()),
                                    nullptr, false);
            if (gold.is_discarded()) {
                throw ke::Error(ke::ErrorCode::malformed_definition,
                                "gold file is not valid JSON");
            }
            options.gold = std::move(gold);
        }

        ke::PipelineRun run = engine->impl->run_extract(std::move(task), options);
        return run_to_json(run).dump();
    });
}

ke_status ke_eval_run(ke_engine* engine, const char* request_json, char** out_json) {
    return guarded(engine, out_json, [&] {
        json req = parse_request(request_json);
        std::string dataset = req.value("dataset", "");
        std::string path = req.value("path", "");
        if (path.empty()) {
            throw ke::Error(ke::ErrorCode::invalid_argument, "eval request needs 'path'");
        }

        std::vector<ke::GoldInstance> instances;
        ke::TaskKind kind;
        if (dataset == "crossner") {
            instances = ke::load_crossner(path);
            kind = ke::TaskKind::NER;
        } else if (dataset == "nyt11") {
            instances = ke::load_nyt11(path);
            kind = ke::TaskKind::RE;
        } else {
            throw ke::Error(ke::ErrorCode::invalid_argument,
                            "dataset must be 'crossner' or 'nyt11'");
        }

        std::vector<ke::AblationMode> modes;
        if (req.contains("modes")) {
            for (const auto& m : req["modes"]) {
                auto mode = ke::ablation_mode_from_name(m.get<std::string>());
                if (!mode) {
                    throw ke::Error(ke::ErrorCode::invalid_argument,
                                    "unknown mode '" + m.get<std::string>() + "'");
                }
                modes.push_back(*mode);
            }
        } else {
            modes = {ke::AblationMode::base, ke::AblationMode::with_retrieval,
                     ke::AblationMode::with_retrieval_and_reflection};
        }

        json report = ke::run_ablation(*engine->impl, instances, kind, modes);
        report["dataset"] = dataset;
        report["path"] = path;
        report["table"] = ke::render_report_table(report);
        return report.dump();
    });
}

ke_status ke_schema_list(ke_engine* engine, char** out_json) {
    return guarded(engine, out_json, [&] { return engine->impl->schema_list().dump(); });
}

ke_status ke_schema_show(ke_engine* engine, const char* schema_id, char** out_json) {
    return guarded(engine, out_json, [&] {
        if (!schema_id) {
            throw ke::Error(ke::ErrorCode::invalid_argument, "schema id is required");
        }
        return engine->impl->schema_show(schema_id).dump();
    });
}

ke_status ke_schema_add(ke_engine* engine, const char* definition_json, char** out_json) {
    return guarded(engine, out_json, [&] {
        if (!definition_json) {
            throw ke::Error(ke::ErrorCode::invalid_argument, "schema definition is required");
        }
        std::string id = engine->impl->schema_add(definition_json);
        return json{{"id", id}}.dump();
    });
}

ke_status ke_cases_stats(ke_engine* engine, char** out_json) {
    return guarded(engine, out_json, [&] { return engine->impl->cases_stats().dump(); });
}

ke_status ke_cases_export(ke_engine* engine, const char* dest_path, char** out_json) {
    return guarded(engine, out_json, [&] {
        if (!dest_path) {
            throw ke::Error(ke::ErrorCode::invalid_argument, "export path is required");
        }
        engine->impl->cases_export(dest_path);
        return json{{"exported_to", dest_path}}.dump();
    });
}

void ke_string_free(char* s) { std::free(s); }

}  // extern "C"
