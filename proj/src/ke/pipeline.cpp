#include "ke/pipeline.hpp"

#include "ke/error.hpp"
#include "ke/util.hpp"

#include <atomic>
#include <chrono>
#include <ctime>
#include <fstream>
#include <set>
#include <thread>

namespace ke {

namespace {

std::string iso8601_utc_now() {
    std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

json make_event(const std::string& stage) {
    json e;
    e["stage"] = stage;
    e["ts"] = iso8601_utc_now();
    return e;
}

bool is_list_kind(ValueKind kind) {
    return kind == ValueKind::text_list || kind == ValueKind::record_list;
}

bool scalar_nonempty(const json& v) {
    if (v.is_null()) return false;
    if (v.is_string()) return !trim(v.get<std::string>()).empty();
    return true;
}

json merge_fields(const std::vector<FieldSpec>& specs, const std::vector<json>& objects,
                  bool lenient, std::vector<std::string>* warnings, const std::string& context) {
    // Unknown keys first: strict mode refuses them, lenient mode drops them.
    for (const auto& obj : objects) {
        for (auto it = obj.begin(); it != obj.end(); ++it) {
            bool known = false;
            for (const auto& spec : specs) {
                if (spec.name == it.key()) { known = true; break; }
            }
            if (!known) {
                if (!lenient) {
                    throw Error(ErrorCode::schema_mismatch,
                                context + ": answer has unknown key '" + it.key() + "'");
                }
                if (warnings) {
                    warnings->push_back(context + ": dropped unknown key '" + it.key() + "'");
                }
            }
        }
    }

    json merged = json::object();
    for (const auto& spec : specs) {
        std::vector<json> values;
        for (const auto& obj : objects) {
            if (obj.contains(spec.name)) values.push_back(obj[spec.name]);
        }
        if (values.empty()) continue;

        if (is_list_kind(spec.kind)) {
            json out = json::array();
            std::set<std::string> seen;
            for (const auto& v : values) {
                if (!v.is_array()) {
                    if (warnings) {
                        warnings->push_back(context + "." + spec.name +
                                            ": expected a list, skipped a non-list value");
                    }
                    continue;
                }
                for (const auto& e : v) {
                    if (seen.insert(e.dump()).second) out.push_back(e);
                }
            }
            merged[spec.name] = std::move(out);
        } else if (spec.kind == ValueKind::record) {
            std::vector<json> sub_objects;
            for (const auto& v : values) {
                if (v.is_object()) sub_objects.push_back(v);
                else if (warnings) {
                    warnings->push_back(context + "." + spec.name +
                                        ": expected an object, skipped a non-object value");
                }
            }
            if (!sub_objects.empty()) {
                merged[spec.name] = merge_fields(spec.children, sub_objects, lenient, warnings,
                                                 context + "." + spec.name);
            }
        } else {
            json chosen = values.front();
            for (const auto& v : values) {
                if (scalar_nonempty(v)) { chosen = v; break; }
            }
            merged[spec.name] = std::move(chosen);
        }
    }
    return merged;
}

}  // namespace

json merge_chunk_results(const std::vector<FinalResult>& results, const OutputSchema& schema,
                         bool lenient, std::vector<std::string>* warnings) {
    std::vector<json> answers;
    for (const auto& r : results) {
        if (r.answer.is_object()) {
            answers.push_back(r.answer);
        } else if (!lenient) {
            throw Error(ErrorCode::schema_mismatch, "chunk answer is not a JSON object");
        } else if (warnings) {
            warnings->push_back("skipped a non-object chunk answer");
        }
    }
    return merge_fields(schema.fields, answers, lenient, warnings, "answer");
}

// ---------------------------------------------------------------------------

Engine::Engine(PipelineConfig config, std::shared_ptr<ChatBackend> chat_override)
    : config_(std::move(config)) {
    validate_config(config_);
    prompts_ = PromptLibrary::load(config_.prompts_dir);
    schemas_ = SchemaRepository::load(config_.schemas_dir);

    if (config_.embedder_kind == "remote") {
        embedder_ = std::make_shared<RemoteEmbedder>(config_.backend);
    } else {
        embedder_ = std::make_shared<LexicalEmbedder>();
    }

    if (chat_override) {
        chat_backend_ = std::move(chat_override);
    } else if (config_.backend_kind == "replay") {
        chat_backend_ = std::make_shared<ReplayChatBackend>(config_.fixture_path);
    } else {
        chat_backend_ = std::make_shared<HttpChatBackend>(config_.backend);
    }
    if (config_.backend_kind == "record") {
        chat_backend_ = std::make_shared<RecordingChatBackend>(
            chat_backend_, config_.backend.chat_model, config_.fixture_path);
    }
    gateway_ = std::make_unique<LlmGateway>(chat_backend_, embedder_, config_.backend.chat_model);
    cases_ = std::make_unique<CaseRepository>(
        config_.cases_dir, [this](const std::string& text) { return gateway_->embed(text); },
        config_.weights, config_.max_cases);
}

Engine::ChunkOutcome Engine::process_chunk(const ExtractionTask& task, const OutputSchema& schema,
                                           const TextChunk& chunk, const RunOptions& options) {
    ChunkOutcome outcome;
    size_t few_shot_k = options.few_shot_k.value_or(config_.few_shot_k);
    bool reflection_enabled =
        options.reflection_enabled.value_or(true) && config_.max_reflections > 0;
    bool update_cases = options.update_cases.value_or(config_.update_cases);

    try {
        ExtractionParams params;
        params.n_samples = config_.n_samples;
        params.temperature = config_.temperature;
        params.max_tokens = config_.max_tokens;
        params.threshold = config_.threshold;
        params.few_shot_k = few_shot_k;
        ExtractionAgent extraction(*gateway_, *cases_, prompts_, params);

        ExtractionAgent::Outcome extracted = extraction.extract(task, schema, chunk.text);
        {
            json e = make_event("extract");
            e["chunk"] = chunk.index;
            e["agreement"] = extracted.consensus.agreement;
            e["n_valid"] = extracted.consensus.n_valid;
            e["n_total"] = extracted.consensus.n_total;
            e["uncertain"] = extracted.consensus.uncertain;
            json ids = json::array();
            for (const auto& ex : extracted.examples_used) ids.push_back(ex.record.case_id);
            e["examples"] = std::move(ids);
            outcome.events.push_back(std::move(e));
        }

        RouteDecision decision = route(extracted.consensus);
        {
            json e = make_event("route");
            e["chunk"] = chunk.index;
            e["decision"] = decision == RouteDecision::reflect ? "reflect" : "accept";
            outcome.events.push_back(std::move(e));
        }

        FinalResult final_result;
        if (decision == RouteDecision::reflect && reflection_enabled) {
            ReflectionParams rparams;
            rparams.bad_case_k = config_.few_shot_k;
            rparams.max_tokens = config_.max_tokens;
            ReflectionAgent reflection(*gateway_, *cases_, prompts_, rparams);
            final_result = reflection.reflect(task, schema, chunk.text, extracted.consensus);
            json e = make_event("reflect");
            e["chunk"] = chunk.index;
            e["reflected"] = final_result.reflected;
            e["bad_cases"] = final_result.bad_cases_used;
            if (final_result.warning) e["warning"] = *final_result.warning;
            outcome.events.push_back(std::move(e));
        } else {
            final_result.answer = extracted.consensus.answer;
            final_result.reflected = false;
            final_result.preliminary_agreement = extracted.consensus.agreement;
        }

        if (update_cases) {
            CaseCurator curator(*gateway_, *cases_, prompts_);
            std::string schema_json = serialize_schema(schema);
            json e = make_event("curate");
            e["chunk"] = chunk.index;
            if (options.gold) {
                TaskOutcome task_outcome =
                    make_outcome(task.instruction, chunk.text, schema_json, task.task_kind,
                                 final_result.answer, *options.gold);
                auto [added_correct, added_bad] = curator.update_repository(task_outcome);
                e["correct"] = task_outcome.correct;
                e["added_correct"] = added_correct;
                e["added_bad"] = added_bad;
            } else {
                int added = curator.store_unverified(task.instruction, chunk.text, schema_json,
                                                     task.task_kind, final_result.answer);
                e["added_correct"] = added;
                e["added_bad"] = 0;
                e["provenance"] = "unverified";
            }
            outcome.events.push_back(std::move(e));
        }
        outcome.final_result = std::move(final_result);
    } catch (const Error& err) {
        json e = make_event("error");
        e["chunk"] = chunk.index;
        e["error"] = err.what();
        outcome.events.push_back(std::move(e));
    }
    return outcome;
}

PipelineRun Engine::run_extract(ExtractionTask task, const RunOptions& options) {
    auto started = std::chrono::steady_clock::now();
    if (trim(task.document.text).empty()) {
        throw Error(ErrorCode::invalid_argument, "task document has no text");
    }

    PipelineRun run;
    run.trace.push_back([&] {
        json e = make_event("ingest");
        e["source_id"] = task.document.source_id;
        e["format"] = doc_format_name(task.document.format);
        e["raw_bytes"] = task.document.raw_bytes_len;
        e["text_codepoints"] = utf8_codepoint_offsets(task.document.text).size() - 1;
        return e;
    }());

    SchemaAgentOptions sa_options;
    sa_options.save_deduced = config_.save_deduced;
    sa_options.classify = config_.classify;
    sa_options.sampling.max_tokens = config_.max_tokens;
    SchemaAgent schema_agent(schemas_, *gateway_, prompts_, sa_options);
    ResolvedSchema resolved = schema_agent.resolve_schema(task);
    run.schema = resolved.schema;
    run.provenance = resolved.provenance;
    run.schema_id = resolved.schema_id;
    run.trace.push_back([&] {
        json e = make_event("schema");
        e["provenance"] = schema_provenance_name(resolved.provenance);
        e["schema_id"] = resolved.schema_id;
        if (resolved.deduction_attempts > 0) e["deduction_attempts"] = resolved.deduction_attempts;
        if (auto it = task.constraints.find("genre"); it != task.constraints.end()) {
            e["genre"] = it->second;
        }
        return e;
    }());

    std::vector<TextChunk> chunks = chunk_text(task.document.text, config_.chunking);
    run.trace.push_back([&] {
        json e = make_event("chunking");
        e["chunks"] = chunks.size();
        e["chunk_size"] = config_.chunking.chunk_size;
        e["overlap"] = config_.chunking.overlap;
        return e;
    }());

    // Case updates must observe a stable store ordering, so they force
    // sequential chunk processing.
    bool updates = options.update_cases.value_or(config_.update_cases);
    size_t parallelism = updates ? 1 : static_cast<size_t>(config_.chunk_parallelism);
    parallelism = std::min(parallelism, chunks.size());

    std::vector<ChunkOutcome> outcomes(chunks.size());
    if (parallelism <= 1) {
        for (size_t i = 0; i < chunks.size(); ++i) {
            outcomes[i] = process_chunk(task, run.schema, chunks[i], options);
        }
    } else {
        std::atomic<size_t> next{0};
        auto worker = [&] {
            for (;;) {
                size_t i = next.fetch_add(1);
                if (i >= chunks.size()) return;
                outcomes[i] = process_chunk(task, run.schema, chunks[i], options);
            }
        };
        std::vector<std::thread> threads;
        for (size_t t = 0; t < parallelism; ++t) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }

    size_t failed = 0;
    for (auto& outcome : outcomes) {
        for (auto& e : outcome.events) run.trace.push_back(std::move(e));
        if (outcome.final_result) {
            run.chunk_results.push_back(std::move(*outcome.final_result));
        } else {
            ++failed;
        }
    }
    if (failed == chunks.size()) {
        throw Error(ErrorCode::extraction_failed,
                    "extraction failed on all " + std::to_string(chunks.size()) + " chunks");
    }

    std::vector<std::string> merge_warnings;
    run.merged_answer =
        merge_chunk_results(run.chunk_results, run.schema, config_.lenient_merge, &merge_warnings);
    run.trace.push_back([&] {
        json e = make_event("merge");
        e["chunks_merged"] = run.chunk_results.size();
        e["chunks_failed"] = failed;
        if (!merge_warnings.empty()) e["warnings"] = merge_warnings;
        return e;
    }());

    for (size_t i = 0; i < run.trace.size(); ++i) run.trace[i]["seq"] = i;
    run.total_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                             started)
                       .count();
    return run;
}

// ---------------------------------------------------------------------------
// Admin surface

json Engine::schema_list() const {
    json out = json::array();
    for (const auto& r : schemas_.records()) {
        out.push_back({{"id", r.id},
                       {"task_kind", task_kind_name(r.task_kind)},
                       {"scenario_tags", r.scenario_tags},
                       {"description", r.description},
                       {"title", r.schema.title},
                       {"field_count", r.schema.fields.size()}});
    }
    return out;
}

json Engine::schema_show(const std::string& id) const {
    auto record = schemas_.find_by_id(id);
    if (!record) throw Error(ErrorCode::unknown_schema_id, "no schema with id '" + id + "'");
    return json::parse(serialize_record(*record));
}

std::string Engine::schema_add(const std::string& definition_text) {
    SchemaRecord record = parse_schema_definition(definition_text);
    schemas_.add(record);
    return record.id;
}

json Engine::cases_stats() const {
    return cases_->stats();
}

void Engine::cases_export(const std::string& dest_path) const {
    json out;
    json correct = json::array();
    for (const auto& r : cases_->snapshot(CaseKind::correct)) {
        correct.push_back(CaseRepository::case_to_json(r));
    }
    json bad = json::array();
    for (const auto& r : cases_->snapshot(CaseKind::bad)) {
        bad.push_back(CaseRepository::case_to_json(r));
    }
    out["correct"] = std::move(correct);
    out["bad"] = std::move(bad);
    write_file_atomic(dest_path, out.dump(2) + "\n");
}

}  // namespace ke
