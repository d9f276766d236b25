#pragma once

#include "ke/cases.hpp"
#include "ke/config.hpp"
#include "ke/curator.hpp"
#include "ke/extraction_agent.hpp"
#include "ke/gateway.hpp"
#include "ke/ingest.hpp"
#include "ke/prompts.hpp"
#include "ke/reflection_agent.hpp"
#include "ke/schema.hpp"
#include "ke/schema_agent.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace ke {

struct PipelineRun {
    OutputSchema schema;
    SchemaProvenance provenance = SchemaProvenance::repository_match;
    std::string schema_id;
    std::vector<FinalResult> chunk_results;  // one per successfully processed chunk
    json merged_answer;
    std::vector<json> trace;  // ordered events; "ts" fields vary run to run
    double total_ms = 0.0;
};

// Merge across chunk answers: list fields union preserving first-seen order,
// scalar fields take the first non-empty value, record fields merge field-wise.
// Unknown top-level keys throw SchemaMismatch unless lenient, which drops them
// and reports a warning.
json merge_chunk_results(const std::vector<FinalResult>& results, const OutputSchema& schema,
                         bool lenient = false, std::vector<std::string>* warnings = nullptr);

struct RunOptions {
    std::optional<json> gold;             // reference answer (eval mode)
    std::optional<size_t> few_shot_k;     // overrides config
    std::optional<bool> reflection_enabled;
    std::optional<bool> update_cases;
};

// Owns the repositories, gateway, prompts, and agents, and runs the
// ingest -> schema -> extract -> route -> reflect -> curate -> merge pipeline.
class Engine {
  public:
    explicit Engine(PipelineConfig config, std::shared_ptr<ChatBackend> chat_override = nullptr);

    PipelineRun run_extract(ExtractionTask task, const RunOptions& options = {});

    // Admin surface backing the CLI.
    json schema_list() const;
    json schema_show(const std::string& id) const;
    std::string schema_add(const std::string& definition_text);
    json cases_stats() const;
    void cases_export(const std::string& dest_path) const;

    const PipelineConfig& config() const { return config_; }
    SchemaRepository& schemas() { return schemas_; }
    CaseRepository& cases() { return *cases_; }
    LlmGateway& gateway() { return *gateway_; }
    const PromptLibrary& prompts() const { return prompts_; }

  private:
    struct ChunkOutcome {
        std::optional<FinalResult> final_result;
        std::vector<json> events;
    };

    ChunkOutcome process_chunk(const ExtractionTask& task, const OutputSchema& schema,
                               const TextChunk& chunk, const RunOptions& options);

    PipelineConfig config_;
    PromptLibrary prompts_;
    SchemaRepository schemas_;
    std::shared_ptr<EmbedBackend> embedder_;
    std::shared_ptr<ChatBackend> chat_backend_;
    std::unique_ptr<LlmGateway> gateway_;
    std::unique_ptr<CaseRepository> cases_;
};

}  // namespace ke
