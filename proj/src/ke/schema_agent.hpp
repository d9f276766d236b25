#pragma once

#include "ke/gateway.hpp"
#include "ke/ingest.hpp"
#include "ke/prompts.hpp"
#include "ke/schema.hpp"

#include <map>
#include <optional>
#include <string>

namespace ke {

struct ExtractionTask {
    std::string instruction;
    TaskKind task_kind = TaskKind::Custom;
    std::optional<std::string> schema_id;
    SourceDocument document;
    std::map<std::string, std::string> constraints;
};

enum class SchemaProvenance { user_specified, repository_match, deduced };

const char* schema_provenance_name(SchemaProvenance p);

struct ResolvedSchema {
    OutputSchema schema;
    SchemaProvenance provenance = SchemaProvenance::repository_match;
    std::string schema_id;       // empty for deduced schemas that were not saved
    int deduction_attempts = 0;  // 0 when no deduction ran
};

struct DeducedSchema {
    OutputSchema schema;
    int attempts = 1;
};

struct SchemaAgentOptions {
    bool save_deduced = false;
    bool classify = false;
    SamplingParams sampling{/*temperature=*/0.0, /*max_tokens=*/1024, /*n_samples=*/1,
                            std::nullopt};
};

// Selects a pre-defined schema or deduces one from the instruction. Selection
// is deterministic (token/tag overlap); the LLM is used only for deduction and
// the optional genre note.
class SchemaAgent {
  public:
    SchemaAgent(SchemaRepository& repository, LlmGateway& gateway, const PromptLibrary& prompts,
                SchemaAgentOptions options = {});

    // May add a "genre" constraint to the task when classification is enabled.
    ResolvedSchema resolve_schema(ExtractionTask& task);

    // Prompts with the instruction plus the first 1000 codepoints of the
    // sample; one repair re-prompt on parse failure.
    DeducedSchema deduce_schema(const std::string& instruction, const std::string& sample_text);

    std::string classify_genre(const std::string& sample_text);

  private:
    SchemaRepository& repository_;
    LlmGateway& gateway_;
    const PromptLibrary& prompts_;
    SchemaAgentOptions options_;
};

}  // namespace ke
