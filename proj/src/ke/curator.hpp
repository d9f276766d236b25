#pragma once

#include "ke/cases.hpp"
#include "ke/gateway.hpp"
#include "ke/prompts.hpp"
#include "ke/schema.hpp"

#include <string>
#include <utility>

namespace ke {

// First 500 codepoints of a source chunk, the bound applied to stored cases.
std::string truncate_excerpt(const std::string& text, size_t limit = 500);

struct TaskOutcome {
    std::string task_description;
    std::string input_excerpt;
    std::string schema_json;
    TaskKind task_kind = TaskKind::Custom;
    json produced_answer;
    json reference_answer;
    bool correct = false;
};

// correct == canonical-JSON equality; entity/triple lists compare as sets.
TaskOutcome make_outcome(std::string task_description, std::string input_excerpt,
                         std::string schema_json, TaskKind task_kind, json produced_answer,
                         json reference_answer);

// After a task completes with a reference answer: generates reasoning steps
// for the correct answer, a reflection for a wrong one, and updates the case
// repository with no partial writes.
class CaseCurator {
  public:
    CaseCurator(LlmGateway& gateway, CaseRepository& repository, const PromptLibrary& prompts,
                SamplingParams params = {/*temperature=*/0.0, /*max_tokens=*/1024,
                                         /*n_samples=*/1, std::nullopt});

    std::string generate_reasoning(const TaskOutcome& outcome);

    // Requires outcome.correct == false.
    std::string generate_reflection(const TaskOutcome& outcome);

    // Always adds one correct case (reference answer + reasoning); adds one bad
    // case (produced answer + reflection) iff the outcome was wrong. Returns
    // (added_correct, added_bad); dedup makes repeated updates report zeros.
    std::pair<int, int> update_repository(const TaskOutcome& outcome);

    // Production mode without a reference answer: stores the final answer as a
    // correct case flagged provenance "unverified", no bad-case counterpart.
    int store_unverified(const std::string& task_description, const std::string& input_excerpt,
                         const std::string& schema_json, TaskKind task_kind,
                         const json& final_answer);

  private:
    std::string chat_for_text(const std::string& prompt);

    LlmGateway& gateway_;
    CaseRepository& repository_;
    const PromptLibrary& prompts_;
    SamplingParams params_;
};

}  // namespace ke
