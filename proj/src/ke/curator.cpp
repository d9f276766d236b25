#include "ke/curator.hpp"

#include "ke/error.hpp"
#include "ke/util.hpp"

namespace ke {

std::string truncate_excerpt(const std::string& text, size_t limit) {
    auto offsets = utf8_codepoint_offsets(text);
    size_t n = offsets.size() - 1;
    if (n <= limit) return text;
    return text.substr(0, offsets[limit]);
}

TaskOutcome make_outcome(std::string task_description, std::string input_excerpt,
                         std::string schema_json, TaskKind task_kind, json produced_answer,
                         json reference_answer) {
    TaskOutcome outcome;
    outcome.task_description = std::move(task_description);
    outcome.input_excerpt = truncate_excerpt(input_excerpt);
    outcome.schema_json = std::move(schema_json);
    outcome.task_kind = task_kind;
    outcome.produced_answer = std::move(produced_answer);
    outcome.reference_answer = std::move(reference_answer);
    bool sets = task_outputs_are_sets(task_kind);
    outcome.correct = canonical_json_string(outcome.produced_answer, sets) ==
                      canonical_json_string(outcome.reference_answer, sets);
    return outcome;
}

CaseCurator::CaseCurator(LlmGateway& gateway, CaseRepository& repository,
                         const PromptLibrary& prompts, SamplingParams params)
    : gateway_(gateway), repository_(repository), prompts_(prompts), params_(params) {
    params_.n_samples = 1;
}

std::string CaseCurator::chat_for_text(const std::string& prompt) {
    LlmResponse res = gateway_.chat({{ChatRole::user, prompt}}, params_);
    std::string text = trim(res.texts.front());
    if (text.empty()) {
        throw Error(ErrorCode::empty_generation, "curator received an empty generation");
    }
    return text;
}

std::string CaseCurator::generate_reasoning(const TaskOutcome& outcome) {
    bool sets = task_outputs_are_sets(outcome.task_kind);
    std::string prompt = prompts_.render(
        "curator_reasoning", {{"task", outcome.task_description},
                              {"input", outcome.input_excerpt},
                              {"schema", outcome.schema_json},
                              {"reference", canonical_json_string(outcome.reference_answer, sets)}});
    return chat_for_text(prompt);
}

std::string CaseCurator::generate_reflection(const TaskOutcome& outcome) {
    if (outcome.correct) {
        throw Error(ErrorCode::invalid_argument,
                    "generate_reflection requires an incorrect outcome");
    }
    bool sets = task_outputs_are_sets(outcome.task_kind);
    std::string prompt = prompts_.render(
        "curator_reflection", {{"task", outcome.task_description},
                               {"input", outcome.input_excerpt},
                               {"schema", outcome.schema_json},
                               {"answer", canonical_json_string(outcome.produced_answer, sets)},
                               {"reference", canonical_json_string(outcome.reference_answer, sets)}});
    return chat_for_text(prompt);
}

std::pair<int, int> CaseCurator::update_repository(const TaskOutcome& outcome) {
    bool sets = task_outputs_are_sets(outcome.task_kind);

    // Both generations happen before any write so a gateway failure leaves the
    // repository untouched.
    std::string reasoning = generate_reasoning(outcome);
    std::string reflection;
    if (!outcome.correct) reflection = generate_reflection(outcome);

    CaseRecord correct_case;
    correct_case.kind = CaseKind::correct;
    correct_case.task_kind = outcome.task_kind;
    correct_case.task_description = outcome.task_description;
    correct_case.input_excerpt = truncate_excerpt(outcome.input_excerpt);
    correct_case.schema_json = outcome.schema_json;
    correct_case.answer_json = canonical_json_string(outcome.reference_answer, sets);
    correct_case.annotation = reasoning;

    std::optional<CaseRecord> bad_case;
    if (!outcome.correct) {
        CaseRecord bad;
        bad.kind = CaseKind::bad;
        bad.task_kind = outcome.task_kind;
        bad.task_description = outcome.task_description;
        bad.input_excerpt = truncate_excerpt(outcome.input_excerpt);
        bad.schema_json = outcome.schema_json;
        bad.answer_json = canonical_json_string(outcome.produced_answer, sets);
        bad.annotation = reflection;
        bad_case = std::move(bad);
    }
    return repository_.add_outcome_pair(std::move(correct_case), std::move(bad_case));
}

int CaseCurator::store_unverified(const std::string& task_description,
                                  const std::string& input_excerpt,
                                  const std::string& schema_json, TaskKind task_kind,
                                  const json& final_answer) {
    TaskOutcome synthetic;
    synthetic.task_description = task_description;
    synthetic.input_excerpt = truncate_excerpt(input_excerpt);
    synthetic.schema_json = schema_json;
    synthetic.task_kind = task_kind;
    synthetic.reference_answer = final_answer;
    std::string reasoning = generate_reasoning(synthetic);

    CaseRecord record;
    record.kind = CaseKind::correct;
    record.task_kind = task_kind;
    record.task_description = task_description;
    record.input_excerpt = truncate_excerpt(input_excerpt);
    record.schema_json = schema_json;
    record.answer_json = canonical_json_string(final_answer, task_outputs_are_sets(task_kind));
    record.annotation = reasoning;
    record.provenance = "unverified";
    auto [added, unused] = repository_.add_outcome_pair(std::move(record), std::nullopt);
    return added;
}

}  // namespace ke
