#include "ke/reflection_agent.hpp"

#include "ke/curator.hpp"
#include "ke/error.hpp"

namespace ke {

RouteDecision route(const ConsensusResult& preliminary) {
    return preliminary.uncertain ? RouteDecision::reflect : RouteDecision::accept;
}

ReflectionAgent::ReflectionAgent(LlmGateway& gateway, CaseRepository& repository,
                                 const PromptLibrary& prompts, ReflectionParams params)
    : gateway_(gateway), repository_(repository), prompts_(prompts), params_(params) {}

std::vector<ChatMessage> ReflectionAgent::build_reflection_prompt(
    const ExtractionTask& task, const OutputSchema& schema, const std::string& input_text,
    const ConsensusResult& preliminary, const std::vector<ScoredCase>& bad_cases) const {
    std::vector<ChatMessage> messages;
    messages.push_back(
        {ChatRole::system, prompts_.render("reflect", {{"schema", serialize_schema(schema)}})});

    bool sets = task_outputs_are_sets(task.task_kind);
    std::string body = "Draft answer (possibly wrong):\n" +
                       canonical_json_string(preliminary.answer, sets) + "\n";
    for (const auto& scored : bad_cases) {
        const CaseRecord& record = scored.record;
        body += "\n### Past mistake\nInput:\n" + truncate_excerpt(record.input_excerpt, 800) +
                "\nWrong answer:\n" + record.answer_json + "\nReflection:\n" +
                truncate_excerpt(record.annotation, 800) + "\n";
    }
    body += "\nTask: " + task.instruction + "\n\nInput text:\n" + input_text +
            "\n\nReturn the corrected JSON object.";
    messages.push_back({ChatRole::user, std::move(body)});
    return messages;
}

FinalResult ReflectionAgent::reflect(const ExtractionTask& task, const OutputSchema& schema,
                                     const std::string& input_text,
                                     const ConsensusResult& preliminary) {
    if (!preliminary.uncertain) {
        throw Error(ErrorCode::invalid_argument, "reflect requires an uncertain preliminary result");
    }

    std::string query = case_query_text(task.instruction, truncate_excerpt(input_text));
    std::vector<ScoredCase> bad_cases =
        repository_.retrieve_top_k(query, CaseKind::bad, task.task_kind, params_.bad_case_k);

    FinalResult result;
    result.preliminary_agreement = preliminary.agreement;
    for (const auto& c : bad_cases) result.bad_cases_used.push_back(c.record.case_id);

    std::vector<ChatMessage> messages =
        build_reflection_prompt(task, schema, input_text, preliminary, bad_cases);
    SamplingParams sampling{params_.temperature, params_.max_tokens, 1, std::nullopt};
    LlmResponse response = gateway_.chat(messages, sampling);

    CandidateOutput corrected = normalize_output(response.texts.front(), task.task_kind);
    if (corrected.parsed) {
        result.answer = *corrected.parsed;
        result.reflected = true;
    } else {
        result.answer = preliminary.answer;
        result.reflected = false;
        result.warning = "reflection reply carried no parseable JSON; kept the preliminary answer";
    }
    return result;
}

}  // namespace ke
