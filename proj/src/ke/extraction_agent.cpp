#include "ke/extraction_agent.hpp"

#include "ke/curator.hpp"
#include "ke/error.hpp"
#include "ke/util.hpp"

#include <map>

namespace ke {

CandidateOutput normalize_output(const std::string& raw, TaskKind kind) {
    CandidateOutput out;
    out.raw_text = raw;
    auto parsed = parse_json_lenient(raw);
    if (!parsed || !parsed->is_object()) return out;
    json canonical = canonicalize_json(*parsed, task_outputs_are_sets(kind));
    out.canonical = canonical.dump();
    out.parsed = std::move(canonical);
    return out;
}

ConsensusResult self_consistency(const std::vector<CandidateOutput>& candidates,
                                 double threshold) {
    ConsensusResult result;
    result.n_total = static_cast<int>(candidates.size());

    std::map<std::string, int> votes;  // canonical form -> count, ordered for tie-break
    for (const auto& c : candidates) {
        if (c.canonical) {
            ++result.n_valid;
            ++votes[*c.canonical];
        }
    }
    if (result.n_valid == 0) {
        throw Error(ErrorCode::no_valid_candidate, "no candidate normalized to a JSON object");
    }

    const std::string* winner = nullptr;
    int winner_votes = 0;
    for (const auto& [canonical, count] : votes) {
        if (count > winner_votes) {  // first map entry wins ties: smallest canonical string
            winner = &canonical;
            winner_votes = count;
        }
    }
    result.answer = json::parse(*winner);
    result.agreement = static_cast<double>(winner_votes) / static_cast<double>(result.n_valid);
    result.uncertain = result.agreement < threshold;
    return result;
}

ExtractionAgent::ExtractionAgent(LlmGateway& gateway, CaseRepository& repository,
                                 const PromptLibrary& prompts, ExtractionParams params)
    : gateway_(gateway), repository_(repository), prompts_(prompts), params_(params) {}

namespace {

std::string clip(const std::string& text, size_t limit) {
    std::string t = truncate_excerpt(text, limit);
    if (t.size() < text.size()) t += "…";
    return t;
}

}  // namespace

std::vector<ChatMessage> ExtractionAgent::build_prompt(const ExtractionTask& task,
                                                       const OutputSchema& schema,
                                                       const std::string& input_text,
                                                       const std::vector<ScoredCase>& examples) const {
    std::vector<ChatMessage> messages;
    messages.push_back(
        {ChatRole::system, prompts_.render("extract", {{"schema", serialize_schema(schema)}})});

    for (const auto& scored : examples) {
        const CaseRecord& record = scored.record;
        messages.push_back({ChatRole::user, "Example input:\n" +
                                                clip(record.input_excerpt,
                                                     params_.example_char_limit)});
        messages.push_back({ChatRole::assistant,
                            clip(record.annotation, params_.example_char_limit) + "\n\nAnswer:\n" +
                                record.answer_json});
    }

    messages.push_back({ChatRole::user, task.instruction + "\n\nInput text:\n" + input_text});
    return messages;
}

ExtractionAgent::Outcome ExtractionAgent::extract(const ExtractionTask& task,
                                                  const OutputSchema& schema,
                                                  const std::string& input_text) {
    Outcome outcome;
    if (params_.few_shot_k > 0) {
        std::string query = case_query_text(task.instruction, truncate_excerpt(input_text));
        outcome.examples_used =
            repository_.retrieve_top_k(query, CaseKind::correct, task.task_kind, params_.few_shot_k);
    }

    std::vector<ChatMessage> messages = build_prompt(task, schema, input_text, outcome.examples_used);
    SamplingParams sampling{params_.temperature, params_.max_tokens, params_.n_samples,
                            params_.seed};
    LlmResponse response = gateway_.chat(messages, sampling);

    outcome.candidates.reserve(response.texts.size());
    for (const auto& text : response.texts) {
        outcome.candidates.push_back(normalize_output(text, task.task_kind));
    }
    outcome.consensus = self_consistency(outcome.candidates, params_.threshold);
    return outcome;
}

}  // namespace ke
