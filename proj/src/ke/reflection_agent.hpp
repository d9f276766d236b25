#pragma once

#include "ke/cases.hpp"
#include "ke/extraction_agent.hpp"
#include "ke/gateway.hpp"
#include "ke/prompts.hpp"
#include "ke/schema_agent.hpp"

#include <optional>
#include <string>
#include <vector>

namespace ke {

struct FinalResult {
    json answer;
    bool reflected = false;
    double preliminary_agreement = 0.0;
    std::vector<std::string> bad_cases_used;
    std::optional<std::string> warning;
};

enum class RouteDecision { accept, reflect };

// Reflect iff uncertain; agreement exactly at the threshold is accepted.
RouteDecision route(const ConsensusResult& preliminary);

struct ReflectionParams {
    size_t bad_case_k = 2;  // same default as correct-case retrieval
    double temperature = 0.0;
    int max_tokens = 2048;
};

// Corrects uncertain preliminary results using the most relevant bad cases and
// their reflections. Single round; never discards a valid preliminary answer.
class ReflectionAgent {
  public:
    ReflectionAgent(LlmGateway& gateway, CaseRepository& repository, const PromptLibrary& prompts,
                    ReflectionParams params = {});

    std::vector<ChatMessage> build_reflection_prompt(const ExtractionTask& task,
                                                     const OutputSchema& schema,
                                                     const std::string& input_text,
                                                     const ConsensusResult& preliminary,
                                                     const std::vector<ScoredCase>& bad_cases) const;

    FinalResult reflect(const ExtractionTask& task, const OutputSchema& schema,
                        const std::string& input_text, const ConsensusResult& preliminary);

  private:
    LlmGateway& gateway_;
    CaseRepository& repository_;
    const PromptLibrary& prompts_;
    ReflectionParams params_;
};

}  // namespace ke
