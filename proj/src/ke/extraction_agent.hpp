#pragma once

#include "ke/cases.hpp"
#include "ke/gateway.hpp"
#include "ke/prompts.hpp"
#include "ke/schema.hpp"
#include "ke/schema_agent.hpp"

#include <optional>
#include <string>
#include <vector>

namespace ke {

struct CandidateOutput {
    std::string raw_text;
    std::optional<json> parsed;          // canonicalized value, present iff normalization worked
    std::optional<std::string> canonical;  // canonical serialization of parsed
};

struct ConsensusResult {
    json answer;
    double agreement = 0.0;  // winning votes / n_valid
    int n_valid = 0;
    int n_total = 0;
    bool uncertain = false;  // agreement < threshold (strict)
};

// Fence/prose stripping, balanced-object location, trailing-comma and
// single-quote repair, then canonicalization (set-normalized lists for
// entity/triple task kinds).
CandidateOutput normalize_output(const std::string& raw, TaskKind kind = TaskKind::Custom);

// Majority vote over canonical forms; ties break to the lexicographically
// smallest canonical string. Throws NoValidCandidate when nothing parsed.
ConsensusResult self_consistency(const std::vector<CandidateOutput>& candidates, double threshold);

struct ExtractionParams {
    int n_samples = 3;
    double temperature = 0.7;
    int max_tokens = 2048;
    double threshold = 0.6;   // self-consistency uncertainty threshold
    size_t few_shot_k = 2;    // retrieved correct cases per prompt
    size_t example_char_limit = 800;
    std::optional<int64_t> seed;
};

// Builds the schema-guided few-shot prompt, samples the model n times, and
// votes on the normalized outputs.
class ExtractionAgent {
  public:
    ExtractionAgent(LlmGateway& gateway, CaseRepository& repository, const PromptLibrary& prompts,
                    ExtractionParams params = {});

    std::vector<ChatMessage> build_prompt(const ExtractionTask& task, const OutputSchema& schema,
                                          const std::string& input_text,
                                          const std::vector<ScoredCase>& examples) const;

    struct Outcome {
        ConsensusResult consensus;
        std::vector<ScoredCase> examples_used;
        std::vector<CandidateOutput> candidates;
    };

    Outcome extract(const ExtractionTask& task, const OutputSchema& schema,
                    const std::string& input_text);

    const ExtractionParams& params() const { return params_; }

  private:
    LlmGateway& gateway_;
    CaseRepository& repository_;
    const PromptLibrary& prompts_;
    ExtractionParams params_;
};

}  // namespace ke
