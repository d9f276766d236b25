#pragma once

#include "ke/gateway.hpp"
#include "ke/schema.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

namespace ke {

enum class CaseKind { correct, bad };

const char* case_kind_name(CaseKind kind);
std::optional<CaseKind> case_kind_from_name(const std::string& name);

// A stored extraction trace. Correct cases carry reasoning steps, bad cases
// carry a reflection on what went wrong.
struct CaseRecord {
    std::string case_id;
    CaseKind kind = CaseKind::correct;
    TaskKind task_kind = TaskKind::Custom;
    std::string task_description;
    std::string input_excerpt;  // truncated source text
    std::string schema_json;
    std::string answer_json;
    std::string annotation;  // reasoning steps or reflection text
    EmbeddingVector embedding;
    int64_t created_at = 0;
    std::string provenance = "verified";  // "unverified" when stored without a reference answer
};

struct RetrievalWeights {
    double semantic = 0.7;
    double lexical = 0.3;
};

struct ScoredCase {
    CaseRecord record;
    double semantic = 0.0;
    double lexical = 0.0;
    double combined = 0.0;
};

// 1 - levenshtein(norm(a), norm(b)) / max(len); norm lowercases and collapses
// whitespace. Two empty strings score 1.
double lexical_similarity(const std::string& a, const std::string& b);

// The composite text a case is matched against (and embedded from). Retrieval
// queries must be built with the same composition for self-retrieval to score 1.
std::string case_query_text(const std::string& task_description, const std::string& input_excerpt);

ScoredCase score_case(const std::string& query_text, const EmbeddingVector& query_embedding,
                      const CaseRecord& record, const RetrievalWeights& weights);

// Correct/bad case stores persisted as cases/{correct,bad}.jsonl, one JSON
// object per line. Retrieval is an exhaustive scan; stores stay small.
class CaseRepository {
  public:
    static constexpr size_t kDefaultTopK = 2;  // retrieval default

    using EmbedFn = std::function<EmbeddingVector(const std::string&)>;

    CaseRepository(std::filesystem::path dir, EmbedFn embedder, RetrievalWeights weights = {},
                   size_t max_cases_per_kind = 0);

    // Validates, dedups on (task_description, input_excerpt, answer_json, kind),
    // persists before returning. A missing embedding is computed here. Returns
    // the stored case id (the existing one for duplicates).
    std::string add_case(CaseRecord record);

    // Adds a correct case and optionally its bad counterpart with no partial
    // write across the two stores. Returns (added_correct, added_bad); a
    // deduplicated add reports 0.
    std::pair<int, int> add_outcome_pair(CaseRecord correct_case,
                                         std::optional<CaseRecord> bad_case);

    std::vector<ScoredCase> retrieve_top_k(const std::string& query_text, CaseKind kind,
                                           TaskKind task_kind, size_t k = kDefaultTopK) const;

    size_t count(CaseKind kind) const;
    std::vector<CaseRecord> snapshot(CaseKind kind) const;
    json stats() const;

    const RetrievalWeights& weights() const { return weights_; }
    const std::filesystem::path& dir() const { return dir_; }

    static json case_to_json(const CaseRecord& record);
    static CaseRecord case_from_json(const json& j, const std::string& context);

  private:
    struct Store {
        std::vector<CaseRecord> cases;
        std::unordered_map<std::string, std::string> dedup;  // digest -> case_id
    };

    Store& store_for(CaseKind kind) { return kind == CaseKind::correct ? correct_ : bad_; }
    const Store& store_for(CaseKind kind) const {
        return kind == CaseKind::correct ? correct_ : bad_;
    }
    std::filesystem::path file_for(CaseKind kind) const;

    void load_store(CaseKind kind);
    void validate(CaseRecord& record) const;  // also fills id/created_at/embedding
    // Appends under an already-held writer lock; returns false for duplicates.
    bool append_locked(CaseRecord& record, std::string* out_id);
    void rewrite_store_locked(CaseKind kind);

    std::filesystem::path dir_;
    EmbedFn embedder_;
    RetrievalWeights weights_;
    size_t max_cases_per_kind_;
    Store correct_;
    Store bad_;
    mutable std::shared_mutex mutex_;
};

}  // namespace ke
