#pragma once

#include "ke/jsonutil.hpp"
#include "ke/pipeline.hpp"
#include "ke/schema.hpp"

#include <array>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace ke {

using NerItem = std::pair<std::string, std::string>;           // (type, mention)
using ReItem = std::array<std::string, 3>;                     // (head, relation, tail)

struct GoldInstance {
    std::string text;
    std::set<NerItem> ner_gold;
    std::set<ReItem> re_gold;
    std::string domain_tag;
};

struct Metrics {
    int64_t tp = 0;
    int64_t fp = 0;
    int64_t fn = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;

    static Metrics from_counts(int64_t tp, int64_t fp, int64_t fn);
};

enum class AblationMode { base, with_retrieval, with_retrieval_and_reflection };

const char* ablation_mode_name(AblationMode mode);
std::optional<AblationMode> ablation_mode_from_name(const std::string& name);

// Column format: "token<TAB>bio-tag" per line, blank line between sentences.
std::vector<GoldInstance> load_crossner(const std::string& path);

// JSON lines: {"text":..., "triples":[{"head","relation","tail"},...]}.
std::vector<GoldInstance> load_nyt11(const std::string& path);

// Case-fold and collapse whitespace; the match normalization used everywhere
// in scoring.
std::string eval_normalize(const std::string& s);

template <typename T>
Metrics score_set(const std::set<T>& pred, const std::set<T>& gold) {
    int64_t tp = 0;
    for (const auto& p : pred) {
        if (gold.count(p)) ++tp;
    }
    return Metrics::from_counts(tp, static_cast<int64_t>(pred.size()) - tp,
                                static_cast<int64_t>(gold.size()) - tp);
}

std::set<NerItem> ner_pred_from_answer(const json& answer);
std::set<ReItem> re_pred_from_answer(const json& answer);

// Runs every instance through the pipeline once per mode and scores micro
// P/R/F1. Gateway failures abort the instance (scored as all-fn), not the run.
json run_ablation(Engine& engine, const std::vector<GoldInstance>& instances,
                  TaskKind task_kind, const std::vector<AblationMode>& modes);

std::string render_report_table(const json& report);

}  // namespace ke
