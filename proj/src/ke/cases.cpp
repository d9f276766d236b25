#include "ke/cases.hpp"

#include "ke/error.hpp"
#include "ke/util.hpp"

#include <algorithm>
#include <fstream>

namespace fs = std::filesystem;

namespace ke {

const char* case_kind_name(CaseKind kind) {
    return kind == CaseKind::correct ? "correct" : "bad";
}

std::optional<CaseKind> case_kind_from_name(const std::string& name) {
    if (name == "correct") return CaseKind::correct;
    if (name == "bad") return CaseKind::bad;
    return std::nullopt;
}

namespace {

size_t levenshtein(const std::string& a, const std::string& b) {
    if (a.empty()) return b.size();
    if (b.empty()) return a.size();
    std::vector<size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (size_t j = 1; j <= b.size(); ++j) {
            size_t subst = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, subst});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

std::string dedup_digest(const CaseRecord& record) {
    std::string payload;
    payload += case_kind_name(record.kind);
    payload.push_back('\x1f');
    payload += record.task_description;
    payload.push_back('\x1f');
    payload += record.input_excerpt;
    payload.push_back('\x1f');
    payload += record.answer_json;
    return sha256_hex(payload);
}

}  // namespace

double lexical_similarity(const std::string& a, const std::string& b) {
    std::string na = collapse_whitespace(to_lower(a));
    std::string nb = collapse_whitespace(to_lower(b));
    if (na.empty() && nb.empty()) return 1.0;
    if (na.empty() || nb.empty()) return 0.0;
    size_t dist = levenshtein(na, nb);
    return 1.0 - static_cast<double>(dist) / static_cast<double>(std::max(na.size(), nb.size()));
}

std::string case_query_text(const std::string& task_description, const std::string& input_excerpt) {
    return task_description + "\n" + input_excerpt;
}

ScoredCase score_case(const std::string& query_text, const EmbeddingVector& query_embedding,
                      const CaseRecord& record, const RetrievalWeights& weights) {
    ScoredCase scored;
    scored.record = record;
    scored.semantic = std::max(0.0, cosine_similarity(query_embedding, record.embedding));
    scored.lexical = lexical_similarity(
        query_text, case_query_text(record.task_description, record.input_excerpt));
    scored.combined = weights.semantic * scored.semantic + weights.lexical * scored.lexical;
    return scored;
}

// ---------------------------------------------------------------------------

CaseRepository::CaseRepository(fs::path dir, EmbedFn embedder, RetrievalWeights weights,
                               size_t max_cases_per_kind)
    : dir_(std::move(dir)), embedder_(std::move(embedder)), weights_(weights),
      max_cases_per_kind_(max_cases_per_kind) {
    double wsum = weights_.semantic + weights_.lexical;
    if (std::abs(wsum - 1.0) > 1e-9 || weights_.semantic < 0.0 || weights_.lexical < 0.0) {
        throw Error(ErrorCode::invalid_argument, "retrieval weights must be >= 0 and sum to 1");
    }
    load_store(CaseKind::correct);
    load_store(CaseKind::bad);
}

fs::path CaseRepository::file_for(CaseKind kind) const {
    return dir_ / (std::string(case_kind_name(kind)) + ".jsonl");
}

json CaseRepository::case_to_json(const CaseRecord& record) {
    json j;
    j["case_id"] = record.case_id;
    j["kind"] = case_kind_name(record.kind);
    j["task_kind"] = task_kind_name(record.task_kind);
    j["task_description"] = record.task_description;
    j["input_excerpt"] = record.input_excerpt;
    j["schema_json"] = record.schema_json;
    j["answer_json"] = record.answer_json;
    j["annotation"] = record.annotation;
    j["embedding"] = record.embedding.values;
    j["created_at"] = record.created_at;
    j["provenance"] = record.provenance;
    return j;
}

CaseRecord CaseRepository::case_from_json(const json& j, const std::string& context) {
    CaseRecord r;
    try {
        r.case_id = j.at("case_id").get<std::string>();
        auto kind = case_kind_from_name(j.at("kind").get<std::string>());
        auto task = task_kind_from_name(j.at("task_kind").get<std::string>());
        if (!kind || !task) throw std::runtime_error("bad kind");
        r.kind = *kind;
        r.task_kind = *task;
        r.task_description = j.at("task_description").get<std::string>();
        r.input_excerpt = j.at("input_excerpt").get<std::string>();
        r.schema_json = j.at("schema_json").get<std::string>();
        r.answer_json = j.at("answer_json").get<std::string>();
        r.annotation = j.at("annotation").get<std::string>();
        for (const auto& v : j.at("embedding")) r.embedding.values.push_back(v.get<double>());
        r.created_at = j.at("created_at").get<int64_t>();
        r.provenance = j.value("provenance", "verified");
    } catch (const std::exception& e) {
        throw Error(ErrorCode::malformed_line, context + ": " + e.what());
    }
    return r;
}

void CaseRepository::load_store(CaseKind kind) {
    Store& store = store_for(kind);
    fs::path file = file_for(kind);
    if (!fs::exists(file)) return;
    std::ifstream in(file);
    if (!in) throw Error(ErrorCode::persistence_error, "cannot open " + file.string());
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw Error(ErrorCode::malformed_line,
                        file.string() + ":" + std::to_string(line_no) + ": invalid JSON");
        }
        CaseRecord r = case_from_json(j, file.string() + ":" + std::to_string(line_no));
        store.dedup[dedup_digest(r)] = r.case_id;
        store.cases.push_back(std::move(r));
    }
}

void CaseRepository::validate(CaseRecord& record) const {
    if (trim(record.annotation).empty()) {
        throw Error(ErrorCode::invalid_record, "case annotation must be non-empty");
    }
    json answer = json::parse(record.answer_json, nullptr, false);
    if (answer.is_discarded()) {
        throw Error(ErrorCode::invalid_record, "case answer_json does not parse as JSON");
    }
    if (record.embedding.values.empty() && embedder_) {
        record.embedding =
            embedder_(case_query_text(record.task_description, record.input_excerpt));
    }
    if (embedder_) {
        EmbeddingVector probe = embedder_("x");
        if (record.embedding.dim() != probe.dim()) {
            throw Error(ErrorCode::invalid_record,
                        "case embedding dim " + std::to_string(record.embedding.dim()) +
                            " does not match repository embedder dim " +
                            std::to_string(probe.dim()));
        }
    }
    if (record.case_id.empty()) {
        record.case_id = std::string(case_kind_name(record.kind)) + "-" +
                         dedup_digest(record).substr(0, 16);
    }
    if (record.created_at == 0) record.created_at = unix_time_seconds();
}

bool CaseRepository::append_locked(CaseRecord& record, std::string* out_id) {
    Store& store = store_for(record.kind);
    std::string digest = dedup_digest(record);
    if (auto it = store.dedup.find(digest); it != store.dedup.end()) {
        if (out_id) *out_id = it->second;
        return false;
    }

    fs::create_directories(dir_);
    fs::path file = file_for(record.kind);
    {
        std::ofstream out(file, std::ios::app | std::ios::binary);
        if (!out) throw Error(ErrorCode::persistence_error, "cannot append to " + file.string());
        out << case_to_json(record).dump() << '\n';
        out.flush();
        if (!out) throw Error(ErrorCode::persistence_error, "write failed for " + file.string());
    }
    store.dedup[digest] = record.case_id;
    store.cases.push_back(record);
    if (out_id) *out_id = record.case_id;

    if (max_cases_per_kind_ > 0 && store.cases.size() > max_cases_per_kind_) {
        store.dedup.erase(dedup_digest(store.cases.front()));
        store.cases.erase(store.cases.begin());
        rewrite_store_locked(record.kind);
    }
    return true;
}

void CaseRepository::rewrite_store_locked(CaseKind kind) {
    Store& store = store_for(kind);
    std::string content;
    for (const auto& r : store.cases) content += case_to_json(r).dump() + "\n";
    write_file_atomic(file_for(kind), content);
}

std::string CaseRepository::add_case(CaseRecord record) {
    validate(record);
    std::unique_lock lock(mutex_);
    std::string id;
    append_locked(record, &id);
    return id;
}

std::pair<int, int> CaseRepository::add_outcome_pair(CaseRecord correct_case,
                                                     std::optional<CaseRecord> bad_case) {
    if (correct_case.kind != CaseKind::correct || (bad_case && bad_case->kind != CaseKind::bad)) {
        throw Error(ErrorCode::invalid_record, "outcome pair kinds are swapped");
    }
    validate(correct_case);
    if (bad_case) validate(*bad_case);

    std::unique_lock lock(mutex_);
    // Capture rollback state so a failed second append leaves both stores as
    // they were.
    fs::path correct_file = file_for(CaseKind::correct);
    std::error_code ec;
    auto prev_size = fs::exists(correct_file) ? fs::file_size(correct_file, ec) : 0;
    size_t prev_count = correct_.cases.size();

    int added_correct = append_locked(correct_case, nullptr) ? 1 : 0;
    int added_bad = 0;
    if (bad_case) {
        try {
            added_bad = append_locked(*bad_case, nullptr) ? 1 : 0;
        } catch (...) {
            if (added_correct == 1) {
                correct_.dedup.erase(dedup_digest(correct_case));
                correct_.cases.resize(prev_count);
                fs::resize_file(correct_file, prev_size, ec);
            }
            throw;
        }
    }
    return {added_correct, added_bad};
}

std::vector<ScoredCase> CaseRepository::retrieve_top_k(const std::string& query_text,
                                                       CaseKind kind, TaskKind task_kind,
                                                       size_t k) const {
    if (k == 0) return {};
    EmbeddingVector query_embedding =
        embedder_ ? embedder_(query_text) : EmbeddingVector{};

    std::shared_lock lock(mutex_);
    const Store& store = store_for(kind);
    std::vector<ScoredCase> scored;
    scored.reserve(store.cases.size());
    for (const auto& r : store.cases) {
        if (r.task_kind != task_kind) continue;
        scored.push_back(score_case(query_text, query_embedding, r, weights_));
    }
    std::sort(scored.begin(), scored.end(), [](const ScoredCase& a, const ScoredCase& b) {
        if (a.combined != b.combined) return a.combined > b.combined;
        return a.record.case_id < b.record.case_id;
    });
    if (scored.size() > k) scored.resize(k);
    return scored;
}

size_t CaseRepository::count(CaseKind kind) const {
    std::shared_lock lock(mutex_);
    return store_for(kind).cases.size();
}

std::vector<CaseRecord> CaseRepository::snapshot(CaseKind kind) const {
    std::shared_lock lock(mutex_);
    return store_for(kind).cases;
}

json CaseRepository::stats() const {
    std::shared_lock lock(mutex_);
    json by_task = json::object();
    for (const auto* store : {&correct_, &bad_}) {
        for (const auto& r : store->cases) {
            std::string key = task_kind_name(r.task_kind);
            if (!by_task.contains(key)) by_task[key] = {{"correct", 0}, {"bad", 0}};
            by_task[key][case_kind_name(r.kind)] =
                by_task[key][case_kind_name(r.kind)].get<int>() + 1;
        }
    }
    return json{{"correct", correct_.cases.size()},
                {"bad", bad_.cases.size()},
                {"by_task_kind", by_task},
                {"dir", dir_.string()}};
}

}  // namespace ke
