#include "ke/eval.hpp"

#include "ke/error.hpp"
#include "ke/util.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace ke {

Metrics Metrics::from_counts(int64_t tp, int64_t fp, int64_t fn) {
    Metrics m;
    m.tp = tp;
    m.fp = fp;
    m.fn = fn;
    m.precision = (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    m.recall = (tp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    m.f1 = (m.precision + m.recall) > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    return m;
}

const char* ablation_mode_name(AblationMode mode) {
    switch (mode) {
        case AblationMode::base: return "base";
        case AblationMode::with_retrieval: return "with_retrieval";
        case AblationMode::with_retrieval_and_reflection: return "with_retrieval_and_reflection";
    }
    return "base";
}

std::optional<AblationMode> ablation_mode_from_name(const std::string& name) {
    std::string n = to_lower(name);
    if (n == "base") return AblationMode::base;
    if (n == "retrieval" || n == "with_retrieval") return AblationMode::with_retrieval;
    if (n == "reflection" || n == "with_retrieval_and_reflection")
        return AblationMode::with_retrieval_and_reflection;
    return std::nullopt;
}

std::string eval_normalize(const std::string& s) {
    return collapse_whitespace(to_lower(s));
}

// ---------------------------------------------------------------------------
// Loaders

namespace {

struct BioDecoder {
    std::set<NerItem>& out;
    std::string cur_type;
    std::vector<std::string> cur_tokens;

    void flush() {
        if (!cur_tokens.empty()) {
            std::string mention;
            for (size_t i = 0; i < cur_tokens.size(); ++i) {
                if (i) mention += ' ';
                mention += cur_tokens[i];
            }
            out.insert({cur_type, mention});
        }
        cur_type.clear();
        cur_tokens.clear();
    }

    void feed(const std::string& token, const std::string& tag, const std::string& where) {
        if (tag == "O") {
            flush();
            return;
        }
        if (tag.size() < 3 || (tag[0] != 'B' && tag[0] != 'I') || tag[1] != '-') {
            throw Error(ErrorCode::malformed_line, where + ": bad BIO tag '" + tag + "'");
        }
        std::string type = tag.substr(2);
        if (tag[0] == 'B' || cur_tokens.empty() || cur_type != type) {
            flush();  // I- without a matching open span starts a new mention
            cur_type = type;
            cur_tokens = {token};
        } else {
            cur_tokens.push_back(token);
        }
    }
};

}  // namespace

std::vector<GoldInstance> load_crossner(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::not_found, "cannot open " + path);
    std::string domain = std::filesystem::path(path).stem().string();

    std::vector<GoldInstance> instances;
    std::vector<std::string> tokens;
    std::set<NerItem> gold;
    BioDecoder decoder{gold};

    auto flush_sentence = [&]() {
        decoder.flush();
        if (!tokens.empty()) {
            GoldInstance inst;
            for (size_t i = 0; i < tokens.size(); ++i) {
                if (i) inst.text += ' ';
                inst.text += tokens[i];
            }
            inst.ner_gold = std::move(gold);
            inst.domain_tag = domain;
            for (const auto& [type, mention] : inst.ner_gold) {
                if (inst.text.find(mention) == std::string::npos) {
                    std::fprintf(stderr, "warning: %s: mention '%s' not a substring of its text\n",
                                 path.c_str(), mention.c_str());
                }
            }
            instances.push_back(std::move(inst));
        }
        tokens.clear();
        gold.clear();
    };

    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) {
            flush_sentence();
            continue;
        }
        size_t tab = line.find('\t');
        std::string where = path + ":" + std::to_string(line_no);
        if (tab == std::string::npos || tab == 0 || tab + 1 >= line.size()) {
            throw Error(ErrorCode::malformed_line, where + ": expected 'token<TAB>tag'");
        }
        std::string token = line.substr(0, tab);
        std::string tag = line.substr(tab + 1);
        decoder.feed(token, tag, where);
        tokens.push_back(std::move(token));
    }
    flush_sentence();
    return instances;
}

std::vector<GoldInstance> load_nyt11(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::not_found, "cannot open " + path);

    std::vector<GoldInstance> instances;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        std::string where = path + ":" + std::to_string(line_no);
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            throw Error(ErrorCode::malformed_line, where + ": invalid JSON object");
        }
        if (!j.contains("text") || !j["text"].is_string()) {
            throw Error(ErrorCode::malformed_line, where + ": missing string 'text'");
        }
        GoldInstance inst;
        inst.text = j["text"].get<std::string>();
        inst.domain_tag = "news";
        if (j.contains("triples")) {
            if (!j["triples"].is_array()) {
                throw Error(ErrorCode::malformed_line, where + ": 'triples' must be an array");
            }
            for (const auto& t : j["triples"]) {
                if (!t.is_object() || !t.contains("head") || !t.contains("relation") ||
                    !t.contains("tail")) {
                    throw Error(ErrorCode::malformed_line,
                                where + ": triple needs head/relation/tail");
                }
                inst.re_gold.insert({t["head"].get<std::string>(),
                                     t["relation"].get<std::string>(),
                                     t["tail"].get<std::string>()});
            }
        }
        instances.push_back(std::move(inst));
    }
    return instances;
}

// ---------------------------------------------------------------------------
// Predictions and ablation runs

std::set<NerItem> ner_pred_from_answer(const json& answer) {
    std::set<NerItem> out;
    if (!answer.is_object() || !answer.contains("entities") || !answer["entities"].is_array())
        return out;
    for (const auto& e : answer["entities"]) {
        if (e.is_object() && e.contains("mention") && e.contains("type") &&
            e["mention"].is_string() && e["type"].is_string()) {
            out.insert({eval_normalize(e["type"].get<std::string>()),
                        eval_normalize(e["mention"].get<std::string>())});
        }
    }
    return out;
}

std::set<ReItem> re_pred_from_answer(const json& answer) {
    std::set<ReItem> out;
    if (!answer.is_object() || !answer.contains("triples") || !answer["triples"].is_array())
        return out;
    for (const auto& t : answer["triples"]) {
        if (t.is_object() && t.contains("head") && t.contains("relation") && t.contains("tail") &&
            t["head"].is_string() && t["relation"].is_string() && t["tail"].is_string()) {
            out.insert({eval_normalize(t["head"].get<std::string>()),
                        eval_normalize(t["relation"].get<std::string>()),
                        eval_normalize(t["tail"].get<std::string>())});
        }
    }
    return out;
}

namespace {

std::set<NerItem> normalized_ner_gold(const GoldInstance& inst) {
    std::set<NerItem> out;
    for (const auto& [type, mention] : inst.ner_gold) {
        out.insert({eval_normalize(type), eval_normalize(mention)});
    }
    return out;
}

std::set<ReItem> normalized_re_gold(const GoldInstance& inst) {
    std::set<ReItem> out;
    for (const auto& t : inst.re_gold) {
        out.insert({eval_normalize(t[0]), eval_normalize(t[1]), eval_normalize(t[2])});
    }
    return out;
}

}  // namespace

json run_ablation(Engine& engine, const std::vector<GoldInstance>& instances, TaskKind task_kind,
                  const std::vector<AblationMode>& modes) {
    if (modes.empty()) {
        throw Error(ErrorCode::invalid_argument, "run_ablation needs at least one mode");
    }
    if (task_kind != TaskKind::NER && task_kind != TaskKind::RE) {
        throw Error(ErrorCode::invalid_argument, "ablation supports NER and RE task kinds");
    }
    const bool is_ner = task_kind == TaskKind::NER;
    const std::string instruction = is_ner ? "Extract named entities from the text."
                                           : "Extract relation triples from the text.";
    const std::string schema_id = is_ner ? "default_ner" : "default_re";

    json mode_reports = json::array();
    for (AblationMode mode : modes) {
        RunOptions options;
        options.update_cases = false;
        options.few_shot_k = (mode == AblationMode::base) ? std::optional<size_t>(0) : std::nullopt;
        options.reflection_enabled = (mode == AblationMode::with_retrieval_and_reflection);

        int64_t tp = 0, fp = 0, fn = 0;
        json rows = json::array();
        for (size_t i = 0; i < instances.size(); ++i) {
            const GoldInstance& inst = instances[i];
            json row;
            row["index"] = i;
            try {
                ExtractionTask task;
                task.instruction = instruction;
                task.task_kind = task_kind;
                task.schema_id = schema_id;
                task.document.source_id = "instance-" + std::to_string(i);
                task.document.format = DocFormat::plain_text;
                task.document.text = inst.text;

                PipelineRun run = engine.run_extract(std::move(task), options);
                const FinalResult& final_result = run.chunk_results.front();
                Metrics m = is_ner ? score_set(ner_pred_from_answer(run.merged_answer),
                                               normalized_ner_gold(inst))
                                   : score_set(re_pred_from_answer(run.merged_answer),
                                               normalized_re_gold(inst));
                row["answer"] = run.merged_answer;
                row["agreement"] = final_result.preliminary_agreement;
                row["reflected"] = final_result.reflected;
                row["cases_used"] = final_result.bad_cases_used;
                row["tp"] = m.tp;
                row["fp"] = m.fp;
                row["fn"] = m.fn;
                tp += m.tp;
                fp += m.fp;
                fn += m.fn;
            } catch (const Error& e) {
                // Count the whole instance as missed and keep going.
                int64_t gold_size = is_ner ? static_cast<int64_t>(inst.ner_gold.size())
                                           : static_cast<int64_t>(inst.re_gold.size());
                row["error"] = e.what();
                row["tp"] = 0;
                row["fp"] = 0;
                row["fn"] = gold_size;
                fn += gold_size;
            }
            rows.push_back(std::move(row));
        }

        Metrics micro = Metrics::from_counts(tp, fp, fn);
        json report;
        report["mode"] = ablation_mode_name(mode);
        report["metrics"] = {{"tp", micro.tp},       {"fp", micro.fp},
                             {"fn", micro.fn},       {"precision", micro.precision},
                             {"recall", micro.recall}, {"f1", micro.f1}};
        report["instances"] = std::move(rows);
        mode_reports.push_back(std::move(report));
    }

    return json{{"task_kind", task_kind_name(task_kind)},
                {"instance_count", instances.size()},
                {"modes", mode_reports}};
}

std::string render_report_table(const json& report) {
    std::ostringstream out;
    char line[160];
    std::snprintf(line, sizeof(line), "%-32s %9s %9s %9s %6s %6s %6s\n", "mode", "precision",
                  "recall", "f1", "tp", "fp", "fn");
    out << line;
    for (const auto& mode : report["modes"]) {
        const json& m = mode["metrics"];
        std::snprintf(line, sizeof(line), "%-32s %9.4f %9.4f %9.4f %6lld %6lld %6lld\n",
                      mode["mode"].get<std::string>().c_str(), m["precision"].get<double>(),
                      m["recall"].get<double>(), m["f1"].get<double>(),
                      static_cast<long long>(m["tp"].get<int64_t>()),
                      static_cast<long long>(m["fp"].get<int64_t>()),
                      static_cast<long long>(m["fn"].get<int64_t>()));
        out << line;
    }
    return out.str();
}

}  // namespace ke
