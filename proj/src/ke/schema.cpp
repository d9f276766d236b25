#include "ke/schema.hpp"

#include "ke/error.hpp"
#include "ke/util.hpp"

#include <algorithm>
#include <set>

namespace fs = std::filesystem;

namespace ke {

const char* task_kind_name(TaskKind kind) {
    switch (kind) {
        case TaskKind::NER: return "NER";
        case TaskKind::RE: return "RE";
        case TaskKind::EE: return "EE";
        case TaskKind::Triple: return "Triple";
        case TaskKind::Custom: return "Custom";
    }
    return "Custom";
}

std::optional<TaskKind> task_kind_from_name(const std::string& name) {
    std::string n = to_lower(name);
    if (n == "ner") return TaskKind::NER;
    if (n == "re") return TaskKind::RE;
    if (n == "ee") return TaskKind::EE;
    if (n == "triple") return TaskKind::Triple;
    if (n == "custom") return TaskKind::Custom;
    return std::nullopt;
}

bool task_outputs_are_sets(TaskKind kind) {
    return kind == TaskKind::NER || kind == TaskKind::RE || kind == TaskKind::Triple ||
           kind == TaskKind::EE;
}

const char* value_kind_name(ValueKind kind) {
    switch (kind) {
        case ValueKind::text: return "text";
        case ValueKind::text_list: return "text_list";
        case ValueKind::record: return "record";
        case ValueKind::record_list: return "record_list";
    }
    return "text";
}

std::optional<ValueKind> value_kind_from_name(const std::string& name) {
    if (name == "text") return ValueKind::text;
    if (name == "text_list") return ValueKind::text_list;
    if (name == "record") return ValueKind::record;
    if (name == "record_list") return ValueKind::record_list;
    return std::nullopt;
}

namespace {

using ordered_json = nlohmann::ordered_json;

bool valid_identifier(const std::string& s) {
    if (s.empty()) return false;
    if (!(s[0] >= 'a' && s[0] <= 'z')) return false;
    for (char c : s) {
        if (!((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_')) return false;
    }
    return true;
}

ordered_json field_to_json(const FieldSpec& field) {
    ordered_json f;
    f["name"] = field.name;
    f["kind"] = value_kind_name(field.kind);
    f["description"] = field.description;
    if (!field.children.empty()) {
        ordered_json children = ordered_json::array();
        for (const auto& c : field.children) children.push_back(field_to_json(c));
        f["children"] = std::move(children);
    }
    return f;
}

void validate_fields(const std::vector<FieldSpec>& fields, const std::string& context) {
    if (fields.empty()) {
        throw Error(ErrorCode::invalid_schema, context + ": fields must be non-empty");
    }
    std::set<std::string> seen;
    for (const auto& f : fields) {
        if (!valid_identifier(f.name)) {
            throw Error(ErrorCode::invalid_schema,
                        context + ": bad field identifier '" + f.name + "'");
        }
        if (!seen.insert(f.name).second) {
            throw Error(ErrorCode::invalid_schema,
                        context + ": duplicate field name '" + f.name + "'");
        }
        bool needs_children = f.kind == ValueKind::record || f.kind == ValueKind::record_list;
        if (needs_children && f.children.empty()) {
            throw Error(ErrorCode::invalid_schema,
                        context + ": field '" + f.name + "' of record kind needs children");
        }
        if (!needs_children && !f.children.empty()) {
            throw Error(ErrorCode::invalid_schema,
                        context + ": field '" + f.name + "' of scalar kind cannot have children");
        }
        if (!f.children.empty()) validate_fields(f.children, context + "." + f.name);
    }
}

FieldSpec field_from_json(const json& j, const std::string& context) {
    if (!j.is_object()) {
        throw Error(ErrorCode::invalid_schema, context + ": field entry must be an object");
    }
    FieldSpec f;
    if (!j.contains("name") || !j["name"].is_string()) {
        throw Error(ErrorCode::invalid_schema, context + ": field needs a string 'name'");
    }
    f.name = j["name"].get<std::string>();
    std::string kind = j.value("kind", "text");
    auto vk = value_kind_from_name(kind);
    if (!vk) {
        throw Error(ErrorCode::invalid_schema,
                    context + ": unknown value kind '" + kind + "' on field '" + f.name + "'");
    }
    f.kind = *vk;
    f.description = j.value("description", "");
    if (j.contains("children")) {
        if (!j["children"].is_array()) {
            throw Error(ErrorCode::invalid_schema,
                        context + ": 'children' of '" + f.name + "' must be an array");
        }
        for (const auto& c : j["children"]) {
            f.children.push_back(field_from_json(c, context + "." + f.name));
        }
    }
    return f;
}

}  // namespace

std::string serialize_schema(const OutputSchema& schema) {
    ordered_json out;
    out["title"] = schema.title;
    ordered_json fields = ordered_json::array();
    for (const auto& f : schema.fields) fields.push_back(field_to_json(f));
    out["fields"] = std::move(fields);
    return out.dump();
}

std::string serialize_record(const SchemaRecord& record) {
    ordered_json out;
    out["id"] = record.id;
    out["task_kind"] = task_kind_name(record.task_kind);
    out["scenario_tags"] = record.scenario_tags;
    out["description"] = record.description;
    out["title"] = record.schema.title;
    ordered_json fields = ordered_json::array();
    for (const auto& f : record.schema.fields) fields.push_back(field_to_json(f));
    out["fields"] = std::move(fields);
    return out.dump();
}

OutputSchema parse_output_schema_json(const json& value) {
    if (!value.is_object()) {
        throw Error(ErrorCode::invalid_schema, "schema definition must be a JSON object");
    }
    OutputSchema schema;
    schema.title = value.value("title", "");
    if (!value.contains("fields") || !value["fields"].is_array()) {
        throw Error(ErrorCode::invalid_schema, "schema definition needs a 'fields' array");
    }
    for (const auto& f : value["fields"]) schema.fields.push_back(field_from_json(f, "fields"));
    validate_fields(schema.fields, "fields");
    return schema;
}

SchemaRecord parse_schema_definition(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) {
        throw Error(ErrorCode::malformed_definition, "schema definition is not valid JSON");
    }
    if (!j.is_object()) {
        throw Error(ErrorCode::malformed_definition, "schema definition must be a JSON object");
    }
    SchemaRecord record;
    if (!j.contains("id") || !j["id"].is_string()) {
        throw Error(ErrorCode::invalid_schema, "schema definition needs a string 'id'");
    }
    record.id = j["id"].get<std::string>();
    if (!valid_identifier(record.id)) {
        throw Error(ErrorCode::invalid_schema, "bad schema id '" + record.id + "'");
    }
    std::string kind = j.value("task_kind", "Custom");
    auto tk = task_kind_from_name(kind);
    if (!tk) {
        throw Error(ErrorCode::invalid_schema, "unknown task_kind '" + kind + "'");
    }
    record.task_kind = *tk;
    if (j.contains("scenario_tags")) {
        if (!j["scenario_tags"].is_array()) {
            throw Error(ErrorCode::invalid_schema, "'scenario_tags' must be an array of strings");
        }
        for (const auto& t : j["scenario_tags"]) {
            if (!t.is_string()) {
                throw Error(ErrorCode::invalid_schema, "'scenario_tags' must be an array of strings");
            }
            record.scenario_tags.push_back(to_lower(t.get<std::string>()));
        }
    }
    record.description = j.value("description", "");
    record.schema.title = j.value("title", record.id);
    if (!j.contains("fields") || !j["fields"].is_array()) {
        throw Error(ErrorCode::invalid_schema, "schema definition needs a 'fields' array");
    }
    for (const auto& f : j["fields"]) {
        record.schema.fields.push_back(field_from_json(f, record.id));
    }
    validate_fields(record.schema.fields, record.id);
    return record;
}

SchemaRepository SchemaRepository::load(const fs::path& dir) {
    SchemaRepository repo;
    repo.dir_ = dir;
    if (!fs::exists(dir)) return repo;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
        SchemaRecord record;
        try {
            record = parse_schema_definition(read_text_file(file));
        } catch (const Error& e) {
            throw Error(e.code(), file.string() + ": " + e.what());
        }
        if (record.id != file.stem().string()) {
            throw Error(ErrorCode::invalid_schema,
                        file.string() + ": file name must equal '" + record.id + ".json'");
        }
        repo.records_.push_back(std::move(record));
    }
    std::sort(repo.records_.begin(), repo.records_.end(),
              [](const SchemaRecord& a, const SchemaRecord& b) { return a.id < b.id; });
    for (size_t i = 1; i < repo.records_.size(); ++i) {
        if (repo.records_[i].id == repo.records_[i - 1].id) {
            throw Error(ErrorCode::invalid_schema, "duplicate schema id " + repo.records_[i].id);
        }
    }
    return repo;
}

std::optional<SchemaRecord> SchemaRepository::find_by_id(const std::string& id) const {
    for (const auto& r : records_) {
        if (r.id == id) return r;
    }
    return std::nullopt;
}

std::optional<SchemaRecord> SchemaRepository::lookup(
    TaskKind task_kind, const std::vector<std::string>& scenario_tags) const {
    std::set<std::string> tags;
    for (const auto& t : scenario_tags) tags.insert(to_lower(t));

    const SchemaRecord* best = nullptr;
    size_t best_overlap = 0;
    for (const auto& r : records_) {
        if (r.task_kind != task_kind) continue;
        size_t overlap = 0;
        for (const auto& t : r.scenario_tags) overlap += tags.count(t);
        if (overlap == 0) continue;
        if (!best || overlap > best_overlap || (overlap == best_overlap && r.id < best->id)) {
            best = &r;
            best_overlap = overlap;
        }
    }
    if (best) return *best;

    std::string default_id = "default_" + to_lower(task_kind_name(task_kind));
    if (task_kind != TaskKind::Custom) {
        if (auto rec = find_by_id(default_id)) return rec;
    }
    return std::nullopt;
}

void SchemaRepository::add(const SchemaRecord& record) {
    validate_fields(record.schema.fields, record.id);
    if (!valid_identifier(record.id)) {
        throw Error(ErrorCode::invalid_schema, "bad schema id '" + record.id + "'");
    }
    if (find_by_id(record.id)) {
        throw Error(ErrorCode::invalid_schema, "schema id already exists: " + record.id);
    }
    if (!dir_.empty()) {
        fs::create_directories(dir_);
        write_file_atomic(dir_ / (record.id + ".json"), serialize_record(record));
    }
    auto pos = std::lower_bound(records_.begin(), records_.end(), record,
                                [](const SchemaRecord& a, const SchemaRecord& b) { return a.id < b.id; });
    records_.insert(pos, record);
}

}  // namespace ke
