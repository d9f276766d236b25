#pragma once

#include "ke/jsonutil.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ke {

enum class TaskKind { NER, RE, EE, Triple, Custom };

const char* task_kind_name(TaskKind kind);
std::optional<TaskKind> task_kind_from_name(const std::string& name);

// Entity/triple-style outputs compare as sets; free-form outputs keep order.
bool task_outputs_are_sets(TaskKind kind);

enum class ValueKind { text, text_list, record, record_list };

const char* value_kind_name(ValueKind kind);
std::optional<ValueKind> value_kind_from_name(const std::string& name);

struct FieldSpec {
    std::string name;
    ValueKind kind = ValueKind::text;
    std::string description;
    std::vector<FieldSpec> children;  // non-empty iff kind is record/record_list

    bool operator==(const FieldSpec&) const = default;
};

struct OutputSchema {
    std::string title;
    std::vector<FieldSpec> fields;

    bool operator==(const OutputSchema&) const = default;
};

struct SchemaRecord {
    std::string id;
    TaskKind task_kind = TaskKind::Custom;
    std::vector<std::string> scenario_tags;  // stored lowercase
    std::string description;
    OutputSchema schema;

    bool operator==(const SchemaRecord&) const = default;
};

// Canonical JSON description fed to prompts: {"title":...,"fields":[...]} with
// fixed key order and no insignificant whitespace.
std::string serialize_schema(const OutputSchema& schema);

// Canonical form of a full repository definition file.
std::string serialize_record(const SchemaRecord& record);

// Throws MalformedDefinition on bad JSON, InvalidSchema on structural problems
// (duplicate sibling names, empty fields, bad identifiers, children mismatch).
SchemaRecord parse_schema_definition(const std::string& text);

// Parses just the {"title","fields"} shape, used for LLM-deduced schemas.
OutputSchema parse_output_schema_json(const json& value);

class SchemaRepository {
  public:
    SchemaRepository() = default;

    // Loads every *.json in the directory; throws on the first invalid file.
    // A missing directory is treated as an empty repository.
    static SchemaRepository load(const std::filesystem::path& dir);

    std::optional<SchemaRecord> find_by_id(const std::string& id) const;

    // Record of matching task kind with maximal tag overlap; ties broken by
    // smallest id. Zero overlap falls back to the kind's default record
    // ("default_<kind>") when one exists.
    std::optional<SchemaRecord> lookup(TaskKind task_kind,
                                       const std::vector<std::string>& scenario_tags) const;

    // Validates, writes <id>.json into the repository directory, and makes the
    // record visible to subsequent lookups.
    void add(const SchemaRecord& record);

    const std::vector<SchemaRecord>& records() const { return records_; }
    const std::filesystem::path& dir() const { return dir_; }

  private:
    std::filesystem::path dir_;
    std::vector<SchemaRecord> records_;  // kept sorted by id
};

}  // namespace ke
