#include "ke/schema_agent.hpp"

#include "ke/curator.hpp"
#include "ke/error.hpp"
#include "ke/util.hpp"

#include <set>

namespace ke {

const char* schema_provenance_name(SchemaProvenance p) {
    switch (p) {
        case SchemaProvenance::user_specified: return "user_specified";
        case SchemaProvenance::repository_match: return "repository_match";
        case SchemaProvenance::deduced: return "deduced";
    }
    return "deduced";
}

namespace {

std::string slug_from_title(const std::string& title) {
    std::string slug;
    for (char c : to_lower(title)) {
        if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) {
            slug.push_back(c);
        } else if (!slug.empty() && slug.back() != '_') {
            slug.push_back('_');
        }
    }
    while (!slug.empty() && slug.back() == '_') slug.pop_back();
    if (slug.empty() || !(slug[0] >= 'a' && slug[0] <= 'z')) slug = "schema_" + slug;
    while (!slug.empty() && slug.back() == '_') slug.pop_back();
    return slug;
}

}  // namespace

SchemaAgent::SchemaAgent(SchemaRepository& repository, LlmGateway& gateway,
                         const PromptLibrary& prompts, SchemaAgentOptions options)
    : repository_(repository), gateway_(gateway), prompts_(prompts), options_(options) {
    options_.sampling.n_samples = 1;
}

std::string SchemaAgent::classify_genre(const std::string& sample_text) {
    std::string prompt =
        prompts_.render("genre_classify", {{"sample", truncate_excerpt(sample_text, 1000)}});
    LlmResponse res = gateway_.chat({{ChatRole::user, prompt}}, options_.sampling);
    return collapse_whitespace(res.texts.front());
}

DeducedSchema SchemaAgent::deduce_schema(const std::string& instruction,
                                         const std::string& sample_text) {
    std::string sample = truncate_excerpt(sample_text, 1000);
    std::string prompt = prompts_.render("schema_deduce",
                                         {{"instruction", instruction}, {"sample", sample}});
    std::string last_error;
    for (int attempt = 1; attempt <= 2; ++attempt) {
        std::string body = prompt;
        if (attempt == 2) {
            body += "\n\nThe previous reply failed to parse: " + last_error +
                    "\nReply again with only the JSON object.";
        }
        LlmResponse res = gateway_.chat({{ChatRole::user, body}}, options_.sampling);
        auto parsed = parse_json_lenient(res.texts.front());
        if (!parsed) {
            last_error = "no JSON object found in the reply";
            continue;
        }
        try {
            return DeducedSchema{parse_output_schema_json(*parsed), attempt};
        } catch (const Error& e) {
            last_error = e.what();
        }
    }
    throw Error(ErrorCode::deduction_parse_failure,
                "schema deduction failed twice; last error: " + last_error);
}

ResolvedSchema SchemaAgent::resolve_schema(ExtractionTask& task) {
    if (task.task_kind == TaskKind::Custom && trim(task.instruction).empty()) {
        throw Error(ErrorCode::invalid_argument, "custom tasks require an instruction");
    }

    if (task.schema_id) {
        auto record = repository_.find_by_id(*task.schema_id);
        if (!record) {
            throw Error(ErrorCode::unknown_schema_id, "no schema with id '" + *task.schema_id + "'");
        }
        return {record->schema, SchemaProvenance::user_specified, record->id, 0};
    }

    std::vector<std::string> tags = tokenize_words(task.instruction);
    if (options_.classify && !task.constraints.count("genre")) {
        task.constraints["genre"] = classify_genre(task.document.text);
    }
    if (auto it = task.constraints.find("genre"); it != task.constraints.end()) {
        for (auto& t : tokenize_words(it->second)) tags.push_back(std::move(t));
    }
    if (auto record = repository_.lookup(task.task_kind, tags)) {
        return {record->schema, SchemaProvenance::repository_match, record->id, 0};
    }

    DeducedSchema deduced = deduce_schema(task.instruction, task.document.text);
    ResolvedSchema resolved{deduced.schema, SchemaProvenance::deduced, "", deduced.attempts};
    if (options_.save_deduced) {
        std::string base = slug_from_title(deduced.schema.title.empty() ? task.instruction
                                                                        : deduced.schema.title);
        std::string id = base;
        for (int i = 2; repository_.find_by_id(id); ++i) id = base + "_" + std::to_string(i);
        SchemaRecord record;
        record.id = id;
        record.task_kind = task.task_kind;
        record.description = task.instruction;
        record.schema = deduced.schema;
        if (record.schema.title.empty()) record.schema.title = id;
        repository_.add(record);
        resolved.schema_id = id;
        resolved.schema = record.schema;
    }
    return resolved;
}

}  // namespace ke
