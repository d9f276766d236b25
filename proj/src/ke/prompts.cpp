#include "ke/prompts.hpp"

#include "ke/error.hpp"
#include "ke/util.hpp"

namespace fs = std::filesystem;

namespace ke {

namespace {

const char* kExtract = R"(You are an information extraction engine. Extract structured data from the input text, following the output schema exactly.

Output schema (JSON):
{schema}

Reply with a single JSON object that conforms to the schema. Do not add commentary.)";

const char* kReflect = R"(You are an information extraction engine reviewing a draft answer. The draft may be wrong. Use the schema and the past mistakes shown to you to produce a corrected answer.

Output schema (JSON):
{schema}

Reply with a single corrected JSON object that conforms to the schema. Do not add commentary.)";

const char* kSchemaDeduce = R"(Design an output schema for the extraction task below.

Task: {instruction}

Sample of the source text:
{sample}

Reply with a single JSON object of the form
{"title": "...", "fields": [{"name": "...", "kind": "text|text_list|record|record_list", "description": "...", "children": [...]}]}
Field names must match [a-z][a-z0-9_]*. Use "children" only for record and record_list fields. Do not add commentary.)";

const char* kGenreClassify = R"(Classify the genre and domain of the following text in a few words (for example "Politics News Report").

Text sample:
{sample}

Reply with the genre phrase only.)";

const char* kCuratorReasoning = R"(A knowledge extraction task was solved correctly. Write the reasoning steps that derive the correct answer from the input, then restate the answer.

Task: {task}

Input:
{input}

Output schema (JSON):
{schema}

Correct answer:
{reference}

Reply with the reasoning steps followed by "Answer:" and the correct answer JSON.)";

const char* kCuratorReflection = R"(A knowledge extraction task was answered incorrectly. Compare the produced answer with the correct one, identify what went wrong, and write a short reflection that would help avoid the same mistake.

Task: {task}

Input:
{input}

Output schema (JSON):
{schema}

Produced answer (wrong):
{answer}

Correct answer:
{reference}

Reply with the reflection text only.)";

}  // namespace

const std::map<std::string, std::string>& PromptLibrary::builtin_templates() {
    static const std::map<std::string, std::string> kTemplates = {
        {"extract", kExtract},
        {"reflect", kReflect},
        {"schema_deduce", kSchemaDeduce},
        {"genre_classify", kGenreClassify},
        {"curator_reasoning", kCuratorReasoning},
        {"curator_reflection", kCuratorReflection},
    };
    return kTemplates;
}

PromptLibrary::PromptLibrary() : templates_(builtin_templates()) {}

PromptLibrary PromptLibrary::load(const fs::path& dir) {
    PromptLibrary lib;
    if (dir.empty() || !fs::exists(dir)) return lib;
    for (auto& [name, unused] : lib.templates_) {
        fs::path file = dir / (name + ".txt");
        if (fs::exists(file)) lib.templates_[name] = read_text_file(file);
    }
    return lib;
}

const std::string& PromptLibrary::raw(const std::string& name) const {
    auto it = templates_.find(name);
    if (it == templates_.end()) {
        throw Error(ErrorCode::not_found, "no prompt template named '" + name + "'");
    }
    return it->second;
}

std::string PromptLibrary::render(const std::string& name,
                                  const std::map<std::string, std::string>& vars) const {
    std::string out = raw(name);
    for (const auto& [key, value] : vars) {
        std::string token = "{" + key + "}";
        size_t pos = 0;
        while ((pos = out.find(token, pos)) != std::string::npos) {
            out.replace(pos, token.size(), value);
            pos += value.size();
        }
    }
    return out;
}

}  // namespace ke
