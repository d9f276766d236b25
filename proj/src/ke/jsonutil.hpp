#pragma once

#include <json.hpp>

#include <optional>
#include <string>

namespace ke {

using json = nlohmann::json;

// Canonical form: object keys sorted (nlohmann maps do this), integral doubles
// folded to integers, and optionally every array treated as a set (elements
// sorted by canonical serialization, duplicates removed). Set treatment is used
// for entity/triple-style task outputs where ordering carries no meaning.
json canonicalize_json(const json& value, bool lists_as_sets);

std::string canonical_json_string(const json& value, bool lists_as_sets);

// Best-effort extraction of the first JSON object from LLM output: strips code
// fences and surrounding prose, finds the first balanced {...}, and if strict
// parsing fails, repairs single-quoted strings and trailing commas before one
// more strict parse. Returns nullopt when nothing parseable is found.
std::optional<json> parse_json_lenient(const std::string& raw);

// Exposed pieces of the lenient parser, reusable and independently testable.
std::string strip_code_fences(const std::string& raw);
std::optional<std::string> first_balanced_json_object(const std::string& text);
std::string repair_json_text(const std::string& text);

}  // namespace ke
