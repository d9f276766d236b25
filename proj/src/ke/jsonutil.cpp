#include "ke/jsonutil.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <vector>

namespace ke {

namespace {

json normalize_number(const json& v) {
    if (v.is_number_float()) {
        double d = v.get<double>();
        if (std::isfinite(d) && d == std::trunc(d) && std::fabs(d) <= 9007199254740992.0) {
            return json(static_cast<int64_t>(d));
        }
    }
    return v;
}

}  // namespace

json canonicalize_json(const json& value, bool lists_as_sets) {
    if (value.is_object()) {
        json out = json::object();
        for (auto it = value.begin(); it != value.end(); ++it) {
            out[it.key()] = canonicalize_json(it.value(), lists_as_sets);
        }
        return out;
    }
    if (value.is_array()) {
        std::vector<json> items;
        items.reserve(value.size());
        for (const auto& e : value) items.push_back(canonicalize_json(e, lists_as_sets));
        if (lists_as_sets) {
            std::vector<std::pair<std::string, json>> keyed;
            keyed.reserve(items.size());
            for (auto& e : items) keyed.emplace_back(e.dump(), std::move(e));
            std::sort(keyed.begin(), keyed.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });
            keyed.erase(std::unique(keyed.begin(), keyed.end(),
                                    [](const auto& a, const auto& b) { return a.first == b.first; }),
                        keyed.end());
            json out = json::array();
            for (auto& [unused, e] : keyed) out.push_back(std::move(e));
            return out;
        }
        json out = json::array();
        for (auto& e : items) out.push_back(std::move(e));
        return out;
    }
    if (value.is_number()) return normalize_number(value);
    return value;
}

std::string canonical_json_string(const json& value, bool lists_as_sets) {
    return canonicalize_json(value, lists_as_sets).dump();
}

std::string strip_code_fences(const std::string& raw) {
    size_t open = raw.find("```");
    if (open == std::string::npos) return raw;
    size_t body = raw.find('\n', open + 3);
    if (body == std::string::npos) {
        body = open + 3;  // fence marker with inline content, no language line
    } else {
        ++body;
    }
    size_t close = raw.find("```", body);
    if (close == std::string::npos) return raw.substr(body);
    std::string inner = raw.substr(body, close - body);
    if (inner.find('{') != std::string::npos) return inner;
    return raw;
}

std::optional<std::string> first_balanced_json_object(const std::string& text) {
    size_t start = text.find('{');
    if (start == std::string::npos) return std::nullopt;

    enum class Quote { none, dbl, sgl };
    Quote quote = Quote::none;
    int depth = 0;
    for (size_t i = start; i < text.size(); ++i) {
        char c = text[i];
        if (quote != Quote::none) {
            if (c == '\\') {
                ++i;  // skip escaped char
            } else if ((quote == Quote::dbl && c == '"') || (quote == Quote::sgl && c == '\'')) {
                quote = Quote::none;
            }
            continue;
        }
        switch (c) {
            case '"': quote = Quote::dbl; break;
            case '\'': quote = Quote::sgl; break;
            case '{':
            case '[': ++depth; break;
            case '}':
            case ']':
                --depth;
                if (depth == 0) return text.substr(start, i - start + 1);
                break;
            default: break;
        }
    }
    return std::nullopt;
}

std::string repair_json_text(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    enum class Quote { none, dbl, sgl };
    Quote quote = Quote::none;
    for (size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (quote == Quote::dbl) {
            out.push_back(c);
            if (c == '\\' && i + 1 < text.size()) {
                out.push_back(text[++i]);
            } else if (c == '"') {
                quote = Quote::none;
            }
            continue;
        }
        if (quote == Quote::sgl) {
            if (c == '\\' && i + 1 < text.size()) {
                char next = text[i + 1];
                ++i;
                if (next == '\'') {
                    out.push_back('\'');  // \' has no meaning in JSON strings
                } else {
                    out.push_back('\\');
                    out.push_back(next);
                }
            } else if (c == '\'') {
                out.push_back('"');
                quote = Quote::none;
            } else if (c == '"') {
                out += "\\\"";
            } else {
                out.push_back(c);
            }
            continue;
        }
        if (c == '"') {
            quote = Quote::dbl;
            out.push_back(c);
        } else if (c == '\'') {
            quote = Quote::sgl;
            out.push_back('"');
        } else if (c == ',') {
            size_t j = i + 1;
            while (j < text.size() && std::isspace(static_cast<unsigned char>(text[j]))) ++j;
            if (j < text.size() && (text[j] == '}' || text[j] == ']')) {
                continue;  // trailing comma
            }
            out.push_back(c);
        } else {
            out.push_back(c);
        }
    }
    return out;
}

std::optional<json> parse_json_lenient(const std::string& raw) {
    std::string body = strip_code_fences(raw);
    auto candidate = first_balanced_json_object(body);
    if (!candidate) return std::nullopt;

    json parsed = json::parse(*candidate, nullptr, /*allow_exceptions=*/false);
    if (!parsed.is_discarded()) return parsed;

    parsed = json::parse(repair_json_text(*candidate), nullptr, false);
    if (!parsed.is_discarded()) return parsed;
    return std::nullopt;
}

}  // namespace ke
