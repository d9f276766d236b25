#include "ke/ingest.hpp"

#include "ke/error.hpp"
#include "ke/util.hpp"

#include <httplib.h>
#include <zlib.h>

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <set>

namespace fs = std::filesystem;

namespace ke {

const char* doc_format_name(DocFormat f) {
    switch (f) {
        case DocFormat::plain_text: return "text";
        case DocFormat::html: return "html";
        case DocFormat::pdf_text: return "pdf-text";
    }
    return "text";
}

std::optional<DocFormat> doc_format_from_name(const std::string& name) {
    std::string n = to_lower(name);
    if (n == "text" || n == "plain_text" || n == "txt") return DocFormat::plain_text;
    if (n == "html") return DocFormat::html;
    if (n == "pdf-text" || n == "pdf_text" || n == "pdf") return DocFormat::pdf_text;
    return std::nullopt;
}

std::vector<TextChunk> chunk_text(const std::string& text, const ChunkingPolicy& policy) {
    if (!policy.valid()) {
        throw Error(ErrorCode::invalid_argument, "chunking policy requires 0 <= overlap < chunk_size");
    }
    std::vector<TextChunk> chunks;
    if (text.empty()) return chunks;

    const auto offsets = utf8_codepoint_offsets(text);
    const size_t n = offsets.size() - 1;  // codepoint count
    size_t start = 0;
    size_t index = 0;
    while (true) {
        size_t end = std::min(start + policy.chunk_size, n);
        TextChunk chunk;
        chunk.index = index++;
        chunk.span_start = start;
        chunk.span_end = end;
        chunk.text = text.substr(offsets[start], offsets[end] - offsets[start]);
        chunks.push_back(std::move(chunk));
        if (end == n) break;
        start += policy.stride();
    }
    return chunks;
}

// ---------------------------------------------------------------------------
// HTML to text

namespace {

void append_utf8(std::string& out, uint32_t cp) {
    if (cp <= 0x7F) {
        out.push_back(static_cast<char>(cp));
    } else if (cp <= 0x7FF) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp <= 0xFFFF) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

std::string decode_entities(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (size_t i = 0; i < s.size(); ++i) {
        if (s[i] != '&') {
            out.push_back(s[i]);
            continue;
        }
        size_t semi = s.find(';', i + 1);
        if (semi == std::string::npos || semi - i > 10) {
            out.push_back('&');
            continue;
        }
        std::string name = s.substr(i + 1, semi - i - 1);
        if (name == "amp") out.push_back('&');
        else if (name == "lt") out.push_back('<');
        else if (name == "gt") out.push_back('>');
        else if (name == "quot") out.push_back('"');
        else if (name == "apos") out.push_back('\'');
        else if (name == "nbsp") out.push_back(' ');
        else if (!name.empty() && name[0] == '#') {
            uint32_t cp = 0;
            bool ok = false;
            if (name.size() > 1 && (name[1] == 'x' || name[1] == 'X')) {
                for (size_t k = 2; k < name.size(); ++k) {
                    char c = name[k];
                    if (!std::isxdigit(static_cast<unsigned char>(c))) { ok = false; break; }
                    cp = cp * 16 + static_cast<uint32_t>(std::isdigit(static_cast<unsigned char>(c))
                                                             ? c - '0'
                                                             : std::tolower(c) - 'a' + 10);
                    ok = true;
                }
            } else {
                for (size_t k = 1; k < name.size(); ++k) {
                    if (!std::isdigit(static_cast<unsigned char>(name[k]))) { ok = false; break; }
                    cp = cp * 10 + static_cast<uint32_t>(name[k] - '0');
                    ok = true;
                }
            }
            if (ok && cp > 0 && cp <= 0x10FFFF) append_utf8(out, cp);
        } else {
            out.push_back('&');
            continue;  // unknown entity left as-is
        }
        i = semi;
    }
    return out;
}

const std::set<std::string>& skipped_elements() {
    static const std::set<std::string> kSkip = {"script", "style", "nav", "footer", "head",
                                                "noscript", "template"};
    return kSkip;
}

const std::set<std::string>& block_elements() {
    static const std::set<std::string> kBlock = {
        "p",       "div",    "br",    "h1",    "h2",     "h3",   "h4",      "h5",
        "h6",      "li",     "ul",    "ol",    "table",  "tr",   "section", "article",
        "header",  "aside",  "main",  "form",  "blockquote", "pre", "hr",   "title",
        "body",    "html",   "dd",    "dt",    "figcaption",  "figure"};
    return kBlock;
}

std::string tag_name_of(const std::string& tag_body) {
    size_t i = 0;
    if (i < tag_body.size() && tag_body[i] == '/') ++i;
    std::string name;
    while (i < tag_body.size() &&
           (std::isalnum(static_cast<unsigned char>(tag_body[i])) || tag_body[i] == '-')) {
        name.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(tag_body[i]))));
        ++i;
    }
    return name;
}

}  // namespace

std::string html_to_text(const std::string& html) {
    std::string raw;
    raw.reserve(html.size());
    size_t i = 0;
    std::string skip_until;  // element name whose close tag ends the skip
    while (i < html.size()) {
        if (html[i] == '<') {
            if (html.compare(i, 4, "<!--") == 0) {
                size_t end = html.find("-->", i + 4);
                i = (end == std::string::npos) ? html.size() : end + 3;
                continue;
            }
            size_t close = html.find('>', i + 1);
            if (close == std::string::npos) break;
            std::string body = html.substr(i + 1, close - i - 1);
            std::string name = tag_name_of(body);
            bool is_close = !body.empty() && body[0] == '/';
            if (!skip_until.empty()) {
                if (is_close && name == skip_until) skip_until.clear();
            } else if (!is_close && skipped_elements().count(name)) {
                skip_until = name;
            } else if (block_elements().count(name)) {
                raw.push_back('\n');
            }
            i = close + 1;
            continue;
        }
        if (skip_until.empty()) raw.push_back(html[i]);
        ++i;
    }

    std::string decoded = decode_entities(raw);

    // Collapse whitespace within lines, fold blank lines away.
    std::string out;
    std::string line;
    auto flush_line = [&]() {
        std::string collapsed = collapse_whitespace(line);
        if (!collapsed.empty()) {
            if (!out.empty()) out.push_back('\n');
            out += collapsed;
        }
        line.clear();
    };
    for (char c : decoded) {
        if (c == '\n') flush_line();
        else line.push_back(c);
    }
    flush_line();
    return out;
}

// ---------------------------------------------------------------------------
// Minimal PDF text extraction

namespace {

std::string zlib_inflate(const std::string& data) {
    z_stream zs{};
    if (inflateInit(&zs) != Z_OK) return {};
    std::string out;
    out.reserve(data.size() * 4);
    std::vector<char> buf(16384);
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
    zs.avail_in = static_cast<uInt>(data.size());
    int ret = Z_OK;
    do {
        zs.next_out = reinterpret_cast<Bytef*>(buf.data());
        zs.avail_out = static_cast<uInt>(buf.size());
        ret = inflate(&zs, Z_NO_FLUSH);
        if (ret != Z_OK && ret != Z_STREAM_END) break;
        out.append(buf.data(), buf.size() - zs.avail_out);
    } while (ret != Z_STREAM_END && zs.avail_in > 0);
    inflateEnd(&zs);
    return (ret == Z_STREAM_END || !out.empty()) ? out : std::string();
}

// Reads a PDF literal string starting at '('; returns decoded bytes and leaves
// pos one past the closing ')'.
std::string read_pdf_string(const std::string& s, size_t& pos) {
    std::string out;
    int depth = 1;
    ++pos;  // past '('
    while (pos < s.size() && depth > 0) {
        char c = s[pos];
        if (c == '\\' && pos + 1 < s.size()) {
            char n = s[pos + 1];
            pos += 2;
            switch (n) {
                case 'n': out.push_back('\n'); break;
                case 'r': out.push_back('\r'); break;
                case 't': out.push_back('\t'); break;
                case 'b': out.push_back('\b'); break;
                case 'f': out.push_back('\f'); break;
                case '(': out.push_back('('); break;
                case ')': out.push_back(')'); break;
                case '\\': out.push_back('\\'); break;
                case '\n': break;  // line continuation
                default:
                    if (n >= '0' && n <= '7') {
                        int val = n - '0';
                        for (int k = 0; k < 2 && pos < s.size() && s[pos] >= '0' && s[pos] <= '7'; ++k) {
                            val = val * 8 + (s[pos] - '0');
                            ++pos;
                        }
                        out.push_back(static_cast<char>(val));
                    } else {
                        out.push_back(n);
                    }
            }
            continue;
        }
        if (c == '(') ++depth;
        if (c == ')') {
            --depth;
            if (depth == 0) { ++pos; break; }
        }
        out.push_back(c);
        ++pos;
    }
    return out;
}

std::string extract_pdf_content_text(const std::string& content) {
    std::string out;
    size_t i = 0;
    while (i < content.size()) {
        size_t bt = content.find("BT", i);
        if (bt == std::string::npos) break;
        size_t et = content.find("ET", bt + 2);
        if (et == std::string::npos) et = content.size();
        size_t p = bt + 2;
        while (p < et) {
            char c = content[p];
            if (c == '(') {
                std::string str = read_pdf_string(content, p);
                out += str;
            } else if (c == 'T' && p + 1 < et &&
                       (content[p + 1] == '*' || content[p + 1] == 'd' || content[p + 1] == 'D')) {
                if (!out.empty() && out.back() != '\n') out.push_back('\n');
                p += 2;
            } else if (c == 'T' && p + 1 < et && content[p + 1] == 'J') {
                // spacing inside TJ arrays was already handled string by string
                p += 2;
            } else {
                ++p;
            }
        }
        i = et + 2;
    }
    return out;
}

}  // namespace

std::string pdf_to_text(const std::string& pdf_bytes) {
    std::string text;
    size_t i = 0;
    while (true) {
        size_t sw = pdf_bytes.find("stream", i);
        if (sw == std::string::npos) break;
        // "endstream" also contains "stream"; make sure this is the keyword.
        if (sw >= 3 && pdf_bytes.compare(sw - 3, 9, "endstream") == 0) {
            i = sw + 6;
            continue;
        }
        size_t data_start = sw + 6;
        if (data_start < pdf_bytes.size() && pdf_bytes[data_start] == '\r') ++data_start;
        if (data_start < pdf_bytes.size() && pdf_bytes[data_start] == '\n') ++data_start;
        size_t data_end = pdf_bytes.find("endstream", data_start);
        if (data_end == std::string::npos) break;
        std::string data = pdf_bytes.substr(data_start, data_end - data_start);
        while (!data.empty() && (data.back() == '\n' || data.back() == '\r')) data.pop_back();

        size_t dict_start = sw > 600 ? sw - 600 : 0;
        std::string dict = pdf_bytes.substr(dict_start, sw - dict_start);
        if (dict.find("/FlateDecode") != std::string::npos) {
            data = zlib_inflate(data);
        }
        text += extract_pdf_content_text(data);
        i = data_end + 9;
    }
    // Normalize like the HTML path: single newlines, collapsed spaces.
    std::string out;
    std::string line;
    auto flush_line = [&]() {
        std::string collapsed = collapse_whitespace(line);
        if (!collapsed.empty()) {
            if (!out.empty()) out.push_back('\n');
            out += collapsed;
        }
        line.clear();
    };
    for (char c : text) {
        if (c == '\n' || c == '\r') flush_line();
        else line.push_back(c);
    }
    flush_line();
    return out;
}

// ---------------------------------------------------------------------------
// Document loading

namespace {

std::optional<DocFormat> format_from_extension(const fs::path& path) {
    std::string ext = to_lower(path.extension().string());
    if (ext == ".txt" || ext == ".text") return DocFormat::plain_text;
    if (ext == ".html" || ext == ".htm" || ext == ".xhtml") return DocFormat::html;
    if (ext == ".pdf") return DocFormat::pdf_text;
    return std::nullopt;
}

std::optional<DocFormat> sniff_format(const std::string& raw) {
    std::string head = to_lower(trim(raw.substr(0, 256)));
    if (head.rfind("%pdf", 0) == 0) return DocFormat::pdf_text;
    if (head.rfind("<!doctype html", 0) == 0 || head.rfind("<html", 0) == 0) return DocFormat::html;
    return std::nullopt;
}

std::string extract_html_title(const std::string& html) {
    std::string lower = to_lower(html);
    size_t open = lower.find("<title");
    if (open == std::string::npos) return {};
    size_t gt = lower.find('>', open);
    if (gt == std::string::npos) return {};
    size_t close = lower.find("</title>", gt);
    if (close == std::string::npos) return {};
    return collapse_whitespace(decode_entities(html.substr(gt + 1, close - gt - 1)));
}

struct FetchResult {
    std::string body;
    std::string content_type;
};

FetchResult fetch_url(const std::string& url) {
    size_t scheme_end = url.find("://");
    size_t path_pos = url.find('/', scheme_end + 3);
    std::string base = path_pos == std::string::npos ? url : url.substr(0, path_pos);
    std::string path = path_pos == std::string::npos ? "/" : url.substr(path_pos);

    httplib::Client client(base);
    client.set_follow_location(true);
    client.set_connection_timeout(15, 0);
    client.set_read_timeout(30, 0);
    auto res = client.Get(path);
    if (!res) {
        throw Error(ErrorCode::not_found, "fetch failed for " + url + ": " + to_string(res.error()));
    }
    if (res->status < 200 || res->status >= 300) {
        throw Error(ErrorCode::not_found,
                    "fetch failed for " + url + ": HTTP " + std::to_string(res->status));
    }
    return {res->body, res->get_header_value("Content-Type")};
}

SourceDocument build_document(const std::string& source_id, const std::string& raw,
                              DocFormat format, std::map<std::string, std::string> metadata,
                              const std::optional<std::string>& pdf_sidecar_text) {
    SourceDocument doc;
    doc.source_id = source_id;
    doc.format = format;
    doc.raw_bytes_len = raw.size();
    doc.metadata = std::move(metadata);

    switch (format) {
        case DocFormat::plain_text:
            doc.text = raw;
            break;
        case DocFormat::html: {
            doc.text = html_to_text(raw);
            std::string title = extract_html_title(raw);
            if (!title.empty()) doc.metadata["title"] = title;
            break;
        }
        case DocFormat::pdf_text:
            doc.text = pdf_sidecar_text ? *pdf_sidecar_text : pdf_to_text(raw);
            break;
    }
    if (trim(doc.text).empty()) {
        throw Error(ErrorCode::empty_after_extraction,
                    "no text extracted from " + source_id);
    }
    return doc;
}

}  // namespace

SourceDocument load_document(const std::string& path_or_url, std::optional<DocFormat> format_hint) {
    const bool is_url = path_or_url.rfind("http://", 0) == 0 || path_or_url.rfind("https://", 0) == 0;

    if (is_url) {
        FetchResult fetched = fetch_url(path_or_url);
        std::optional<DocFormat> format = format_hint;
        if (!format) {
            std::string ct = to_lower(fetched.content_type);
            if (ct.find("text/html") != std::string::npos) format = DocFormat::html;
            else if (ct.find("pdf") != std::string::npos) format = DocFormat::pdf_text;
            else if (ct.find("text/") != std::string::npos) format = DocFormat::plain_text;
        }
        if (!format) format = sniff_format(fetched.body);
        if (!format) {
            throw Error(ErrorCode::unsupported_format,
                        "cannot determine format of " + path_or_url);
        }
        return build_document(path_or_url, fetched.body, *format, {{"origin", path_or_url}},
                              std::nullopt);
    }

    fs::path path(path_or_url);
    if (!fs::exists(path) || fs::is_directory(path)) {
        throw Error(ErrorCode::not_found, "no such file: " + path_or_url);
    }
    std::string raw = read_text_file(path);

    std::optional<DocFormat> format = format_hint;
    if (!format) format = format_from_extension(path);
    if (!format) format = sniff_format(raw);
    if (!format) {
        throw Error(ErrorCode::unsupported_format,
                    "cannot determine format of " + path_or_url + " (use --format)");
    }

    std::optional<std::string> sidecar;
    if (*format == DocFormat::pdf_text) {
        fs::path sidecar_path = path;
        sidecar_path += ".txt";
        if (fs::exists(sidecar_path)) sidecar = read_text_file(sidecar_path);
    }
    return build_document(path_or_url, raw, *format, {{"origin", path_or_url}}, sidecar);
}

}  // namespace ke
