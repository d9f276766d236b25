#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ke {

enum class DocFormat { plain_text, html, pdf_text };

const char* doc_format_name(DocFormat f);
std::optional<DocFormat> doc_format_from_name(const std::string& name);

struct SourceDocument {
    std::string source_id;
    DocFormat format = DocFormat::plain_text;
    size_t raw_bytes_len = 0;
    std::string text;
    std::map<std::string, std::string> metadata;
};

// Spans are codepoint offsets into the document text, so chunk boundaries never
// split a multi-byte UTF-8 sequence.
struct TextChunk {
    size_t index = 0;
    size_t span_start = 0;
    size_t span_end = 0;
    std::string text;
};

struct ChunkingPolicy {
    size_t chunk_size = 3000;
    size_t overlap = 200;

    bool valid() const { return chunk_size > 0 && overlap < chunk_size; }
    size_t stride() const { return chunk_size - overlap; }
};

// Loads a local file or http(s) URL into plain text. Format comes from the
// hint, then the file extension, then content sniffing.
SourceDocument load_document(const std::string& path_or_url,
                             std::optional<DocFormat> format_hint = std::nullopt);

// Windows of chunk_size codepoints advancing by stride; the last chunk ends at
// the end of the text. Empty text yields no chunks.
std::vector<TextChunk> chunk_text(const std::string& text, const ChunkingPolicy& policy);

// Tag stripping: script/style/nav/footer and comments dropped, block elements
// become newlines, entities decoded, whitespace runs collapsed per line.
std::string html_to_text(const std::string& html);

// Minimal extractor for text-only PDFs (uncompressed or Flate content
// streams). Scanned documents are out of scope.
std::string pdf_to_text(const std::string& pdf_bytes);

}  // namespace ke
