#include "ke/config.hpp"

#include "ke/error.hpp"
#include "ke/util.hpp"

#include <cmath>

namespace ke {

json config_to_json(const PipelineConfig& c) {
    json backend;
    backend["base_url"] = c.backend.base_url;
    backend["api_key_env"] = c.backend.api_key_env;
    backend["chat_model"] = c.backend.chat_model;
    backend["embed_model"] = c.backend.embed_model;
    backend["timeout_seconds"] = c.backend.timeout_seconds;
    backend["max_retries"] = c.backend.max_retries;
    backend["max_concurrent_requests"] = c.backend.max_concurrent_requests;

    json j;
    j["backend"] = std::move(backend);
    j["backend_kind"] = c.backend_kind;
    j["fixture_path"] = c.fixture_path;
    j["embedder_kind"] = c.embedder_kind;
    j["chunk_size"] = c.chunking.chunk_size;
    j["chunk_overlap"] = c.chunking.overlap;
    j["semantic_weight"] = c.weights.semantic;
    j["lexical_weight"] = c.weights.lexical;
    j["few_shot_k"] = c.few_shot_k;
    j["samples"] = c.n_samples;
    j["temperature"] = c.temperature;
    j["max_tokens"] = c.max_tokens;
    j["threshold"] = c.threshold;
    j["max_reflections"] = c.max_reflections;
    j["schemas_dir"] = c.schemas_dir;
    j["cases_dir"] = c.cases_dir;
    j["prompts_dir"] = c.prompts_dir;
    j["save_deduced"] = c.save_deduced;
    j["classify"] = c.classify;
    j["update_cases"] = c.update_cases;
    j["lenient_merge"] = c.lenient_merge;
    j["chunk_parallelism"] = c.chunk_parallelism;
    j["max_cases"] = c.max_cases;
    return j;
}

PipelineConfig config_from_json(const json& j) {
    PipelineConfig c;
    if (j.contains("backend")) {
        const json& b = j["backend"];
        c.backend.base_url = b.value("base_url", c.backend.base_url);
        c.backend.api_key_env = b.value("api_key_env", c.backend.api_key_env);
        c.backend.chat_model = b.value("chat_model", c.backend.chat_model);
        c.backend.embed_model = b.value("embed_model", c.backend.embed_model);
        c.backend.timeout_seconds = b.value("timeout_seconds", c.backend.timeout_seconds);
        c.backend.max_retries = b.value("max_retries", c.backend.max_retries);
        c.backend.max_concurrent_requests =
            b.value("max_concurrent_requests", c.backend.max_concurrent_requests);
    }
    c.backend_kind = j.value("backend_kind", c.backend_kind);
    c.fixture_path = j.value("fixture_path", c.fixture_path);
    c.embedder_kind = j.value("embedder_kind", c.embedder_kind);
    c.chunking.chunk_size = j.value("chunk_size", c.chunking.chunk_size);
    c.chunking.overlap = j.value("chunk_overlap", c.chunking.overlap);
    c.weights.semantic = j.value("semantic_weight", c.weights.semantic);
    c.weights.lexical = j.value("lexical_weight", c.weights.lexical);
    c.few_shot_k = j.value("few_shot_k", c.few_shot_k);
    c.n_samples = j.value("samples", c.n_samples);
    c.temperature = j.value("temperature", c.temperature);
    c.max_tokens = j.value("max_tokens", c.max_tokens);
    c.threshold = j.value("threshold", c.threshold);
    c.max_reflections = j.value("max_reflections", c.max_reflections);
    c.schemas_dir = j.value("schemas_dir", c.schemas_dir);
    c.cases_dir = j.value("cases_dir", c.cases_dir);
    c.prompts_dir = j.value("prompts_dir", c.prompts_dir);
    c.save_deduced = j.value("save_deduced", c.save_deduced);
    c.classify = j.value("classify", c.classify);
    c.update_cases = j.value("update_cases", c.update_cases);
    c.lenient_merge = j.value("lenient_merge", c.lenient_merge);
    c.chunk_parallelism = j.value("chunk_parallelism", c.chunk_parallelism);
    c.max_cases = j.value("max_cases", c.max_cases);
    return c;
}

void validate_config(const PipelineConfig& c) {
    auto fail = [](const std::string& what) {
        throw Error(ErrorCode::invalid_argument, "config: " + what);
    };
    if (c.backend_kind != "http" && c.backend_kind != "replay" && c.backend_kind != "record")
        fail("backend_kind must be http, replay, or record");
    if ((c.backend_kind == "replay" || c.backend_kind == "record") && c.fixture_path.empty())
        fail("backend_kind " + c.backend_kind + " requires fixture_path");
    if (c.embedder_kind != "lexical" && c.embedder_kind != "remote")
        fail("embedder_kind must be lexical or remote");
    if (!c.chunking.valid()) fail("chunking requires chunk_size > 0 and overlap < chunk_size");
    double wsum = c.weights.semantic + c.weights.lexical;
    if (c.weights.semantic < 0 || c.weights.lexical < 0 || std::abs(wsum - 1.0) > 1e-9)
        fail("retrieval weights must be >= 0 and sum to 1");
    if (c.n_samples < 1) fail("samples must be >= 1");
    if (c.temperature < 0) fail("temperature must be >= 0");
    if (c.max_tokens < 1) fail("max_tokens must be >= 1");
    if (c.threshold < 0 || c.threshold > 1) fail("threshold must be in [0,1]");
    if (c.max_reflections < 0) fail("max_reflections must be >= 0");
    if (c.chunk_parallelism < 1) fail("chunk_parallelism must be >= 1");
    if (c.backend.max_retries < 0) fail("max_retries must be >= 0");
    if (c.backend.timeout_seconds <= 0) fail("timeout_seconds must be > 0");
}

PipelineConfig load_config_file(const std::string& path) {
    json j = json::parse(read_text_file(path), nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw Error(ErrorCode::invalid_argument, "config file is not a JSON object: " + path);
    }
    PipelineConfig c = config_from_json(j);
    validate_config(c);
    return c;
}

}  // namespace ke
