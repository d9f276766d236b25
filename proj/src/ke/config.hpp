#pragma once

#include "ke/cases.hpp"
#include "ke/gateway.hpp"
#include "ke/ingest.hpp"
#include "ke/jsonutil.hpp"

#include <string>

namespace ke {

// Everything the pipeline needs, loadable from ke.config.json. CLI flags
// override config keys; environment variables supply secrets only.
struct PipelineConfig {
    BackendConfig backend;
    std::string backend_kind = "http";    // http | replay | record
    std::string fixture_path;             // required for replay/record
    std::string embedder_kind = "lexical";  // lexical | remote

    ChunkingPolicy chunking;  // 3000 / 200
    RetrievalWeights weights;
    size_t few_shot_k = 2;

    int n_samples = 3;
    double temperature = 0.7;
    int max_tokens = 2048;
    double threshold = 0.6;
    int max_reflections = 1;

    std::string schemas_dir = "schemas";
    std::string cases_dir = "cases";
    std::string prompts_dir = "prompts";

    bool save_deduced = false;
    bool classify = false;
    bool update_cases = false;
    bool lenient_merge = false;

    int chunk_parallelism = 2;
    size_t max_cases = 0;  // per kind; 0 = unlimited

    bool operator==(const PipelineConfig&) const = default;
};

json config_to_json(const PipelineConfig& config);
PipelineConfig config_from_json(const json& j);

// Throws InvalidArgument describing the first out-of-range field.
void validate_config(const PipelineConfig& config);

PipelineConfig load_config_file(const std::string& path);

}  // namespace ke
