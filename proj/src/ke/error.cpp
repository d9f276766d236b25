#include "ke/error.hpp"

namespace ke {

const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::invalid_argument: return "InvalidArgument";
        case ErrorCode::not_found: return "NotFound";
        case ErrorCode::unsupported_format: return "UnsupportedFormat";
        case ErrorCode::empty_after_extraction: return "EmptyAfterExtraction";
        case ErrorCode::malformed_definition: return "MalformedDefinition";
        case ErrorCode::invalid_schema: return "InvalidSchema";
        case ErrorCode::unknown_schema_id: return "UnknownSchemaId";
        case ErrorCode::auth_error: return "AuthError";
        case ErrorCode::rate_limited: return "RateLimited";
        case ErrorCode::timeout: return "Timeout";
        case ErrorCode::fixture_miss: return "FixtureMiss";
        case ErrorCode::backend_error: return "BackendError";
        case ErrorCode::dim_mismatch: return "DimMismatch";
        case ErrorCode::persistence_error: return "PersistenceError";
        case ErrorCode::invalid_record: return "InvalidRecord";
        case ErrorCode::empty_generation: return "EmptyGeneration";
        case ErrorCode::deduction_parse_failure: return "DeductionParseFailure";
        case ErrorCode::no_valid_candidate: return "NoValidCandidate";
        case ErrorCode::malformed_line: return "MalformedLine";
        case ErrorCode::schema_mismatch: return "SchemaMismatch";
        case ErrorCode::extraction_failed: return "ExtractionFailed";
        case ErrorCode::internal: return "Internal";
    }
    return "Unknown";
}

}  // namespace ke
