#pragma once

#include <stdexcept>
#include <string>

namespace ke {

enum class ErrorCode {
    invalid_argument,
    not_found,
    unsupported_format,
    empty_after_extraction,
    malformed_definition,
    invalid_schema,
    unknown_schema_id,
    auth_error,
    rate_limited,
    timeout,
    fixture_miss,
    backend_error,
    dim_mismatch,
    persistence_error,
    invalid_record,
    empty_generation,
    deduction_parse_failure,
    no_valid_candidate,
    malformed_line,
    schema_mismatch,
    extraction_failed,
    internal,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

    ErrorCode code() const { return code_; }

    // Transport-level failures worth another attempt; auth and caller errors are not.
    bool retryable() const {
        return code_ == ErrorCode::rate_limited || code_ == ErrorCode::timeout ||
               code_ == ErrorCode::backend_error;
    }

  private:
    ErrorCode code_;
};

}  // namespace ke
