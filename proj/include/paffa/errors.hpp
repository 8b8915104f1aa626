#pragma once

#include <stdexcept>
#include <string>

namespace paffa {

enum class ErrorCode {
  invalid_script,
  missing_required_param,
  type_mismatch,
  unknown_param,
  unparseable_document,
  llm_reply_unparseable,
  gateway_transport,
  rate_limited,
  replay_miss,
  ungrounded_locator,
  exploration_failed,
  synthesis_incomplete,
  name_collision,
  persistence_error,
  unsupported_schema_version,
  corrupt_file,
  unknown_api_id,
  unknown_goal,
  spec_invalid,
  session_closed,
  step_failed,
  empty_gold,
  zero_baseline,
  score_out_of_range,
  precondition,
  config
};

const char* error_code_name(ErrorCode code);

/// Base exception for all operation-level failures. Data-shaped outcomes
/// (validation reports, failed step outcomes) are returned as values instead.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace paffa
