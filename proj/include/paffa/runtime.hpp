#pragma once

#include <functional>
#include <memory>
#include <string>

#include "paffa/generation.hpp"
#include "paffa/library.hpp"

namespace paffa {

struct ApiMatch {
  bool match = false;
  std::string api_id;
  Bindings bindings;
  std::vector<std::string> warnings;
};

enum class TaskStatus { completed_via_api, completed_via_unravel, failed };

const char* to_string(TaskStatus status);

struct TaskResult {
  TaskStatus status = TaskStatus::failed;
  ExecutionTrace trace;
  TokenLedger tokens;  // the slice of gateway traffic this request caused
  bool library_updated = false;
  std::string api_id;
  std::string error;
  std::vector<std::string> warnings;
};

/// One fused retrieval + slot-filling call. The prompt carries the api
/// catalog (names, descriptions, param specs) and never page markup; an
/// empty library short-circuits to no-match without touching the gateway.
/// Unknown api names and binding type mismatches downgrade to no-match with
/// a warning rather than failing the request.
ApiMatch retrieve_and_fill(const std::string& request, const LibraryStore& store,
                           const PromptLibrary& prompts, Gateway& gateway);

/// Thrown when direct execution of a cached api fails at some step.
class ApiExecutionError : public Error {
 public:
  ApiExecutionError(int step_index, int attempts, ExecutionTrace partial)
      : Error(ErrorCode::step_failed,
              "step " + std::to_string(step_index) + " failed after " +
                  std::to_string(attempts) + " attempt(s)"),
        step_index(step_index),
        attempts(attempts),
        partial(std::move(partial)) {}

  int step_index;
  int attempts;
  ExecutionTrace partial;
};

/// Substitution plus direct step execution. No gateway is in scope here, so
/// a completed-via-api request costs exactly the one retrieval call.
ExecutionTrace execute_api(const ActionApi& api, const Bindings& bindings, Session& session);

using SessionFactory = std::function<std::unique_ptr<Session>()>;

/// Full request pipeline: retrieve + fill, execute the cached api when it is
/// healthy, fall back to exploration on no-match / staleness / execution
/// failure, and fold successful novel traces back into the store. Returns a
/// result in every case; never throws.
TaskResult handle_request(const std::string& request, const std::string& website,
                          LibraryStore& store, const SessionFactory& sessions,
                          const PromptLibrary& prompts, Gateway& gateway, const Limits& limits);

json task_result_to_json(const TaskResult& result);

}  // namespace paffa
