#pragma once

#include <string>
#include <vector>

#include "paffa/distill.hpp"
#include "paffa/executor.hpp"
#include "paffa/gateway.hpp"

namespace paffa {

/// One page-view's worth of planned steps. done=true with zero steps is the
/// termination signal; done=false requires at least one step.
struct StepChunk {
  std::vector<ActionStep> steps;
  bool done = false;
  std::string rationale;
};

struct HistoryEntry {
  ActionStep step;
  bool ok = false;
  std::string note;
};

struct UnravelState {
  std::string goal;
  std::vector<HistoryEntry> history;
  int page_count = 0;
  int step_count = 0;
};

struct Limits {
  int max_pages = 10;
  int max_steps = 40;
  int max_retries = 1;  // reprompts after a failed step, per run
};

/// One-shot script generation constrained to verified distilled elements
/// (closed world: a locator outside the provided chains is rejected, with a
/// single corrective reprompt before failing).
ActionScript distmap_generate(const std::string& task, const std::string& website,
                              const std::vector<DistilledPage>& pages,
                              const PromptLibrary& prompts, Gateway& gateway);

/// One incremental planning call: current page markup plus goal and history
/// in, validated StepChunk out.
StepChunk unravel_step(const UnravelState& state, const std::string& current_html,
                       const PromptLibrary& prompts, Gateway& gateway, bool prune = true);

struct UnravelResult {
  ExecutionTrace trace;
  ActionScript script;  // concatenation of successfully executed steps, literals inline
};

enum class ExplorationFailure { limits_exceeded, step_failed_after_retries, gateway_error, empty_result };

const char* to_string(ExplorationFailure reason);

/// Carries the partial trace gathered before the run aborted.
class ExplorationError : public Error {
 public:
  ExplorationError(ExplorationFailure reason, std::string message, ExecutionTrace partial)
      : Error(ErrorCode::exploration_failed, std::string(to_string(reason)) + ": " + message),
        reason(reason),
        partial(std::move(partial)) {}

  ExplorationFailure reason;
  ExecutionTrace partial;
};

/// Incremental, stateful exploration: read page, plan chunk, execute, fold
/// outcomes into history; stops on an explicit done signal or on limits.
UnravelResult unravel_run(const std::string& task, const std::string& website, Session& session,
                          const PromptLibrary& prompts, Gateway& gateway, const Limits& limits);

}  // namespace paffa
