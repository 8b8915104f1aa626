#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "paffa/dsl.hpp"

namespace paffa {

/// Result of resolving a locator within a session. `note` carries transport
/// or staleness details when resolution fails for reasons other than absence.
struct FindResult {
  std::optional<std::string> handle;
  std::string note;
};

struct ActResult {
  bool ok = false;
  std::string note;
};

/// Stateful browsing session: every act is reflected in the html that
/// subsequent reads observe. One session, one thread.
class Session {
 public:
  virtual ~Session() = default;

  virtual void open(const std::string& start_url) = 0;
  virtual bool is_open() const = 0;
  virtual std::string current_url() = 0;
  virtual std::string current_html() = 0;
  /// Simulator backends report the logical page id; live backends report the URL.
  virtual std::string current_page_id() = 0;
  virtual FindResult find(const Locator& locator) = 0;
  virtual ActResult act(const std::string& handle, StepKind kind, const std::string& value) = 0;
  virtual ActResult navigate(const std::string& url) = 0;
  virtual void wait(double seconds) = 0;
  virtual void close() = 0;
};

struct Attempt {
  Locator locator;
  bool resolved = false;
  std::string note;
};

struct StepOutcome {
  ActionStep step;
  bool ok = false;
  std::vector<Attempt> attempts;  // chain order; empty for target-less steps
  long long duration_ms = 0;
};

struct ExecutionTrace {
  std::vector<StepOutcome> steps;
  std::string start_url;
  std::string end_page_id;
  bool partial = false;
  std::string started_at;
  std::string ended_at;

  bool all_ok() const;
};

/// Tries the chain strictly in order; the first locator that resolves
/// receives the action. Failures are data, never exceptions.
StepOutcome execute_step(Session& session, const ActionStep& step);

/// Sequences execute_step over a fully substituted script (zero param-refs).
ExecutionTrace run_script(Session& session, const ActionScript& script, bool stop_on_failure);

json outcome_to_json(const StepOutcome& outcome);
json trace_to_json(const ExecutionTrace& trace);

}  // namespace paffa
