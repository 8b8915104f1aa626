#include "paffa/executor.hpp"

#include <chrono>

namespace paffa {

bool ExecutionTrace::all_ok() const {
  for (const StepOutcome& outcome : steps) {
    if (!outcome.ok) return false;
  }
  return true;
}

StepOutcome execute_step(Session& session, const ActionStep& step) {
  using clock = std::chrono::steady_clock;
  const auto started = clock::now();

  StepOutcome outcome;
  outcome.step = step;

  if (step.value.has_value() && step.value->kind == ValueKind::param_ref) {
    outcome.ok = false;
    outcome.attempts.push_back(
        {Locator{}, false, "unresolved param-ref '" + step.value->param + "'"});
    return outcome;
  }
  const std::string value = step.value.has_value() ? step.value->literal : "";

  switch (step.kind) {
    case StepKind::navigate: {
      ActResult result = session.navigate(value);
      outcome.ok = result.ok;
      if (!result.ok) outcome.attempts.push_back({Locator{}, false, result.note});
      break;
    }
    case StepKind::wait: {
      session.wait(step.wait_seconds);
      outcome.ok = true;
      break;
    }
    case StepKind::click:
    case StepKind::submit:
    case StepKind::input:
    case StepKind::select_option: {
      if (!step.target.has_value()) {
        outcome.ok = false;
        break;
      }
      for (const Locator& locator : *step.target) {
        FindResult found = session.find(locator);
        Attempt attempt{locator, found.handle.has_value(), found.note};
        outcome.attempts.push_back(attempt);
        if (!found.handle.has_value()) continue;
        ActResult result = session.act(*found.handle, step.kind, value);
        outcome.ok = result.ok;
        if (!result.ok) outcome.attempts.back().note = result.note;
        break;  // the first resolving locator owns the action
      }
      break;
    }
  }

  outcome.duration_ms =
      std::chrono::duration_cast<std::chrono::milliseconds>(clock::now() - started).count();
  return outcome;
}

ExecutionTrace run_script(Session& session, const ActionScript& script, bool stop_on_failure) {
  if (!session.is_open()) {
    throw Error(ErrorCode::session_closed, "run_script requires an open session");
  }
  for (const ActionStep& step : script.steps) {
    if (step.value.has_value() && step.value->kind == ValueKind::param_ref) {
      throw Error(ErrorCode::invalid_script,
                  "script still references param '" + step.value->param + "'");
    }
  }
  ValidationReport report = validate_script(script);
  if (!report.ok) {
    throw Error(ErrorCode::invalid_script, report.to_string());
  }

  ExecutionTrace trace;
  trace.start_url = session.current_url();
  trace.started_at = iso8601_now();
  for (const ActionStep& step : script.steps) {
    trace.steps.push_back(execute_step(session, step));
    if (!trace.steps.back().ok && stop_on_failure) {
      trace.partial = true;
      break;
    }
  }
  if (!trace.all_ok() && !trace.partial) trace.partial = true;
  trace.end_page_id = session.current_page_id();
  trace.ended_at = iso8601_now();
  return trace;
}

json outcome_to_json(const StepOutcome& outcome) {
  json attempts = json::array();
  for (const Attempt& attempt : outcome.attempts) {
    attempts.push_back(json{{"locator", locator_to_json(attempt.locator)},
                            {"resolved", attempt.resolved},
                            {"note", attempt.note}});
  }
  return json{{"step", step_to_json(outcome.step)},
              {"status", outcome.ok ? "ok" : "failed"},
              {"attempts", std::move(attempts)},
              {"duration-ms", outcome.duration_ms}};
}

json trace_to_json(const ExecutionTrace& trace) {
  json steps = json::array();
  for (const StepOutcome& outcome : trace.steps) steps.push_back(outcome_to_json(outcome));
  return json{{"steps", std::move(steps)},
              {"start-url", trace.start_url},
              {"end-page-id", trace.end_page_id},
              {"partial", trace.partial},
              {"started-at", trace.started_at},
              {"ended-at", trace.ended_at}};
}

}  // namespace paffa
