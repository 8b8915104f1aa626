#include "paffa/generation.hpp"

#include <set>
#include <sstream>

namespace paffa {

const char* to_string(ExplorationFailure reason) {
  switch (reason) {
    case ExplorationFailure::limits_exceeded: return "limits-exceeded";
    case ExplorationFailure::step_failed_after_retries: return "step-failed-after-retries";
    case ExplorationFailure::gateway_error: return "gateway-error";
    case ExplorationFailure::empty_result: return "empty-result";
  }
  return "?";
}

namespace {

json parse_reply(const std::string& reply) {
  json doc = json::parse(reply, nullptr, false);
  if (doc.is_discarded()) {
    throw Error(ErrorCode::llm_reply_unparseable, "reply is not JSON");
  }
  return doc;
}

ActionScript script_from_reply(const json& doc, const std::string& website,
                               const std::string& task) {
  if (!doc.is_object() || !doc.contains("steps")) {
    throw Error(ErrorCode::llm_reply_unparseable, "reply has no steps");
  }
  ActionScript script;
  script.website = website;
  script.task_description = task;
  for (const json& step : doc.at("steps")) {
    try {
      script.steps.push_back(step_from_json(step));
    } catch (const Error&) {
      throw Error(ErrorCode::llm_reply_unparseable, "reply step does not parse: " + step.dump());
    }
  }
  if (doc.contains("declared-params")) {
    for (const json& param : doc.at("declared-params")) {
      script.declared_params.push_back(param_from_json(param));
    }
  }
  ValidationReport report = validate_script(script);
  if (!report.ok) {
    throw Error(ErrorCode::llm_reply_unparseable, "reply script invalid: " + report.to_string());
  }
  return script;
}

std::string elements_json_text(const std::vector<DistilledPage>& pages) {
  json out = json::array();
  for (const DistilledPage& page : pages) {
    json elements = json::array();
    for (const DistilledElement& element : page.elements) {
      elements.push_back(element_to_json(element));
    }
    out.push_back(json{{"page-id", page.page_id}, {"elements", std::move(elements)}});
  }
  return out.dump(2);
}

/// Locators the generated script may use: exactly those in the distilled chains.
std::set<std::pair<std::string, std::string>> grounded_locators(
    const std::vector<DistilledPage>& pages) {
  std::set<std::pair<std::string, std::string>> out;
  for (const DistilledPage& page : pages) {
    for (const DistilledElement& element : page.elements) {
      for (const Locator& locator : element.locators) {
        out.emplace(to_string(locator.strategy), locator.value);
      }
    }
  }
  return out;
}

std::vector<Locator> ungrounded(const ActionScript& script,
                                const std::set<std::pair<std::string, std::string>>& allowed) {
  std::vector<Locator> out;
  for (const ActionStep& step : script.steps) {
    if (!step.target.has_value()) continue;
    for (const Locator& locator : *step.target) {
      if (allowed.count({to_string(locator.strategy), locator.value}) == 0) {
        out.push_back(locator);
      }
    }
  }
  return out;
}

}  // namespace

ActionScript distmap_generate(const std::string& task, const std::string& website,
                              const std::vector<DistilledPage>& pages,
                              const PromptLibrary& prompts, Gateway& gateway) {
  if (task.empty()) {
    throw Error(ErrorCode::precondition, "task must be non-empty");
  }
  for (const DistilledPage& page : pages) {
    if (!page.verified) {
      throw Error(ErrorCode::precondition, "page '" + page.page_id + "' is not verified");
    }
  }
  const std::string elements = elements_json_text(pages);
  const auto allowed = grounded_locators(pages);

  Prompt prompt = prompts.render(
      "distmap_generate", {{"task", task}, {"website", website}, {"elements", elements}});
  prompt.key_slots = {"distmap", website, task, jsonio::fnv1a_hex(elements)};

  std::optional<Error> last;
  for (int attempt = 0; attempt < 2; ++attempt) {
    std::string reply = gateway.complete(prompt, {ExchangeTag::step_prompt});
    ActionScript script;
    try {
      script = script_from_reply(parse_reply(reply), website, task);
    } catch (const Error& err) {
      last = err;
      prompt.user_text += "\n\nThe previous reply could not be parsed. "
                          "Reply with exactly the JSON object described above.";
      prompt.key_slots.push_back("retry");
      continue;
    }
    std::vector<Locator> stray = ungrounded(script, allowed);
    if (stray.empty()) return script;

    std::ostringstream note;
    note << "\n\nThese locators are not in the distilled element set:";
    for (const Locator& locator : stray) {
      note << " " << to_string(locator.strategy) << "=" << locator.value;
    }
    note << ". Use only locators from the provided elements.";
    last = Error(ErrorCode::ungrounded_locator,
                 std::to_string(stray.size()) + " locator(s) outside the distilled set");
    prompt.user_text += note.str();
    prompt.key_slots.push_back("retry");
  }
  throw *last;
}

StepChunk unravel_step(const UnravelState& state, const std::string& current_html,
                       const PromptLibrary& prompts, Gateway& gateway, bool prune) {
  if (state.page_count < 0 || state.step_count < 0) {
    throw Error(ErrorCode::precondition, "state counters must be non-negative");
  }
  json history = json::array();
  for (const HistoryEntry& entry : state.history) {
    history.push_back(json{{"step", step_to_json(entry.step)},
                           {"status", entry.ok ? "ok" : "failed"},
                           {"note", entry.note}});
  }
  const std::string history_text = history.dump(2);
  const std::string page = prune ? html::pruned_html(current_html) : current_html;

  Prompt prompt = prompts.render(
      "unravel_step", {{"goal", state.goal}, {"history", history_text}, {"html", page}});
  prompt.key_slots = {"unravel", state.goal, jsonio::fnv1a_hex(history_text),
                      jsonio::fnv1a_hex(page)};

  for (int attempt = 0;; ++attempt) {
    std::string reply =
        gateway.complete(prompt, {ExchangeTag::contains_page_html, ExchangeTag::step_prompt});
    try {
      json doc = parse_reply(reply);
      if (!doc.is_object() || !doc.contains("done") || !doc.at("done").is_boolean() ||
          !doc.contains("steps") || !doc.at("steps").is_array()) {
        throw Error(ErrorCode::llm_reply_unparseable, "chunk needs steps[] and done flag");
      }
      StepChunk chunk;
      chunk.done = doc.at("done").get<bool>();
      if (doc.contains("rationale") && doc.at("rationale").is_string()) {
        chunk.rationale = doc.at("rationale").get<std::string>();
      }
      for (const json& step : doc.at("steps")) chunk.steps.push_back(step_from_json(step));
      if (!chunk.steps.empty()) {
        // chunk steps carry inline literals, never param-refs
        ActionScript probe;
        probe.steps = chunk.steps;
        ValidationReport report = validate_script(probe);
        if (!report.ok) {
          throw Error(ErrorCode::llm_reply_unparseable, "chunk invalid: " + report.to_string());
        }
      }
      if (!chunk.done && chunk.steps.empty()) {
        throw Error(ErrorCode::llm_reply_unparseable, "done=false with zero steps");
      }
      return chunk;
    } catch (const Error& err) {
      if (err.code() != ErrorCode::llm_reply_unparseable || attempt >= 1) throw;
      prompt.user_text += "\n\nThe previous reply could not be parsed. "
                          "Reply with exactly the JSON object described above.";
      prompt.key_slots.push_back("retry");
    } catch (const json::exception& err) {
      if (attempt >= 1) throw Error(ErrorCode::llm_reply_unparseable, err.what());
      prompt.key_slots.push_back("retry");
    }
  }
}

UnravelResult unravel_run(const std::string& task, const std::string& website, Session& session,
                          const PromptLibrary& prompts, Gateway& gateway, const Limits& limits) {
  if (!session.is_open()) {
    throw Error(ErrorCode::session_closed, "unravel_run requires an open session");
  }

  UnravelState state;
  state.goal = task;

  ExecutionTrace trace;
  trace.start_url = session.current_url();
  trace.started_at = iso8601_now();

  auto finish_trace = [&](bool partial) {
    trace.partial = partial;
    trace.end_page_id = session.current_page_id();
    trace.ended_at = iso8601_now();
  };
  auto fail = [&](ExplorationFailure reason, const std::string& message) -> ExplorationError {
    finish_trace(true);
    return ExplorationError(reason, message, trace);
  };

  int retries_used = 0;
  bool finished = false;

  while (!finished) {
    if (state.page_count >= limits.max_pages) {
      throw fail(ExplorationFailure::limits_exceeded,
                 "page budget " + std::to_string(limits.max_pages) + " exhausted");
    }
    ++state.page_count;

    StepChunk chunk;
    try {
      chunk = unravel_step(state, session.current_html(), prompts, gateway);
    } catch (const Error& err) {
      if (err.code() == ErrorCode::exploration_failed) throw;
      throw fail(ExplorationFailure::gateway_error, err.what());
    }

    if (chunk.done && chunk.steps.empty()) {
      finished = true;
      break;
    }

    bool chunk_aborted = false;
    for (const ActionStep& step : chunk.steps) {
      if (state.step_count >= limits.max_steps) {
        throw fail(ExplorationFailure::limits_exceeded,
                   "step budget " + std::to_string(limits.max_steps) + " exhausted");
      }
      StepOutcome outcome = execute_step(session, step);
      trace.steps.push_back(outcome);
      ++state.step_count;

      std::string note;
      if (!outcome.ok) {
        note = outcome.attempts.empty() ? "action failed" : outcome.attempts.back().note;
        if (note.empty()) note = "no locator in the chain resolved";
      }
      state.history.push_back({step, outcome.ok, note});

      if (!outcome.ok) {
        if (retries_used >= limits.max_retries) {
          throw fail(ExplorationFailure::step_failed_after_retries,
                     "step failed and retry budget is spent");
        }
        ++retries_used;
        chunk_aborted = true;  // replan against the failure now in history
        break;
      }
    }
    if (!chunk_aborted && chunk.done) finished = true;
  }

  finish_trace(false);

  UnravelResult result;
  result.trace = trace;
  result.script.website = website;
  result.script.task_description = task;
  for (const StepOutcome& outcome : trace.steps) {
    if (outcome.ok) result.script.steps.push_back(outcome.step);
  }
  if (result.script.steps.empty()) {
    trace.partial = true;
    throw ExplorationError(ExplorationFailure::empty_result,
                           "exploration terminated without executing any step", trace);
  }
  ValidationReport report = validate_script(result.script);
  if (!report.ok) {
    throw ExplorationError(ExplorationFailure::empty_result,
                           "captured script invalid: " + report.to_string(), trace);
  }
  return result;
}

}  // namespace paffa
