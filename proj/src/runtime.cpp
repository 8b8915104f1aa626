#include "paffa/runtime.hpp"

#include <algorithm>

namespace paffa {

const char* to_string(TaskStatus status) {
  switch (status) {
    case TaskStatus::completed_via_api: return "completed-via-api";
    case TaskStatus::completed_via_unravel: return "completed-via-unravel";
    case TaskStatus::failed: return "failed";
  }
  return "?";
}

namespace {

std::string catalog_text(const LibraryStore& store) {
  json catalog = json::array();
  for (const ApiRecord& record : store.records()) {
    json params = json::array();
    for (const ParamSpec& param : record.api.params) params.push_back(param_to_json(param));
    catalog.push_back(json{{"name", record.api.name},
                           {"website", record.api.website},
                           {"description", record.api.description},
                           {"params", std::move(params)}});
  }
  return catalog.dump(2);
}

std::string bindings_value_to_string(const json& value) {
  if (value.is_string()) return value.get<std::string>();
  if (value.is_boolean()) return value.get<bool>() ? "true" : "false";
  if (value.is_number_integer()) return std::to_string(value.get<long long>());
  if (value.is_number()) return std::to_string(value.get<double>());
  return value.dump();
}

}  // namespace

ApiMatch retrieve_and_fill(const std::string& request, const LibraryStore& store,
                           const PromptLibrary& prompts, Gateway& gateway) {
  ApiMatch result;
  if (store.size() == 0) {
    result.warnings.push_back("library is empty; skipped retrieval call");
    return result;
  }

  std::vector<std::string> names;
  for (const ApiRecord& record : store.records()) names.push_back(record.api.api_id);

  Prompt prompt = prompts.render("retrieval", {{"request", request}, {"catalog", catalog_text(store)}});
  prompt.key_slots = {"retrieval", request};
  prompt.key_slots.insert(prompt.key_slots.end(), names.begin(), names.end());

  json doc;
  for (int attempt = 0;; ++attempt) {
    std::string reply =
        gateway.complete(prompt, {ExchangeTag::catalog_only, ExchangeTag::retrieval});
    doc = json::parse(reply, nullptr, false);
    if (!doc.is_discarded() && doc.is_object() && doc.contains("match") &&
        doc.at("match").is_boolean()) {
      break;
    }
    if (attempt >= 1) {
      throw Error(ErrorCode::llm_reply_unparseable, "retrieval reply lacks a match flag");
    }
    prompt.user_text += "\n\nThe previous reply could not be parsed. "
                        "Reply with exactly the JSON object described above.";
    prompt.key_slots.push_back("retry");
  }

  if (!doc.at("match").get<bool>()) return result;

  std::string name;
  if (doc.contains("api") && doc.at("api").is_string()) name = doc.at("api").get<std::string>();
  const ApiRecord* record = nullptr;
  for (const ApiRecord& candidate : store.records()) {
    if (candidate.api.name == name || candidate.api.api_id == name) {
      record = store.find(candidate.api.api_id);
      break;
    }
  }
  if (record == nullptr) {
    result.warnings.push_back("retrieval chose unknown api '" + name + "'; treated as no-match");
    return result;
  }

  Bindings bindings;
  if (doc.contains("bindings") && doc.at("bindings").is_object()) {
    for (auto it = doc.at("bindings").begin(); it != doc.at("bindings").end(); ++it) {
      bindings[it.key()] = bindings_value_to_string(it.value());
    }
  }
  if (auto problem = binding_error(record->api, bindings); problem.has_value()) {
    result.warnings.push_back("bindings rejected (" + *problem + "); treated as no-match");
    return result;
  }
  result.match = true;
  result.api_id = record->api.api_id;
  result.bindings = std::move(bindings);
  return result;
}

ExecutionTrace execute_api(const ActionApi& api, const Bindings& bindings, Session& session) {
  ActionScript script = substitute_params(api, bindings);
  ExecutionTrace trace = run_script(session, script, /*stop_on_failure=*/true);
  if (!trace.all_ok()) {
    int failed_index = 0;
    int attempts = 0;
    for (std::size_t i = 0; i < trace.steps.size(); ++i) {
      if (!trace.steps[i].ok) {
        failed_index = static_cast<int>(i);
        attempts = static_cast<int>(trace.steps[i].attempts.size());
        break;
      }
    }
    throw ApiExecutionError(failed_index, attempts, trace);
  }
  return trace;
}

TaskResult handle_request(const std::string& request, const std::string& website,
                          LibraryStore& store, const SessionFactory& sessions,
                          const PromptLibrary& prompts, Gateway& gateway, const Limits& limits) {
  TaskResult result;
  const std::size_t ledger_start = gateway.ledger().size();
  auto finalize = [&]() { result.tokens = gateway.ledger().slice(ledger_start); };

  try {
    bool try_unravel = false;
    std::string unravel_reason;

    ApiMatch match;
    try {
      match = retrieve_and_fill(request, store, prompts, gateway);
    } catch (const Error& err) {
      // a retrieval that cannot be parsed is a failed retrieval: explore
      if (err.code() != ErrorCode::llm_reply_unparseable) throw;
      match.match = false;
      match.warnings.push_back(std::string("retrieval failed: ") + err.what());
    }
    result.warnings = match.warnings;

    if (match.match) {
      const ApiRecord* record = store.find(match.api_id);
      if (record == nullptr) {
        try_unravel = true;
        unravel_reason = "matched api disappeared";
      } else if (record->stale) {
        try_unravel = true;
        unravel_reason = "matched api is stale";
        result.warnings.push_back("api '" + record->api.name + "' is stale; re-exploring");
      } else {
        auto session = sessions();
        try {
          ExecutionTrace trace = execute_api(record->api, match.bindings, *session);
          record_execution_outcome(store, match.api_id, true);
          session->close();
          result.status = TaskStatus::completed_via_api;
          result.trace = std::move(trace);
          result.api_id = match.api_id;
          finalize();
          return result;
        } catch (const ApiExecutionError& err) {
          record_execution_outcome(store, match.api_id, false);
          session->close();
          try_unravel = true;
          unravel_reason = err.what();
          result.warnings.push_back(std::string("cached api failed: ") + err.what());
        }
      }
    } else {
      try_unravel = true;
      unravel_reason = "no api matched the request";
    }

    if (try_unravel) {
      auto session = sessions();
      UnravelResult exploration;
      try {
        exploration = unravel_run(request, website, *session, prompts, gateway, limits);
      } catch (const ExplorationError& err) {
        session->close();
        result.status = TaskStatus::failed;
        result.trace = err.partial;
        result.error = std::string(err.what()) + " (after: " + unravel_reason + ")";
        finalize();
        return result;
      }
      session->close();

      try {
        integrate_trace(request, exploration.script, store, prompts, gateway);
        result.library_updated = true;
        const ApiRecord* integrated = nullptr;
        for (const ApiRecord& record : store.records()) {
          for (const LibraryMember& member : record.members) {
            if (member.task == request) {
              integrated = store.find(record.api.api_id);
              break;
            }
          }
        }
        if (integrated != nullptr) result.api_id = integrated->api.api_id;
      } catch (const Error& err) {
        result.warnings.push_back(std::string("trace integration failed: ") + err.what());
      }
      result.status = TaskStatus::completed_via_unravel;
      result.trace = exploration.trace;
      finalize();
      return result;
    }

    result.status = TaskStatus::failed;
    result.error = "request did not reach any execution path";
  } catch (const Error& err) {
    result.status = TaskStatus::failed;
    result.error = err.what();
  } catch (const std::exception& err) {
    result.status = TaskStatus::failed;
    result.error = err.what();
  }
  finalize();
  return result;
}

json task_result_to_json(const TaskResult& result) {
  return json{{"status", to_string(result.status)},
              {"trace", trace_to_json(result.trace)},
              {"tokens",
               json{{"calls", result.tokens.size()},
                    {"prompt-tokens", result.tokens.total_prompt_tokens()},
                    {"completion-tokens", result.tokens.total_completion_tokens()},
                    {"total-tokens", result.tokens.total_tokens()},
                    {"estimated", result.tokens.any_estimated()}}},
              {"library-updated", result.library_updated},
              {"api-id", result.api_id},
              {"error", result.error},
              {"warnings", result.warnings}};
}

}  // namespace paffa
