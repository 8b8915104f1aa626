#include "paffa/library.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

namespace paffa {

const char* to_string(ApiSource source) {
  switch (source) {
    case ApiSource::dist_map: return "dist-map";
    case ApiSource::unravel: return "unravel";
    case ApiSource::evolved: return "evolved";
  }
  return "?";
}

ApiSource api_source_from_string(const std::string& name) {
  if (name == "dist-map") return ApiSource::dist_map;
  if (name == "unravel") return ApiSource::unravel;
  if (name == "evolved") return ApiSource::evolved;
  throw Error(ErrorCode::corrupt_file, "unknown api source '" + name + "'");
}

// --- store -------------------------------------------------------------------

std::string LibraryStore::make_api_id(const std::string& website, const std::string& name) {
  return website + ":" + name;
}

const ApiRecord* LibraryStore::find(const std::string& api_id) const {
  for (const ApiRecord& record : records_) {
    if (record.api.api_id == api_id) return &record;
  }
  return nullptr;
}

const ApiRecord* LibraryStore::find_by_name(const std::string& website,
                                            const std::string& name) const {
  for (const ApiRecord& record : records_) {
    if (record.api.website == website && record.api.name == name) return &record;
  }
  return nullptr;
}

std::vector<ApiRecord> LibraryStore::records() const {
  std::vector<ApiRecord> out = records_;
  std::sort(out.begin(), out.end(),
            [](const ApiRecord& a, const ApiRecord& b) { return a.api.api_id < b.api.api_id; });
  return out;
}

std::vector<ApiRecord> LibraryStore::records_for_website(const std::string& website) const {
  std::vector<ApiRecord> out;
  for (const ApiRecord& record : records()) {
    if (record.api.website == website) out.push_back(record);
  }
  return out;
}

void LibraryStore::insert(ApiRecord record) {
  std::lock_guard<std::mutex> lock(writer_);
  if (find_by_name(record.api.website, record.api.name) != nullptr) {
    throw Error(ErrorCode::name_collision,
                "api '" + record.api.name + "' already exists for " + record.api.website);
  }
  record.api.api_id = make_api_id(record.api.website, record.api.name);
  records_.push_back(std::move(record));
}

void LibraryStore::replace(std::string api_id, ApiRecord record) {
  std::lock_guard<std::mutex> lock(writer_);
  for (ApiRecord& existing : records_) {
    if (existing.api.api_id == api_id) {
      record.api.api_id = make_api_id(record.api.website, record.api.name);
      existing = std::move(record);
      return;
    }
  }
  throw Error(ErrorCode::unknown_api_id, api_id);
}

void LibraryStore::record_outcome(const std::string& api_id, bool success) {
  std::lock_guard<std::mutex> lock(writer_);
  for (ApiRecord& record : records_) {
    if (record.api.api_id != api_id) continue;
    if (success) {
      record.failure_streak = 0;
      ++record.success_count;
    } else {
      ++record.failure_streak;
    }
    record.stale = record.failure_streak >= staleness_threshold;
    return;
  }
  throw Error(ErrorCode::unknown_api_id, api_id);
}

json record_to_json(const ApiRecord& record) {
  json members = json::array();
  for (const LibraryMember& member : record.members) {
    members.push_back(json{{"task", member.task}, {"script", script_to_json(member.script)}});
  }
  return json{{"api", api_to_json(record.api)},
              {"source", to_string(record.source)},
              {"provenance", record.provenance},
              {"members", std::move(members)},
              {"created-at", record.created_at},
              {"success-count", record.success_count},
              {"failure-streak", record.failure_streak},
              {"stale", record.stale}};
}

ApiRecord record_from_json(const json& doc) {
  jsonio::reject_unknown_fields(doc,
                                {"api", "source", "provenance", "members", "created-at",
                                 "success-count", "failure-streak", "stale"},
                                "record");
  ApiRecord record;
  record.api = api_from_json(jsonio::require(doc, "api", "record"));
  record.source = api_source_from_string(jsonio::require_string(doc, "source", "record"));
  for (const json& task : jsonio::require(doc, "provenance", "record")) {
    record.provenance.push_back(task.get<std::string>());
  }
  for (const json& member : jsonio::require(doc, "members", "record")) {
    jsonio::reject_unknown_fields(member, {"task", "script"}, "member");
    record.members.push_back(LibraryMember{jsonio::require_string(member, "task", "member"),
                                           script_from_json(jsonio::require(member, "script", "member"))});
  }
  record.created_at = jsonio::require_string(doc, "created-at", "record");
  record.success_count = jsonio::require_int(doc, "success-count", "record");
  record.failure_streak = jsonio::require_int(doc, "failure-streak", "record");
  record.stale = jsonio::require_bool(doc, "stale", "record");
  return record;
}

json LibraryStore::to_document() const {
  json records = json::array();
  for (const ApiRecord& record : this->records()) records.push_back(record_to_json(record));
  return json{{"schema-version", kSchemaVersion}, {"records", std::move(records)}};
}

LibraryStore LibraryStore::from_document(const json& doc) {
  jsonio::reject_unknown_fields(doc, {"schema-version", "records"}, "library");
  jsonio::require_schema_version(doc, "library");
  LibraryStore store;
  const json& records = jsonio::require(doc, "records", "library");
  if (!records.is_array()) throw Error(ErrorCode::corrupt_file, "library records must be an array");
  for (const json& record : records) {
    store.insert(record_from_json(record));
  }
  // keep the staleness invariant under a possibly different threshold
  for (ApiRecord& record : store.records_) {
    record.stale = record.failure_streak >= store.staleness_threshold;
  }
  return store;
}

void save_library(const LibraryStore& store, const std::filesystem::path& path) {
  jsonio::atomic_write_file(path, store.to_document().dump(2) + "\n");
}

LibraryStore load_library(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::persistence_error, "no library file at " + path.string());
  }
  return LibraryStore::from_document(jsonio::load_json_file(path));
}

// --- clustering ----------------------------------------------------------------

std::vector<TaskCluster> cluster_by_signature(const std::vector<LibraryMember>& scripts) {
  std::vector<TaskCluster> clusters;
  std::map<std::string, std::size_t> index_by_signature;
  for (const LibraryMember& member : scripts) {
    const std::string signature = script_signature(member.script);
    auto it = index_by_signature.find(signature);
    if (it == index_by_signature.end()) {
      TaskCluster cluster;
      cluster.website = member.script.website;
      cluster.shared_signature = signature;
      cluster.cluster_id = member.script.website + "#" + std::to_string(clusters.size());
      cluster.members.push_back(member);
      index_by_signature[signature] = clusters.size();
      clusters.push_back(std::move(cluster));
    } else {
      clusters[it->second].members.push_back(member);
    }
  }
  return clusters;
}

ClusterOutcome cluster_tasks(const std::vector<LibraryMember>& scripts,
                             const PromptLibrary& prompts, Gateway& gateway) {
  ClusterOutcome outcome;
  if (scripts.empty()) return outcome;
  for (const LibraryMember& member : scripts) {
    ValidationReport report = validate_script(member.script);
    if (!report.ok) {
      throw Error(ErrorCode::invalid_script, "member '" + member.task + "': " + report.to_string());
    }
  }
  if (scripts.size() == 1) {
    outcome.clusters = cluster_by_signature(scripts);
    return outcome;
  }

  json items = json::array();
  std::vector<std::string> slot_tasks;
  for (std::size_t i = 0; i < scripts.size(); ++i) {
    items.push_back(json{{"index", i},
                         {"task", scripts[i].task},
                         {"website", scripts[i].script.website},
                         {"signature", script_signature(scripts[i].script)},
                         {"script", script_to_json(scripts[i].script)}});
    // key on script content, not just signature: same task on a changed
    // interface must map to a different replay fixture
    slot_tasks.push_back(scripts[i].task + "|" +
                         jsonio::fnv1a_hex(script_to_json(scripts[i].script).dump()));
  }

  Prompt prompt = prompts.render("cluster", {{"items", items.dump(2)}});
  prompt.key_slots = {"cluster"};
  prompt.key_slots.insert(prompt.key_slots.end(), slot_tasks.begin(), slot_tasks.end());

  auto fall_back = [&](const std::string& why) {
    outcome.clusters = cluster_by_signature(scripts);
    outcome.used_fallback = true;
    outcome.warnings.push_back("clustering fell back to signatures: " + why);
  };

  std::string reply;
  try {
    reply = gateway.complete(prompt, {ExchangeTag::synthesis});
  } catch (const Error& err) {
    fall_back(err.what());
    return outcome;
  }

  json doc = json::parse(reply, nullptr, false);
  if (doc.is_discarded() || !doc.is_object() || !doc.contains("clusters") ||
      !doc.at("clusters").is_array()) {
    fall_back("reply is not a clusters object");
    return outcome;
  }

  std::set<std::size_t> seen;
  std::vector<TaskCluster> clusters;
  for (const json& group : doc.at("clusters")) {
    if (!group.is_array() || group.empty()) {
      fall_back("cluster groups must be non-empty arrays");
      return outcome;
    }
    TaskCluster cluster;
    for (const json& index : group) {
      if (!index.is_number_unsigned() || index.get<std::size_t>() >= scripts.size() ||
          !seen.insert(index.get<std::size_t>()).second) {
        fall_back("cluster indices must partition the input");
        return outcome;
      }
      cluster.members.push_back(scripts[index.get<std::size_t>()]);
    }
    for (const LibraryMember& member : cluster.members) {
      if (member.script.website != cluster.members.front().script.website) {
        fall_back("a cluster mixed websites");
        return outcome;
      }
    }
    cluster.website = cluster.members.front().script.website;
    cluster.shared_signature = script_signature(cluster.members.front().script);
    cluster.cluster_id = cluster.website + "#" + std::to_string(clusters.size());
    clusters.push_back(std::move(cluster));
  }
  if (seen.size() != scripts.size()) {
    fall_back("reply left some scripts unclustered");
    return outcome;
  }
  outcome.clusters = std::move(clusters);
  return outcome;
}

// --- synthesis -------------------------------------------------------------------

std::optional<Bindings> derive_bindings(const ActionApi& api, const ActionScript& script) {
  if (api.steps.size() != script.steps.size()) return std::nullopt;
  if (api.website != script.website) return std::nullopt;

  std::map<std::string, ParamSpec> specs;
  for (const ParamSpec& param : api.params) specs[param.name] = param;

  Bindings bindings;
  for (std::size_t i = 0; i < api.steps.size(); ++i) {
    const ActionStep& templ = api.steps[i];
    const ActionStep& concrete = script.steps[i];
    if (templ.kind != concrete.kind || templ.target != concrete.target ||
        templ.wait_seconds != concrete.wait_seconds) {
      return std::nullopt;
    }
    if (templ.value.has_value() != concrete.value.has_value()) return std::nullopt;
    if (!templ.value.has_value()) continue;
    if (concrete.value->kind != ValueKind::literal) return std::nullopt;

    if (templ.value->kind == ValueKind::literal) {
      if (templ.value->literal != concrete.value->literal) return std::nullopt;
      continue;
    }
    const std::string& name = templ.value->param;
    auto spec = specs.find(name);
    if (spec == specs.end()) return std::nullopt;
    if (!value_matches_type(spec->second.value_type, concrete.value->literal)) return std::nullopt;
    auto [it, inserted] = bindings.emplace(name, concrete.value->literal);
    if (!inserted && it->second != concrete.value->literal) return std::nullopt;
  }
  for (const ParamSpec& param : api.params) {
    if (param.required && bindings.count(param.name) == 0) return std::nullopt;
  }
  return bindings;
}

bool reproduces_member(const ActionApi& api, const LibraryMember& member) {
  auto bindings = derive_bindings(api, member.script);
  if (!bindings.has_value()) return false;
  try {
    ActionScript rebuilt = substitute_params(api, *bindings);
    return rebuilt.steps == member.script.steps;
  } catch (const Error&) {
    return false;
  }
}

namespace {

ActionApi api_from_reply(const json& doc, const std::string& website) {
  if (!doc.is_object() || !doc.contains("api")) {
    throw Error(ErrorCode::llm_reply_unparseable, "reply has no api object");
  }
  json api_doc = doc.at("api");
  if (!api_doc.is_object()) {
    throw Error(ErrorCode::llm_reply_unparseable, "api must be an object");
  }
  // The model emits name/description/params/steps; identity and site are ours.
  api_doc["api-id"] = "";
  api_doc["website"] = website;
  ActionApi api;
  try {
    api = api_from_json(api_doc);
  } catch (const Error& err) {
    throw Error(ErrorCode::llm_reply_unparseable, err.what());
  }
  api.api_id = LibraryStore::make_api_id(api.website, api.name);
  ValidationReport report = validate_api(api);
  if (!report.ok) {
    throw Error(ErrorCode::llm_reply_unparseable, "api invalid: " + report.to_string());
  }
  return api;
}

std::string members_json_text(const TaskCluster& cluster) {
  json members = json::array();
  for (const LibraryMember& member : cluster.members) {
    members.push_back(json{{"task", member.task}, {"script", script_to_json(member.script)}});
  }
  return members.dump(2);
}

std::vector<std::string> cluster_slots(const char* phase, const TaskCluster& cluster) {
  std::vector<std::string> slots = {phase, cluster.website};
  std::vector<std::string> tasks;
  for (const LibraryMember& member : cluster.members) {
    tasks.push_back(member.task + "|" +
                    jsonio::fnv1a_hex(script_to_json(member.script).dump()));
  }
  std::sort(tasks.begin(), tasks.end());
  slots.insert(slots.end(), tasks.begin(), tasks.end());
  return slots;
}

json complete_and_parse(Gateway& gateway, Prompt& prompt) {
  for (int attempt = 0;; ++attempt) {
    std::string reply = gateway.complete(prompt, {ExchangeTag::synthesis});
    json doc = json::parse(reply, nullptr, false);
    if (!doc.is_discarded()) return doc;
    if (attempt >= 1) {
      throw Error(ErrorCode::llm_reply_unparseable, "synthesis reply is not JSON");
    }
    prompt.user_text += "\n\nThe previous reply could not be parsed. "
                        "Reply with exactly the JSON object described above.";
    prompt.key_slots.push_back("retry");
  }
}

}  // namespace

ActionApi synthesize_api(const TaskCluster& cluster, const PromptLibrary& prompts,
                         Gateway& gateway) {
  if (cluster.members.empty()) {
    throw Error(ErrorCode::precondition, "cannot synthesize from an empty cluster");
  }
  const std::string members = members_json_text(cluster);

  // Pass 1: candidate api plus a list of its own possible shortcomings.
  Prompt pass1 = prompts.render("synthesize_pass1",
                                {{"website", cluster.website}, {"members", members}});
  pass1.key_slots = cluster_slots("synth1", cluster);
  json doc1 = complete_and_parse(gateway, pass1);
  ActionApi candidate = api_from_reply(doc1, cluster.website);
  std::string shortcomings = "[]";
  if (doc1.contains("shortcomings")) shortcomings = doc1.at("shortcomings").dump(2);

  // Pass 2: address them fully.
  Prompt pass2 = prompts.render("synthesize_pass2",
                                {{"website", cluster.website},
                                 {"members", members},
                                 {"candidate", api_to_json(candidate).dump(2)},
                                 {"shortcomings", shortcomings}});
  pass2.key_slots = cluster_slots("synth2", cluster);
  pass2.key_slots.push_back(jsonio::fnv1a_hex(api_to_json(candidate).dump() + shortcomings));
  ActionApi api = api_from_reply(complete_and_parse(gateway, pass2), cluster.website);

  for (const LibraryMember& member : cluster.members) {
    if (!reproduces_member(api, member)) {
      throw Error(ErrorCode::synthesis_incomplete,
                  "api '" + api.name + "' cannot reproduce member '" + member.task + "'");
    }
  }
  return api;
}

// --- integration ---------------------------------------------------------------

void record_execution_outcome(LibraryStore& store, const std::string& api_id, bool success) {
  store.record_outcome(api_id, success);
}

namespace {

ApiRecord fresh_record(ActionApi api, const TaskCluster& cluster, ApiSource source) {
  ApiRecord record;
  record.api = std::move(api);
  record.source = source;
  record.members = cluster.members;
  for (const LibraryMember& member : cluster.members) record.provenance.push_back(member.task);
  record.created_at = iso8601_now();
  return record;
}

void append_provenance(ApiRecord& record, const std::vector<LibraryMember>& members) {
  for (const LibraryMember& member : members) {
    if (std::find(record.provenance.begin(), record.provenance.end(), member.task) ==
        record.provenance.end()) {
      record.provenance.push_back(member.task);
    }
  }
}

}  // namespace

void integrate_trace(const std::string& task, const ActionScript& script, LibraryStore& store,
                     const PromptLibrary& prompts, Gateway& gateway) {
  ValidationReport report = validate_script(script);
  if (!report.ok) {
    throw Error(ErrorCode::invalid_script, report.to_string());
  }
  const std::string website = script.website;
  const LibraryMember incoming{task, script};

  std::vector<ApiRecord> same_site = store.records_for_website(website);
  for (const ApiRecord& record : same_site) {
    if (std::find(record.members.begin(), record.members.end(), incoming) !=
        record.members.end()) {
      return;  // identical trace already folded in
    }
  }

  std::vector<LibraryMember> pool;
  std::map<std::string, std::string> owner_by_task_signature;  // member key -> api_id
  for (const ApiRecord& record : same_site) {
    for (const LibraryMember& member : record.members) {
      pool.push_back(member);
      owner_by_task_signature[member.task + "\x1f" + script_signature(member.script)] =
          record.api.api_id;
    }
  }
  pool.push_back(incoming);

  ClusterOutcome clustered = cluster_tasks(pool, prompts, gateway);

  const TaskCluster* home = nullptr;
  for (const TaskCluster& cluster : clustered.clusters) {
    if (std::find(cluster.members.begin(), cluster.members.end(), incoming) !=
        cluster.members.end()) {
      home = &cluster;
      break;
    }
  }
  if (home == nullptr) {
    throw Error(ErrorCode::persistence_error, "clustering lost the incoming trace");
  }

  std::set<std::string> owners;
  for (const LibraryMember& member : home->members) {
    auto it = owner_by_task_signature.find(member.task + "\x1f" + script_signature(member.script));
    if (it != owner_by_task_signature.end()) owners.insert(it->second);
  }

  if (owners.empty()) {
    ActionApi api = synthesize_api(*home, prompts, gateway);
    const ApiRecord* colliding = store.find_by_name(website, api.name);
    if (colliding == nullptr) {
      store.insert(fresh_record(std::move(api), *home, ApiSource::evolved));
      return;
    }
    if (colliding->stale) {
      // Stale record, same name: its members describe an interface that no
      // longer exists, so the repaired api replaces the body outright.
      ApiRecord repaired = fresh_record(std::move(api), *home, ApiSource::evolved);
      repaired.provenance = colliding->provenance;
      append_provenance(repaired, home->members);
      repaired.success_count = colliding->success_count;
      store.replace(colliding->api.api_id, std::move(repaired));
      return;
    }
    // Healthy record with the same name: merge by re-synthesizing the union.
    TaskCluster merged = *home;
    merged.members.insert(merged.members.end(), colliding->members.begin(),
                          colliding->members.end());
    ActionApi merged_api;
    try {
      merged_api = synthesize_api(merged, prompts, gateway);
    } catch (const Error& err) {
      throw Error(ErrorCode::name_collision,
                  "api '" + api.name + "' exists and merging failed: " + err.what());
    }
    merged_api.name = colliding->api.name;
    merged_api.api_id = colliding->api.api_id;
    ApiRecord updated = *colliding;
    updated.api = std::move(merged_api);
    updated.members = merged.members;
    updated.source = ApiSource::evolved;
    append_provenance(updated, home->members);
    store.replace(colliding->api.api_id, std::move(updated));
    return;
  }

  // The incoming trace clustered together with members of an existing record.
  const std::string owner_id = *owners.begin();
  const ApiRecord* owner = store.find(owner_id);
  if (owner == nullptr) {
    throw Error(ErrorCode::unknown_api_id, owner_id);
  }

  TaskCluster enlarged = *home;
  if (owners.size() > 1) {
    // members owned by other records stay theirs; the enlarged cluster covers
    // only the chosen owner's members plus anything unowned
    enlarged.members.clear();
    for (const LibraryMember& member : home->members) {
      auto it = owner_by_task_signature.find(member.task + "\x1f" +
                                             script_signature(member.script));
      if (it == owner_by_task_signature.end() || it->second == owner_id) {
        enlarged.members.push_back(member);
      }
    }
  }
  if (owner->stale) {
    // Members inherited from the stale api target the old interface; the
    // re-synthesis covers only members observed on the current one.
    enlarged.members.clear();
    for (const LibraryMember& member : home->members) {
      if (owner_by_task_signature.count(member.task + "\x1f" +
                                        script_signature(member.script)) == 0) {
        enlarged.members.push_back(member);
      }
    }
    if (enlarged.members.empty()) enlarged.members.push_back(incoming);
  }

  ActionApi api = synthesize_api(enlarged, prompts, gateway);
  api.name = owner->api.name;  // keep identity stable for retrieval
  api.api_id = owner->api.api_id;

  ApiRecord updated = *owner;
  updated.api = std::move(api);
  updated.members = enlarged.members;
  updated.source = ApiSource::evolved;
  append_provenance(updated, enlarged.members);
  if (owner->stale) {
    updated.failure_streak = 0;
    updated.stale = false;
  }
  store.replace(owner_id, std::move(updated));
}

}  // namespace paffa
