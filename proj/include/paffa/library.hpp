#pragma once

#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "paffa/dsl.hpp"
#include "paffa/gateway.hpp"

namespace paffa {

enum class ApiSource { dist_map, unravel, evolved };

const char* to_string(ApiSource source);
ApiSource api_source_from_string(const std::string& name);

/// One originating (task, script) pair. Kept with the record so enlarged
/// clusters can be re-synthesized and parameterization completeness can be
/// re-checked after the fact.
struct LibraryMember {
  std::string task;
  ActionScript script;

  bool operator==(const LibraryMember&) const = default;
};

struct ApiRecord {
  ActionApi api;
  ApiSource source = ApiSource::unravel;
  std::vector<std::string> provenance;  // originating task descriptions
  std::vector<LibraryMember> members;
  std::string created_at;
  long long success_count = 0;
  long long failure_streak = 0;
  bool stale = false;

  bool operator==(const ApiRecord&) const = default;
};

struct TaskCluster {
  std::string cluster_id;
  std::string website;
  std::vector<LibraryMember> members;
  std::string shared_signature;
};

/// Persistent collection of ApiRecords. (website, api name) is unique across
/// records; api-id is derived from that pair. Mutations take the writer lock;
/// persisted writes go through write-temp-then-rename.
class LibraryStore {
 public:
  int staleness_threshold = 2;

  LibraryStore() = default;
  // the writer lock is not state; copies and moves start with a fresh one
  LibraryStore(const LibraryStore& other)
      : staleness_threshold(other.staleness_threshold), records_(other.records_) {}
  LibraryStore(LibraryStore&& other) noexcept
      : staleness_threshold(other.staleness_threshold), records_(std::move(other.records_)) {}
  LibraryStore& operator=(const LibraryStore& other) {
    staleness_threshold = other.staleness_threshold;
    records_ = other.records_;
    return *this;
  }
  LibraryStore& operator=(LibraryStore&& other) noexcept {
    staleness_threshold = other.staleness_threshold;
    records_ = std::move(other.records_);
    return *this;
  }

  static std::string make_api_id(const std::string& website, const std::string& name);

  const ApiRecord* find(const std::string& api_id) const;
  const ApiRecord* find_by_name(const std::string& website, const std::string& name) const;
  std::vector<ApiRecord> records() const;  // sorted by api-id
  std::vector<ApiRecord> records_for_website(const std::string& website) const;
  std::size_t size() const { return records_.size(); }

  /// Rejects duplicate (website, name) rather than auto-renaming, keeping
  /// retrieval unambiguous.
  void insert(ApiRecord record);
  void replace(std::string api_id, ApiRecord record);  // by value: callers may pass a field of the record being replaced
  void record_outcome(const std::string& api_id, bool success);

  json to_document() const;
  static LibraryStore from_document(const json& doc);

  /// Record-for-record equality, insertion order ignored.
  bool operator==(const LibraryStore& other) const { return records() == other.records(); }

 private:
  std::vector<ApiRecord> records_;
  mutable std::mutex writer_;
};

struct ClusterOutcome {
  std::vector<TaskCluster> clusters;
  bool used_fallback = false;
  std::vector<std::string> warnings;
};

/// Groups (task, script) pairs that one parameterized api can serve. The
/// model proposes the partition; an invalid or unparseable reply falls back
/// to grouping by script signature, so clustering never fails outright.
ClusterOutcome cluster_tasks(const std::vector<LibraryMember>& scripts,
                             const PromptLibrary& prompts, Gateway& gateway);

/// Deterministic fallback: same signature, same cluster.
std::vector<TaskCluster> cluster_by_signature(const std::vector<LibraryMember>& scripts);

/// Two-pass synthesis: the first call emits a candidate api and lists its
/// possible shortcomings; the second call addresses them fully. The result is
/// accepted only if substitution reproduces every member step-for-step.
ActionApi synthesize_api(const TaskCluster& cluster, const PromptLibrary& prompts,
                         Gateway& gateway);

/// Bindings that make `api` reproduce `script`, if any. Pure structural
/// alignment; literal values never leak into the api's fixed parts.
std::optional<Bindings> derive_bindings(const ActionApi& api, const ActionScript& script);
bool reproduces_member(const ActionApi& api, const LibraryMember& member);

/// Folds one successful exploration back into the store: cluster against the
/// website's existing members, re-synthesize the enlarged cluster (repairing
/// a stale record in place when names collide), insert otherwise. Grows the
/// library by at most one record and never removes one.
void integrate_trace(const std::string& task, const ActionScript& script, LibraryStore& store,
                     const PromptLibrary& prompts, Gateway& gateway);

void record_execution_outcome(LibraryStore& store, const std::string& api_id, bool success);

void save_library(const LibraryStore& store, const std::filesystem::path& path);
LibraryStore load_library(const std::filesystem::path& path);

json record_to_json(const ApiRecord& record);
ApiRecord record_from_json(const json& doc);

}  // namespace paffa
