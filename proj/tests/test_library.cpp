#include <doctest.h>

#include <random>
#include <set>

#include "delta_model.hpp"
#include "paffa/library.hpp"
#include "testenv.hpp"

using namespace paffa;
using namespace paffa::testsupport;

namespace {

LibraryMember member_for(const std::string& task, DeltaModel::Mode mode = DeltaModel::Mode::original) {
  DeltaModel model(mode);
  LibraryMember member;
  member.task = task;
  member.script.website = kWebsiteDelta;
  member.script.task_description = task;
  member.script.steps = model.full_plan(task);
  return member;
}

// brute-force completeness oracle, independent of derive_bindings: enumerate
// candidate bindings directly from the member's literals at param positions
bool completeness_oracle(const ActionApi& api, const LibraryMember& member) {
  if (api.steps.size() != member.script.steps.size()) return false;
  Bindings bindings;
  for (std::size_t i = 0; i < api.steps.size(); ++i) {
    const auto& templ = api.steps[i].value;
    const auto& concrete = member.script.steps[i].value;
    if (templ.has_value() && templ->kind == ValueKind::param_ref) {
      if (!concrete.has_value()) return false;
      auto existing = bindings.find(templ->param);
      if (existing != bindings.end() && existing->second != concrete->literal) return false;
      bindings[templ->param] = concrete->literal;
    }
  }
  try {
    ActionScript rebuilt = substitute_params(api, bindings);
    return rebuilt.steps == member.script.steps;
  } catch (const Error&) {
    return false;
  }
}

struct LibraryGen {
  std::mt19937 rng{424242};

  ApiRecord record(int n) {
    ApiRecord out;
    out.api.website = "site" + std::to_string(rng() % 5) + ".example";
    out.api.name = "api_" + std::to_string(n);
    out.api.api_id = LibraryStore::make_api_id(out.api.website, out.api.name);
    out.api.description = "generated api " + std::to_string(n);
    const std::size_t params = rng() % 3;
    for (std::size_t i = 0; i < params; ++i) {
      ParamSpec p;
      p.name = "p" + std::to_string(i);
      p.value_type = static_cast<ParamType>(rng() % 4);
      p.required = rng() % 2 == 0;
      if (!p.required && rng() % 2 == 0) {
        switch (p.value_type) {
          case ParamType::string_type: p.default_value = "dft"; break;
          case ParamType::date: p.default_value = "2025-01-31"; break;
          case ParamType::boolean: p.default_value = "false"; break;
          case ParamType::integer: p.default_value = "7"; break;
        }
      }
      out.api.params.push_back(p);
    }
    const std::size_t steps = 1 + rng() % 5;
    for (std::size_t i = 0; i < steps; ++i) {
      ActionStep step;
      step.kind = StepKind::input;
      step.target = LocatorChain{{LocatorStrategy::by_id, "e" + std::to_string(rng() % 20)}};
      step.value = ValueExpr::lit("v" + std::to_string(rng() % 9));
      out.api.steps.push_back(step);
    }
    for (const ParamSpec& p : out.api.params) {
      ActionStep step;
      step.kind = StepKind::input;
      step.target = LocatorChain{{LocatorStrategy::by_id, "ref-" + p.name}};
      step.value = ValueExpr::ref(p.name);
      out.api.steps.push_back(step);
    }
    out.source = static_cast<ApiSource>(rng() % 3);
    out.provenance = {"task " + std::to_string(rng() % 100)};
    if (rng() % 2 == 0) {
      LibraryMember member;
      member.task = out.provenance[0];
      member.script.website = out.api.website;
      member.script.task_description = member.task;
      member.script.steps = {click_id("e1")};
      out.members.push_back(member);
    }
    out.created_at = "2025-08-0" + std::to_string(1 + rng() % 8) + "T12:00:00Z";
    out.success_count = rng() % 50;
    out.failure_streak = rng() % 3;
    out.stale = out.failure_streak >= 2;
    return out;
  }

  LibraryStore store() {
    LibraryStore out;
    const int count = static_cast<int>(rng() % 6);
    for (int i = 0; i < count; ++i) out.insert(record(i));
    return out;
  }
};

}  // namespace

TEST_SUITE("library") {

TEST_CASE("clustering separates lookup flows from searches") {
  auto gateway = make_model_gateway();
  std::vector<LibraryMember> members = {member_for(kTaskTripSarah), member_for(kTaskTripJohn),
                                        member_for(kTaskFlightsSeattle)};
  ClusterOutcome outcome = cluster_tasks(members, test_prompts(), *gateway);
  REQUIRE(outcome.clusters.size() == 2);
  CHECK_FALSE(outcome.used_fallback);
  CHECK(outcome.clusters[0].members.size() + outcome.clusters[1].members.size() == 3);

  // partition oracle: every member appears exactly once
  std::multiset<std::string> seen;
  for (const TaskCluster& cluster : outcome.clusters) {
    CHECK(cluster.website == kWebsiteDelta);
    for (const LibraryMember& member : cluster.members) seen.insert(member.task);
  }
  CHECK(seen == std::multiset<std::string>{kTaskTripSarah, kTaskTripJohn, kTaskFlightsSeattle});
}

TEST_CASE("a single script becomes a singleton cluster without a gateway call") {
  auto gateway = make_model_gateway();
  ClusterOutcome outcome =
      cluster_tasks({member_for(kTaskFlightsSeattle)}, test_prompts(), *gateway);
  REQUIRE(outcome.clusters.size() == 1);
  CHECK(outcome.clusters[0].members.size() == 1);
  CHECK(gateway->ledger().size() == 0);
}

TEST_CASE("unusable clustering replies fall back to signature grouping with a warning") {
  std::vector<LibraryMember> members = {member_for(kTaskTripSarah), member_for(kTaskTripJohn),
                                        member_for(kTaskFlightsSeattle)};
  auto check_fallback = [&](ScriptedGateway& gateway) {
    ClusterOutcome outcome = cluster_tasks(members, test_prompts(), gateway);
    CHECK(outcome.used_fallback);
    REQUIRE_FALSE(outcome.warnings.empty());
    REQUIRE(outcome.clusters.size() == 2);  // signatures split trips from searches
  };
  SUBCASE("not json") {
    ScriptedGateway gateway;
    gateway.set_handler(
        [](const Prompt&) { return Gateway::Reply{"clusters? what clusters", {}, {}}; });
    check_fallback(gateway);
  }
  SUBCASE("not a partition") {
    ScriptedGateway gateway;
    gateway.set_handler([](const Prompt&) {
      return Gateway::Reply{json{{"clusters", json::array({{0, 1}})}}.dump(), {}, {}};
    });
    check_fallback(gateway);
  }
  SUBCASE("index out of range") {
    ScriptedGateway gateway;
    gateway.set_handler([](const Prompt&) {
      return Gateway::Reply{json{{"clusters", json::array({{0, 1, 2, 9}})}}.dump(), {}, {}};
    });
    check_fallback(gateway);
  }
}

TEST_CASE("flight searches with different options synthesize into one search api") {
  auto gateway = make_model_gateway();
  std::vector<LibraryMember> members = {member_for(kTaskFlightsSeattle),
                                        member_for(kTaskFlightsBoston)};
  ClusterOutcome clustered = cluster_tasks(members, test_prompts(), *gateway);
  REQUIRE(clustered.clusters.size() == 1);
  ActionApi api = synthesize_api(clustered.clusters[0], test_prompts(), *gateway);
  CHECK(api.name == "search_flights");
  CHECK(api.params.size() == 4);
  CHECK(validate_api(api).ok);
  for (const LibraryMember& member : members) {
    CHECK(reproduces_member(api, member));
    CHECK(completeness_oracle(api, member));
  }
  // two passes: candidate + corrected
  CHECK(gateway->ledger().size() == 3);  // 1 cluster + 2 synthesis calls
}

TEST_CASE("scripts differing in one literal synthesize an api with one param") {
  auto gateway = make_model_gateway();
  LibraryMember a, b;
  a.task = "search widgets";
  a.script.website = "shop.example";
  a.script.task_description = a.task;
  a.script.steps = {input_id("searchBox", "widgets"), click_id("searchGo")};
  b = a;
  b.task = "search gadgets";
  b.script.task_description = b.task;
  b.script.steps[0] = input_id("searchBox", "gadgets");

  TaskCluster cluster{"shop.example#0", "shop.example", {a, b}, script_signature(a.script)};
  ActionApi api = synthesize_api(cluster, test_prompts(), *gateway);
  REQUIRE(api.params.size() == 1);
  CHECK(reproduces_member(api, a));
  CHECK(reproduces_member(api, b));
  CHECK(completeness_oracle(api, a));
  CHECK(completeness_oracle(api, b));
}

TEST_CASE("a singleton cluster with no variation synthesizes a zero-param api") {
  auto gateway = make_model_gateway();
  LibraryMember only;
  only.task = "open the cart";
  only.script.website = "shop.example";
  only.script.task_description = only.task;
  only.script.steps = {click_id("cartLink")};
  TaskCluster cluster{"shop.example#0", "shop.example", {only}, script_signature(only.script)};
  ActionApi api = synthesize_api(cluster, test_prompts(), *gateway);
  CHECK(api.params.empty());
  CHECK(substitute_params(api, {}).steps == only.script.steps);
  CHECK(completeness_oracle(api, only));
}

TEST_CASE("apis that cannot reproduce a member are rejected as incomplete") {
  LibraryMember a = member_for(kTaskFlightsSeattle);
  LibraryMember b = member_for(kTaskFlightsBoston);
  TaskCluster cluster{"delta#0", kWebsiteDelta, {a, b}, script_signature(a.script)};

  // a model that hardcodes Seattle's literals and parameterizes nothing
  ScriptedGateway gateway;
  json frozen = json::array();
  for (const ActionStep& step : a.script.steps) frozen.push_back(step_to_json(step));
  gateway.set_handler([frozen](const Prompt& prompt) -> std::optional<Gateway::Reply> {
    json api{{"name", "search_flights"},
             {"description", "only Seattle"},
             {"params", json::array()},
             {"steps", frozen}};
    json reply = prompt.template_name == "synthesize_pass1"
                     ? json{{"api", api}, {"shortcomings", json::array({"ignores other members"})}}
                     : json{{"api", api}};
    return Gateway::Reply{reply.dump(), std::nullopt, std::nullopt};
  });
  try {
    synthesize_api(cluster, test_prompts(), gateway);
    FAIL("expected synthesis-incomplete");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::synthesis_incomplete);
    CHECK(std::string(err.what()).find(kTaskFlightsBoston) != std::string::npos);
  }
}

TEST_CASE("integration: novel trace grows the library by one evolved api") {
  auto gateway = make_model_gateway();
  LibraryStore store;
  LibraryMember novel = member_for(kTaskTripSarah);
  integrate_trace(novel.task, novel.script, store, test_prompts(), *gateway);
  REQUIRE(store.size() == 1);
  const ApiRecord record = store.records()[0];
  CHECK(record.source == ApiSource::evolved);
  CHECK(record.api.name == "retrieve_trip_information");
  CHECK(record.members.size() == 1);
  CHECK(store.find_by_name(kWebsiteDelta, "retrieve_trip_information") != nullptr);

  SUBCASE("integrating the identical trace again changes nothing") {
    LibraryStore before = store;
    integrate_trace(novel.task, novel.script, store, test_prompts(), *gateway);
    CHECK(store.size() == 1);
    CHECK(store == before);
  }

  SUBCASE("a matching-signature trace enlarges the cluster by one member") {
    LibraryMember second = member_for(kTaskTripJohn);
    integrate_trace(second.task, second.script, store, test_prompts(), *gateway);
    REQUIRE(store.size() == 1);
    CHECK(store.records()[0].members.size() == 2);
    CHECK(store.records()[0].provenance.size() == 2);
    for (const LibraryMember& member : store.records()[0].members) {
      CHECK(reproduces_member(store.records()[0].api, member));
    }
  }

  SUBCASE("an unrelated trace lands in its own record") {
    LibraryMember flights = member_for(kTaskFlightsSeattle);
    integrate_trace(flights.task, flights.script, store, test_prompts(), *gateway);
    CHECK(store.size() == 2);
    CHECK(store.find_by_name(kWebsiteDelta, "search_flights") != nullptr);
  }
}

TEST_CASE("duplicate (website, name) insertion is rejected") {
  LibraryGen gen;
  LibraryStore store;
  ApiRecord record = gen.record(1);
  store.insert(record);
  try {
    store.insert(record);
    FAIL("expected name-collision");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::name_collision);
  }
}

TEST_CASE("outcome recording drives the staleness flag") {
  LibraryGen gen;
  LibraryStore store;
  store.staleness_threshold = 2;
  ApiRecord record = gen.record(7);
  record.success_count = 0;
  record.failure_streak = 0;
  record.stale = false;
  const std::string id = record.api.api_id;
  store.insert(record);

  record_execution_outcome(store, id, true);
  CHECK(store.find(id)->success_count == 1);
  CHECK(store.find(id)->failure_streak == 0);

  record_execution_outcome(store, id, false);
  CHECK(store.find(id)->failure_streak == 1);
  CHECK_FALSE(store.find(id)->stale);

  record_execution_outcome(store, id, false);
  CHECK(store.find(id)->failure_streak == 2);
  CHECK(store.find(id)->stale);  // threshold reached

  record_execution_outcome(store, id, true);
  CHECK(store.find(id)->failure_streak == 0);
  CHECK_FALSE(store.find(id)->stale);

  CHECK_THROWS_AS(record_execution_outcome(store, "nope:missing", true), Error);
}

TEST_CASE("staleness is a pure function of streak and threshold") {
  LibraryGen gen;
  for (int threshold = 1; threshold <= 4; ++threshold) {
    LibraryStore store;
    store.staleness_threshold = threshold;
    ApiRecord record = gen.record(threshold);
    record.failure_streak = 0;
    record.stale = false;
    const std::string id = record.api.api_id;
    store.insert(record);
    for (int failures = 1; failures <= 5; ++failures) {
      record_execution_outcome(store, id, false);
      CHECK(store.find(id)->stale == (failures >= threshold));
    }
  }
}

TEST_CASE("persistence round-trips randomized libraries exactly") {
  LibraryGen gen;
  auto dir = scratch_dir("library-roundtrip");
  for (int i = 0; i < 120; ++i) {
    LibraryStore store = gen.store();
    const auto path = dir / ("lib" + std::to_string(i) + ".json");
    save_library(store, path);
    LibraryStore loaded = load_library(path);
    CHECK(loaded == store);
    CHECK(loaded.records() == store.records());
  }
}

TEST_CASE("unsupported schema versions and corrupt files are refused") {
  auto dir = scratch_dir("library-bad");
  LibraryGen gen;
  LibraryStore store = gen.store();
  const auto path = dir / "lib.json";
  save_library(store, path);

  json doc = jsonio::load_json_file(path);
  doc["schema-version"] = 999;
  jsonio::atomic_write_file(path, doc.dump());
  try {
    load_library(path);
    FAIL("expected unsupported-schema-version");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::unsupported_schema_version);
  }

  const auto truncated = dir / "truncated.json";
  std::string text = store.to_document().dump();
  jsonio::atomic_write_file(truncated, text.substr(0, text.size() / 2));
  try {
    load_library(truncated);
    FAIL("expected corrupt-file");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::corrupt_file);
  }

  CHECK_THROWS_AS(load_library(dir / "missing.json"), Error);
}

}  // TEST_SUITE
