#include <doctest.h>

#include "delta_model.hpp"
#include "paffa/webdriver.hpp"
#include "testenv.hpp"

using namespace paffa;
using namespace paffa::testsupport;

namespace {

ActionScript trip_script() {
  ActionScript script;
  script.website = kWebsiteDelta;
  script.task_description = "lookup";
  script.steps = {click_id("headPrimary3"), input_id("confirmationNo", "DLTX7Y"),
                  input_id("firstName", "Sarah"), input_id("lastName", "Johnson"),
                  click_id("btn-mytrip-submit")};
  return script;
}

// what backend equivalence compares: per-step ok flags and per-attempt resolution
json outcome_shape(const ExecutionTrace& trace) {
  json out = json::array();
  for (const StepOutcome& outcome : trace.steps) {
    json attempts = json::array();
    for (const Attempt& attempt : outcome.attempts) {
      attempts.push_back(json{{"strategy", to_string(attempt.locator.strategy)},
                              {"value", attempt.locator.value},
                              {"resolved", attempt.resolved}});
    }
    out.push_back(json{{"ok", outcome.ok}, {"attempts", std::move(attempts)}});
  }
  return out;
}

}  // namespace

TEST_SUITE("webdriver") {

TEST_CASE("wire client completes the lookup flow through the loopback endpoint") {
  auto site = delta_site();
  LoopbackWebDriverServer server(site);
  server.start();

  WebDriverSession session(server.url());
  session.open("");
  CHECK(session.is_open());
  ExecutionTrace trace = run_script(session, trip_script(), true);
  CHECK(trace.all_ok());
  CHECK(trace.end_page_id.find("details") != std::string::npos);  // page-id is the url here
  session.close();
  CHECK_FALSE(session.is_open());
}

TEST_CASE("backend equivalence: simulator and wire protocol agree attempt for attempt") {
  auto site = delta_site();

  ActionScript with_fallbacks = trip_script();
  // exercise unresolved attempts and css/xpath/text strategies on both backends
  with_fallbacks.steps[0].target =
      LocatorChain{{LocatorStrategy::by_id, "renamedNav"}, {LocatorStrategy::by_text, "My Trips"}};
  with_fallbacks.steps[1].target = LocatorChain{{LocatorStrategy::by_css, "#findTrip input"}};
  with_fallbacks.steps[4].target =
      LocatorChain{{LocatorStrategy::by_xpath, "//button[@id='btn-mytrip-submit']"}};
  with_fallbacks.steps.push_back(wait_step(1.0));

  ExecutionTrace direct;
  {
    auto session = open_sim_session(site);
    direct = run_script(*session, with_fallbacks, false);
  }
  ExecutionTrace wire;
  {
    LoopbackWebDriverServer server(site);
    server.start();
    WebDriverSession session(server.url());
    session.open("");
    wire = run_script(session, with_fallbacks, false);
    session.close();
  }
  CHECK(outcome_shape(direct) == outcome_shape(wire));

  SUBCASE("a failing script agrees too") {
    ActionScript failing = trip_script();
    failing.steps[2].target = LocatorChain{{LocatorStrategy::by_id, "ghost1"},
                                           {LocatorStrategy::by_id, "ghost2"}};
    ExecutionTrace direct_fail;
    {
      auto session = open_sim_session(site);
      direct_fail = run_script(*session, failing, true);
    }
    LoopbackWebDriverServer server(site);
    server.start();
    WebDriverSession session(server.url());
    session.open("");
    ExecutionTrace wire_fail = run_script(session, failing, true);
    session.close();
    CHECK(outcome_shape(direct_fail) == outcome_shape(wire_fail));
    CHECK(direct_fail.partial == wire_fail.partial);
  }
}

TEST_CASE("select-option over the wire picks the option") {
  auto site = delta_site();
  LoopbackWebDriverServer server(site);
  server.start();
  WebDriverSession session(server.url());
  session.open("");

  ActionScript script;
  script.website = kWebsiteDelta;
  script.task_description = "miles search";
  script.steps = {input_id("fromAirportName", "Seattle"), input_id("toAirportName", "NewYork"),
                  input_id("input_departureDate_1", "2025-06-05"),
                  select_id("shopWithMiles", "true"), click_id("btn-book-submit")};
  ExecutionTrace trace = run_script(session, script, true);
  CHECK(trace.all_ok());
  CHECK(trace.end_page_id.find("results") != std::string::npos);
  session.close();
}

TEST_CASE("transport faults surface as failed attempts with a note, not exceptions") {
  WebDriverSession session("http://127.0.0.1:9");  // nothing listens here
  FindResult found = session.find({LocatorStrategy::by_id, "x"});
  CHECK_FALSE(found.handle.has_value());
  CHECK(found.note.find("transport") != std::string::npos);
}

TEST_CASE("navigate over the wire moves between sim pages by url") {
  auto site = delta_site();
  LoopbackWebDriverServer server(site);
  server.start();
  WebDriverSession session(server.url());
  session.open("");
  CHECK(session.navigate("https://delta.example/my-trips").ok);
  CHECK(session.current_url() == "https://delta.example/my-trips");
  CHECK(session.current_html().find("confirmationNo") != std::string::npos);
  CHECK_FALSE(session.navigate("https://unknown.example/").ok);
  session.close();
}

}  // TEST_SUITE
