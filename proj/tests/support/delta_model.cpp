#include "delta_model.hpp"

#include <algorithm>
#include <set>

#include "paffa/distill.hpp"

namespace paffa::testsupport {

ActionStep click_id(const std::string& id) {
  ActionStep step;
  step.kind = StepKind::click;
  step.target = LocatorChain{Locator{LocatorStrategy::by_id, id}};
  return step;
}

ActionStep submit_id(const std::string& id) {
  ActionStep step = click_id(id);
  step.kind = StepKind::submit;
  return step;
}

ActionStep input_id(const std::string& id, const std::string& text) {
  ActionStep step;
  step.kind = StepKind::input;
  step.target = LocatorChain{Locator{LocatorStrategy::by_id, id}};
  step.value = ValueExpr::lit(text);
  return step;
}

ActionStep select_id(const std::string& id, const std::string& text) {
  ActionStep step = input_id(id, text);
  step.kind = StepKind::select_option;
  return step;
}

ActionStep wait_step(double seconds) {
  ActionStep step;
  step.kind = StepKind::wait;
  step.wait_seconds = seconds;
  return step;
}

ActionStep navigate_to(const std::string& url) {
  ActionStep step;
  step.kind = StepKind::navigate;
  step.value = ValueExpr::lit(url);
  return step;
}

namespace {

struct PageIds {
  std::string nav_trips, confirmation, first, last, trip_submit;
  std::string origin, destination, depart, miles, flight_submit;
};

PageIds ids_for(DeltaModel::Mode mode) {
  if (mode == DeltaModel::Mode::repaired) {
    return {"navMyTrips",  "confNumber", "fname",      "lname",       "submitTrip",
            "originField", "destField",  "departDate", "milesToggle", "searchFlightsBtn"};
  }
  // `broken` keeps planning against the original ids on purpose
  return {"headPrimary3",    "confirmationNo",  "firstName",     "lastName",
          "btn-mytrip-submit", "fromAirportName", "toAirportName", "input_departureDate_1",
          "shopWithMiles",   "btn-book-submit"};
}

struct TripSlots {
  std::string confirmation, first, last;
};
struct FlightSlots {
  std::string origin, destination, depart;
  bool miles = false;
};

std::optional<TripSlots> trip_slots(const std::string& task) {
  if (task == kTaskTripSarah) return TripSlots{"DLTX7Y", "Sarah", "Johnson"};
  if (task == kTaskTripJohn) return TripSlots{"ABC123", "John", "Smith"};
  if (task.find("ZZTOP1") != std::string::npos) return TripSlots{"ZZTOP1", "Alice", "Carter"};
  return std::nullopt;
}

std::optional<FlightSlots> flight_slots(const std::string& task) {
  if (task == kTaskFlightsSeattle) return FlightSlots{"Seattle", "NewYork", "2025-06-05", true};
  if (task == kTaskFlightsBoston) return FlightSlots{"Boston", "Miami", "2026-04-15", false};
  return std::nullopt;
}

enum class SimPageKind { home, my_trips, trip_details, flight_results, unknown };

SimPageKind detect_page(const std::string& user_text) {
  // ids unique to each fixture page, both site generations
  if (user_text.find("confirmationNo") != std::string::npos ||
      user_text.find("confNumber") != std::string::npos) {
    return SimPageKind::my_trips;
  }
  if (user_text.find("tripSummary") != std::string::npos ||
      user_text.find("tripCard") != std::string::npos) {
    return SimPageKind::trip_details;
  }
  if (user_text.find("resultsList") != std::string::npos ||
      user_text.find("flightList") != std::string::npos) {
    return SimPageKind::flight_results;
  }
  if (user_text.find("fromAirportName") != std::string::npos ||
      user_text.find("originField") != std::string::npos) {
    return SimPageKind::home;
  }
  return SimPageKind::unknown;
}

/// The first balanced '['..']' JSON block embedded in a prompt (the payload
/// a template interpolated), parsed; string literals are skipped over.
json embedded_array(const std::string& user_text) {
  const std::size_t open = user_text.find('[');
  if (open == std::string::npos) return json(json::value_t::discarded);
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = open; i < user_text.size(); ++i) {
    const char c = user_text[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '[') {
      ++depth;
    } else if (c == ']') {
      --depth;
      if (depth == 0) {
        return json::parse(user_text.substr(open, i - open + 1), nullptr, false);
      }
    }
  }
  return json(json::value_t::discarded);
}

std::string extract_between(const std::string& text, const std::string& begin,
                            const std::string& end) {
  const std::size_t from = text.find(begin);
  if (from == std::string::npos) return "";
  const std::size_t start = from + begin.size();
  const std::size_t stop = text.find(end, start);
  return text.substr(start, stop == std::string::npos ? std::string::npos : stop - start);
}

json steps_json(const std::vector<ActionStep>& steps) {
  json out = json::array();
  for (const ActionStep& step : steps) out.push_back(step_to_json(step));
  return out;
}

}  // namespace

std::vector<ActionStep> DeltaModel::full_plan(const std::string& task) const {
  const PageIds ids = ids_for(mode_);
  if (auto trip = trip_slots(task); trip.has_value()) {
    return {click_id(ids.nav_trips), input_id(ids.confirmation, trip->confirmation),
            input_id(ids.first, trip->first), input_id(ids.last, trip->last),
            click_id(ids.trip_submit)};
  }
  if (auto flight = flight_slots(task); flight.has_value()) {
    return {input_id(ids.origin, flight->origin), input_id(ids.destination, flight->destination),
            input_id(ids.depart, flight->depart),
            select_id(ids.miles, flight->miles ? "true" : "false"),
            click_id(ids.flight_submit)};
  }
  return {};
}

json DeltaModel::handle_distill(const Prompt& prompt) const {
  const std::string html = extract_between(prompt.user_text, "Page markup:\n", "\nReply with");
  json elements = json::array();
  for (const DistilledElement& element : scan_interactive_elements(html)) {
    elements.push_back(element_to_json(element));
  }
  return json{{"elements", std::move(elements)}};
}

json DeltaModel::handle_verify(const Prompt& prompt) const {
  const std::string block =
      extract_between(prompt.user_text, "Current distilled elements:\n", "\nReply with");
  json elements = json::parse(block, nullptr, false);
  if (elements.is_discarded()) elements = json::array();
  return json{{"elements", std::move(elements)}};
}

json DeltaModel::handle_unravel(const Prompt& prompt) const {
  const std::string goal = prompt.key_slots.size() > 1 ? prompt.key_slots[1] : "";
  // classify only the page-markup block; the history section mentions past
  // targets and would shadow the current page otherwise
  std::string page_block = extract_between(prompt.user_text, "Current page markup:\n", "\nDecide");
  if (page_block.empty()) page_block = prompt.user_text;
  const SimPageKind page = detect_page(page_block);
  const PageIds ids = ids_for(mode_);

  auto chunk = [](std::vector<ActionStep> steps, bool done, const std::string& why) {
    return json{{"steps", steps_json(steps)}, {"done", done}, {"rationale", why}};
  };

  if (auto trip = trip_slots(goal); trip.has_value()) {
    switch (page) {
      case SimPageKind::home:
        return chunk({click_id(ids.nav_trips)}, false, "open the trips lookup page");
      case SimPageKind::my_trips:
        return chunk({input_id(ids.confirmation, trip->confirmation),
                      input_id(ids.first, trip->first), input_id(ids.last, trip->last),
                      click_id(ids.trip_submit)},
                     false, "fill the lookup form and submit");
      case SimPageKind::trip_details:
        return chunk({}, true, "trip details are on screen");
      default:
        return chunk({}, true, "nothing left to do");
    }
  }
  if (auto flight = flight_slots(goal); flight.has_value()) {
    switch (page) {
      case SimPageKind::home:
        return chunk({input_id(ids.origin, flight->origin),
                      input_id(ids.destination, flight->destination),
                      input_id(ids.depart, flight->depart),
                      select_id(ids.miles, flight->miles ? "true" : "false"),
                      click_id(ids.flight_submit)},
                     false, "fill the search form and submit");
      case SimPageKind::flight_results:
        return chunk({}, true, "results are on screen");
      default:
        return chunk({}, true, "nothing left to do");
    }
  }
  return chunk({}, true, "no plan for this goal");
}

json DeltaModel::handle_distmap(const Prompt& prompt) const {
  const std::string task = extract_between(prompt.user_text, "Task: ", "\n");
  std::vector<ActionStep> plan = full_plan(task);
  return json{{"steps", steps_json(plan)}};
}

json DeltaModel::handle_cluster(const Prompt& prompt) const {
  json items = embedded_array(prompt.user_text);
  std::map<std::string, std::vector<std::size_t>> by_signature;
  std::vector<std::string> order;
  if (!items.is_discarded()) {
    for (const json& item : items) {
      const std::string signature = item.at("signature").get<std::string>();
      if (by_signature.count(signature) == 0) order.push_back(signature);
      by_signature[signature].push_back(item.at("index").get<std::size_t>());
    }
  }
  json clusters = json::array();
  for (const std::string& signature : order) clusters.push_back(by_signature[signature]);
  return json{{"clusters", std::move(clusters)}};
}

json DeltaModel::handle_synthesis(const Prompt& prompt, bool first_pass) const {
  json members = embedded_array(prompt.user_text);
  if (members.is_discarded() || members.empty()) {
    return json{{"api", json::object()}};
  }

  bool trip_like = false;
  bool flight_like = false;
  for (const json& member : members) {
    const std::string task = member.at("task").get<std::string>();
    if (trip_slots(task).has_value()) trip_like = true;
    if (flight_slots(task).has_value()) flight_like = true;
  }

  json first_script = members.at(0).at("script");
  json steps = first_script.at("steps");
  json params = json::array();

  auto parameterize = [&steps](const std::set<std::string>& target_ids, const std::string& name) {
    for (json& step : steps) {
      if (!step.contains("target") || !step.contains("value")) continue;
      for (const json& locator : step.at("target")) {
        if (target_ids.count(locator.at("value").get<std::string>()) > 0) {
          step["value"] = json{{"kind", "param-ref"}, {"param", name}};
        }
      }
    }
  };

  std::string name, description;
  if (trip_like && !flight_like) {
    name = "retrieve_trip_information";
    description = "Looks up a reservation from the trips page using the "
                  "confirmation number, first name, and last name.";
    parameterize({"confirmationNo", "confNumber"}, "confirmation_number");
    parameterize({"firstName", "fname"}, "first_name");
    parameterize({"lastName", "lname"}, "last_name");
    for (const char* param : {"confirmation_number", "first_name", "last_name"}) {
      params.push_back(json{{"name", param}, {"value-type", "string"}, {"required", true}});
    }
  } else if (flight_like && !trip_like) {
    name = "search_flights";
    description = "Searches for flights given origin, destination, departure date, and an optional pay-with-miles flag.";
    parameterize({"fromAirportName", "originField"}, "origin");
    parameterize({"toAirportName", "destField"}, "destination");
    parameterize({"input_departureDate_1", "departDate"}, "depart_date");
    parameterize({"shopWithMiles", "milesToggle"}, "use_miles");
    params.push_back(json{{"name", "origin"}, {"value-type", "string"}, {"required", true}});
    params.push_back(json{{"name", "destination"}, {"value-type", "string"}, {"required", true}});
    params.push_back(json{{"name", "depart_date"}, {"value-type", "date"}, {"required", true}});
    params.push_back(json{{"name", "use_miles"},
                          {"value-type", "boolean"},
                          {"required", false},
                          {"default", "false"}});
  } else {
    // generic: a parameter per step position whose literals vary across members
    name = "generic_api";
    description = "Plays back the shared step sequence of the cluster.";
    int counter = 0;
    for (std::size_t i = 0; i < steps.size(); ++i) {
      if (!steps.at(i).contains("value")) continue;
      std::set<std::string> literals;
      bool varies = false;
      for (const json& member : members) {
        const json& other = member.at("script").at("steps");
        if (other.size() != steps.size()) continue;
        if (other.at(i).contains("value") && other.at(i).at("value").contains("literal")) {
          literals.insert(other.at(i).at("value").at("literal").get<std::string>());
        }
      }
      varies = literals.size() > 1;
      if (varies) {
        const std::string param = "p" + std::to_string(counter++);
        steps[i]["value"] = json{{"kind", "param-ref"}, {"param", param}};
        params.push_back(json{{"name", param}, {"value-type", "string"}, {"required", true}});
      }
    }
  }

  json api{{"name", name}, {"description", description}, {"params", params}, {"steps", steps}};
  if (first_pass) {
    return json{{"api", api},
                {"shortcomings",
                 json::array({"date parameters must stay in YYYY-MM-DD form",
                              "optional flags need explicit defaults"})}};
  }
  return json{{"api", api}};
}

json DeltaModel::handle_retrieval(const Prompt& prompt) const {
  const std::string request = prompt.key_slots.size() > 1 ? prompt.key_slots[1] : "";

  struct Route {
    std::string api;
    json bindings;
  };
  std::optional<Route> route;
  if (auto trip = trip_slots(request); trip.has_value()) {
    route = Route{"retrieve_trip_information",
                  json{{"confirmation_number", trip->confirmation},
                       {"first_name", trip->first},
                       {"last_name", trip->last}}};
  } else if (request == kTaskFlightsSeattle) {
    route = Route{"search_flights",
                  json{{"origin", "Seattle"},
                       {"destination", "NewYork"},
                       {"depart_date", "2025-06-05"},
                       {"use_miles", true}}};
  } else if (request == kRequestAtlanta) {
    route = Route{"search_flights",
                  json{{"origin", "Atlanta"},
                       {"destination", "LosAngeles"},
                       {"depart_date", "2025-09-12"}}};
  } else if (request == kRequestBostonMiami || request == kTaskFlightsBoston) {
    route = Route{"search_flights",
                  json{{"origin", "Boston"}, {"destination", "Miami"},
                       {"depart_date", "2026-04-15"}}};
  } else if (request == kRequestChicago) {
    route = Route{"search_flights",
                  json{{"origin", "Chicago"},
                       {"destination", "SanFrancisco"},
                       {"depart_date", "2025-07-08"},
                       {"use_miles", true}}};
  }

  if (route.has_value()) {
    // honor the catalog: only select apis that actually exist in it
    const std::string suffix = ":" + route->api;
    for (std::size_t i = 2; i < prompt.key_slots.size(); ++i) {
      const std::string& slot = prompt.key_slots[i];
      if (slot.size() >= suffix.size() &&
          slot.compare(slot.size() - suffix.size(), suffix.size(), suffix) == 0) {
        return json{{"match", true}, {"api", route->api}, {"bindings", route->bindings}};
      }
    }
  }
  return json{{"match", false}};
}

std::optional<Gateway::Reply> DeltaModel::operator()(const Prompt& prompt) {
  json reply;
  if (prompt.template_name == "distill") {
    reply = handle_distill(prompt);
  } else if (prompt.template_name == "verify") {
    reply = handle_verify(prompt);
  } else if (prompt.template_name == "unravel_step") {
    reply = handle_unravel(prompt);
  } else if (prompt.template_name == "distmap_generate") {
    reply = handle_distmap(prompt);
  } else if (prompt.template_name == "cluster") {
    reply = handle_cluster(prompt);
  } else if (prompt.template_name == "synthesize_pass1") {
    reply = handle_synthesis(prompt, true);
  } else if (prompt.template_name == "synthesize_pass2") {
    reply = handle_synthesis(prompt, false);
  } else if (prompt.template_name == "retrieval") {
    reply = handle_retrieval(prompt);
  } else if (prompt.template_name == "rubric") {
    reply = json{{"alignment", 4}, {"fidelity", 3}, {"efficiency", 3}};
  } else {
    return std::nullopt;
  }
  return Gateway::Reply{reply.dump(), std::nullopt, std::nullopt};
}

std::unique_ptr<ScriptedGateway> make_model_gateway(DeltaModel::Mode mode) {
  auto gateway = std::make_unique<ScriptedGateway>();
  auto model = std::make_shared<DeltaModel>(mode);
  gateway->set_handler([model](const Prompt& prompt) { return (*model)(prompt); });
  return gateway;
}

}  // namespace paffa::testsupport
