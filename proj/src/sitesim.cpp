#include "paffa/sitesim.hpp"

#include <algorithm>
#include <sstream>

namespace paffa {

namespace {

const char* to_string(PredicateKind kind) {
  switch (kind) {
    case PredicateKind::any: return "any";
    case PredicateKind::equals: return "equals";
    case PredicateKind::non_empty: return "non-empty";
  }
  return "?";
}

PredicateKind predicate_kind_from_string(const std::string& name) {
  if (name == "any") return PredicateKind::any;
  if (name == "equals") return PredicateKind::equals;
  if (name == "non-empty") return PredicateKind::non_empty;
  throw Error(ErrorCode::spec_invalid, "unknown predicate kind '" + name + "'");
}

json predicate_to_json(const ValuePredicate& predicate) {
  json doc{{"kind", to_string(predicate.kind)}};
  if (predicate.kind == PredicateKind::equals) doc["literal"] = predicate.literal;
  if (!predicate.field.empty()) doc["field"] = predicate.field;
  return doc;
}

ValuePredicate predicate_from_json(const json& doc) {
  jsonio::reject_unknown_fields(doc, {"kind", "literal", "field"}, "predicate");
  ValuePredicate predicate;
  predicate.kind = predicate_kind_from_string(jsonio::require_string(doc, "kind", "predicate"));
  if (predicate.kind == PredicateKind::equals) {
    predicate.literal = jsonio::require_string(doc, "literal", "predicate");
  }
  if (doc.contains("field")) predicate.field = doc.at("field").get<std::string>();
  return predicate;
}

std::string state_key_for(const html::Node& node) {
  auto id = node.attr("id");
  if (id.has_value() && !id->empty()) return *id;
  auto name = node.attr("name");
  if (name.has_value() && !name->empty()) return *name;
  return html::css_path(node);
}

}  // namespace

const SimPage* SimSite::page(const std::string& page_id) const {
  for (const SimPage& p : pages) {
    if (p.page_id == page_id) return &p;
  }
  return nullptr;
}

void SimSite::validate() const {
  std::vector<std::string> diagnostics;
  if (page(start_page_id) == nullptr) {
    diagnostics.push_back("start page '" + start_page_id + "' does not exist");
  }
  std::map<std::string, int> id_counts;
  for (const SimPage& p : pages) ++id_counts[p.page_id];
  for (const auto& [page_id, count] : id_counts) {
    if (count > 1) diagnostics.push_back("duplicate page-id '" + page_id + "'");
  }
  for (const SimPage& p : pages) {
    html::Document doc = html::Document::parse(p.html);
    for (std::size_t i = 0; i < p.transitions.size(); ++i) {
      const SimTransition& t = p.transitions[i];
      if (page(t.next_page_id) == nullptr) {
        diagnostics.push_back("page '" + p.page_id + "' transition " + std::to_string(i) +
                              " targets unknown page '" + t.next_page_id + "'");
      }
      if (doc.resolve(t.trigger) == nullptr) {
        diagnostics.push_back("page '" + p.page_id + "' transition " + std::to_string(i) +
                              " trigger " + t.trigger.value + " matches nothing");
      }
    }
  }
  for (const auto& [name, goal] : goals) {
    if (page(goal.page_id) == nullptr) {
      diagnostics.push_back("goal '" + name + "' names unknown page '" + goal.page_id + "'");
    }
  }
  if (!diagnostics.empty()) {
    std::ostringstream out;
    for (const std::string& d : diagnostics) out << d << "; ";
    throw Error(ErrorCode::spec_invalid, out.str());
  }
}

SimSite SimSite::from_document(const json& doc) {
  jsonio::reject_unknown_fields(
      doc, {"schema-version", "site-id", "start-page-id", "click-mode", "pages", "goals"},
      "site spec");
  jsonio::require_schema_version(doc, "site spec");
  SimSite site;
  site.site_id = jsonio::require_string(doc, "site-id", "site spec");
  site.start_page_id = jsonio::require_string(doc, "start-page-id", "site spec");
  if (doc.contains("click-mode")) {
    std::string mode = doc.at("click-mode").get<std::string>();
    if (mode == "inert") {
      site.click_mode = ClickMode::inert;
    } else if (mode == "strict") {
      site.click_mode = ClickMode::strict;
    } else {
      throw Error(ErrorCode::spec_invalid, "unknown click-mode '" + mode + "'");
    }
  }
  const json& pages = jsonio::require(doc, "pages", "site spec");
  if (!pages.is_array() || pages.empty()) {
    throw Error(ErrorCode::spec_invalid, "site spec needs a non-empty pages array");
  }
  for (const json& page_doc : pages) {
    jsonio::reject_unknown_fields(page_doc, {"page-id", "url", "html", "transitions"}, "sim page");
    SimPage page;
    page.page_id = jsonio::require_string(page_doc, "page-id", "sim page");
    if (page_doc.contains("url")) page.url = page_doc.at("url").get<std::string>();
    page.html = jsonio::require_string(page_doc, "html", "sim page");
    if (page_doc.contains("transitions")) {
      for (const json& t_doc : page_doc.at("transitions")) {
        jsonio::reject_unknown_fields(
            t_doc, {"trigger", "on-kind", "predicate", "next-page-id", "state-effects"},
            "transition");
        SimTransition transition;
        transition.trigger = locator_from_json(jsonio::require(t_doc, "trigger", "transition"));
        transition.on_kind =
            step_kind_from_string(jsonio::require_string(t_doc, "on-kind", "transition"));
        if (t_doc.contains("predicate")) {
          transition.predicate = predicate_from_json(t_doc.at("predicate"));
        }
        transition.next_page_id = jsonio::require_string(t_doc, "next-page-id", "transition");
        if (t_doc.contains("state-effects")) {
          for (auto it = t_doc.at("state-effects").begin(); it != t_doc.at("state-effects").end();
               ++it) {
            transition.state_effects[it.key()] = it.value().get<std::string>();
          }
        }
        page.transitions.push_back(std::move(transition));
      }
    }
    site.pages.push_back(std::move(page));
  }
  if (doc.contains("goals")) {
    for (auto it = doc.at("goals").begin(); it != doc.at("goals").end(); ++it) {
      jsonio::reject_unknown_fields(it.value(), {"page-id", "state-effects"}, "goal");
      SimGoal goal;
      goal.page_id = jsonio::require_string(it.value(), "page-id", "goal");
      if (it.value().contains("state-effects")) {
        for (auto e = it.value().at("state-effects").begin();
             e != it.value().at("state-effects").end(); ++e) {
          goal.required_effects[e.key()] = e.value().get<std::string>();
        }
      }
      site.goals[it.key()] = std::move(goal);
    }
  }
  site.validate();
  return site;
}

json SimSite::to_document() const {
  json pages_doc = json::array();
  for (const SimPage& page : pages) {
    json transitions = json::array();
    for (const SimTransition& t : page.transitions) {
      json t_doc{{"trigger", locator_to_json(t.trigger)},
                 {"on-kind", paffa::to_string(t.on_kind)},
                 {"predicate", predicate_to_json(t.predicate)},
                 {"next-page-id", t.next_page_id}};
      if (!t.state_effects.empty()) t_doc["state-effects"] = t.state_effects;
      transitions.push_back(std::move(t_doc));
    }
    pages_doc.push_back(json{{"page-id", page.page_id},
                             {"url", page.url},
                             {"html", page.html},
                             {"transitions", std::move(transitions)}});
  }
  json goals_doc = json::object();
  for (const auto& [name, goal] : goals) {
    goals_doc[name] = json{{"page-id", goal.page_id}, {"state-effects", goal.required_effects}};
  }
  return json{{"schema-version", kSchemaVersion},
              {"site-id", site_id},
              {"start-page-id", start_page_id},
              {"click-mode", click_mode == ClickMode::inert ? "inert" : "strict"},
              {"pages", std::move(pages_doc)},
              {"goals", std::move(goals_doc)}};
}

SimSite load_site_spec(const std::filesystem::path& path) {
  return SimSite::from_document(jsonio::load_json_file(path));
}

SimSession::SimSession(std::shared_ptr<const SimSite> site) : site_(std::move(site)) {}

void SimSession::open(const std::string& start_url) {
  current_page_id_ = site_->start_page_id;
  if (!start_url.empty()) {
    for (const SimPage& page : site_->pages) {
      if (page.url == start_url || page.page_id == start_url) {
        current_page_id_ = page.page_id;
        break;
      }
    }
  }
  state_.clear();
  clock_ms_ = 0;
  open_ = true;
  dom_valid_ = false;
  log_ = json::array();
  log_.push_back(json{{"op", "open"}, {"url", start_url}});
}

const SimPage& SimSession::page() const {
  const SimPage* p = site_->page(current_page_id_);
  if (p == nullptr) {
    throw Error(ErrorCode::spec_invalid, "session on unknown page '" + current_page_id_ + "'");
  }
  return *p;
}

const html::Document& SimSession::dom() {
  if (!dom_valid_) {
    dom_ = html::Document::parse(page().html);
    dom_valid_ = true;
  }
  return dom_;
}

std::string SimSession::current_url() {
  const SimPage& p = page();
  return p.url.empty() ? "sim://" + site_->site_id + "/" + p.page_id : p.url;
}

std::string SimSession::current_html() { return page().html; }

std::string SimSession::current_page_id() { return current_page_id_; }

FindResult SimSession::find(const Locator& locator) {
  if (!open_) return {std::nullopt, "session closed"};
  const html::Node* node = dom().resolve(locator);
  if (node == nullptr) return {std::nullopt, ""};
  return {current_page_id_ + "\n" + html::css_path(*node), ""};
}

ActResult SimSession::act(const std::string& handle, StepKind kind, const std::string& value) {
  if (!open_) return {false, "session closed"};
  const std::size_t sep = handle.find('\n');
  if (sep == std::string::npos) return {false, "malformed handle"};
  if (handle.substr(0, sep) != current_page_id_) {
    return {false, "stale element: page changed since find"};
  }
  const std::string path = handle.substr(sep + 1);
  const html::Node* node = dom().resolve(Locator{LocatorStrategy::by_css, path});
  if (node == nullptr) return {false, "element vanished"};

  log_.push_back(json{{"op", "act"},
                      {"kind", paffa::to_string(kind)},
                      {"path", path},
                      {"value", value}});

  if (kind == StepKind::input || kind == StepKind::select_option) {
    state_[state_key_for(*node)] = value;
  }

  // First transition in declaration order whose trigger resolves to the acted
  // element and whose predicate passes wins.
  for (const SimTransition& t : page().transitions) {
    if (t.on_kind != kind) continue;
    const html::Node* trigger = dom().resolve(t.trigger);
    if (trigger == nullptr || html::css_path(*trigger) != path) continue;

    std::string observed = value;
    if (!t.predicate.field.empty()) {
      auto it = state_.find(t.predicate.field);
      observed = it == state_.end() ? "" : it->second;
    }
    bool passes = true;
    switch (t.predicate.kind) {
      case PredicateKind::any: passes = true; break;
      case PredicateKind::equals: passes = observed == t.predicate.literal; break;
      case PredicateKind::non_empty: passes = !observed.empty(); break;
    }
    if (!passes) continue;

    for (const auto& [key, effect] : t.state_effects) state_[key] = effect;
    current_page_id_ = t.next_page_id;
    dom_valid_ = false;
    return {true, "transition to " + t.next_page_id};
  }

  if (kind == StepKind::input || kind == StepKind::select_option) return {true, "recorded"};
  if (site_->click_mode == ClickMode::strict) return {false, "no transition (strict mode)"};
  return {true, "inert"};
}

ActResult SimSession::navigate(const std::string& url) {
  if (!open_) return {false, "session closed"};
  for (const SimPage& page : site_->pages) {
    if (page.url == url || page.page_id == url ||
        "sim://" + site_->site_id + "/" + page.page_id == url) {
      current_page_id_ = page.page_id;
      dom_valid_ = false;
      log_.push_back(json{{"op", "navigate"}, {"url", url}});
      return {true, ""};
    }
  }
  return {false, "no page with url '" + url + "'"};
}

void SimSession::wait(double seconds) {
  clock_ms_ += static_cast<long long>(seconds * 1000.0);
  log_.push_back(json{{"op", "wait"}, {"seconds", seconds}});
}

std::unique_ptr<SimSession> SimSession::replay_log(std::shared_ptr<const SimSite> site,
                                                   const json& log) {
  auto session = std::make_unique<SimSession>(std::move(site));
  for (const json& entry : log) {
    const std::string op = entry.at("op").get<std::string>();
    if (op == "open") {
      session->open(entry.at("url").get<std::string>());
    } else if (op == "navigate") {
      session->navigate(entry.at("url").get<std::string>());
    } else if (op == "wait") {
      session->wait(entry.at("seconds").get<double>());
    } else if (op == "act") {
      const std::string path = entry.at("path").get<std::string>();
      session->act(session->current_page_id() + "\n" + path,
                   step_kind_from_string(entry.at("kind").get<std::string>()),
                   entry.at("value").get<std::string>());
    }
  }
  return session;
}

std::unique_ptr<SimSession> open_sim_session(std::shared_ptr<const SimSite> site) {
  auto session = std::make_unique<SimSession>(std::move(site));
  session->open("");
  return session;
}

bool check_goal(const SimSite& site, const SimSession& session, const std::string& goal_name) {
  auto it = site.goals.find(goal_name);
  if (it == site.goals.end()) {
    throw Error(ErrorCode::unknown_goal, "'" + goal_name + "'");
  }
  if (session.page_id() != it->second.page_id) return false;
  for (const auto& [key, value] : it->second.required_effects) {
    auto found = session.state().find(key);
    if (found == session.state().end() || found->second != value) return false;
  }
  return true;
}

}  // namespace paffa
