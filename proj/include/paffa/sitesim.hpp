#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "paffa/executor.hpp"
#include "paffa/html.hpp"

namespace paffa {

enum class PredicateKind { any, equals, non_empty };

/// Guard on a transition. For input-kind triggers the predicate checks the
/// typed value; for click/submit it checks the named recorded field.
struct ValuePredicate {
  PredicateKind kind = PredicateKind::any;
  std::string literal;  // equals only
  std::string field;    // recorded-state key; empty = the acted value
};

struct SimTransition {
  Locator trigger;
  StepKind on_kind = StepKind::click;
  ValuePredicate predicate;
  std::string next_page_id;
  std::map<std::string, std::string> state_effects;
};

struct SimPage {
  std::string page_id;
  std::string url;
  std::string html;
  std::vector<SimTransition> transitions;
};

struct SimGoal {
  std::string page_id;
  std::map<std::string, std::string> required_effects;
};

/// Unmatched clicks are ignored on real pages most of the time; strict mode
/// turns them into failures for negative tests.
enum class ClickMode { inert, strict };

/// Immutable finite-state website: pages are documents, transitions fire on
/// (resolved trigger element, action kind, value predicate).
class SimSite {
 public:
  std::string site_id;
  std::string start_page_id;
  ClickMode click_mode = ClickMode::inert;
  std::vector<SimPage> pages;  // declaration order preserved
  std::map<std::string, SimGoal> goals;

  const SimPage* page(const std::string& page_id) const;
  /// Structural check: dangling page ids, unresolvable triggers, bad html.
  void validate() const;

  static SimSite from_document(const json& doc);
  json to_document() const;
};

SimSite load_site_spec(const std::filesystem::path& path);

/// One browsing session over a SimSite. State (recorded fields + effects) is
/// a pure fold over the action log, so any session can be reconstructed.
class SimSession : public Session {
 public:
  explicit SimSession(std::shared_ptr<const SimSite> site);

  void open(const std::string& start_url) override;
  bool is_open() const override { return open_; }
  std::string current_url() override;
  std::string current_html() override;
  std::string current_page_id() override;
  FindResult find(const Locator& locator) override;
  ActResult act(const std::string& handle, StepKind kind, const std::string& value) override;
  ActResult navigate(const std::string& url) override;
  void wait(double seconds) override;
  void close() override { open_ = false; }

  const std::map<std::string, std::string>& state() const { return state_; }
  const std::string& page_id() const { return current_page_id_; }
  long long logical_clock_ms() const { return clock_ms_; }

  /// Event log (open/navigate/act/wait entries) sufficient to rebuild the
  /// session from scratch.
  const json& action_log() const { return log_; }
  static std::unique_ptr<SimSession> replay_log(std::shared_ptr<const SimSite> site,
                                                const json& log);

 private:
  const SimPage& page() const;
  const html::Document& dom();

  std::shared_ptr<const SimSite> site_;
  std::string current_page_id_;
  std::map<std::string, std::string> state_;
  long long clock_ms_ = 0;
  bool open_ = false;
  bool dom_valid_ = false;
  html::Document dom_;
  json log_ = json::array();
};

std::unique_ptr<SimSession> open_sim_session(std::shared_ptr<const SimSite> site);

/// True iff the session sits on the goal page with every required state
/// effect present. Throws unknown-goal for names the site does not declare.
bool check_goal(const SimSite& site, const SimSession& session, const std::string& goal_name);

}  // namespace paffa
