#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "paffa/jsonio.hpp"

namespace paffa {

// ---------------------------------------------------------------------------
// Portable action language. Scripts and apis are structured documents rather
// than generated source text, so they can be validated, parameterized, and
// executed against any session backend.
// ---------------------------------------------------------------------------

enum class LocatorStrategy { by_id, by_name, by_css, by_xpath, by_text };

struct Locator {
  LocatorStrategy strategy = LocatorStrategy::by_id;
  std::string value;

  bool operator==(const Locator&) const = default;
};

/// Ordered fallback list; the first locator that resolves wins. This is the
/// declarative form of a try-except chain over alternative selectors.
using LocatorChain = std::vector<Locator>;

enum class ValueKind { literal, param_ref };

/// Either a concrete string or a reference to a declared parameter slot.
struct ValueExpr {
  ValueKind kind = ValueKind::literal;
  std::string literal;  // set when kind == literal
  std::string param;    // set when kind == param_ref

  static ValueExpr lit(std::string text);
  static ValueExpr ref(std::string name);

  bool operator==(const ValueExpr&) const = default;
};

enum class StepKind { navigate, click, input, select_option, submit, wait };

/// One interaction. Field presence depends on kind:
///   navigate        value (url), no target
///   click / submit  target, no value
///   input           target + value
///   select-option   target + value
///   wait            wait-seconds only
struct ActionStep {
  StepKind kind = StepKind::click;
  std::optional<LocatorChain> target;
  std::optional<ValueExpr> value;
  double wait_seconds = 0.0;

  bool operator==(const ActionStep&) const = default;
};

enum class ParamType { string_type, date, boolean, integer };

struct ParamSpec {
  std::string name;
  ParamType value_type = ParamType::string_type;
  bool required = true;
  std::optional<std::string> default_value;

  bool operator==(const ParamSpec&) const = default;
};

/// A concrete (or parameterized) step sequence for one task on one website.
struct ActionScript {
  std::string website;
  std::string task_description;
  std::vector<ActionStep> steps;
  std::vector<ParamSpec> declared_params;

  bool operator==(const ActionScript&) const = default;
};

/// A reusable parameterized unit stored in the library. Substituting a full
/// set of bindings yields a runnable ActionScript.
struct ActionApi {
  std::string api_id;
  std::string name;
  std::string description;
  std::vector<ParamSpec> params;
  std::vector<ActionStep> steps;
  std::string website;

  bool operator==(const ActionApi&) const = default;
};

struct Violation {
  int step_index = -1;  // -1 for script-level rules
  std::string rule;
};

struct ValidationReport {
  bool ok = true;
  std::vector<Violation> violations;

  std::string to_string() const;
};

using Bindings = std::map<std::string, std::string>;

// -- operations -------------------------------------------------------------

/// Checks every structural invariant. Violations are data, not faults.
ValidationReport validate_script(const ActionScript& script);
ValidationReport validate_api(const ActionApi& api);

/// Replaces every param-ref with its bound (or default) literal. The result
/// declares no parameters. Throws missing-required-param / type-mismatch /
/// unknown-param.
ActionScript substitute_params(const ActionApi& api, const Bindings& bindings);

/// First problem with `bindings` against `api.params`, or nullopt when they
/// type-check and cover every referenced parameter.
std::optional<std::string> binding_error(const ActionApi& api, const Bindings& bindings);

/// Deterministic key over (website, step kinds, locator strategies). Literal
/// values never contribute, so scripts differing only in typed text collide —
/// which is exactly what signature-based clustering wants.
std::string script_signature(const ActionScript& script);
std::string steps_signature(const std::string& website, const std::vector<ActionStep>& steps);

// -- value typing -----------------------------------------------------------

bool is_identifier(const std::string& name);
/// ISO-8601 calendar date (YYYY-MM-DD), month/day ranges enforced.
bool is_iso_date(const std::string& text);
bool value_matches_type(ParamType type, const std::string& value);

// -- names ------------------------------------------------------------------

const char* to_string(LocatorStrategy s);
const char* to_string(StepKind k);
const char* to_string(ParamType t);
LocatorStrategy locator_strategy_from_string(const std::string& s);
StepKind step_kind_from_string(const std::string& s);
ParamType param_type_from_string(const std::string& s);

// -- canonical JSON serialization --------------------------------------------
// Standalone documents carry "schema-version" at the root and reject unknown
// fields. The *_from_json / *_to_json forms are the embedded (unversioned)
// representation used inside larger documents.

json locator_to_json(const Locator& locator);
Locator locator_from_json(const json& doc);
json step_to_json(const ActionStep& step);
ActionStep step_from_json(const json& doc);
json param_to_json(const ParamSpec& param);
ParamSpec param_from_json(const json& doc);

json script_to_json(const ActionScript& script);
ActionScript script_from_json(const json& doc);
json script_to_document(const ActionScript& script);
ActionScript script_from_document(const json& doc);

json api_to_json(const ActionApi& api);
ActionApi api_from_json(const json& doc);
json api_to_document(const ActionApi& api);
ActionApi api_from_document(const json& doc);

}  // namespace paffa
