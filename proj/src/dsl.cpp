#include "paffa/dsl.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

namespace paffa {

ValueExpr ValueExpr::lit(std::string text) {
  ValueExpr v;
  v.kind = ValueKind::literal;
  v.literal = std::move(text);
  return v;
}

ValueExpr ValueExpr::ref(std::string name) {
  ValueExpr v;
  v.kind = ValueKind::param_ref;
  v.param = std::move(name);
  return v;
}

std::string ValidationReport::to_string() const {
  if (ok) return "ok";
  std::ostringstream out;
  for (const auto& v : violations) {
    if (v.step_index >= 0) out << "step " << v.step_index << ": ";
    out << v.rule << "; ";
  }
  return out.str();
}

// -- names -------------------------------------------------------------------

const char* to_string(LocatorStrategy s) {
  switch (s) {
    case LocatorStrategy::by_id: return "by-id";
    case LocatorStrategy::by_name: return "by-name";
    case LocatorStrategy::by_css: return "by-css";
    case LocatorStrategy::by_xpath: return "by-xpath";
    case LocatorStrategy::by_text: return "by-text";
  }
  return "?";
}

const char* to_string(StepKind k) {
  switch (k) {
    case StepKind::navigate: return "navigate";
    case StepKind::click: return "click";
    case StepKind::input: return "input";
    case StepKind::select_option: return "select-option";
    case StepKind::submit: return "submit";
    case StepKind::wait: return "wait";
  }
  return "?";
}

const char* to_string(ParamType t) {
  switch (t) {
    case ParamType::string_type: return "string";
    case ParamType::date: return "date";
    case ParamType::boolean: return "boolean";
    case ParamType::integer: return "integer";
  }
  return "?";
}

LocatorStrategy locator_strategy_from_string(const std::string& s) {
  if (s == "by-id") return LocatorStrategy::by_id;
  if (s == "by-name") return LocatorStrategy::by_name;
  if (s == "by-css") return LocatorStrategy::by_css;
  if (s == "by-xpath") return LocatorStrategy::by_xpath;
  if (s == "by-text") return LocatorStrategy::by_text;
  throw Error(ErrorCode::corrupt_file, "unknown locator strategy '" + s + "'");
}

StepKind step_kind_from_string(const std::string& s) {
  if (s == "navigate") return StepKind::navigate;
  if (s == "click") return StepKind::click;
  if (s == "input") return StepKind::input;
  if (s == "select-option") return StepKind::select_option;
  if (s == "submit") return StepKind::submit;
  if (s == "wait") return StepKind::wait;
  throw Error(ErrorCode::corrupt_file, "unknown step kind '" + s + "'");
}

ParamType param_type_from_string(const std::string& s) {
  if (s == "string") return ParamType::string_type;
  if (s == "date") return ParamType::date;
  if (s == "boolean") return ParamType::boolean;
  if (s == "integer") return ParamType::integer;
  throw Error(ErrorCode::corrupt_file, "unknown value-type '" + s + "'");
}

// -- value typing ------------------------------------------------------------

bool is_identifier(const std::string& name) {
  if (name.empty()) return false;
  if (!std::isalpha(static_cast<unsigned char>(name[0])) && name[0] != '_') return false;
  return std::all_of(name.begin(), name.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '_';
  });
}

bool is_iso_date(const std::string& text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return false;
  for (int i : {0, 1, 2, 3, 5, 6, 8, 9}) {
    if (!std::isdigit(static_cast<unsigned char>(text[i]))) return false;
  }
  int year = std::stoi(text.substr(0, 4));
  int month = std::stoi(text.substr(5, 2));
  int day = std::stoi(text.substr(8, 2));
  if (month < 1 || month > 12 || day < 1) return false;
  static const int days[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  int max_day = days[month - 1];
  bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
  if (month == 2 && leap) max_day = 29;
  return day <= max_day;
}

bool value_matches_type(ParamType type, const std::string& value) {
  switch (type) {
    case ParamType::string_type:
      return true;
    case ParamType::date:
      return is_iso_date(value);
    case ParamType::boolean: {
      std::string lower;
      lower.reserve(value.size());
      for (char c : value) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
      return lower == "true" || lower == "false";
    }
    case ParamType::integer: {
      if (value.empty()) return false;
      std::size_t i = (value[0] == '-' || value[0] == '+') ? 1 : 0;
      if (i == value.size()) return false;
      for (; i < value.size(); ++i) {
        if (!std::isdigit(static_cast<unsigned char>(value[i]))) return false;
      }
      return true;
    }
  }
  return false;
}

// -- validation ----------------------------------------------------------------

namespace {

bool needs_target(StepKind k) {
  return k == StepKind::click || k == StepKind::input || k == StepKind::select_option ||
         k == StepKind::submit;
}

bool needs_value(StepKind k) {
  return k == StepKind::navigate || k == StepKind::input || k == StepKind::select_option;
}

void check_step(const ActionStep& step, int index, std::vector<Violation>& out) {
  if (needs_target(step.kind)) {
    if (!step.target.has_value() || step.target->empty()) {
      out.push_back({index, "missing target"});
    }
  } else if (step.target.has_value()) {
    out.push_back({index, "unexpected target"});
  }
  if (step.target.has_value()) {
    for (const Locator& locator : *step.target) {
      if (locator.value.empty()) out.push_back({index, "empty locator value"});
    }
  }
  if (needs_value(step.kind)) {
    if (!step.value.has_value()) {
      out.push_back({index, "missing value"});
    } else if (step.value->kind == ValueKind::param_ref && step.value->param.empty()) {
      out.push_back({index, "empty param-ref"});
    }
  } else if (step.value.has_value()) {
    out.push_back({index, "unexpected value"});
  }
  if (step.kind == StepKind::wait) {
    if (step.wait_seconds < 0.0) out.push_back({index, "negative wait-seconds"});
  } else if (step.wait_seconds != 0.0) {
    out.push_back({index, "wait-seconds on non-wait step"});
  }
}

void check_params_and_refs(const std::vector<ParamSpec>& params,
                           const std::vector<ActionStep>& steps,
                           std::vector<Violation>& out) {
  std::set<std::string> declared;
  for (const ParamSpec& p : params) {
    if (!is_identifier(p.name)) out.push_back({-1, "bad param name '" + p.name + "'"});
    if (!declared.insert(p.name).second) {
      out.push_back({-1, "duplicate param name '" + p.name + "'"});
    }
    if (p.required && p.default_value.has_value()) {
      out.push_back({-1, "required param '" + p.name + "' has default"});
    }
    if (p.default_value.has_value() && !value_matches_type(p.value_type, *p.default_value)) {
      out.push_back({-1, "default for '" + p.name + "' fails value-type"});
    }
  }
  std::set<std::string> referenced;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto& value = steps[i].value;
    if (value.has_value() && value->kind == ValueKind::param_ref) {
      referenced.insert(value->param);
      if (declared.count(value->param) == 0) {
        out.push_back({static_cast<int>(i), "undeclared param-ref '" + value->param + "'"});
      }
    }
  }
  for (const ParamSpec& p : params) {
    if (p.required && referenced.count(p.name) == 0) {
      out.push_back({-1, "required param '" + p.name + "' never referenced"});
    }
  }
}

}  // namespace

ValidationReport validate_script(const ActionScript& script) {
  ValidationReport report;
  if (script.steps.empty()) report.violations.push_back({-1, "empty steps"});
  for (std::size_t i = 0; i < script.steps.size(); ++i) {
    check_step(script.steps[i], static_cast<int>(i), report.violations);
  }
  check_params_and_refs(script.declared_params, script.steps, report.violations);
  report.ok = report.violations.empty();
  return report;
}

ValidationReport validate_api(const ActionApi& api) {
  ValidationReport report;
  if (!is_identifier(api.name)) report.violations.push_back({-1, "api name is not an identifier"});
  if (api.steps.empty()) report.violations.push_back({-1, "empty steps"});
  for (std::size_t i = 0; i < api.steps.size(); ++i) {
    check_step(api.steps[i], static_cast<int>(i), report.violations);
  }
  check_params_and_refs(api.params, api.steps, report.violations);
  report.ok = report.violations.empty();
  return report;
}

// -- substitution --------------------------------------------------------------

std::optional<std::string> binding_error(const ActionApi& api, const Bindings& bindings) {
  std::set<std::string> declared;
  for (const ParamSpec& p : api.params) declared.insert(p.name);
  for (const auto& [name, value] : bindings) {
    if (declared.count(name) == 0) return "unknown param '" + name + "'";
  }
  for (const ParamSpec& p : api.params) {
    auto it = bindings.find(p.name);
    if (it == bindings.end()) {
      if (p.required) return "missing required param '" + p.name + "'";
      continue;
    }
    if (!value_matches_type(p.value_type, it->second)) {
      return "param '" + p.name + "' expected " + std::string(to_string(p.value_type)) +
             ", got '" + it->second + "'";
    }
  }
  return std::nullopt;
}

ActionScript substitute_params(const ActionApi& api, const Bindings& bindings) {
  std::map<std::string, ParamSpec> specs;
  for (const ParamSpec& p : api.params) specs[p.name] = p;

  for (const auto& [name, value] : bindings) {
    auto it = specs.find(name);
    if (it == specs.end()) {
      throw Error(ErrorCode::unknown_param, "'" + name + "' is not declared by " + api.name);
    }
    if (!value_matches_type(it->second.value_type, value)) {
      throw Error(ErrorCode::type_mismatch,
                  "param '" + name + "' expected " + to_string(it->second.value_type) +
                      ", got '" + value + "'");
    }
  }
  for (const ParamSpec& p : api.params) {
    if (p.required && bindings.count(p.name) == 0) {
      throw Error(ErrorCode::missing_required_param, "'" + p.name + "'");
    }
  }

  ActionScript script;
  script.website = api.website;
  script.task_description = api.description;
  script.steps = api.steps;
  for (ActionStep& step : script.steps) {
    if (!step.value.has_value() || step.value->kind != ValueKind::param_ref) continue;
    const std::string& name = step.value->param;
    auto spec = specs.find(name);
    if (spec == specs.end()) {
      throw Error(ErrorCode::unknown_param, "step references undeclared param '" + name + "'");
    }
    auto bound = bindings.find(name);
    if (bound != bindings.end()) {
      step.value = ValueExpr::lit(bound->second);
    } else if (spec->second.default_value.has_value()) {
      step.value = ValueExpr::lit(*spec->second.default_value);
    } else {
      // Optional, referenced, no default, no binding: there is nothing to
      // substitute, so the call is effectively missing this parameter.
      throw Error(ErrorCode::missing_required_param,
                  "'" + name + "' (referenced, optional, no default)");
    }
  }
  return script;
}

// -- signature -------------------------------------------------------------------

std::string steps_signature(const std::string& website, const std::vector<ActionStep>& steps) {
  std::ostringstream out;
  out << website << "::";
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (i) out << ",";
    out << to_string(steps[i].kind);
    if (steps[i].target.has_value()) {
      out << "(";
      for (std::size_t j = 0; j < steps[i].target->size(); ++j) {
        if (j) out << "+";
        out << to_string((*steps[i].target)[j].strategy);
      }
      out << ")";
    }
  }
  return out.str();
}

std::string script_signature(const ActionScript& script) {
  ValidationReport report = validate_script(script);
  if (!report.ok) {
    throw Error(ErrorCode::invalid_script, report.to_string());
  }
  return steps_signature(script.website, script.steps);
}

// -- serialization -----------------------------------------------------------------

json locator_to_json(const Locator& locator) {
  return json{{"strategy", to_string(locator.strategy)}, {"value", locator.value}};
}

Locator locator_from_json(const json& doc) {
  jsonio::reject_unknown_fields(doc, {"strategy", "value"}, "locator");
  Locator locator;
  locator.strategy = locator_strategy_from_string(jsonio::require_string(doc, "strategy", "locator"));
  locator.value = jsonio::require_string(doc, "value", "locator");
  return locator;
}

static json value_to_json(const ValueExpr& value) {
  if (value.kind == ValueKind::literal) {
    return json{{"kind", "literal"}, {"literal", value.literal}};
  }
  return json{{"kind", "param-ref"}, {"param", value.param}};
}

static ValueExpr value_from_json(const json& doc) {
  jsonio::reject_unknown_fields(doc, {"kind", "literal", "param"}, "value");
  std::string kind = jsonio::require_string(doc, "kind", "value");
  if (kind == "literal") {
    return ValueExpr::lit(jsonio::require_string(doc, "literal", "value"));
  }
  if (kind == "param-ref") {
    return ValueExpr::ref(jsonio::require_string(doc, "param", "value"));
  }
  throw Error(ErrorCode::corrupt_file, "unknown value kind '" + kind + "'");
}

json step_to_json(const ActionStep& step) {
  json doc{{"kind", to_string(step.kind)}};
  if (step.target.has_value()) {
    json chain = json::array();
    for (const Locator& locator : *step.target) chain.push_back(locator_to_json(locator));
    doc["target"] = std::move(chain);
  }
  if (step.value.has_value()) doc["value"] = value_to_json(*step.value);
  if (step.kind == StepKind::wait) doc["wait-seconds"] = step.wait_seconds;
  return doc;
}

ActionStep step_from_json(const json& doc) {
  jsonio::reject_unknown_fields(doc, {"kind", "target", "value", "wait-seconds"}, "step");
  ActionStep step;
  step.kind = step_kind_from_string(jsonio::require_string(doc, "kind", "step"));
  if (doc.contains("target")) {
    const json& chain = doc.at("target");
    if (!chain.is_array()) throw Error(ErrorCode::corrupt_file, "step target must be an array");
    LocatorChain target;
    for (const json& locator : chain) target.push_back(locator_from_json(locator));
    step.target = std::move(target);
  }
  if (doc.contains("value")) step.value = value_from_json(doc.at("value"));
  if (doc.contains("wait-seconds")) {
    const json& w = doc.at("wait-seconds");
    if (!w.is_number()) throw Error(ErrorCode::corrupt_file, "wait-seconds must be a number");
    step.wait_seconds = w.get<double>();
  }
  return step;
}

json param_to_json(const ParamSpec& param) {
  json doc{{"name", param.name},
           {"value-type", to_string(param.value_type)},
           {"required", param.required}};
  if (param.default_value.has_value()) doc["default"] = *param.default_value;
  return doc;
}

ParamSpec param_from_json(const json& doc) {
  jsonio::reject_unknown_fields(doc, {"name", "value-type", "required", "default"}, "param");
  ParamSpec param;
  param.name = jsonio::require_string(doc, "name", "param");
  param.value_type = param_type_from_string(jsonio::require_string(doc, "value-type", "param"));
  param.required = jsonio::require_bool(doc, "required", "param");
  if (doc.contains("default")) {
    if (!doc.at("default").is_string()) {
      throw Error(ErrorCode::corrupt_file, "param default must be a string");
    }
    param.default_value = doc.at("default").get<std::string>();
  }
  return param;
}

json script_to_json(const ActionScript& script) {
  json steps = json::array();
  for (const ActionStep& step : script.steps) steps.push_back(step_to_json(step));
  json params = json::array();
  for (const ParamSpec& param : script.declared_params) params.push_back(param_to_json(param));
  return json{{"website", script.website},
              {"task-description", script.task_description},
              {"steps", std::move(steps)},
              {"declared-params", std::move(params)}};
}

ActionScript script_from_json(const json& doc) {
  jsonio::reject_unknown_fields(doc, {"website", "task-description", "steps", "declared-params"},
                                "script");
  ActionScript script;
  script.website = jsonio::require_string(doc, "website", "script");
  script.task_description = jsonio::require_string(doc, "task-description", "script");
  const json& steps = jsonio::require(doc, "steps", "script");
  if (!steps.is_array()) throw Error(ErrorCode::corrupt_file, "script steps must be an array");
  for (const json& step : steps) script.steps.push_back(step_from_json(step));
  const json& params = jsonio::require(doc, "declared-params", "script");
  if (!params.is_array()) throw Error(ErrorCode::corrupt_file, "declared-params must be an array");
  for (const json& param : params) script.declared_params.push_back(param_from_json(param));
  return script;
}

json script_to_document(const ActionScript& script) {
  json doc = script_to_json(script);
  doc["schema-version"] = kSchemaVersion;
  return doc;
}

ActionScript script_from_document(const json& doc) {
  jsonio::reject_unknown_fields(
      doc, {"schema-version", "website", "task-description", "steps", "declared-params"},
      "script document");
  jsonio::require_schema_version(doc, "script document");
  json body = doc;
  body.erase("schema-version");
  return script_from_json(body);
}

json api_to_json(const ActionApi& api) {
  json steps = json::array();
  for (const ActionStep& step : api.steps) steps.push_back(step_to_json(step));
  json params = json::array();
  for (const ParamSpec& param : api.params) params.push_back(param_to_json(param));
  return json{{"api-id", api.api_id},
              {"name", api.name},
              {"description", api.description},
              {"params", std::move(params)},
              {"steps", std::move(steps)},
              {"website", api.website}};
}

ActionApi api_from_json(const json& doc) {
  jsonio::reject_unknown_fields(doc, {"api-id", "name", "description", "params", "steps", "website"},
                                "api");
  ActionApi api;
  api.api_id = jsonio::require_string(doc, "api-id", "api");
  api.name = jsonio::require_string(doc, "name", "api");
  api.description = jsonio::require_string(doc, "description", "api");
  const json& params = jsonio::require(doc, "params", "api");
  if (!params.is_array()) throw Error(ErrorCode::corrupt_file, "api params must be an array");
  for (const json& param : params) api.params.push_back(param_from_json(param));
  const json& steps = jsonio::require(doc, "steps", "api");
  if (!steps.is_array()) throw Error(ErrorCode::corrupt_file, "api steps must be an array");
  for (const json& step : steps) api.steps.push_back(step_from_json(step));
  api.website = jsonio::require_string(doc, "website", "api");
  return api;
}

json api_to_document(const ActionApi& api) {
  json doc = api_to_json(api);
  doc["schema-version"] = kSchemaVersion;
  return doc;
}

ActionApi api_from_document(const json& doc) {
  jsonio::reject_unknown_fields(
      doc, {"schema-version", "api-id", "name", "description", "params", "steps", "website"},
      "api document");
  jsonio::require_schema_version(doc, "api document");
  json body = doc;
  body.erase("schema-version");
  return api_from_json(body);
}

}  // namespace paffa
