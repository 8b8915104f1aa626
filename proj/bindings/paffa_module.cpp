#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "paffa/app.hpp"
#include "paffa/distill.hpp"
#include "paffa/evalkit.hpp"

namespace py = pybind11;
using namespace paffa;

namespace {

// JSON strings cross the boundary; rich wrappers live on the Python side.
json parse_arg(const std::string& text, const char* what) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) {
    throw std::invalid_argument(std::string(what) + " is not valid JSON");
  }
  return doc;
}

std::string py_validate_script(const std::string& script_json) {
  ActionScript script = script_from_json(parse_arg(script_json, "script"));
  ValidationReport report = validate_script(script);
  json violations = json::array();
  for (const Violation& v : report.violations) {
    violations.push_back(json{{"step-index", v.step_index}, {"rule", v.rule}});
  }
  return json{{"ok", report.ok}, {"violations", violations}}.dump();
}

std::string py_substitute_params(const std::string& api_json, const std::string& bindings_json) {
  ActionApi api = api_from_json(parse_arg(api_json, "api"));
  Bindings bindings;
  json b = parse_arg(bindings_json, "bindings");
  for (auto it = b.begin(); it != b.end(); ++it) {
    bindings[it.key()] = it.value().is_string() ? it.value().get<std::string>() : it.value().dump();
  }
  return script_to_json(substitute_params(api, bindings)).dump();
}

std::string py_script_signature(const std::string& script_json) {
  return script_signature(script_from_json(parse_arg(script_json, "script")));
}

std::string py_scan_interactive_elements(const std::string& html_text) {
  json out = json::array();
  for (const DistilledElement& element : scan_interactive_elements(html_text)) {
    out.push_back(element_to_json(element));
  }
  return out.dump();
}

std::string py_token_report(long long paffa_total, long long baseline_tokens_per_call,
                            long long baseline_calls) {
  TokenLedger ledger;
  ChatExchange exchange;
  exchange.template_name = "aggregate";
  exchange.prompt_tokens = paffa_total;
  exchange.tags = {ExchangeTag::retrieval};
  ledger.append(std::move(exchange));
  return token_report_to_json(token_report(ledger, baseline_tokens_per_call, baseline_calls)).dump();
}

std::string py_accuracy(const std::string& predicted_json, const std::string& gold_json,
                        const std::string& reference_html, const std::string& mode_name) {
  auto predicted = predicted_from_document(parse_arg(predicted_json, "predicted"));
  auto gold = gold_from_document(parse_arg(gold_json, "gold"));
  std::optional<html::Document> reference;
  if (!reference_html.empty()) reference = html::Document::parse(reference_html);
  const MatchMode mode = mode_name == "exact" ? MatchMode::exact : MatchMode::inexact;
  ComparisonReport report =
      compare_traces(predicted, gold, reference.has_value() ? &*reference : nullptr, mode);
  return comparison_to_json(report).dump();
}

/// One request against a simulator site + replay fixtures; the whole runtime
/// pipeline behind a single call.
std::string py_run_request(const std::string& request, const std::string& site_spec_path,
                           const std::string& fixtures_dir, const std::string& prompts_dir,
                           const std::string& library_path) {
  RunConfig config;
  config.site_spec = site_spec_path;
  config.fixtures_dir = fixtures_dir;
  if (!prompts_dir.empty()) config.prompts_dir = prompts_dir;
  config.library_path = library_path;
  config.validate();

  auto gateway = make_gateway(config);
  PromptLibrary prompts = load_prompts(config);
  SiteRuntime site = make_site_runtime(config);

  LibraryStore store;
  store.staleness_threshold = config.staleness_threshold;
  if (!library_path.empty() && std::filesystem::exists(library_path)) {
    store = load_library(library_path);
  }
  TaskResult result =
      handle_request(request, site.website, store, site.sessions, prompts, *gateway, config.limits);
  if (result.library_updated && !library_path.empty()) save_library(store, library_path);
  return task_result_to_json(result).dump();
}

class PySimSession {
 public:
  explicit PySimSession(const std::string& site_spec_path) {
    site_ = std::make_shared<const SimSite>(load_site_spec(site_spec_path));
    session_ = open_sim_session(site_);
  }

  std::string run_script(const std::string& script_json) {
    ActionScript script = script_from_json(parse_arg(script_json, "script"));
    return trace_to_json(paffa::run_script(*session_, script, true)).dump();
  }

  std::string page_id() { return session_->current_page_id(); }
  std::string html() { return session_->current_html(); }
  bool goal(const std::string& name) { return check_goal(*site_, *session_, name); }
  void reset() { session_ = open_sim_session(site_); }

 private:
  std::shared_ptr<const SimSite> site_;
  std::unique_ptr<SimSession> session_;
};

}  // namespace

PYBIND11_MODULE(_paffa, m) {
  m.doc() = "Action-library web agent core";

  m.def("validate_script", &py_validate_script, py::arg("script_json"),
        "Validate a script document; returns a JSON report string");
  m.def("substitute_params", &py_substitute_params, py::arg("api_json"), py::arg("bindings_json"),
        "Substitute bindings into an api; returns the runnable script as JSON");
  m.def("script_signature", &py_script_signature, py::arg("script_json"));
  m.def("scan_interactive_elements", &py_scan_interactive_elements, py::arg("html"),
        "Deterministic interactive-element scan; returns a JSON array string");
  m.def("count_tokens", [](const std::string& text) { return count_tokens(text); },
        py::arg("text"));
  m.def("token_report", &py_token_report, py::arg("paffa_total"),
        py::arg("baseline_tokens_per_call"), py::arg("baseline_calls"));
  m.def("accuracy", &py_accuracy, py::arg("predicted_json"), py::arg("gold_json"),
        py::arg("reference_html") = "", py::arg("mode") = "inexact",
        "Element/step accuracy of a predicted trace against gold annotations");
  m.def("run_request", &py_run_request, py::arg("request"), py::arg("site_spec"),
        py::arg("fixtures"), py::arg("prompts") = "", py::arg("library") = "",
        "Serve one request on a simulator site with replay fixtures");

  py::class_<PySimSession>(m, "SimSession", "Session over a simulator site spec")
      .def(py::init<const std::string&>(), py::arg("site_spec"))
      .def("run_script", &PySimSession::run_script, py::arg("script_json"))
      .def("page_id", &PySimSession::page_id)
      .def("html", &PySimSession::html)
      .def("goal", &PySimSession::goal, py::arg("name"))
      .def("reset", &PySimSession::reset);

  py::register_exception<Error>(m, "PaffaError");

#ifdef PAFFA_VERSION
  m.attr("__version__") = PAFFA_VERSION;
#else
  m.attr("__version__") = "dev";
#endif
}
