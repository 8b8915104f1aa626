#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "paffa/app.hpp"
#include "paffa/distill.hpp"
#include "paffa/evalkit.hpp"

namespace fs = std::filesystem;
using namespace paffa;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitTaskFailure = 1;
constexpr int kExitConfig = 2;

void write_output(const std::string& out_path, const json& doc) {
  if (out_path.empty()) {
    std::cout << doc.dump(2) << "\n";
  } else {
    jsonio::atomic_write_file(out_path, doc.dump(2) + "\n");
  }
}

LibraryStore load_or_new_library(const RunConfig& config) {
  if (!config.library_path.empty() && fs::exists(config.library_path)) {
    LibraryStore store = load_library(config.library_path);
    store.staleness_threshold = config.staleness_threshold;
    return store;
  }
  LibraryStore store;
  store.staleness_threshold = config.staleness_threshold;
  return store;
}

int cmd_distill(const RunConfig& config, const std::vector<std::string>& inputs) {
  config.validate();
  auto gateway = make_gateway(config);
  PromptLibrary prompts = load_prompts(config);

  std::vector<std::pair<std::string, std::string>> pages;  // (page-id, html)
  if (!config.site_spec.empty() && inputs.empty()) {
    SimSite site = load_site_spec(config.site_spec);
    for (const SimPage& page : site.pages) pages.emplace_back(page.page_id, page.html);
  }
  for (const std::string& input : inputs) {
    std::ifstream in(input);
    if (!in) {
      std::cerr << "cannot read " << input << "\n";
      return kExitConfig;
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    pages.emplace_back(fs::path(input).stem().string(), buffer.str());
  }
  if (pages.empty()) {
    std::cerr << "warning: nothing to distill\n";
    return kExitOk;
  }

  const fs::path out_dir = config.out.empty() ? fs::path("distilled") : fs::path(config.out);
  fs::create_directories(out_dir);
  for (const auto& [page_id, html] : pages) {
    DistilledPage page = distill_page(html, page_id, page_id, prompts, *gateway);
    page = verify_distillation(html, page, prompts, *gateway);
    jsonio::atomic_write_file(out_dir / (page_id + ".json"),
                              page_to_document(page).dump(2) + "\n");
    std::cout << "distilled " << page_id << ": " << page.elements.size() << " element(s)\n";
  }
  return kExitOk;
}

int cmd_build_library(const RunConfig& config, const std::string& tasks_file) {
  config.validate();
  auto gateway = make_gateway(config);
  PromptLibrary prompts = load_prompts(config);
  SiteRuntime site = make_site_runtime(config);

  json tasks_doc = jsonio::load_json_file(tasks_file);
  jsonio::reject_unknown_fields(tasks_doc, {"schema-version", "tasks"}, "tasks file");
  jsonio::require_schema_version(tasks_doc, "tasks file");

  std::vector<LibraryMember> generated;
  json failures = json::array();

  std::vector<std::pair<std::string, std::string>> rows;  // (website, task)
  for (const json& row : jsonio::require(tasks_doc, "tasks", "tasks file")) {
    rows.emplace_back(jsonio::require_string(row, "website", "task row"),
                      jsonio::require_string(row, "task", "task row"));
  }
  if (rows.empty()) {
    std::cerr << "warning: empty tasks file; writing an empty library\n";
  }

  std::vector<DistilledPage> distilled;
  if (config.strategy == "dist-map" && !rows.empty()) {
    if (!site.site) {
      std::cerr << "dist-map needs --site-spec for page access\n";
      return kExitConfig;
    }
    for (const SimPage& page : site.site->pages) {
      DistilledPage d = distill_page(page.html, page.page_id, page.url, prompts, *gateway);
      distilled.push_back(verify_distillation(page.html, d, prompts, *gateway));
    }
  }

  for (const auto& [website, task] : rows) {
    try {
      if (config.strategy == "unravel") {
        auto session = site.sessions();
        UnravelResult result = unravel_run(task, website, *session, prompts, *gateway, config.limits);
        session->close();
        generated.push_back({task, result.script});
      } else {
        ActionScript script = distmap_generate(task, website, distilled, prompts, *gateway);
        generated.push_back({task, script});
      }
    } catch (const Error& err) {
      failures.push_back(json{{"task", task}, {"error", err.what()}});
      std::cerr << "task failed: " << task << ": " << err.what() << "\n";
    }
  }

  LibraryStore store;
  store.staleness_threshold = config.staleness_threshold;
  ClusterOutcome clustered = cluster_tasks(generated, prompts, *gateway);
  for (const std::string& warning : clustered.warnings) std::cerr << "warning: " << warning << "\n";
  const ApiSource source =
      config.strategy == "unravel" ? ApiSource::unravel : ApiSource::dist_map;
  for (const TaskCluster& cluster : clustered.clusters) {
    try {
      ActionApi api = synthesize_api(cluster, prompts, *gateway);
      ApiRecord record;
      record.api = api;
      record.source = source;
      record.members = cluster.members;
      for (const LibraryMember& member : cluster.members) record.provenance.push_back(member.task);
      record.created_at = iso8601_now();
      store.insert(std::move(record));
    } catch (const Error& err) {
      failures.push_back(json{{"cluster", cluster.cluster_id}, {"error", err.what()}});
      std::cerr << "synthesis failed for " << cluster.cluster_id << ": " << err.what() << "\n";
    }
  }

  const std::string library_path =
      config.library_path.empty() ? "library.json" : config.library_path;
  save_library(store, library_path);
  std::cout << "library saved to " << library_path << " with " << store.size() << " api(s)\n";
  if (!failures.empty()) {
    const std::string manifest = library_path + ".failures.json";
    jsonio::atomic_write_file(manifest, failures.dump(2) + "\n");
    std::cerr << failures.size() << " failure(s); manifest at " << manifest << "\n";
    return kExitTaskFailure;
  }
  return kExitOk;
}

int cmd_run(const RunConfig& config, const std::string& request) {
  config.validate();
  auto gateway = make_gateway(config);
  PromptLibrary prompts = load_prompts(config);
  SiteRuntime site = make_site_runtime(config);

  LibraryStore store = load_or_new_library(config);
  TaskResult result = handle_request(request, site.website, store, site.sessions, prompts,
                                     *gateway, config.limits);
  if (result.library_updated && !config.library_path.empty()) {
    save_library(store, config.library_path);
  }
  write_output(config.out, task_result_to_json(result));
  return result.status == TaskStatus::failed ? kExitTaskFailure : kExitOk;
}

int cmd_eval(const RunConfig& config, const std::string& predicted_file,
             const std::string& gold_file, const std::string& reference_page,
             const std::string& mode_name) {
  auto gold = gold_from_document(jsonio::load_json_file(gold_file));
  auto predicted = predicted_from_document(jsonio::load_json_file(predicted_file));

  std::optional<html::Document> reference;
  if (!reference_page.empty()) {
    std::ifstream in(reference_page);
    std::stringstream buffer;
    buffer << in.rdbuf();
    reference = html::Document::parse(buffer.str());
  }
  const MatchMode mode = mode_name == "exact" ? MatchMode::exact : MatchMode::inexact;
  ComparisonReport report =
      compare_traces(predicted, gold, reference.has_value() ? &*reference : nullptr, mode);
  std::cout << comparison_to_text(report);
  write_output(config.out, comparison_to_json(report));
  return kExitOk;
}

int cmd_tokens(const RunConfig& config, const std::string& ledger_file, long long paffa_total,
               long long baseline_tokens, long long baseline_calls) {
  TokenLedger ledger;
  if (!ledger_file.empty()) {
    ledger = TokenLedger::from_json(jsonio::load_json_file(ledger_file));
  } else {
    // no ledger file: treat the provided total as one pre-aggregated call
    ChatExchange exchange;
    exchange.template_name = "aggregate";
    exchange.prompt_tokens = paffa_total;
    exchange.completion_tokens = 0;
    exchange.tags = {ExchangeTag::retrieval, ExchangeTag::catalog_only};
    ledger.append(std::move(exchange));
  }
  TokenReport report = token_report(ledger, baseline_tokens, baseline_calls);
  std::cout << token_report_to_text(report);
  write_output(config.out, token_report_to_json(report));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Action-library web agent: build, serve, and evaluate pre-computed interaction apis"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  std::string config_file;
  app.add_option("--config", config_file, "JSON config file (flags override it)");

  RunConfig flags;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--library", flags.library_path, "library file path");
    cmd->add_option("--site-spec", flags.site_spec, "simulator site spec (JSON)");
    cmd->add_option("--webdriver-url", flags.webdriver_url, "remote WebDriver endpoint");
    cmd->add_option("--provider", flags.provider, "gateway provider: replay | remote");
    cmd->add_option("--fixtures", flags.fixtures_dir, "replay fixture directory");
    cmd->add_option("--record", flags.record_dir, "record every exchange as a fixture here");
    cmd->add_option("--prompts", flags.prompts_dir, "prompt template directory");
    cmd->add_option("--strategy", flags.strategy, "library construction strategy: unravel | dist-map");
    cmd->add_option("--max-pages", flags.limits.max_pages, "exploration page budget");
    cmd->add_option("--max-steps", flags.limits.max_steps, "exploration step budget");
    cmd->add_option("--max-retries", flags.limits.max_retries, "exploration retry budget");
    cmd->add_option("--staleness", flags.staleness_threshold, "failure streak that marks an api stale");
    cmd->add_option("--out", flags.out, "write the JSON report/output here");
  };

  auto* distill = app.add_subcommand("distill", "distill html pages into element summaries");
  std::vector<std::string> distill_inputs;
  distill->add_option("inputs", distill_inputs, "html files (default: every page of --site-spec)");
  add_common(distill);

  auto* build = app.add_subcommand("build-library", "construct a library from a tasks file");
  std::string tasks_file;
  build->add_option("tasks", tasks_file, "tasks file (JSON rows of website + task)")->required();
  add_common(build);

  auto* run = app.add_subcommand("run", "serve one natural-language request");
  std::string request;
  run->add_option("request", request, "the user request")->required();
  add_common(run);

  auto* eval = app.add_subcommand("eval", "score a predicted trace against gold annotations");
  std::string predicted_file, gold_file, reference_page, mode_name = "inexact";
  eval->add_option("predicted", predicted_file, "predicted trace JSON")->required();
  eval->add_option("gold", gold_file, "gold annotated trace JSON")->required();
  eval->add_option("--reference-page", reference_page, "html page for locator-resolution matching");
  eval->add_option("--mode", mode_name, "exact | inexact");
  add_common(eval);

  auto* tokens = app.add_subcommand("tokens", "deployment token cost vs a per-call baseline");
  std::string ledger_file;
  long long paffa_total = 25000, baseline_tokens = 1565, baseline_calls = 126;
  tokens->add_option("--ledger", ledger_file, "ledger JSON (overrides --paffa-total)");
  tokens->add_option("--paffa-total", paffa_total, "total tokens for the single-call pipeline");
  tokens->add_option("--baseline-tokens", baseline_tokens, "baseline tokens per call");
  tokens->add_option("--baseline-calls", baseline_calls, "baseline call count");
  add_common(tokens);

  CLI11_PARSE(app, argc, argv);


  try {
    RunConfig config = base_config_from(config_file);
    // overlay only the flags the user actually set
    auto overlay = [](const std::string& value, std::string& into) {
      if (!value.empty()) into = value;
    };
    overlay(flags.library_path, config.library_path);
    overlay(flags.site_spec, config.site_spec);
    overlay(flags.webdriver_url, config.webdriver_url);
    overlay(flags.fixtures_dir, config.fixtures_dir);
    overlay(flags.record_dir, config.record_dir);
    overlay(flags.prompts_dir, config.prompts_dir);
    overlay(flags.out, config.out);
    if (app.count_all() != 0) {
      // scalar flags: CLI11 already wrote user values into `flags`; copy the
      // ones that differ from the struct defaults
      RunConfig defaults;
      if (flags.provider != defaults.provider) config.provider = flags.provider;
      if (flags.strategy != defaults.strategy) config.strategy = flags.strategy;
      if (flags.limits.max_pages != defaults.limits.max_pages)
        config.limits.max_pages = flags.limits.max_pages;
      if (flags.limits.max_steps != defaults.limits.max_steps)
        config.limits.max_steps = flags.limits.max_steps;
      if (flags.limits.max_retries != defaults.limits.max_retries)
        config.limits.max_retries = flags.limits.max_retries;
      if (flags.staleness_threshold != defaults.staleness_threshold)
        config.staleness_threshold = flags.staleness_threshold;
    }

    if (distill->parsed()) return cmd_distill(config, distill_inputs);
    if (build->parsed()) return cmd_build_library(config, tasks_file);
    if (run->parsed()) return cmd_run(config, request);
    if (eval->parsed()) return cmd_eval(config, predicted_file, gold_file, reference_page, mode_name);
    if (tokens->parsed()) {
      return cmd_tokens(config, ledger_file, paffa_total, baseline_tokens, baseline_calls);
    }
    return kExitConfig;
  } catch (const Error& err) {
    std::cerr << err.what() << "\n";
    switch (err.code()) {
      case ErrorCode::config:
      case ErrorCode::spec_invalid:
      case ErrorCode::unsupported_schema_version:
      case ErrorCode::corrupt_file:
      case ErrorCode::persistence_error:
        return kExitConfig;
      default:
        return kExitTaskFailure;
    }
  } catch (const std::exception& err) {
    std::cerr << err.what() << "\n";
    return kExitTaskFailure;
  }
}
