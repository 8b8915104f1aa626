#include "paffa/app.hpp"

#include <cstdlib>

#include "paffa/webdriver.hpp"

#ifndef PAFFA_DEFAULT_PROMPT_DIR
#define PAFFA_DEFAULT_PROMPT_DIR ""
#endif

namespace paffa {

void RunConfig::validate() const {
  const bool sim = !site_spec.empty();
  const bool remote = !webdriver_url.empty();
  if (sim == remote) {
    throw Error(ErrorCode::config, "exactly one site source: --site-spec or --webdriver-url");
  }
  if (provider != "replay" && provider != "remote") {
    throw Error(ErrorCode::config, "provider must be 'replay' or 'remote'");
  }
  if (provider == "replay" && fixtures_dir.empty()) {
    throw Error(ErrorCode::config, "replay provider needs --fixtures");
  }
  if (provider == "remote" && gateway_url.empty()) {
    throw Error(ErrorCode::config, "remote provider needs a gateway url (PAFFA_GATEWAY_URL)");
  }
  if (strategy != "unravel" && strategy != "dist-map") {
    throw Error(ErrorCode::config, "strategy must be 'unravel' or 'dist-map'");
  }
  if (staleness_threshold < 1) {
    throw Error(ErrorCode::config, "staleness threshold must be >= 1");
  }
}

namespace {

std::string env_or(const char* name, const std::string& fallback) {
  const char* value = std::getenv(name);
  return value != nullptr && *value != '\0' ? std::string(value) : fallback;
}

}  // namespace

RunConfig base_config_from(const std::string& config_file_path) {
  RunConfig config;
  config.prompts_dir = PAFFA_DEFAULT_PROMPT_DIR;

  if (!config_file_path.empty()) {
    json doc = jsonio::load_json_file(config_file_path);
    jsonio::reject_unknown_fields(doc,
                                  {"library", "site-spec", "webdriver-url", "provider", "fixtures",
                                   "record", "prompts", "gateway-url", "gateway-model", "max-pages",
                                   "max-steps", "max-retries", "staleness", "strategy", "out"},
                                  "config file");
    auto str = [&](const char* key, std::string& into) {
      if (doc.contains(key)) into = doc.at(key).get<std::string>();
    };
    auto num = [&](const char* key, int& into) {
      if (doc.contains(key)) into = doc.at(key).get<int>();
    };
    str("library", config.library_path);
    str("site-spec", config.site_spec);
    str("webdriver-url", config.webdriver_url);
    str("provider", config.provider);
    str("fixtures", config.fixtures_dir);
    str("record", config.record_dir);
    str("prompts", config.prompts_dir);
    str("gateway-url", config.gateway_url);
    str("gateway-model", config.gateway_model);
    num("max-pages", config.limits.max_pages);
    num("max-steps", config.limits.max_steps);
    num("max-retries", config.limits.max_retries);
    num("staleness", config.staleness_threshold);
    str("strategy", config.strategy);
    str("out", config.out);
  }

  config.webdriver_url = env_or("PAFFA_WEBDRIVER_URL", config.webdriver_url);
  config.gateway_url = env_or("PAFFA_GATEWAY_URL", config.gateway_url);
  config.gateway_model = env_or("PAFFA_GATEWAY_MODEL", config.gateway_model);
  config.gateway_key = env_or("PAFFA_GATEWAY_KEY", config.gateway_key);
  config.prompts_dir = env_or("PAFFA_PROMPT_DIR", config.prompts_dir);
  return config;
}

std::unique_ptr<Gateway> make_gateway(const RunConfig& config) {
  std::unique_ptr<Gateway> gateway;
  if (config.provider == "replay") {
    gateway = std::make_unique<ReplayGateway>(config.fixtures_dir);
  } else {
    HttpGateway::Options options;
    options.base_url = config.gateway_url;
    options.model = config.gateway_model;
    options.api_key = config.gateway_key;
    gateway = std::make_unique<HttpGateway>(std::move(options));
  }
  if (!config.record_dir.empty()) gateway->set_record_dir(config.record_dir);
  return gateway;
}

PromptLibrary load_prompts(const RunConfig& config) {
  if (config.prompts_dir.empty()) {
    throw Error(ErrorCode::config, "no prompt directory configured (--prompts or PAFFA_PROMPT_DIR)");
  }
  return PromptLibrary::load(config.prompts_dir);
}

SiteRuntime make_site_runtime(const RunConfig& config) {
  SiteRuntime runtime;
  if (!config.site_spec.empty()) {
    auto site = std::make_shared<const SimSite>(load_site_spec(config.site_spec));
    runtime.site = site;
    runtime.website = site->site_id;
    for (const SimPage& page : site->pages) {
      if (page.page_id == site->start_page_id && !page.url.empty()) {
        // the host part of the start url names the website
        std::string url = page.url;
        auto scheme = url.find("://");
        if (scheme != std::string::npos) {
          url = url.substr(scheme + 3);
          runtime.website = url.substr(0, url.find('/'));
        }
        break;
      }
    }
    runtime.sessions = [site]() -> std::unique_ptr<Session> { return open_sim_session(site); };
  } else {
    const std::string endpoint = config.webdriver_url;
    std::string website = endpoint;
    auto scheme = website.find("://");
    if (scheme != std::string::npos) website = website.substr(scheme + 3);
    runtime.website = website.substr(0, website.find('/'));
    runtime.sessions = [endpoint]() -> std::unique_ptr<Session> {
      auto session = std::make_unique<WebDriverSession>(endpoint);
      session->open("");
      return session;
    };
  }
  return runtime;
}

}  // namespace paffa
