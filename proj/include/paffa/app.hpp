#pragma once

#include <memory>
#include <string>

#include "paffa/runtime.hpp"
#include "paffa/sitesim.hpp"

namespace paffa {

/// Resolved operating configuration. Precedence for every knob:
/// explicit flag > environment variable > config file > built-in default.
struct RunConfig {
  std::string library_path;
  std::string site_spec;       // exactly one site source:
  std::string webdriver_url;   // sim spec path, or remote WebDriver endpoint
  std::string provider = "replay";  // "replay" | "remote"
  std::string fixtures_dir;
  std::string record_dir;
  std::string prompts_dir;
  std::string gateway_url;
  std::string gateway_model = "default";
  std::string gateway_key;
  Limits limits;
  int staleness_threshold = 2;
  std::string strategy = "unravel";  // "unravel" | "dist-map"
  std::string out;

  void validate() const;
};

/// Overlays config-file values then environment variables onto defaults.
/// CLI flags are applied on top by the caller.
RunConfig base_config_from(const std::string& config_file_path);

std::unique_ptr<Gateway> make_gateway(const RunConfig& config);
PromptLibrary load_prompts(const RunConfig& config);

struct SiteRuntime {
  std::shared_ptr<const SimSite> site;  // null when driving a remote backend
  SessionFactory sessions;
  std::string website;
};

SiteRuntime make_site_runtime(const RunConfig& config);

}  // namespace paffa
