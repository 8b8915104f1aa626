#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include "paffa/app.hpp"
#include "paffa/sitesim.hpp"

#ifndef PAFFA_FIXTURE_DIR
#define PAFFA_FIXTURE_DIR ""
#endif
#ifndef PAFFA_PROMPT_DIR
#define PAFFA_PROMPT_DIR ""
#endif

namespace paffa::testsupport {

inline std::filesystem::path fixture_dir() { return std::filesystem::path(PAFFA_FIXTURE_DIR); }
inline std::filesystem::path prompt_dir() { return std::filesystem::path(PAFFA_PROMPT_DIR); }

inline const PromptLibrary& test_prompts() {
  static PromptLibrary prompts = PromptLibrary::load(prompt_dir());
  return prompts;
}

inline std::shared_ptr<const SimSite> load_fixture_site(const std::string& name) {
  return std::make_shared<const SimSite>(load_site_spec(fixture_dir() / "sites" / name));
}

inline std::shared_ptr<const SimSite> delta_site() { return load_fixture_site("delta_like.json"); }
inline std::shared_ptr<const SimSite> changed_delta_site() {
  return load_fixture_site("changed_delta.json");
}
inline std::shared_ptr<const SimSite> shop_site() { return load_fixture_site("shop_like.json"); }

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

/// Unique scratch directory under the build tree.
std::filesystem::path scratch_dir(const std::string& label);

}  // namespace paffa::testsupport
