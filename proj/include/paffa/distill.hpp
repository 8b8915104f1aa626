#pragma once

#include <map>
#include <string>
#include <vector>

#include "paffa/dsl.hpp"
#include "paffa/gateway.hpp"
#include "paffa/html.hpp"

namespace paffa {

enum class ElementRole { button, field, link, select_control, other_interactive };

const char* to_string(ElementRole role);
ElementRole element_role_from_string(const std::string& name);

struct DistilledElement {
  std::string element_key;  // unique within its page
  ElementRole role = ElementRole::other_interactive;
  std::string label;
  LocatorChain locators;
  std::map<std::string, std::string> attributes;

  bool operator==(const DistilledElement&) const = default;
};

struct DistilledPage {
  std::string page_id;
  std::string source_url;
  std::vector<DistilledElement> elements;
  bool verified = false;
  std::vector<std::string> warnings;
};

/// Deterministic floor for element extraction: one element per anchor,
/// button, input, select, textarea, or node with an interactive ARIA role.
/// Locator preference: by-id, else by-name, else a positional css path.
std::vector<DistilledElement> scan_interactive_elements(const std::string& html_text);

/// One semantic-distillation call over the pruned page markup. Locators in
/// the reply are resolved against the source document; elements whose whole
/// chain fails to resolve are dropped with a warning. Result is unverified.
DistilledPage distill_page(const std::string& html_text, const std::string& page_id,
                           const std::string& source_url, const PromptLibrary& prompts,
                           Gateway& gateway);

/// Review pass over an unverified page. The reply's element list replaces the
/// original; additions are flagged in the warnings. Result is verified.
DistilledPage verify_distillation(const std::string& html_text, const DistilledPage& page,
                                  const PromptLibrary& prompts, Gateway& gateway);

json element_to_json(const DistilledElement& element);
DistilledElement element_from_json(const json& doc);
json page_to_document(const DistilledPage& page);
DistilledPage page_from_document(const json& doc);

}  // namespace paffa
