#include "paffa/distill.hpp"

#include <algorithm>
#include <set>

namespace paffa {

const char* to_string(ElementRole role) {
  switch (role) {
    case ElementRole::button: return "button";
    case ElementRole::field: return "field";
    case ElementRole::link: return "link";
    case ElementRole::select_control: return "select";
    case ElementRole::other_interactive: return "other-interactive";
  }
  return "?";
}

ElementRole element_role_from_string(const std::string& name) {
  if (name == "button") return ElementRole::button;
  if (name == "field") return ElementRole::field;
  if (name == "link") return ElementRole::link;
  if (name == "select") return ElementRole::select_control;
  if (name == "other-interactive") return ElementRole::other_interactive;
  throw Error(ErrorCode::corrupt_file, "unknown element role '" + name + "'");
}

namespace {

bool has_interactive_aria_role(const html::Node& node, std::string& role_out) {
  auto role = node.attr("role");
  if (!role.has_value()) return false;
  static const std::set<std::string> kInteractive = {
      "button", "link", "textbox", "searchbox", "combobox", "listbox",
      "checkbox", "radio", "switch", "menuitem", "tab", "option"};
  if (kInteractive.count(*role) == 0) return false;
  role_out = *role;
  return true;
}

ElementRole role_for(const html::Node& node) {
  if (node.tag == "a") return ElementRole::link;
  if (node.tag == "button") return ElementRole::button;
  if (node.tag == "select") return ElementRole::select_control;
  if (node.tag == "textarea") return ElementRole::field;
  if (node.tag == "input") {
    auto type = node.attr("type");
    if (type.has_value() &&
        (*type == "button" || *type == "submit" || *type == "reset" || *type == "image")) {
      return ElementRole::button;
    }
    return ElementRole::field;
  }
  std::string aria;
  if (has_interactive_aria_role(node, aria)) {
    if (aria == "button") return ElementRole::button;
    if (aria == "link") return ElementRole::link;
    if (aria == "textbox" || aria == "searchbox") return ElementRole::field;
    if (aria == "combobox" || aria == "listbox") return ElementRole::select_control;
  }
  return ElementRole::other_interactive;
}

std::string label_for(const html::Node& node) {
  for (const char* attr : {"aria-label", "placeholder", "title"}) {
    auto value = node.attr(attr);
    if (value.has_value() && !value->empty()) return *value;
  }
  std::string text = html::text_content(node);
  if (!text.empty()) return text;
  for (const char* attr : {"value", "name", "id"}) {
    auto value = node.attr(attr);
    if (value.has_value() && !value->empty()) return *value;
  }
  return node.tag;
}

}  // namespace

std::vector<DistilledElement> scan_interactive_elements(const std::string& html_text) {
  html::Document doc = html::Document::parse(html_text);

  std::vector<DistilledElement> out;
  std::set<std::string> used_keys;
  static const std::set<std::string> kTags = {"a", "button", "input", "select", "textarea"};

  for (const html::Node* node : doc.all_elements()) {
    std::string aria;
    bool interactive = kTags.count(node->tag) > 0 || has_interactive_aria_role(*node, aria);
    if (!interactive) continue;
    auto type = node->attr("type");
    if (node->tag == "input" && type.has_value() && *type == "hidden") continue;

    DistilledElement element;
    element.role = role_for(*node);
    element.label = label_for(*node);

    auto id = node->attr("id");
    auto name = node->attr("name");
    if (id.has_value() && !id->empty()) {
      element.locators = {Locator{LocatorStrategy::by_id, *id}};
      element.element_key = *id;
    } else if (name.has_value() && !name->empty()) {
      element.locators = {Locator{LocatorStrategy::by_name, *name}};
      element.element_key = *name;
    } else {
      std::string path = html::css_path(*node);
      element.locators = {Locator{LocatorStrategy::by_css, path}};
      element.element_key = path;
    }
    while (used_keys.count(element.element_key) > 0) {
      element.element_key += "+";
    }
    used_keys.insert(element.element_key);

    for (const auto& [attr_name, attr_value] : node->attributes) {
      element.attributes[attr_name] = attr_value;
    }
    out.push_back(std::move(element));
  }
  return out;
}

namespace {

std::vector<DistilledElement> parse_elements_reply(const json& doc, const html::Document& source,
                                                   std::vector<std::string>& warnings) {
  if (!doc.is_object() || !doc.contains("elements") || !doc.at("elements").is_array()) {
    throw Error(ErrorCode::llm_reply_unparseable, "reply has no elements array");
  }
  std::vector<DistilledElement> out;
  std::set<std::string> seen;
  for (const json& item : doc.at("elements")) {
    DistilledElement element = element_from_json(item);
    if (!seen.insert(element.element_key).second) {
      warnings.push_back("duplicate element-key '" + element.element_key + "' dropped");
      continue;
    }
    LocatorChain resolving;
    for (const Locator& locator : element.locators) {
      if (source.resolve(locator) != nullptr) resolving.push_back(locator);
    }
    if (resolving.empty()) {
      warnings.push_back("element '" + element.element_key + "' dropped: no locator resolves");
      continue;
    }
    element.locators = std::move(resolving);
    out.push_back(std::move(element));
  }
  return out;
}

json reply_to_json(const std::string& reply) {
  json doc = json::parse(reply, nullptr, false);
  if (doc.is_discarded()) {
    throw Error(ErrorCode::llm_reply_unparseable, "reply is not JSON");
  }
  return doc;
}

}  // namespace

DistilledPage distill_page(const std::string& html_text, const std::string& page_id,
                           const std::string& source_url, const PromptLibrary& prompts,
                           Gateway& gateway) {
  if (html_text.empty()) {
    throw Error(ErrorCode::precondition, "distill_page requires non-empty html");
  }
  const std::string pruned = html::pruned_html(html_text);
  html::Document source = html::Document::parse(html_text);

  DistilledPage page;
  page.page_id = page_id;
  page.source_url = source_url;

  Prompt prompt = prompts.render("distill", {{"html", pruned}, {"url", source_url}});
  prompt.key_slots = {"distill", page_id, jsonio::fnv1a_hex(pruned)};

  for (int attempt = 0;; ++attempt) {
    std::string reply = gateway.complete(prompt, {ExchangeTag::contains_page_html});
    try {
      page.elements = parse_elements_reply(reply_to_json(reply), source, page.warnings);
      break;
    } catch (const Error& err) {
      if (err.code() != ErrorCode::llm_reply_unparseable || attempt >= 1) throw;
      prompt.user_text += "\n\nThe previous reply could not be parsed. "
                          "Reply with exactly the JSON object described above.";
      prompt.key_slots.push_back("retry");
      page.warnings.clear();
    }
  }
  if (page.elements.empty()) {
    page.warnings.push_back("distillation produced no elements");
  }
  return page;
}

DistilledPage verify_distillation(const std::string& html_text, const DistilledPage& page,
                                  const PromptLibrary& prompts, Gateway& gateway) {
  if (page.verified) {
    throw Error(ErrorCode::precondition, "page '" + page.page_id + "' is already verified");
  }
  html::Document source = html::Document::parse(html_text);

  json current = json::array();
  for (const DistilledElement& element : page.elements) current.push_back(element_to_json(element));

  Prompt prompt = prompts.render(
      "verify", {{"html", html::pruned_html(html_text)}, {"elements", current.dump(2)}});
  prompt.key_slots = {"verify", page.page_id, jsonio::fnv1a_hex(current.dump())};

  DistilledPage verified;
  verified.page_id = page.page_id;
  verified.source_url = page.source_url;
  verified.warnings = page.warnings;

  for (int attempt = 0;; ++attempt) {
    std::string reply = gateway.complete(prompt, {ExchangeTag::contains_page_html});
    try {
      verified.elements = parse_elements_reply(reply_to_json(reply), source, verified.warnings);
      break;
    } catch (const Error& err) {
      if (err.code() != ErrorCode::llm_reply_unparseable || attempt >= 1) throw;
      prompt.user_text += "\n\nThe previous reply could not be parsed. "
                          "Reply with exactly the JSON object described above.";
      prompt.key_slots.push_back("retry");
      verified.warnings = page.warnings;
    }
  }

  std::set<std::string> original;
  for (const DistilledElement& element : page.elements) original.insert(element.element_key);
  for (const DistilledElement& element : verified.elements) {
    if (original.count(element.element_key) == 0) {
      verified.warnings.push_back("verification added element '" + element.element_key + "'");
    }
  }
  verified.verified = true;
  return verified;
}

json element_to_json(const DistilledElement& element) {
  json locators = json::array();
  for (const Locator& locator : element.locators) locators.push_back(locator_to_json(locator));
  json attributes = json::object();
  for (const auto& [name, value] : element.attributes) attributes[name] = value;
  return json{{"element-key", element.element_key},
              {"role", to_string(element.role)},
              {"label", element.label},
              {"locators", std::move(locators)},
              {"attributes", std::move(attributes)}};
}

DistilledElement element_from_json(const json& doc) {
  jsonio::reject_unknown_fields(doc, {"element-key", "role", "label", "locators", "attributes"},
                                "element");
  DistilledElement element;
  element.element_key = jsonio::require_string(doc, "element-key", "element");
  element.role = element_role_from_string(jsonio::require_string(doc, "role", "element"));
  element.label = jsonio::require_string(doc, "label", "element");
  const json& locators = jsonio::require(doc, "locators", "element");
  if (!locators.is_array() || locators.empty()) {
    throw Error(ErrorCode::llm_reply_unparseable,
                "element '" + element.element_key + "' has no locators");
  }
  for (const json& locator : locators) element.locators.push_back(locator_from_json(locator));
  if (doc.contains("attributes")) {
    for (auto it = doc.at("attributes").begin(); it != doc.at("attributes").end(); ++it) {
      element.attributes[it.key()] = it.value().get<std::string>();
    }
  }
  return element;
}

json page_to_document(const DistilledPage& page) {
  json elements = json::array();
  for (const DistilledElement& element : page.elements) elements.push_back(element_to_json(element));
  return json{{"schema-version", kSchemaVersion},
              {"page-id", page.page_id},
              {"source-url", page.source_url},
              {"elements", std::move(elements)},
              {"verified", page.verified},
              {"warnings", page.warnings}};
}

DistilledPage page_from_document(const json& doc) {
  jsonio::reject_unknown_fields(
      doc, {"schema-version", "page-id", "source-url", "elements", "verified", "warnings"},
      "page document");
  jsonio::require_schema_version(doc, "page document");
  DistilledPage page;
  page.page_id = jsonio::require_string(doc, "page-id", "page document");
  page.source_url = jsonio::require_string(doc, "source-url", "page document");
  for (const json& element : jsonio::require(doc, "elements", "page document")) {
    page.elements.push_back(element_from_json(element));
  }
  page.verified = jsonio::require_bool(doc, "verified", "page document");
  if (doc.contains("warnings")) {
    for (const json& warning : doc.at("warnings")) page.warnings.push_back(warning.get<std::string>());
  }
  return page;
}

}  // namespace paffa
