#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "paffa/dsl.hpp"

namespace paffa::html {

/// Lenient DOM tree. Tag and attribute names are lowercased; mismatched or
/// stray close tags are tolerated the way browsers tolerate them.
struct Node {
  enum class Type { document, element, text, comment };

  Type type = Type::element;
  std::string tag;
  std::string text;  // text / comment payload
  std::vector<std::pair<std::string, std::string>> attributes;
  std::vector<std::unique_ptr<Node>> children;
  Node* parent = nullptr;

  std::optional<std::string> attr(std::string_view name) const;
  bool is_element() const { return type == Type::element; }
};

bool looks_binary(std::string_view data);

class Document {
 public:
  /// Throws unparseable-document only for input that defeats even lenient
  /// parsing (binary data); empty and fragment inputs parse fine.
  static Document parse(const std::string& html_text);

  const Node& root() const { return *root_; }

  const Node* by_id(const std::string& id) const;
  const Node* by_name(const std::string& name) const;
  std::vector<const Node*> select_css(const std::string& selector) const;
  std::vector<const Node*> select_xpath(const std::string& expression) const;
  const Node* by_link_text(const std::string& text) const;

  /// First match for the locator, or nullptr. Unsupported/invalid selector
  /// syntax counts as no match, mirroring how a driver reports it.
  const Node* resolve(const Locator& locator) const;

  std::vector<const Node*> all_elements() const;

 private:
  std::shared_ptr<Node> root_;
};

/// Trimmed, whitespace-collapsed text content of the subtree.
std::string text_content(const Node& node);

/// Re-serialized markup with script/style/comment nodes removed. Interactive
/// semantics survive; token-heavy noise does not.
std::string pruned_html(const std::string& html_text);

std::string serialize(const Node& node);

/// Positional selector path (`tag:nth-of-type(k) > ...`) that uniquely
/// identifies the node within its document.
std::string css_path(const Node& node);

}  // namespace paffa::html
