#include "paffa/html.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <functional>
#include <sstream>

namespace paffa::html {

namespace {

std::string to_lower(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  return out;
}

bool is_void_element(const std::string& tag) {
  static const std::array<const char*, 14> kVoid = {"area", "base", "br", "col", "embed",
                                                    "hr", "img", "input", "link", "meta",
                                                    "param", "source", "track", "wbr"};
  return std::find(kVoid.begin(), kVoid.end(), tag) != kVoid.end();
}

bool is_raw_text_element(const std::string& tag) {
  return tag == "script" || tag == "style" || tag == "textarea" || tag == "title";
}

std::string decode_entities(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size();) {
    if (text[i] != '&') {
      out.push_back(text[i++]);
      continue;
    }
    auto try_entity = [&](std::string_view entity, char replacement) {
      if (text.substr(i, entity.size()) == entity) {
        out.push_back(replacement);
        i += entity.size();
        return true;
      }
      return false;
    };
    if (try_entity("&amp;", '&') || try_entity("&lt;", '<') || try_entity("&gt;", '>') ||
        try_entity("&quot;", '"') || try_entity("&apos;", '\'') || try_entity("&#39;", '\'')) {
      continue;
    }
    if (text.substr(i, 6) == "&nbsp;") {
      out.push_back(' ');
      i += 6;
      continue;
    }
    out.push_back(text[i++]);
  }
  return out;
}

std::string encode_entities(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

class Parser {
 public:
  explicit Parser(const std::string& input) : input_(input) {}

  std::shared_ptr<Node> run() {
    auto root = std::make_shared<Node>();
    root->type = Node::Type::document;
    stack_.push_back(root.get());

    while (pos_ < input_.size()) {
      if (input_[pos_] == '<') {
        if (match("<!--")) {
          parse_comment();
        } else if (match("<!")) {
          skip_until('>');
        } else if (match("</")) {
          parse_close_tag();
        } else if (pos_ + 1 < input_.size() &&
                   std::isalpha(static_cast<unsigned char>(input_[pos_ + 1]))) {
          parse_open_tag();
        } else {
          append_text("<");
          ++pos_;
        }
      } else {
        parse_text();
      }
    }
    return root;
  }

 private:
  bool match(std::string_view prefix) const {
    return input_.compare(pos_, prefix.size(), prefix) == 0;
  }

  void skip_until(char stop) {
    while (pos_ < input_.size() && input_[pos_] != stop) ++pos_;
    if (pos_ < input_.size()) ++pos_;
  }

  void parse_text() {
    std::size_t start = pos_;
    while (pos_ < input_.size() && input_[pos_] != '<') ++pos_;
    append_text(input_.substr(start, pos_ - start));
  }

  void append_text(std::string_view raw) {
    std::string decoded = decode_entities(raw);
    if (decoded.find_first_not_of(" \t\r\n") == std::string::npos) return;
    auto node = std::make_unique<Node>();
    node->type = Node::Type::text;
    node->text = std::move(decoded);
    node->parent = stack_.back();
    stack_.back()->children.push_back(std::move(node));
  }

  void parse_comment() {
    pos_ += 4;
    std::size_t end = input_.find("-->", pos_);
    std::string body = input_.substr(pos_, end == std::string::npos ? std::string::npos : end - pos_);
    pos_ = end == std::string::npos ? input_.size() : end + 3;
    auto node = std::make_unique<Node>();
    node->type = Node::Type::comment;
    node->text = std::move(body);
    node->parent = stack_.back();
    stack_.back()->children.push_back(std::move(node));
  }

  void parse_close_tag() {
    pos_ += 2;
    std::size_t start = pos_;
    while (pos_ < input_.size() && input_[pos_] != '>') ++pos_;
    std::string tag = to_lower(trim(input_.substr(start, pos_ - start)));
    if (pos_ < input_.size()) ++pos_;
    // Close to the nearest matching open element; ignore strays.
    for (std::size_t i = stack_.size(); i-- > 1;) {
      if (stack_[i]->tag == tag) {
        stack_.resize(i);
        return;
      }
    }
  }

  void parse_open_tag() {
    ++pos_;  // '<'
    std::size_t start = pos_;
    while (pos_ < input_.size() &&
           (std::isalnum(static_cast<unsigned char>(input_[pos_])) || input_[pos_] == '-')) {
      ++pos_;
    }
    std::string tag = to_lower(input_.substr(start, pos_ - start));

    auto node = std::make_unique<Node>();
    node->type = Node::Type::element;
    node->tag = tag;

    bool self_closing = false;
    while (pos_ < input_.size() && input_[pos_] != '>') {
      if (input_[pos_] == '/' && pos_ + 1 < input_.size() && input_[pos_ + 1] == '>') {
        self_closing = true;
        ++pos_;
        break;
      }
      if (std::isspace(static_cast<unsigned char>(input_[pos_]))) {
        ++pos_;
        continue;
      }
      parse_attribute(*node);
    }
    if (pos_ < input_.size()) ++pos_;  // '>'

    Node* raw = node.get();
    node->parent = stack_.back();
    stack_.back()->children.push_back(std::move(node));

    if (self_closing || is_void_element(tag)) return;

    if (is_raw_text_element(tag)) {
      std::string close = "</" + tag;
      std::size_t end = to_lower(input_).find(close, pos_);
      std::string body = input_.substr(pos_, end == std::string::npos ? std::string::npos : end - pos_);
      if (!body.empty()) {
        auto text = std::make_unique<Node>();
        text->type = Node::Type::text;
        text->text = decode_entities(body);
        text->parent = raw;
        raw->children.push_back(std::move(text));
      }
      pos_ = end == std::string::npos ? input_.size() : end;
      if (pos_ < input_.size()) skip_until('>');
      return;
    }
    stack_.push_back(raw);
  }

  void parse_attribute(Node& node) {
    std::size_t start = pos_;
    while (pos_ < input_.size() && input_[pos_] != '=' && input_[pos_] != '>' &&
           input_[pos_] != '/' && !std::isspace(static_cast<unsigned char>(input_[pos_]))) {
      ++pos_;
    }
    std::string name = to_lower(input_.substr(start, pos_ - start));
    if (name.empty()) {
      ++pos_;
      return;
    }
    std::string value;
    if (pos_ < input_.size() && input_[pos_] == '=') {
      ++pos_;
      while (pos_ < input_.size() && std::isspace(static_cast<unsigned char>(input_[pos_]))) ++pos_;
      if (pos_ < input_.size() && (input_[pos_] == '"' || input_[pos_] == '\'')) {
        char quote = input_[pos_++];
        std::size_t vstart = pos_;
        while (pos_ < input_.size() && input_[pos_] != quote) ++pos_;
        value = decode_entities(input_.substr(vstart, pos_ - vstart));
        if (pos_ < input_.size()) ++pos_;
      } else {
        std::size_t vstart = pos_;
        while (pos_ < input_.size() && input_[pos_] != '>' &&
               !std::isspace(static_cast<unsigned char>(input_[pos_]))) {
          ++pos_;
        }
        value = decode_entities(input_.substr(vstart, pos_ - vstart));
      }
    }
    node.attributes.emplace_back(std::move(name), std::move(value));
  }

  static std::string trim(std::string_view text) {
    std::size_t begin = text.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    std::size_t end = text.find_last_not_of(" \t\r\n");
    return std::string(text.substr(begin, end - begin + 1));
  }

  const std::string& input_;
  std::size_t pos_ = 0;
  std::vector<Node*> stack_;
};

void walk(const Node& node, const std::function<void(const Node&)>& visit) {
  visit(node);
  for (const auto& child : node.children) walk(*child, visit);
}

// --- CSS subset -------------------------------------------------------------
// compound := [tag|*] ('#'id | '.'class | '[attr(=value)]' | ':nth-of-type(n)')*
// complex  := compound ((' ' | '>') compound)*

struct SimpleSelector {
  std::string tag;  // empty = any
  std::string id;
  std::vector<std::string> classes;
  std::vector<std::pair<std::string, std::optional<std::string>>> attrs;
  int nth_of_type = 0;  // 0 = unconstrained
};

struct CompoundStep {
  SimpleSelector selector;
  bool child_combinator = false;  // relationship to the previous step
};

std::optional<std::vector<CompoundStep>> parse_css(const std::string& selector) {
  std::vector<CompoundStep> steps;
  std::size_t i = 0;
  const std::string& s = selector;
  auto skip_ws = [&] { while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i; };
  skip_ws();
  bool child = false;
  while (i < s.size()) {
    SimpleSelector simple;
    bool any = false;
    if (i < s.size() && s[i] == '*') {
      ++i;
      any = true;
    }
    while (i < s.size() && (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '-')) {
      simple.tag.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(s[i]))));
      ++i;
      any = true;
    }
    while (i < s.size()) {
      if (s[i] == '#') {
        ++i;
        std::string id;
        while (i < s.size() && s[i] != '.' && s[i] != '[' && s[i] != ':' && s[i] != '>' &&
               !std::isspace(static_cast<unsigned char>(s[i]))) {
          id.push_back(s[i++]);
        }
        if (id.empty()) return std::nullopt;
        simple.id = id;
        any = true;
      } else if (s[i] == '.') {
        ++i;
        std::string cls;
        while (i < s.size() && s[i] != '.' && s[i] != '[' && s[i] != ':' && s[i] != '>' &&
               s[i] != '#' && !std::isspace(static_cast<unsigned char>(s[i]))) {
          cls.push_back(s[i++]);
        }
        if (cls.empty()) return std::nullopt;
        simple.classes.push_back(cls);
        any = true;
      } else if (s[i] == '[') {
        ++i;
        std::string name, value;
        bool has_value = false;
        while (i < s.size() && s[i] != '=' && s[i] != ']') name.push_back(s[i++]);
        if (i < s.size() && s[i] == '=') {
          has_value = true;
          ++i;
          if (i < s.size() && (s[i] == '"' || s[i] == '\'')) {
            char quote = s[i++];
            while (i < s.size() && s[i] != quote) value.push_back(s[i++]);
            if (i < s.size()) ++i;
          } else {
            while (i < s.size() && s[i] != ']') value.push_back(s[i++]);
          }
        }
        if (i >= s.size() || s[i] != ']') return std::nullopt;
        ++i;
        simple.attrs.emplace_back(to_lower(name),
                                  has_value ? std::optional<std::string>(value) : std::nullopt);
        any = true;
      } else if (s[i] == ':') {
        static const std::string kNth = ":nth-of-type(";
        if (s.compare(i, kNth.size(), kNth) != 0) return std::nullopt;
        i += kNth.size();
        std::string number;
        while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) number.push_back(s[i++]);
        if (i >= s.size() || s[i] != ')' || number.empty()) return std::nullopt;
        ++i;
        simple.nth_of_type = std::stoi(number);
        any = true;
      } else {
        break;
      }
    }
    if (!any) return std::nullopt;
    steps.push_back({std::move(simple), child});

    std::size_t before = i;
    skip_ws();
    child = false;
    if (i < s.size() && s[i] == '>') {
      child = true;
      ++i;
      skip_ws();
    } else if (i < s.size() && before == i) {
      return std::nullopt;  // junk without separator
    }
  }
  return steps.empty() ? std::nullopt : std::optional(std::move(steps));
}

int nth_of_type_index(const Node& node) {
  if (node.parent == nullptr) return 1;
  int index = 0;
  for (const auto& sibling : node.parent->children) {
    if (sibling->is_element() && sibling->tag == node.tag) {
      ++index;
      if (sibling.get() == &node) return index;
    }
  }
  return index;
}

bool matches_simple(const Node& node, const SimpleSelector& simple) {
  if (!node.is_element()) return false;
  if (!simple.tag.empty() && node.tag != simple.tag) return false;
  if (!simple.id.empty()) {
    auto id = node.attr("id");
    if (!id.has_value() || *id != simple.id) return false;
  }
  for (const std::string& cls : simple.classes) {
    auto classes = node.attr("class");
    if (!classes.has_value()) return false;
    std::istringstream stream(*classes);
    std::string token;
    bool found = false;
    while (stream >> token) {
      if (token == cls) {
        found = true;
        break;
      }
    }
    if (!found) return false;
  }
  for (const auto& [name, value] : simple.attrs) {
    auto attr = node.attr(name);
    if (!attr.has_value()) return false;
    if (value.has_value() && *attr != *value) return false;
  }
  if (simple.nth_of_type > 0 && nth_of_type_index(node) != simple.nth_of_type) return false;
  return true;
}

bool matches_complex(const Node& node, const std::vector<CompoundStep>& steps, std::size_t index) {
  if (!matches_simple(node, steps[index].selector)) return false;
  if (index == 0) return true;
  const bool direct = steps[index].child_combinator;
  for (const Node* ancestor = node.parent; ancestor != nullptr; ancestor = ancestor->parent) {
    if (ancestor->is_element() && matches_complex(*ancestor, steps, index - 1)) return true;
    if (direct) return false;  // only the immediate parent qualifies
  }
  return false;
}

// --- XPath subset -----------------------------------------------------------
// //tag | //*  with optional [@attr='v'] | [n] | [text()='v'] predicates,
// followed by /child steps with the same predicate forms.

struct XPathStep {
  std::string tag;  // "*" = any
  std::string attr_name, attr_value;
  std::string text_value;
  bool has_attr = false;
  bool has_text = false;
  int index = 0;
  bool descendant = false;
};

std::optional<std::vector<XPathStep>> parse_xpath(const std::string& expression) {
  std::vector<XPathStep> steps;
  std::size_t i = 0;
  const std::string& s = expression;
  while (i < s.size()) {
    XPathStep step;
    if (s.compare(i, 2, "//") == 0) {
      step.descendant = true;
      i += 2;
    } else if (s[i] == '/') {
      ++i;
    } else if (steps.empty()) {
      return std::nullopt;
    } else {
      return std::nullopt;
    }
    if (i < s.size() && s[i] == '*') {
      step.tag = "*";
      ++i;
    } else {
      while (i < s.size() && (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '-')) {
        step.tag.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(s[i]))));
        ++i;
      }
      if (step.tag.empty()) return std::nullopt;
    }
    while (i < s.size() && s[i] == '[') {
      ++i;
      if (i < s.size() && s[i] == '@') {
        ++i;
        std::string name, value;
        while (i < s.size() && s[i] != '=') name.push_back(s[i++]);
        if (i >= s.size()) return std::nullopt;
        ++i;
        if (i >= s.size() || (s[i] != '\'' && s[i] != '"')) return std::nullopt;
        char quote = s[i++];
        while (i < s.size() && s[i] != quote) value.push_back(s[i++]);
        if (i >= s.size()) return std::nullopt;
        ++i;
        step.has_attr = true;
        step.attr_name = to_lower(name);
        step.attr_value = value;
      } else if (s.compare(i, 7, "text()=") == 0) {
        i += 7;
        if (i >= s.size() || (s[i] != '\'' && s[i] != '"')) return std::nullopt;
        char quote = s[i++];
        std::string value;
        while (i < s.size() && s[i] != quote) value.push_back(s[i++]);
        if (i >= s.size()) return std::nullopt;
        ++i;
        step.has_text = true;
        step.text_value = value;
      } else if (std::isdigit(static_cast<unsigned char>(s[i]))) {
        std::string number;
        while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) number.push_back(s[i++]);
        step.index = std::stoi(number);
      } else {
        return std::nullopt;
      }
      if (i >= s.size() || s[i] != ']') return std::nullopt;
      ++i;
    }
    steps.push_back(std::move(step));
  }
  return steps.empty() ? std::nullopt : std::optional(std::move(steps));
}

bool xpath_step_matches(const Node& node, const XPathStep& step) {
  if (!node.is_element()) return false;
  if (step.tag != "*" && node.tag != step.tag) return false;
  if (step.has_attr) {
    auto attr = node.attr(step.attr_name);
    if (!attr.has_value() || *attr != step.attr_value) return false;
  }
  if (step.has_text && text_content(node) != step.text_value) return false;
  return true;
}

}  // namespace

std::optional<std::string> Node::attr(std::string_view name) const {
  for (const auto& [key, value] : attributes) {
    if (key == name) return value;
  }
  return std::nullopt;
}

bool looks_binary(std::string_view data) {
  std::size_t inspect = std::min<std::size_t>(data.size(), 4096);
  std::size_t control = 0;
  for (std::size_t i = 0; i < inspect; ++i) {
    unsigned char c = static_cast<unsigned char>(data[i]);
    if (c == 0) return true;
    if (c < 0x09 || (c > 0x0d && c < 0x20)) ++control;
  }
  return inspect > 0 && control * 10 > inspect;
}

Document Document::parse(const std::string& html_text) {
  if (looks_binary(html_text)) {
    throw Error(ErrorCode::unparseable_document, "input looks like binary data");
  }
  Document doc;
  doc.root_ = Parser(html_text).run();
  return doc;
}

const Node* Document::by_id(const std::string& id) const {
  const Node* found = nullptr;
  walk(*root_, [&](const Node& node) {
    if (found == nullptr && node.is_element()) {
      auto value = node.attr("id");
      if (value.has_value() && *value == id) found = &node;
    }
  });
  return found;
}

const Node* Document::by_name(const std::string& name) const {
  const Node* found = nullptr;
  walk(*root_, [&](const Node& node) {
    if (found == nullptr && node.is_element()) {
      auto value = node.attr("name");
      if (value.has_value() && *value == name) found = &node;
    }
  });
  return found;
}

std::vector<const Node*> Document::select_css(const std::string& selector) const {
  std::vector<const Node*> out;
  auto steps = parse_css(selector);
  if (!steps.has_value()) return out;
  walk(*root_, [&](const Node& node) {
    if (node.is_element() && matches_complex(node, *steps, steps->size() - 1)) {
      out.push_back(&node);
    }
  });
  return out;
}

std::vector<const Node*> Document::select_xpath(const std::string& expression) const {
  std::vector<const Node*> out;
  auto steps = parse_xpath(expression);
  if (!steps.has_value()) return out;

  std::vector<const Node*> current = {root_.get()};
  for (const XPathStep& step : *steps) {
    std::vector<const Node*> next;
    for (const Node* base : current) {
      std::vector<const Node*> candidates;
      if (step.descendant) {
        walk(*base, [&](const Node& node) {
          if (&node != base && xpath_step_matches(node, step)) candidates.push_back(&node);
        });
      } else {
        for (const auto& child : base->children) {
          if (xpath_step_matches(*child, step)) candidates.push_back(child.get());
        }
      }
      if (step.index > 0) {
        if (static_cast<std::size_t>(step.index) <= candidates.size()) {
          next.push_back(candidates[step.index - 1]);
        }
      } else {
        next.insert(next.end(), candidates.begin(), candidates.end());
      }
    }
    current = std::move(next);
    if (current.empty()) break;
  }
  return current;
}

const Node* Document::by_link_text(const std::string& text) const {
  const Node* anchor = nullptr;
  const Node* other = nullptr;
  walk(*root_, [&](const Node& node) {
    if (!node.is_element()) return;
    if (text_content(node) != text) return;
    if (node.tag == "a") {
      if (anchor == nullptr) anchor = &node;
    } else if (other == nullptr) {
      other = &node;
    }
  });
  return anchor != nullptr ? anchor : other;
}

const Node* Document::resolve(const Locator& locator) const {
  switch (locator.strategy) {
    case LocatorStrategy::by_id:
      return by_id(locator.value);
    case LocatorStrategy::by_name:
      return by_name(locator.value);
    case LocatorStrategy::by_css: {
      auto matches = select_css(locator.value);
      return matches.empty() ? nullptr : matches.front();
    }
    case LocatorStrategy::by_xpath: {
      auto matches = select_xpath(locator.value);
      return matches.empty() ? nullptr : matches.front();
    }
    case LocatorStrategy::by_text:
      return by_link_text(locator.value);
  }
  return nullptr;
}

std::vector<const Node*> Document::all_elements() const {
  std::vector<const Node*> out;
  walk(*root_, [&](const Node& node) {
    if (node.is_element()) out.push_back(&node);
  });
  return out;
}

std::string text_content(const Node& node) {
  std::string raw;
  walk(node, [&](const Node& child) {
    if (child.type == Node::Type::text) raw += child.text + " ";
  });
  std::istringstream stream(raw);
  std::string token, out;
  while (stream >> token) {
    if (!out.empty()) out.push_back(' ');
    out += token;
  }
  return out;
}

namespace {

void serialize_into(const Node& node, std::ostringstream& out, bool prune) {
  switch (node.type) {
    case Node::Type::document:
      for (const auto& child : node.children) serialize_into(*child, out, prune);
      return;
    case Node::Type::comment:
      if (!prune) out << "<!--" << node.text << "-->";
      return;
    case Node::Type::text:
      out << encode_entities(node.text);
      return;
    case Node::Type::element:
      break;
  }
  if (prune && (node.tag == "script" || node.tag == "style")) return;
  out << "<" << node.tag;
  for (const auto& [name, value] : node.attributes) {
    out << " " << name << "=\"" << encode_entities(value) << "\"";
  }
  out << ">";
  if (is_void_element(node.tag)) return;
  for (const auto& child : node.children) serialize_into(*child, out, prune);
  out << "</" << node.tag << ">";
}

}  // namespace

std::string serialize(const Node& node) {
  std::ostringstream out;
  serialize_into(node, out, false);
  return out.str();
}

std::string pruned_html(const std::string& html_text) {
  Document doc = Document::parse(html_text);
  std::ostringstream out;
  serialize_into(doc.root(), out, true);
  return out.str();
}

std::string css_path(const Node& node) {
  std::vector<std::string> segments;
  for (const Node* cur = &node; cur != nullptr && cur->is_element(); cur = cur->parent) {
    segments.push_back(cur->tag + ":nth-of-type(" + std::to_string(nth_of_type_index(*cur)) + ")");
  }
  std::reverse(segments.begin(), segments.end());
  std::string out;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (i) out += " > ";
    out += segments[i];
  }
  return out;
}

}  // namespace paffa::html
