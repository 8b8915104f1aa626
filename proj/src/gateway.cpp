#include "paffa/gateway.hpp"

#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>

namespace paffa {

const char* to_string(ExchangeTag tag) {
  switch (tag) {
    case ExchangeTag::contains_page_html: return "contains-page-html";
    case ExchangeTag::catalog_only: return "catalog-only";
    case ExchangeTag::step_prompt: return "step-prompt";
    case ExchangeTag::synthesis: return "synthesis";
    case ExchangeTag::retrieval: return "retrieval";
  }
  return "?";
}

ExchangeTag exchange_tag_from_string(const std::string& name) {
  if (name == "contains-page-html") return ExchangeTag::contains_page_html;
  if (name == "catalog-only") return ExchangeTag::catalog_only;
  if (name == "step-prompt") return ExchangeTag::step_prompt;
  if (name == "synthesis") return ExchangeTag::synthesis;
  if (name == "retrieval") return ExchangeTag::retrieval;
  throw Error(ErrorCode::corrupt_file, "unknown exchange tag '" + name + "'");
}

long long TokenLedger::total_prompt_tokens() const {
  long long total = 0;
  for (const auto& e : exchanges_) total += e.prompt_tokens;
  return total;
}

long long TokenLedger::total_completion_tokens() const {
  long long total = 0;
  for (const auto& e : exchanges_) total += e.completion_tokens;
  return total;
}

long long TokenLedger::total_tokens() const {
  return total_prompt_tokens() + total_completion_tokens();
}

bool TokenLedger::any_estimated() const {
  for (const auto& e : exchanges_) {
    if (e.estimated) return true;
  }
  return false;
}

TokenLedger TokenLedger::slice(std::size_t from) const {
  TokenLedger out;
  out.scope = scope;
  for (std::size_t i = from; i < exchanges_.size(); ++i) out.append(exchanges_[i]);
  return out;
}

json TokenLedger::to_json() const {
  json items = json::array();
  for (const auto& e : exchanges_) {
    json tags = json::array();
    for (ExchangeTag tag : e.tags) tags.push_back(to_string(tag));
    items.push_back(json{{"template", e.template_name},
                         {"prompt-key", e.prompt_key},
                         {"system-text", e.system_text},
                         {"user-text", e.user_text},
                         {"reply-text", e.reply_text},
                         {"prompt-tokens", e.prompt_tokens},
                         {"completion-tokens", e.completion_tokens},
                         {"tags", std::move(tags)},
                         {"estimated", e.estimated}});
  }
  return json{{"schema-version", kSchemaVersion}, {"scope", scope}, {"exchanges", std::move(items)}};
}

TokenLedger TokenLedger::from_json(const json& doc) {
  jsonio::reject_unknown_fields(doc, {"schema-version", "scope", "exchanges"}, "ledger");
  jsonio::require_schema_version(doc, "ledger");
  TokenLedger ledger;
  ledger.scope = jsonio::require_string(doc, "scope", "ledger");
  const json& items = jsonio::require(doc, "exchanges", "ledger");
  if (!items.is_array()) throw Error(ErrorCode::corrupt_file, "ledger exchanges must be an array");
  for (const json& item : items) {
    jsonio::reject_unknown_fields(item,
                                  {"template", "prompt-key", "system-text", "user-text",
                                   "reply-text", "prompt-tokens", "completion-tokens", "tags",
                                   "estimated"},
                                  "exchange");
    ChatExchange e;
    e.template_name = jsonio::require_string(item, "template", "exchange");
    e.prompt_key = jsonio::require_string(item, "prompt-key", "exchange");
    e.system_text = jsonio::require_string(item, "system-text", "exchange");
    e.user_text = jsonio::require_string(item, "user-text", "exchange");
    e.reply_text = jsonio::require_string(item, "reply-text", "exchange");
    e.prompt_tokens = jsonio::require_int(item, "prompt-tokens", "exchange");
    e.completion_tokens = jsonio::require_int(item, "completion-tokens", "exchange");
    e.estimated = jsonio::require_bool(item, "estimated", "exchange");
    const json& tags = jsonio::require(item, "tags", "exchange");
    for (const json& tag : tags) e.tags.insert(exchange_tag_from_string(tag.get<std::string>()));
    if (e.tags.empty()) throw Error(ErrorCode::corrupt_file, "exchange without tags");
    ledger.append(std::move(e));
  }
  return ledger;
}

long long count_tokens(std::string_view text) {
  return static_cast<long long>((text.size() + 3) / 4);
}

std::string prompt_key(const std::string& template_name, const std::vector<std::string>& slots) {
  std::string joined;
  for (const std::string& slot : slots) {
    joined += slot;
    joined.push_back('\x1f');  // unit separator; slot values stay unambiguous
  }
  return template_name + "-" + jsonio::fnv1a_hex(joined);
}

PromptLibrary PromptLibrary::load(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) {
    throw Error(ErrorCode::config, "prompt directory not found: " + dir.string());
  }
  PromptLibrary lib;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
    std::ifstream in(entry.path());
    std::stringstream buffer;
    buffer << in.rdbuf();
    std::string content = buffer.str();
    const std::string marker = "<<<USER>>>";
    std::size_t pos = content.find(marker);
    Entry parsed;
    if (pos == std::string::npos) {
      parsed.user_template = content;
    } else {
      parsed.system_text = content.substr(0, pos);
      parsed.user_template = content.substr(pos + marker.size());
      // trim marker line endings
      while (!parsed.system_text.empty() &&
             (parsed.system_text.back() == '\n' || parsed.system_text.back() == '\r')) {
        parsed.system_text.pop_back();
      }
      while (!parsed.user_template.empty() &&
             (parsed.user_template.front() == '\n' || parsed.user_template.front() == '\r')) {
        parsed.user_template.erase(parsed.user_template.begin());
      }
    }
    lib.templates_[entry.path().stem().string()] = std::move(parsed);
  }
  if (lib.templates_.empty()) {
    throw Error(ErrorCode::config, "no prompt templates in " + dir.string());
  }
  return lib;
}

Prompt PromptLibrary::render(const std::string& name,
                             const std::map<std::string, std::string>& vars) const {
  auto it = templates_.find(name);
  if (it == templates_.end()) {
    throw Error(ErrorCode::config, "no prompt template named '" + name + "'");
  }
  std::string user = it->second.user_template;
  for (const auto& [key, value] : vars) {
    const std::string placeholder = "{{" + key + "}}";
    std::size_t pos = 0;
    while ((pos = user.find(placeholder, pos)) != std::string::npos) {
      user.replace(pos, placeholder.size(), value);
      pos += value.size();
    }
  }
  Prompt prompt;
  prompt.template_name = name;
  prompt.system_text = it->second.system_text;
  prompt.user_text = std::move(user);
  return prompt;
}

std::string Gateway::complete(const Prompt& prompt, const std::set<ExchangeTag>& tags) {
  if (tags.empty()) {
    throw Error(ErrorCode::precondition, "every gateway call must carry at least one tag");
  }
  const std::string key = prompt_key(prompt.template_name, prompt.key_slots);
  Reply reply = provider_complete(prompt, key);

  ChatExchange exchange;
  exchange.template_name = prompt.template_name;
  exchange.prompt_key = key;
  exchange.system_text = prompt.system_text;
  exchange.user_text = prompt.user_text;
  exchange.reply_text = reply.text;
  exchange.tags = tags;
  if (reply.prompt_tokens.has_value() && reply.completion_tokens.has_value()) {
    exchange.prompt_tokens = *reply.prompt_tokens;
    exchange.completion_tokens = *reply.completion_tokens;
  } else {
    exchange.prompt_tokens = count_tokens(prompt.system_text) + count_tokens(prompt.user_text);
    exchange.completion_tokens = count_tokens(reply.text);
    exchange.estimated = true;
  }

  {
    std::lock_guard<std::mutex> lock(mutex_);
    ledger_.append(exchange);
    if (record_dir_.has_value()) {
      write_replay_fixture(*record_dir_, prompt.template_name, prompt.key_slots, reply.text,
                           reply.prompt_tokens, reply.completion_tokens);
    }
  }
  return reply.text;
}

void ScriptedGateway::script(const std::string& template_name, const std::vector<std::string>& slots,
                             const std::string& reply_text, std::optional<long long> prompt_tokens,
                             std::optional<long long> completion_tokens) {
  replies_[prompt_key(template_name, slots)].push_back(
      Reply{reply_text, prompt_tokens, completion_tokens});
}

void ScriptedGateway::script_json(const std::string& template_name,
                                  const std::vector<std::string>& slots, const json& reply) {
  script(template_name, slots, reply.dump());
}

Gateway::Reply ScriptedGateway::provider_complete(const Prompt& prompt, const std::string& key) {
  auto it = replies_.find(key);
  if (it != replies_.end() && !it->second.empty()) {
    Reply reply = it->second.front();
    if (it->second.size() > 1) {
      it->second.erase(it->second.begin());
    }
    return reply;
  }
  if (handler_) {
    auto reply = handler_(prompt);
    if (reply.has_value()) return *reply;
  }
  throw Error(ErrorCode::replay_miss, "no scripted reply for key " + key + " (template " +
                                          prompt.template_name + ")");
}

ReplayGateway::ReplayGateway(std::filesystem::path fixture_dir)
    : fixture_dir_(std::move(fixture_dir)) {
  if (!std::filesystem::is_directory(fixture_dir_)) {
    throw Error(ErrorCode::config, "replay fixture directory not found: " + fixture_dir_.string());
  }
}

Gateway::Reply ReplayGateway::provider_complete(const Prompt& prompt, const std::string& key) {
  const std::filesystem::path file = fixture_dir_ / (key + ".json");
  if (!std::filesystem::exists(file)) {
    throw Error(ErrorCode::replay_miss,
                "no fixture for key " + key + " (template " + prompt.template_name + ")");
  }
  json doc = jsonio::load_json_file(file);
  jsonio::reject_unknown_fields(
      doc, {"template", "slots", "reply", "reply-json", "prompt-tokens", "completion-tokens"},
      "replay fixture");
  Reply reply;
  if (doc.contains("reply-json")) {
    reply.text = doc.at("reply-json").dump();
  } else {
    reply.text = jsonio::require_string(doc, "reply", "replay fixture");
  }
  if (doc.contains("prompt-tokens")) reply.prompt_tokens = doc.at("prompt-tokens").get<long long>();
  if (doc.contains("completion-tokens")) {
    reply.completion_tokens = doc.at("completion-tokens").get<long long>();
  }
  return reply;
}

namespace {

void write_fixture_doc(const std::filesystem::path& dir, const std::string& template_name,
                       const std::vector<std::string>& slots, json doc) {
  std::filesystem::create_directories(dir);
  doc["template"] = template_name;
  doc["slots"] = slots;
  const std::string key = prompt_key(template_name, slots);
  jsonio::atomic_write_file(dir / (key + ".json"), doc.dump(2) + "\n");
}

}  // namespace

void write_replay_fixture(const std::filesystem::path& dir, const std::string& template_name,
                          const std::vector<std::string>& slots, const std::string& reply_text,
                          std::optional<long long> prompt_tokens,
                          std::optional<long long> completion_tokens) {
  json doc{{"reply", reply_text}};
  if (prompt_tokens.has_value()) doc["prompt-tokens"] = *prompt_tokens;
  if (completion_tokens.has_value()) doc["completion-tokens"] = *completion_tokens;
  write_fixture_doc(dir, template_name, slots, std::move(doc));
}

void write_replay_fixture_json(const std::filesystem::path& dir, const std::string& template_name,
                               const std::vector<std::string>& slots, const json& reply) {
  write_fixture_doc(dir, template_name, slots, json{{"reply-json", reply}});
}

Gateway::Reply HttpGateway::provider_complete(const Prompt& prompt, const std::string&) {
  httplib::Client client(options_.base_url);
  client.set_read_timeout(120, 0);
  httplib::Headers headers;
  if (!options_.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + options_.api_key);
  }
  json body{{"model", options_.model},
            {"messages", json::array({json{{"role", "system"}, {"content", prompt.system_text}},
                                      json{{"role", "user"}, {"content", prompt.user_text}}})}};

  int backoff = options_.backoff_ms;
  for (int attempt = 0;; ++attempt) {
    auto result = client.Post(options_.path, headers, body.dump(), "application/json");
    if (!result) {
      throw Error(ErrorCode::gateway_transport, httplib::to_string(result.error()));
    }
    if (result->status == 429) {
      if (attempt + 1 >= options_.max_retries) {
        throw Error(ErrorCode::rate_limited, "still rate-limited after " +
                                                 std::to_string(options_.max_retries) + " attempts");
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
      backoff *= 2;
      continue;
    }
    if (result->status < 200 || result->status >= 300) {
      throw Error(ErrorCode::gateway_transport,
                  "HTTP " + std::to_string(result->status) + ": " + result->body);
    }
    json doc = json::parse(result->body, nullptr, false);
    if (doc.is_discarded()) {
      throw Error(ErrorCode::gateway_transport, "provider returned invalid JSON");
    }
    Reply reply;
    try {
      reply.text = doc.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception&) {
      throw Error(ErrorCode::gateway_transport, "provider reply missing choices[0].message.content");
    }
    if (doc.contains("usage") && doc["usage"].is_object()) {
      const json& usage = doc["usage"];
      if (usage.contains("prompt_tokens") && usage.contains("completion_tokens")) {
        reply.prompt_tokens = usage["prompt_tokens"].get<long long>();
        reply.completion_tokens = usage["completion_tokens"].get<long long>();
      }
    }
    return reply;
  }
}

}  // namespace paffa
