#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "paffa/jsonio.hpp"

namespace paffa {

/// Classification applied at every call site; the ledger makes properties
/// like "no page HTML in the runtime call" auditable after the fact.
enum class ExchangeTag { contains_page_html, catalog_only, step_prompt, synthesis, retrieval };

const char* to_string(ExchangeTag tag);
ExchangeTag exchange_tag_from_string(const std::string& name);

struct ChatExchange {
  std::string template_name;
  std::string prompt_key;
  std::string system_text;
  std::string user_text;
  std::string reply_text;
  long long prompt_tokens = 0;
  long long completion_tokens = 0;
  std::set<ExchangeTag> tags;
  bool estimated = false;  // counts came from the length estimator, not the provider
};

/// Ordered record of every completion call. Totals are recomputed from the
/// exchanges on demand; there is no cached sum to drift.
class TokenLedger {
 public:
  std::string scope;

  void append(ChatExchange exchange) { exchanges_.push_back(std::move(exchange)); }
  const std::vector<ChatExchange>& exchanges() const { return exchanges_; }
  std::size_t size() const { return exchanges_.size(); }

  long long total_prompt_tokens() const;
  long long total_completion_tokens() const;
  long long total_tokens() const;
  bool any_estimated() const;

  TokenLedger slice(std::size_t from) const;

  json to_json() const;
  static TokenLedger from_json(const json& doc);

 private:
  std::vector<ChatExchange> exchanges_;
};

/// Deterministic length estimate: ceil(len/4). Used whenever a provider does
/// not report usage; reports downstream must mark such counts as estimated.
long long count_tokens(std::string_view text);

/// A rendered prompt plus the slots that identify it for replay. Keys hash
/// the slots, not the full text, so cosmetic template edits keep fixtures valid.
struct Prompt {
  std::string template_name;
  std::string system_text;
  std::string user_text;
  std::vector<std::string> key_slots;
};

std::string prompt_key(const std::string& template_name, const std::vector<std::string>& slots);

/// Phase-keyed prompt templates loaded from text assets. Each file holds the
/// system text, a `<<<USER>>>` marker line, then the user template with
/// {{placeholder}} slots.
class PromptLibrary {
 public:
  static PromptLibrary load(const std::filesystem::path& dir);

  Prompt render(const std::string& name, const std::map<std::string, std::string>& vars) const;
  bool has(const std::string& name) const { return templates_.count(name) > 0; }

 private:
  struct Entry {
    std::string system_text;
    std::string user_template;
  };
  std::map<std::string, Entry> templates_;
};

/// Uniform completion interface. Every call is appended to the ledger —
/// providers implement `provider_complete` and cannot bypass recording.
class Gateway {
 public:
  struct Reply {
    std::string text;
    std::optional<long long> prompt_tokens;
    std::optional<long long> completion_tokens;
  };

  virtual ~Gateway() = default;

  std::string complete(const Prompt& prompt, const std::set<ExchangeTag>& tags);

  TokenLedger& ledger() { return ledger_; }
  const TokenLedger& ledger() const { return ledger_; }

  /// When set, every completed exchange is also written out as a replay
  /// fixture, which is how fixture libraries get recorded in the first place.
  void set_record_dir(std::filesystem::path dir) { record_dir_ = std::move(dir); }

 protected:
  virtual Reply provider_complete(const Prompt& prompt, const std::string& key) = 0;

 private:
  TokenLedger ledger_;
  std::optional<std::filesystem::path> record_dir_;
  std::mutex mutex_;
};

/// In-memory scripted provider for tests and fixture authoring. Replies are
/// keyed the same way as on-disk fixtures; repeated keys pop in FIFO order.
class ScriptedGateway : public Gateway {
 public:
  void script(const std::string& template_name, const std::vector<std::string>& slots,
              const std::string& reply_text,
              std::optional<long long> prompt_tokens = std::nullopt,
              std::optional<long long> completion_tokens = std::nullopt);
  void script_json(const std::string& template_name, const std::vector<std::string>& slots,
                   const json& reply);
  /// Fallback handler consulted when no scripted reply matches.
  void set_handler(std::function<std::optional<Reply>(const Prompt&)> handler) {
    handler_ = std::move(handler);
  }

 protected:
  Reply provider_complete(const Prompt& prompt, const std::string& key) override;

 private:
  std::map<std::string, std::vector<Reply>> replies_;
  std::function<std::optional<Reply>(const Prompt&)> handler_;
};

/// Deterministic replay provider over a fixture directory (one JSON file per
/// prompt key). Unknown prompts raise replay-miss naming the key.
class ReplayGateway : public Gateway {
 public:
  explicit ReplayGateway(std::filesystem::path fixture_dir);

 protected:
  Reply provider_complete(const Prompt& prompt, const std::string& key) override;

 private:
  std::filesystem::path fixture_dir_;
};

/// Writes one replay fixture file; the authoring half of record/replay.
void write_replay_fixture(const std::filesystem::path& dir, const std::string& template_name,
                          const std::vector<std::string>& slots, const std::string& reply_text,
                          std::optional<long long> prompt_tokens = std::nullopt,
                          std::optional<long long> completion_tokens = std::nullopt);
void write_replay_fixture_json(const std::filesystem::path& dir, const std::string& template_name,
                               const std::vector<std::string>& slots, const json& reply);

/// Remote chat-completion provider (HTTP+JSON, system/user roles, usage
/// block). Endpoint and credential come from configuration; 429s retry with
/// bounded backoff.
class HttpGateway : public Gateway {
 public:
  struct Options {
    std::string base_url;           // e.g. http://host:port
    std::string path = "/v1/chat/completions";
    std::string model = "default";
    std::string api_key;            // optional bearer credential
    int max_retries = 3;
    int backoff_ms = 200;
  };

  explicit HttpGateway(Options options) : options_(std::move(options)) {}

 protected:
  Reply provider_complete(const Prompt& prompt, const std::string& key) override;

 private:
  Options options_;
};

}  // namespace paffa
