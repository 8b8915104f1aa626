#include "paffa/jsonio.hpp"

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace paffa {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_script: return "invalid-script";
    case ErrorCode::missing_required_param: return "missing-required-param";
    case ErrorCode::type_mismatch: return "type-mismatch";
    case ErrorCode::unknown_param: return "unknown-param";
    case ErrorCode::unparseable_document: return "unparseable-document";
    case ErrorCode::llm_reply_unparseable: return "llm-reply-unparseable";
    case ErrorCode::gateway_transport: return "gateway-transport-error";
    case ErrorCode::rate_limited: return "rate-limited";
    case ErrorCode::replay_miss: return "replay-miss";
    case ErrorCode::ungrounded_locator: return "ungrounded-locator";
    case ErrorCode::exploration_failed: return "exploration-failed";
    case ErrorCode::synthesis_incomplete: return "synthesis-incomplete";
    case ErrorCode::name_collision: return "name-collision";
    case ErrorCode::persistence_error: return "persistence-error";
    case ErrorCode::unsupported_schema_version: return "unsupported-schema-version";
    case ErrorCode::corrupt_file: return "corrupt-file";
    case ErrorCode::unknown_api_id: return "unknown-api-id";
    case ErrorCode::unknown_goal: return "unknown-goal";
    case ErrorCode::spec_invalid: return "spec-invalid";
    case ErrorCode::session_closed: return "session-closed";
    case ErrorCode::step_failed: return "step-failed";
    case ErrorCode::empty_gold: return "empty-gold";
    case ErrorCode::zero_baseline: return "zero-baseline";
    case ErrorCode::score_out_of_range: return "score-out-of-range";
    case ErrorCode::precondition: return "precondition-violation";
    case ErrorCode::config: return "config-error";
  }
  return "unknown-error";
}

namespace jsonio {

void reject_unknown_fields(const json& obj, std::initializer_list<const char*> allowed,
                           const std::string& context) {
  if (!obj.is_object()) {
    throw Error(ErrorCode::corrupt_file, context + ": expected a JSON object");
  }
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* key : allowed) {
      if (it.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw Error(ErrorCode::corrupt_file, context + ": unknown field '" + it.key() + "'");
    }
  }
}

const json& require(const json& obj, const char* key, const std::string& context) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw Error(ErrorCode::corrupt_file, context + ": missing field '" + key + "'");
  }
  return obj.at(key);
}

std::string require_string(const json& obj, const char* key, const std::string& context) {
  const json& v = require(obj, key, context);
  if (!v.is_string()) {
    throw Error(ErrorCode::corrupt_file, context + ": field '" + key + "' must be a string");
  }
  return v.get<std::string>();
}

bool require_bool(const json& obj, const char* key, const std::string& context) {
  const json& v = require(obj, key, context);
  if (!v.is_boolean()) {
    throw Error(ErrorCode::corrupt_file, context + ": field '" + key + "' must be a boolean");
  }
  return v.get<bool>();
}

long long require_int(const json& obj, const char* key, const std::string& context) {
  const json& v = require(obj, key, context);
  if (!v.is_number_integer()) {
    throw Error(ErrorCode::corrupt_file, context + ": field '" + key + "' must be an integer");
  }
  return v.get<long long>();
}

void require_schema_version(const json& doc, const std::string& context) {
  long long version = require_int(doc, "schema-version", context);
  if (version != kSchemaVersion) {
    throw Error(ErrorCode::unsupported_schema_version,
                context + ": schema-version " + std::to_string(version) +
                    " (supported: " + std::to_string(kSchemaVersion) + ")");
  }
}

json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::persistence_error, "cannot open " + path.string());
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  json doc = json::parse(buffer.str(), nullptr, false);
  if (doc.is_discarded()) {
    throw Error(ErrorCode::corrupt_file, "not valid JSON: " + path.string());
  }
  return doc;
}

void atomic_write_file(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc | std::ios::binary);
    if (!out) {
      throw Error(ErrorCode::persistence_error, "cannot write " + tmp.string());
    }
    out << content;
    out.flush();
    if (!out) {
      throw Error(ErrorCode::persistence_error, "short write to " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorCode::persistence_error, "rename failed for " + path.string());
  }
}

std::string fnv1a_hex(std::string_view data) {
  std::uint64_t hash = 1469598103934665603ull;
  for (unsigned char c : data) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
  return std::string(buf);
}

}  // namespace jsonio

std::string iso8601_now() {
  using namespace std::chrono;
  auto now = system_clock::now();
  std::time_t t = system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return std::string(buf);
}

}  // namespace paffa
