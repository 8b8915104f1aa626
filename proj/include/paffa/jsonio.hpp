#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <initializer_list>
#include <string>

#include "paffa/errors.hpp"

namespace paffa {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

namespace jsonio {

/// Rejects any key outside `allowed`. Serialized documents are closed-world;
/// forward compatibility is a schema-version bump, not silent field dropping.
void reject_unknown_fields(const json& obj, std::initializer_list<const char*> allowed,
                           const std::string& context);

const json& require(const json& obj, const char* key, const std::string& context);
std::string require_string(const json& obj, const char* key, const std::string& context);
bool require_bool(const json& obj, const char* key, const std::string& context);
long long require_int(const json& obj, const char* key, const std::string& context);

void require_schema_version(const json& doc, const std::string& context);

json load_json_file(const std::filesystem::path& path);
/// Write-temp-then-rename; readers never observe a torn file.
void atomic_write_file(const std::filesystem::path& path, const std::string& content);

std::string fnv1a_hex(std::string_view data);

}  // namespace jsonio

std::string iso8601_now();

}  // namespace paffa
