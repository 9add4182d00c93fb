#pragma once

#include "tempalign/error.hpp"
#include "tempalign/interval.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

namespace tempalign {

using json = nlohmann::json;

inline constexpr const char* kSchemaVersion = "1";

inline json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw SchemaError("malformed JSON in " + path.string() + ": " + e.what());
    }
}

inline void write_text_file(const std::filesystem::path& path, std::string_view text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed for " + path.string());
}

inline void write_json_file(const std::filesystem::path& path, const json& doc) {
    write_text_file(path, doc.dump(2) + "\n");
}

// Wraps an item array in the versioned envelope used by every artifact.
inline json make_envelope(std::string_view items_key, json items) {
    json doc = json::object();
    doc["schema_version"] = kSchemaVersion;
    doc[std::string(items_key)] = std::move(items);
    return doc;
}

// Accepts either a bare array or {"schema_version": "1", items_key: [...]}.
inline const json& envelope_items(const json& doc, std::string_view items_key,
                                  std::string_view what) {
    if (doc.is_array()) return doc;
    if (!doc.is_object()) throw SchemaError(std::string(what) + ": expected array or object");
    if (auto v = doc.find("schema_version"); v != doc.end() && *v != kSchemaVersion) {
        throw SchemaError(std::string(what) + ": unsupported schema_version " + v->dump());
    }
    auto it = doc.find(std::string(items_key));
    if (it == doc.end() || !it->is_array()) {
        throw SchemaError(std::string(what) + ": missing array '" + std::string(items_key) + "'");
    }
    return *it;
}

inline const json& require(const json& obj, std::string_view key, std::string_view context) {
    if (!obj.is_object()) throw SchemaError(std::string(context) + ": expected object");
    auto it = obj.find(std::string(key));
    if (it == obj.end()) {
        throw SchemaError(std::string(context) + ": missing key '" + std::string(key) + "'");
    }
    return *it;
}

inline std::string require_string(const json& obj, std::string_view key, std::string_view context) {
    const auto& v = require(obj, key, context);
    if (!v.is_string()) {
        throw SchemaError(std::string(context) + ": '" + std::string(key) + "' must be a string");
    }
    return v.get<std::string>();
}

inline double require_number(const json& obj, std::string_view key, std::string_view context) {
    const auto& v = require(obj, key, context);
    if (!v.is_number()) {
        throw SchemaError(std::string(context) + ": '" + std::string(key) + "' must be a number");
    }
    return v.get<double>();
}

inline json interval_to_json(const Interval& iv) { return json::array({iv.onset, iv.offset}); }

inline Interval interval_from_json(const json& j, std::string_view context) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
        throw SchemaError(std::string(context) + ": interval must be [onset, offset]");
    }
    Interval iv{j[0].get<double>(), j[1].get<double>()};
    if (!iv.valid()) {
        std::ostringstream msg;
        msg << context << ": invalid interval [" << iv.onset << ", " << iv.offset << "]";
        throw SchemaError(msg.str());
    }
    return iv;
}

} // namespace tempalign
