#pragma once

#include <initializer_list>
#include <set>
#include <string>

#include <json.hpp>

#include "ellcharge/errors.hpp"

namespace ellcharge::io {

/// Reader over one JSON object that rejects keys nobody asked for.
class Fields {
public:
    Fields(const nlohmann::json& j, std::string where) : j_(j), where_(std::move(where))
    {
        if (!j_.is_object()) throw ConfigError(where_ + ": expected a JSON object");
    }

    template <typename T>
    void get(const char* key, T& out)
    {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(where_ + "." + key + ": " + e.what());
        }
    }

    [[nodiscard]] bool has(const char* key) const { return j_.contains(key); }

    [[nodiscard]] const nlohmann::json& child(const char* key)
    {
        seen_.insert(key);
        return j_.at(key);
    }

    void ignore(std::initializer_list<const char*> keys) { seen_.insert(keys.begin(), keys.end()); }

    /// Throws on any key not read or ignored so far.
    void finish() const
    {
        for (const auto& [k, v] : j_.items())
            if (!seen_.count(k)) throw ConfigError(where_ + ": unknown key '" + k + "'");
    }

private:
    const nlohmann::json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

}  // namespace ellcharge::io
