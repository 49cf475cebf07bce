#pragma once

// Flat dotted-key run configuration: values come from an optional JSON file,
// then flag overrides (last writer wins). The fully resolved config is
// written into every output directory so a run can be reproduced from its
// artifacts alone.

#include <map>
#include <set>
#include <string>

#include <json.hpp>

namespace mipose {

class RunConfig {
public:
    RunConfig() = default;

    /// Parse a flat JSON object ({"train.epochs": 30, ...}); nested values
    /// are rejected.
    static RunConfig from_file(const std::string& path);

    void set(const std::string& key, nlohmann::json value);

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    /// Typed getters; the fallback is returned (and not recorded) when the
    /// key is absent. Type mismatches throw.
    int get_int(const std::string& key, int fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;

    /// Reject keys outside the caller's documented set.
    void ensure_known(const std::set<std::string>& known) const;

    /// Pretty-printed JSON with sorted keys (std::map order), so identical
    /// configs serialize identically.
    void write(const std::string& path) const;

    const std::map<std::string, nlohmann::json>& entries() const { return values_; }

private:
    std::map<std::string, nlohmann::json> values_;
};

}  // namespace mipose
