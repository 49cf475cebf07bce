#include "mipose/io/runconfig.hpp"

#include <fstream>
#include <stdexcept>

namespace mipose {

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error("config: " + path + " is not valid JSON: " + e.what());
    }
    if (!j.is_object())
        throw std::runtime_error("config: " + path + " must be a JSON object");
    RunConfig c;
    for (const auto& [key, value] : j.items()) {
        if (value.is_object() || value.is_array())
            throw std::runtime_error("config: key '" + key +
                                     "' must be a scalar (flat dotted keys only)");
        c.values_[key] = value;
    }
    return c;
}

void RunConfig::set(const std::string& key, nlohmann::json value) {
    if (value.is_object() || value.is_array())
        throw std::invalid_argument("config: key '" + key + "' must be a scalar");
    values_[key] = std::move(value);
}

namespace {
[[noreturn]] void type_error(const std::string& key, const char* want,
                             const nlohmann::json& got) {
    throw std::runtime_error("config: key '" + key + "' must be " + want + ", got " +
                             got.dump());
}
}  // namespace

int RunConfig::get_int(const std::string& key, int fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (!it->second.is_number_integer()) type_error(key, "an integer", it->second);
    return it->second.get<int>();
}

double RunConfig::get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (!it->second.is_number()) type_error(key, "a number", it->second);
    return it->second.get<double>();
}

bool RunConfig::get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (!it->second.is_boolean()) type_error(key, "a boolean", it->second);
    return it->second.get<bool>();
}

std::string RunConfig::get_string(const std::string& key,
                                  const std::string& fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (!it->second.is_string()) type_error(key, "a string", it->second);
    return it->second.get<std::string>();
}

std::uint64_t RunConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (!it->second.is_number_unsigned() && !it->second.is_number_integer())
        type_error(key, "a non-negative integer", it->second);
    return it->second.get<std::uint64_t>();
}

void RunConfig::ensure_known(const std::set<std::string>& known) const {
    for (const auto& [key, value] : values_)
        if (!known.count(key))
            throw std::runtime_error("config: unknown key '" + key + "'");
}

void RunConfig::write(const std::string& path) const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [key, value] : values_) j[key] = value;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("config: cannot write " + path);
    out << j.dump(2) << '\n';
}

}  // namespace mipose
