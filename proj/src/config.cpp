// SPDX-License-Identifier: Apache-2.0
#include "georef/config.hpp"

#include <cctype>
#include <cstdlib>
#include <stdexcept>

#include "georef/util.hpp"

namespace georef {

void RunConfig::declare(const std::string& key, std::string default_value, bool hashed) {
    auto& e = entries_[key];
    e.default_value = std::move(default_value);
    e.hashed = hashed;
}

void RunConfig::load_file(const std::string& path) { parse_file(read_file(path), path); }

void RunConfig::parse_file(std::string_view text, const std::string& origin) {
    std::string section;
    int no = 0;
    for (const auto& raw : split_lines(text)) {
        ++no;
        std::string line = raw;
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') quoted = !quoted;
            if (line[i] == '#' && !quoted) {
                line.resize(i);
                break;
            }
        }
        line = trim(line);
        if (line.empty()) continue;
        auto where = origin + ":" + std::to_string(no) + ": ";
        if (line.front() == '[') {
            if (line.back() != ']') throw std::invalid_argument(where + "malformed section header");
            section = trim(std::string_view(line).substr(1, line.size() - 2));
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) throw std::invalid_argument(where + "expected 'key = value'");
        std::string key = trim(std::string_view(line).substr(0, eq));
        std::string value = trim(std::string_view(line).substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
        for (auto& c : key)
            if (c == '-') c = '_';
        if (!section.empty() && section != scope_) continue;
        auto it = entries_.find(key);
        if (it == entries_.end()) {
            if (!section.empty()) throw std::invalid_argument(where + "unknown setting '" + key + "'");
            continue;  // top-level keys may belong to other subcommands
        }
        it->second.file = value;
    }
}

std::string RunConfig::env_name(const std::string& key) {
    std::string out = "GEOREF_";
    for (char c : key) out += (c == '-' || c == '.') ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

void RunConfig::load_env(const std::function<const char*(const char*)>& getenv_fn) {
    for (auto& [key, e] : entries_) {
        std::string name = env_name(key);
        const char* v = getenv_fn ? getenv_fn(name.c_str()) : std::getenv(name.c_str());
        if (v) e.env = std::string(v);
    }
}

void RunConfig::set_flag(const std::string& key, std::string value) {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw std::invalid_argument("unknown setting '" + key + "'");
    it->second.flag = std::move(value);
}

const RunConfig::Entry& RunConfig::entry(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw std::invalid_argument("unknown setting '" + key + "'");
    return it->second;
}

std::string RunConfig::get(const std::string& key) const {
    const auto& e = entry(key);
    if (e.flag) return *e.flag;
    if (e.env) return *e.env;
    if (e.file) return *e.file;
    return e.default_value;
}

RunConfig::Source RunConfig::source(const std::string& key) const {
    const auto& e = entry(key);
    if (e.flag) return Source::Flag;
    if (e.env) return Source::Env;
    if (e.file) return Source::File;
    return Source::Default;
}

double RunConfig::get_double(const std::string& key) const {
    std::string v = get(key);
    try {
        std::size_t used = 0;
        double d = std::stod(v, &used);
        if (used == v.size()) return d;
    } catch (const std::exception&) {
    }
    throw std::invalid_argument("setting '" + key + "' must be a number, got '" + v + "'");
}

std::int64_t RunConfig::get_int(const std::string& key) const {
    std::string v = get(key);
    try {
        std::size_t used = 0;
        long long i = std::stoll(v, &used);
        if (used == v.size()) return i;
    } catch (const std::exception&) {
    }
    throw std::invalid_argument("setting '" + key + "' must be an integer, got '" + v + "'");
}

std::uint64_t RunConfig::get_uint(const std::string& key) const {
    std::string v = get(key);
    if (!v.empty() && v.front() != '-') {
        try {
            std::size_t used = 0;
            unsigned long long i = std::stoull(v, &used);
            if (used == v.size()) return i;
        } catch (const std::exception&) {
        }
    }
    throw std::invalid_argument("setting '" + key + "' must be a non-negative integer, got '" + v + "'");
}

bool RunConfig::get_bool(const std::string& key) const {
    std::string v = to_upper(get(key));
    if (v == "1" || v == "TRUE" || v == "YES" || v == "ON") return true;
    if (v == "0" || v == "FALSE" || v == "NO" || v == "OFF" || v.empty()) return false;
    throw std::invalid_argument("setting '" + key + "' must be a boolean, got '" + get(key) + "'");
}

std::string RunConfig::hash() const {
    std::string text = "scope=" + scope_ + "\n";
    for (const auto& [key, e] : entries_)
        if (e.hashed) text += key + "=" + get(key) + "\n";
    return hex64(fnv1a64(text));
}

std::vector<std::string> RunConfig::keys() const {
    std::vector<std::string> out;
    for (const auto& [k, e] : entries_) out.push_back(k);
    return out;
}

}  // namespace georef
