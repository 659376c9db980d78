// SPDX-License-Identifier: Apache-2.0
//
// Effective run settings merged from command-line flags, GEOREF_* environment
// variables, an optional key = value config file, and built-in defaults.
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace georef {

class RunConfig {
public:
    enum class Source { Default, File, Env, Flag };

    // `hashed` settings feed the config hash; paths and parallelism do not,
    // since they never change outputs.
    void declare(const std::string& key, std::string default_value, bool hashed = true);
    // Config file: "key = value" lines, '#' comments, optional [section]
    // headers. Keys under [section] apply only when section == this config's
    // scope. Throws std::invalid_argument on malformed lines or unknown keys.
    void load_file(const std::string& path);
    void parse_file(std::string_view text, const std::string& origin = "config");
    // Reads GEOREF_<KEY> (upper-cased, '-' and '.' mapped to '_').
    void load_env(const std::function<const char*(const char*)>& getenv_fn = nullptr);
    void set_flag(const std::string& key, std::string value);

    void set_scope(std::string scope) { scope_ = std::move(scope); }

    std::string get(const std::string& key) const;
    double get_double(const std::string& key) const;
    std::int64_t get_int(const std::string& key) const;
    std::uint64_t get_uint(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    Source source(const std::string& key) const;

    // FNV-1a over the sorted "key=value" lines of hashed settings, as 16 hex digits.
    std::string hash() const;
    std::vector<std::string> keys() const;

    static std::string env_name(const std::string& key);

private:
    struct Entry {
        std::string default_value;
        bool hashed = true;
        std::optional<std::string> file, env, flag;
    };
    const Entry& entry(const std::string& key) const;

    std::string scope_;
    std::map<std::string, Entry> entries_;
};

}  // namespace georef
