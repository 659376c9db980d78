// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace georef {

// splitmix64 finalizer; used to derive independent seeds from (seed, salt) pairs.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);
std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t value);

// Deterministic RNG with portable distributions. std::uniform_*_distribution is
// implementation-defined, so all sampling goes through these helpers.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next();
    double uniform();                      // [0, 1)
    double uniform(double lo, double hi);  // [lo, hi)
    std::uint64_t below(std::uint64_t n);  // [0, n), unbiased

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_;
};

// Shortest round-trip decimal form of a double.
std::string format_double(double v);
// Fixed-point with the given number of decimals, "-0.00" folded to "0.00".
std::string format_fixed(double v, int decimals);

std::string trim(std::string_view s);
std::string to_upper(std::string_view s);
std::vector<std::string> split_lines(std::string_view text);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

}  // namespace georef
