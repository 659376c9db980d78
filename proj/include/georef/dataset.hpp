// SPDX-License-Identifier: Apache-2.0
//
// Dataset persistence (JSONL), statistics and annotation-bias splits, plus the
// canonical JSON form of solved scenes.
#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "georef/facts.hpp"
#include "georef/kernel.hpp"
#include "georef/qa.hpp"
#include "json.hpp"

namespace georef {

inline constexpr int kSchemaVersion = 1;

struct DatasetManifest {
    std::vector<QAItem> items;
    std::string images_dir;
    std::string created_with;  // tool version + config hash

    bool operator==(const DatasetManifest&) const = default;
};

class SchemaError : public std::runtime_error {
public:
    SchemaError(const std::string& msg, int line);
    int line() const { return line_; }

private:
    int line_;
};

nlohmann::ordered_json item_to_json(const QAItem& item);
QAItem item_from_json(const nlohmann::json& j);  // throws SchemaError (line 0)
std::string item_to_line(const QAItem& item);

// Items go to `path` (one JSON document per line); images_dir and created_with
// go to the sidecar `<path>.meta.json`.
void write_dataset(const DatasetManifest& m, const std::string& path);
DatasetManifest read_dataset(const std::string& path);
// Unique ids, category consistency, nonempty answers; optionally image files on disk.
void validate_manifest(const DatasetManifest& m, bool check_images);

struct StatsReport {
    std::map<Category, std::size_t> per_category;
    std::size_t total = 0;
    std::size_t images = 0;
    std::map<IdentifierScheme, std::size_t> per_scheme;
    std::map<FactKind, std::size_t> per_kind;
    std::size_t two_step = 0;

    bool operator==(const StatsReport&) const = default;
};

StatsReport dataset_stats(const DatasetManifest& m);
// Category rows followed by the total, then image and scheme counts.
std::string format_stats(const StatsReport& r);

struct BiasSplits {
    DatasetManifest common;
    DatasetManifest random;
    DatasetManifest hybrid;
};

// Three n-item manifests: Common-only, Random-only and a 1:1 mix (Common takes
// the extra item when n is odd). The mix prefers items not already used.
BiasSplits make_bias_splits(const DatasetManifest& m, std::size_t n, std::uint64_t seed);

nlohmann::json fact_to_json(const Fact& f);
Fact fact_from_json(const nlohmann::json& j);

struct SceneDocument {
    ConcreteScene scene;
    std::vector<Fact> facts;
    std::string image;
};

// Canonical document: sorted keys, shortest round-trip numbers.
std::string scene_to_json(const ConcreteScene& s, const std::vector<Fact>& facts, const std::string& image);
SceneDocument scene_from_json(std::string_view text);

}  // namespace georef
