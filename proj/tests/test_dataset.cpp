// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <fstream>
#include <set>

#include "georef/dataset.hpp"
#include "georef/pipeline.hpp"
#include "georef/util.hpp"
#include "support.hpp"

using namespace georef;

namespace {

DatasetManifest synthetic(std::size_t position, std::size_t shape, std::size_t relationship) {
    DatasetManifest m;
    std::size_t k = 0;
    auto add = [&](Category c, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i, ++k) {
            auto scheme = k % 2 ? IdentifierScheme::Random : IdentifierScheme::Common;
            m.items.push_back(make_item("q" + std::to_string(k), c, "AB", {"AB", "BA"}, scheme));
            m.items.back().image = "img" + std::to_string(k / 4) + ".svg";
        }
    };
    add(Category::Position, position);
    add(Category::Shape, shape);
    add(Category::Relationship, relationship);
    return m;
}

std::multiset<IdentifierScheme> schemes(const DatasetManifest& m) {
    std::multiset<IdentifierScheme> out;
    for (const auto& it : m.items) out.insert(it.scheme);
    return out;
}

// Synthesizes the six scenes of one template into a scratch directory.
std::string one_template_scenes(const std::string& name) {
    auto dir = scratch_dir(name);
    auto tdir = dir / "templates";
    std::filesystem::create_directories(tdir);
    std::filesystem::copy_file(template_path("parallel_transversal"), tdir / "parallel_transversal.scene");
    auto res = synthesize(tdir.string(), (dir / "scenes").string(), SynthConfig{});
    REQUIRE(res.failures.empty());
    REQUIRE(res.scene_ids.size() == 6);
    return (dir / "scenes").string();
}

}  // namespace

TEST_CASE("generated manifests round-trip") {
    auto scenes = one_template_scenes("dataset_roundtrip");
    auto m = generate_dataset(scenes, QAConfig{}, 5, "test");
    REQUIRE_FALSE(m.items.empty());
    auto path = scratch_dir("dataset_roundtrip_out") / "qa.jsonl";
    write_dataset(m, path.string());
    CHECK(read_dataset(path.string()) == m);
    CHECK_NOTHROW(validate_manifest(m, true));
}

TEST_CASE("truncated line is a schema error naming the line") {
    auto m = synthetic(2, 1, 1);
    auto path = scratch_dir("dataset_truncated") / "qa.jsonl";
    write_dataset(m, path.string());
    auto text = read_file(path.string());
    // Cut the third line in half.
    auto third = text.find('\n', text.find('\n') + 1) + 1;
    auto end = text.find('\n', third);
    std::ofstream(path) << text.substr(0, third) << text.substr(third, (end - third) / 2) << "\n" << text.substr(end + 1);
    try {
        read_dataset(path.string());
        FAIL("expected a schema error");
    } catch (const SchemaError& e) {
        CHECK(e.line() == 3);
    }
}

TEST_CASE("empty dataset") {
    DatasetManifest m;
    auto path = scratch_dir("dataset_empty") / "qa.jsonl";
    write_dataset(m, path.string());
    auto back = read_dataset(path.string());
    CHECK(back.items.empty());
    CHECK_NOTHROW(validate_manifest(back, false));
    auto r = dataset_stats(back);
    CHECK(r.total == 0);
    CHECK(r.images == 0);
    for (const auto& [c, n] : r.per_category) CHECK(n == 0);
}

TEST_CASE("manifest validation") {
    auto m = synthetic(1, 1, 1);
    m.items[1].id = m.items[0].id;
    CHECK_THROWS_AS(validate_manifest(m, false), SchemaError);
    m = synthetic(1, 1, 1);
    m.items[0].category = Category::Shape;
    CHECK_THROWS_AS(validate_manifest(m, false), SchemaError);
    m = synthetic(1, 1, 1);
    m.items[2].answers.variants.clear();
    CHECK_THROWS_AS(validate_manifest(m, false), SchemaError);
    m = synthetic(1, 0, 0);
    m.images_dir = scratch_dir("dataset_noimg").string();
    CHECK_THROWS_AS(validate_manifest(m, true), SchemaError);
}

TEST_CASE("statistics") {
    auto m = synthetic(7433, 8395, 14076);
    auto r = dataset_stats(m);
    CHECK(r.per_category.at(Category::Position) == 7433);
    CHECK(r.per_category.at(Category::Shape) == 8395);
    CHECK(r.per_category.at(Category::Relationship) == 14076);
    CHECK(r.total == 7433 + 8395 + 14076);
    CHECK(format_stats(r).find("Total Questions   29904") != std::string::npos);
    std::reverse(m.items.begin(), m.items.end());
    CHECK(dataset_stats(m) == r);
}

TEST_CASE("stats over six scenes equal independently counted items") {
    auto scenes = one_template_scenes("dataset_six");
    std::size_t expected = 0;
    std::map<Category, std::size_t> per_cat;
    for (const auto& id : list_scenes(scenes)) {
        auto doc = scene_from_json(read_file(scenes + "/" + id + ".json"));
        for (const auto& it : generate_qa(doc.scene, doc.facts, QAConfig{}, 0)) {
            ++expected;
            ++per_cat[it.category];
        }
    }
    auto r = dataset_stats(generate_dataset(scenes, QAConfig{}, 9));
    CHECK(r.total == expected);
    CHECK(r.images == 6);
    for (const auto& [c, n] : per_cat) CHECK(r.per_category.at(c) == n);
}

TEST_CASE("bias splits") {
    SUBCASE("paper-sized splits") {
        auto m = synthetic(6000, 6000, 6000);
        auto b = make_bias_splits(m, 4905, 1);
        CHECK(b.common.items.size() == 4905);
        CHECK(b.random.items.size() == 4905);
        CHECK(b.hybrid.items.size() == 4905);
        CHECK(schemes(b.common).count(IdentifierScheme::Random) == 0);
        CHECK(schemes(b.random).count(IdentifierScheme::Common) == 0);
        auto h = schemes(b.hybrid);
        CHECK(h.count(IdentifierScheme::Common) == 2453);
        CHECK(h.count(IdentifierScheme::Random) == 2452);
    }
    SUBCASE("n = 2 gives a one-to-one hybrid") {
        auto b = make_bias_splits(synthetic(2, 1, 1), 2, 3);
        auto h = schemes(b.hybrid);
        CHECK(h.count(IdentifierScheme::Common) == 1);
        CHECK(h.count(IdentifierScheme::Random) == 1);
    }
    SUBCASE("deterministic per seed") {
        auto m = synthetic(50, 50, 50);
        auto a = make_bias_splits(m, 40, 7), b = make_bias_splits(m, 40, 7);
        CHECK(a.common == b.common);
        CHECK(a.random == b.random);
        CHECK(a.hybrid == b.hybrid);
        CHECK_FALSE(make_bias_splits(m, 40, 8).common == a.common);
    }
    SUBCASE("too few items") {
        CHECK_THROWS_AS(make_bias_splits(synthetic(2, 2, 2), 4, 1), std::invalid_argument);
    }
}

TEST_CASE("scene documents round-trip") {
    auto s = instantiate(relabel(load_program(template_path("circle_tangent")), IdentifierScheme::Random, 4), 4);
    auto facts = derive_facts(s);
    auto text = scene_to_json(s, facts, "x.svg");
    auto doc = scene_from_json(text);
    CHECK(doc.facts == facts);
    CHECK(doc.image == "x.svg");
    CHECK(scene_to_json(doc.scene, doc.facts, doc.image) == text);
    for (const auto& [c, v] : s.coords) {
        CHECK(doc.scene.at(c).x == v.x);
        CHECK(doc.scene.at(c).y == v.y);
    }
}
