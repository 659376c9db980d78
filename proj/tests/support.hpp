// SPDX-License-Identifier: Apache-2.0
//
// Shared fixtures for the test binaries.
#pragma once

#include <cstdlib>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "georef/dataset.hpp"
#include "georef/kernel.hpp"
#include "georef/qa.hpp"

namespace georef::test {

inline std::string templates_dir() { return GEOREF_TEST_TEMPLATES; }
inline std::string data_dir() { return GEOREF_TEST_DATA; }
inline std::string template_path(const std::string& name) { return templates_dir() + "/" + name + ".scene"; }

// Fresh scratch directory under the build tree, removed on construction.
inline std::filesystem::path scratch_dir(const std::string& name) {
    std::filesystem::path p = std::filesystem::path(GEOREF_TEST_SCRATCH) / name;
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

// A scene with explicit coordinates; elements come from the program.
inline ConcreteScene scene_at(const std::string& program, const std::map<char, Vec2>& free,
                              const std::map<char, double>& params = {}) {
    return realize(parse_program(program), free, params);
}

inline QAItem make_item(const std::string& id, Category cat, const std::string& canonical,
                        std::vector<std::string> variants, IdentifierScheme scheme = IdentifierScheme::Common) {
    QAItem it;
    it.id = id;
    it.image = id + ".svg";
    it.category = cat;
    it.question = "Which element is " + id + "?";
    it.answers = {canonical, std::move(variants)};
    it.fact_kind = cat == Category::Position ? FactKind::Midpoint
                   : cat == Category::Shape  ? FactKind::Chord
                                             : FactKind::ParallelPair;
    it.template_id = "fixture";
    it.scheme = scheme;
    it.seed = 1;
    return it;
}

}  // namespace georef::test

using namespace georef::test;
