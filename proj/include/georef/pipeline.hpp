// SPDX-License-Identifier: Apache-2.0
//
// End-to-end batch stages: template pool -> solved, rendered scenes -> QA dataset.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "georef/dataset.hpp"
#include "georef/facts.hpp"
#include "georef/kernel.hpp"
#include "georef/qa.hpp"
#include "georef/render.hpp"

namespace georef {

struct SynthConfig {
    int per_type_random = 5;  // Random-scheme scenes per template, besides the one Common scene
    std::uint64_t seed = 1;   // Common scene seed; Random scenes use seed + 1 .. seed + per_type_random
    int jobs = 1;
    SolverConfig solver;
    QualityConfig quality;
    RenderConfig render;
};

struct SceneArtifact {
    ConcreteScene scene;
    std::vector<Fact> facts;
    std::string svg;
    std::string json;
};

// Relabels, solves, derives facts and renders one scene. Throws NoSolution and
// validation errors.
SceneArtifact build_scene(const SceneProgram& base, IdentifierScheme scheme, std::uint64_t seed, const SynthConfig& cfg);

struct SynthFailure {
    std::string template_name;
    std::string scene_id;
    std::string message;
};

struct SynthResult {
    std::size_t templates = 0;
    std::vector<std::string> scene_ids;  // written scenes, in template then seed order
    std::vector<SynthFailure> failures;
};

// Sorted *.scene paths; throws std::runtime_error("no templates ...") when none.
std::vector<std::string> list_templates(const std::string& dir);

// Writes <id>.svg and <id>.json per scene plus scenes.json listing them.
// Failing templates are recorded and skipped.
SynthResult synthesize(const std::string& templates_dir, const std::string& out_dir, const SynthConfig& cfg,
                       const std::string& created_with = {});

// Scene ids recorded in <scenes_dir>/scenes.json.
std::vector<std::string> list_scenes(const std::string& scenes_dir);

// Questions for every scene in the directory, in scene order.
DatasetManifest generate_dataset(const std::string& scenes_dir, const QAConfig& cfg, std::uint64_t seed,
                                 const std::string& created_with = {},
                                 const QuestionCatalog& catalog = default_catalog());

}  // namespace georef
