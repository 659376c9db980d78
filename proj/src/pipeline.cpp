// SPDX-License-Identifier: Apache-2.0
#include "georef/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <optional>
#include <set>
#include <stdexcept>
#include <thread>

#include "georef/util.hpp"
#include "json.hpp"

namespace georef {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

SceneArtifact build_scene(const SceneProgram& base, IdentifierScheme scheme, std::uint64_t seed, const SynthConfig& cfg) {
    SceneArtifact a;
    SceneProgram p = relabel(base, scheme, seed);
    a.scene = instantiate(p, seed, cfg.solver, cfg.quality);
    a.scene.scheme = scheme;
    a.scene.seed = seed;
    a.facts = derive_facts(a.scene);
    a.svg = render_svg(a.scene, cfg.render);
    a.json = scene_to_json(a.scene, a.facts, a.scene.id() + ".svg");
    return a;
}

std::vector<std::string> list_templates(const std::string& dir) {
    if (!fs::is_directory(dir)) throw std::runtime_error("no templates: '" + dir + "' is not a directory");
    std::vector<std::string> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".scene") out.push_back(e.path().string());
    std::sort(out.begin(), out.end());
    if (out.empty()) throw std::runtime_error("no templates: no .scene files in '" + dir + "'");
    return out;
}

SynthResult synthesize(const std::string& templates_dir, const std::string& out_dir, const SynthConfig& cfg,
                       const std::string& created_with) {
    if (cfg.per_type_random < 0) throw std::invalid_argument("per_type_random must be non-negative");
    auto paths = list_templates(templates_dir);
    fs::create_directories(out_dir);

    struct Job {
        std::size_t program;
        IdentifierScheme scheme;
        std::uint64_t seed;
    };
    struct Outcome {
        std::string id;
        std::optional<std::string> error;
    };

    SynthResult result;
    result.templates = paths.size();
    std::vector<SceneProgram> programs;
    std::vector<std::string> names;
    std::vector<Job> jobs;
    std::set<std::string> seen;
    for (const auto& path : paths) {
        std::string name = fs::path(path).stem().string();
        try {
            SceneProgram p = load_program(path);
            auto report = validate_program(p);
            if (!report.ok) throw std::invalid_argument(report.summary());
            if (!seen.insert(p.name).second) throw std::invalid_argument("duplicate scene name '" + p.name + "'");
            programs.push_back(std::move(p));
            names.push_back(name);
            jobs.push_back({programs.size() - 1, IdentifierScheme::Common, cfg.seed});
            for (int k = 1; k <= cfg.per_type_random; ++k)
                jobs.push_back({programs.size() - 1, IdentifierScheme::Random, cfg.seed + static_cast<std::uint64_t>(k)});
        } catch (const std::exception& e) {
            result.failures.push_back({name, "", e.what()});
        }
    }

    std::vector<Outcome> outcomes(jobs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= jobs.size()) break;
            const Job& job = jobs[i];
            const SceneProgram& p = programs[job.program];
            Outcome& out = outcomes[i];
            out.id = p.name + "_" + std::string(scheme_name(job.scheme)) + "_" + std::to_string(job.seed);
            try {
                SceneArtifact a = build_scene(p, job.scheme, job.seed, cfg);
                write_file((fs::path(out_dir) / (out.id + ".svg")).string(), a.svg);
                write_file((fs::path(out_dir) / (out.id + ".json")).string(), a.json);
            } catch (const std::exception& e) {
                out.error = e.what();
            }
        }
    };
    std::size_t workers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(cfg.jobs, 1)), 1, std::max<std::size_t>(jobs.size(), 1));
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (outcomes[i].error)
            result.failures.push_back({names[jobs[i].program], outcomes[i].id, *outcomes[i].error});
        else
            result.scene_ids.push_back(outcomes[i].id);
    }

    ordered_json manifest;
    manifest["v"] = kSchemaVersion;
    manifest["created_with"] = created_with;
    manifest["templates"] = result.templates;
    manifest["scenes"] = result.scene_ids;
    ordered_json failures = ordered_json::array();
    for (const auto& f : result.failures)
        failures.push_back({{"template", f.template_name}, {"scene", f.scene_id}, {"error", f.message}});
    manifest["failures"] = failures;
    write_file((fs::path(out_dir) / "scenes.json").string(), manifest.dump(2) + "\n");
    return result;
}

std::vector<std::string> list_scenes(const std::string& scenes_dir) {
    fs::path manifest = fs::path(scenes_dir) / "scenes.json";
    if (!fs::exists(manifest)) throw std::runtime_error("missing scenes: no scenes.json in '" + scenes_dir + "'");
    try {
        auto j = nlohmann::json::parse(read_file(manifest.string()));
        return j.at("scenes").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("malformed scenes.json: ") + e.what(), 0);
    }
}

DatasetManifest generate_dataset(const std::string& scenes_dir, const QAConfig& cfg, std::uint64_t seed,
                                 const std::string& created_with, const QuestionCatalog& catalog) {
    if (cfg.two_step_ratio < 0.0 || cfg.two_step_ratio > 1.0) throw std::invalid_argument("two_step_ratio must lie in [0, 1]");
    DatasetManifest m;
    m.images_dir = scenes_dir;
    m.created_with = created_with;
    for (const auto& id : list_scenes(scenes_dir)) {
        fs::path doc_path = fs::path(scenes_dir) / (id + ".json");
        if (!fs::exists(doc_path)) throw std::runtime_error("missing scene document '" + doc_path.string() + "'");
        SceneDocument doc = scene_from_json(read_file(doc_path.string()));
        auto items = generate_qa(doc.scene, doc.facts, cfg, mix_seed(seed, fnv1a64(id)), catalog);
        for (auto& it : items) {
            it.image = doc.image;
            m.items.push_back(std::move(it));
        }
    }
    return m;
}

}  // namespace georef
