// SPDX-License-Identifier: Apache-2.0
//
// georef: synthesize geometry diagrams, generate referring-expression QA
// datasets, and evaluate models on them.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "georef/config.hpp"
#include "georef/dataset.hpp"
#include "georef/embedded.hpp"
#include "georef/eval.hpp"
#include "georef/pipeline.hpp"
#include "georef/util.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace georef;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

// Validation failures that map to the usage exit code.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Command {
    CLI::App* app = nullptr;
    RunConfig config;
    std::map<std::string, std::optional<std::string>> flags;

    // Declares a setting and its --flag. Unhashed settings (paths,
    // parallelism) never influence outputs.
    void setting(const std::string& flag, const std::string& key, const std::string& def, const std::string& help,
                 bool hashed = true, bool required = false) {
        config.declare(key, def, hashed);
        auto* opt = app->add_option(flag, flags[key], help + (def.empty() ? "" : " [default: " + def + "]"));
        if (required) opt->required();
    }
    void toggle(const std::string& flag, const std::string& key, const std::string& help, bool hashed = true) {
        config.declare(key, "false", hashed);
        app->add_flag_callback(flag, [this, key] { flags[key] = "true"; }, help);
    }

    // Merges flags > GEOREF_* environment > config file > defaults.
    void resolve(const std::string& config_path) {
        config.set_scope(app->get_name());
        if (!config_path.empty()) config.load_file(config_path);
        config.load_env();
        for (const auto& [key, v] : flags)
            if (v) config.set_flag(key, *v);
    }

    std::string get(const std::string& key) const { return config.get(key); }
    std::string required(const std::string& key) const {
        std::string v = config.get(key);
        if (v.empty()) throw UsageError("--" + key + " is required (or set " + RunConfig::env_name(key) + ")");
        return v;
    }
    std::string created_with() const {
        return "georef " + std::string(tool_version()) + " config " + config.hash();
    }
};

std::string default_jobs() { return std::to_string(std::max(1u, std::thread::hardware_concurrency())); }

DatasetManifest load_dataset(const std::string& path) {
    if (!fs::exists(path)) throw UsageError("dataset '" + path + "' not found");
    DatasetManifest m = read_dataset(path);
    // Relative image directories are stored relative to the dataset file.
    if (!m.images_dir.empty() && fs::path(m.images_dir).is_relative())
        m.images_dir = (fs::absolute(path).parent_path() / m.images_dir).lexically_normal().string();
    validate_manifest(m, false);
    return m;
}

// Stores images_dir relative to the dataset file so outputs do not depend on
// the working directory.
void save_dataset(DatasetManifest m, const std::string& path) {
    fs::path out = fs::absolute(path);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    if (!m.images_dir.empty()) m.images_dir = fs::relative(fs::absolute(m.images_dir), out.parent_path()).string();
    write_dataset(m, out.string());
}

// ---------------------------------------------------------------------------

int run_synth(Command& c) {
    SynthConfig cfg;
    cfg.per_type_random = static_cast<int>(c.config.get_int("per_type_random"));
    cfg.seed = c.config.get_uint("seed");
    cfg.jobs = static_cast<int>(c.config.get_int("jobs"));
    cfg.solver.max_restarts = static_cast<int>(c.config.get_int("max_restarts"));
    if (cfg.per_type_random < 0) throw UsageError("--per-type-random must be non-negative");
    std::string templates = c.get("templates"), out = c.required("out");
    SynthResult r;
    try {
        list_templates(templates);
    } catch (const std::runtime_error& e) {
        throw UsageError(e.what());
    }
    r = synthesize(templates, out, cfg, c.created_with());
    std::size_t expected = r.templates * static_cast<std::size_t>(1 + cfg.per_type_random);
    std::cout << "templates: " << r.templates << "\n"
              << "diagrams:  " << r.scene_ids.size() << " of " << expected << "\n"
              << "output:    " << out << "\n";
    if (r.failures.empty()) return kExitOk;
    std::cerr << r.failures.size() << " failure(s):\n";
    for (const auto& f : r.failures)
        std::cerr << "  " << f.template_name << (f.scene_id.empty() ? "" : " (" + f.scene_id + ")") << ": " << f.message << "\n";
    return kExitRuntime;
}

int run_qagen(Command& c) {
    QAConfig cfg;
    cfg.two_step_ratio = c.config.get_double("two_step_ratio");
    if (cfg.two_step_ratio < 0.0 || cfg.two_step_ratio > 1.0) throw UsageError("--two-step-ratio must lie in [0, 1]");
    std::string scenes = c.required("scenes"), out = c.required("out");
    if (!fs::is_directory(scenes)) throw UsageError("scenes directory '" + scenes + "' not found");
    std::string catalog_path = c.get("catalog");
    QuestionCatalog catalog = catalog_path.empty() ? default_catalog() : load_catalog(catalog_path);
    DatasetManifest m = generate_dataset(scenes, cfg, c.config.get_uint("seed"), c.created_with(), catalog);
    save_dataset(m, out);
    std::cout << format_stats(dataset_stats(m));
    return kExitOk;
}

int run_eval(Command& c) {
    DatasetManifest m = load_dataset(c.required("dataset"));
    EvalConfig cfg;
    try {
        cfg.mode = eval_mode_from_name(c.get("mode"));
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    cfg.shots = static_cast<int>(c.config.get_int("shots"));
    cfg.concurrency = static_cast<int>(c.config.get_int("concurrency"));
    cfg.verify.skip_when_verified_correct = c.config.get_bool("skip_verified");
    cfg.config_hash = c.config.hash();
    cfg.out_dir = c.required("out");
    if (cfg.concurrency < 1) throw UsageError("--concurrency must be at least 1");

    auto spec_of = [&](const std::string& text) {
        AdapterSpec s;
        try {
            s = parse_adapter_spec(text);
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
        s.timeout = c.config.get_double("timeout");
        s.max_retries = static_cast<int>(c.config.get_int("retries"));
        s.backoff = c.config.get_double("backoff");
        if (!(s.timeout > 0.0)) throw UsageError("--timeout must be positive");
        if (s.max_retries < 0) throw UsageError("--retries must be non-negative");
        return s;
    };
    AdapterSpec gen = spec_of(c.required("adapter"));
    std::string verifier_text = c.get("verifier");
    AdapterSpec ver = spec_of(verifier_text.empty() ? c.get("adapter") : verifier_text);

    std::vector<Shot> shots;
    if (cfg.shots > 0) {
        std::string shots_file = c.get("shots_file");
        if (!fs::exists(shots_file)) throw UsageError("exemplar file '" + shots_file + "' not found");
        shots = load_shots(shots_file);
    }
    try {
        check_shots(shots, cfg.shots, m);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }

    auto ctx = std::make_shared<MockContext>(MockContext::from_manifest(m));
    auto factory = [ctx](AdapterSpec s) -> AdapterFactory {
        // Resolve scripted predictions once, not per worker.
        if (s.transport == Transport::Mock && s.endpoint == "oracle-regenerator") {
            auto with = std::make_shared<MockContext>(*ctx);
            with->predictions = read_predictions(s.argument);
            return [s, with] { return make_adapter(s, with); };
        }
        return [s, ctx] { return make_adapter(s, ctx); };
    };
    std::string adapter_id = gen.describe();
    if (cfg.mode != EvalMode::Plain) adapter_id += " + " + ver.describe();
    EvalReport rep = evaluate(m, shots, factory(gen), factory(ver), cfg, adapter_id);

    std::cout << format_report(rep);
    std::size_t failed = 0;
    for (const auto& r : rep.records) failed += !r.error.empty();
    if (failed) std::cerr << failed << " item(s) failed at the adapter and were scored incorrect\n";
    std::cout << "report: " << (fs::path(cfg.out_dir) / "report.json").string() << "\n";
    return kExitOk;
}

int run_splits(Command& c) {
    DatasetManifest m = load_dataset(c.required("dataset"));
    std::int64_t n = c.config.get_int("n");
    if (n <= 0) throw UsageError("--n must be positive");
    BiasSplits s;
    try {
        s = make_bias_splits(m, static_cast<std::size_t>(n), c.config.get_uint("seed"));
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    fs::path out = c.required("out");
    fs::create_directories(out);
    for (auto [name, split] : {std::pair<std::string, DatasetManifest*>{"common", &s.common},
                               {"random", &s.random},
                               {"hybrid", &s.hybrid}}) {
        split->created_with = c.created_with();
        save_dataset(*split, (out / (name + ".jsonl")).string());
        auto st = dataset_stats(*split);
        std::cout << name << ": " << st.total << " items (common " << st.per_scheme[IdentifierScheme::Common]
                  << ", random " << st.per_scheme[IdentifierScheme::Random] << ")\n";
    }
    return kExitOk;
}

int run_stats(Command& c) {
    DatasetManifest m = load_dataset(c.required("dataset"));
    std::cout << format_stats(dataset_stats(m));
    return kExitOk;
}

int run_render(Command& c) {
    SynthConfig cfg;
    cfg.render.stroke_width = c.config.get_double("stroke_width");
    cfg.render.font_size = c.config.get_double("font_size");
    cfg.render.label_offset = c.config.get_double("label_offset");
    cfg.render.show_right_angle_marks = !c.config.get_bool("no_right_angles");
    cfg.render.background = c.get("background");
    try {
        validate_render_config(cfg.render);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    std::string in = c.required("scene"), out = c.required("out");
    if (!fs::exists(in)) throw UsageError("scene file '" + in + "' not found");
    std::string svg;
    if (fs::path(in).extension() == ".json") {
        svg = render_svg(scene_from_json(read_file(in)).scene, cfg.render);
    } else {
        SceneProgram p = load_program(in);
        auto report = validate_program(p);
        if (!report.ok) throw UsageError(report.summary());
        IdentifierScheme scheme;
        try {
            scheme = scheme_from_name(c.get("scheme"));
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
        SceneArtifact a = build_scene(p, scheme, c.config.get_uint("seed"), cfg);
        svg = a.svg;
        std::string json_out = c.get("json");
        if (!json_out.empty()) write_file(json_out, a.json);
    }
    write_file(out, svg);
    std::cout << "wrote " << out << "\n";
    return kExitOk;
}

int run_reward(Command& c) {
    DatasetManifest m = load_dataset(c.required("dataset"));
    std::string pred_path = c.required("predictions");
    if (!fs::exists(pred_path)) throw UsageError("predictions file '" + pred_path + "' not found");
    auto predictions = read_predictions(pred_path);
    std::map<std::string, const QAItem*> by_id;
    for (const auto& it : m.items) by_id[it.id] = &it;
    for (const auto& [id, p] : predictions)
        if (!by_id.count(id)) throw UsageError("prediction for unknown item '" + id + "'");

    std::string body;
    std::size_t total = 0, missing = 0;
    for (const auto& [id, item] : by_id) {
        auto p = predictions.find(id);
        int reward = 0;
        if (p == predictions.end())
            ++missing;
        else
            reward = score_item(p->second, *item);
        total += static_cast<std::size_t>(reward);
        nlohmann::ordered_json j;
        j["id"] = id;
        j["reward"] = reward;
        body += j.dump() + "\n";
    }
    std::string out = c.get("out");
    if (out.empty())
        std::cout << body;
    else
        write_file(out, body);
    double mean = by_id.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(by_id.size());
    if (missing) std::cerr << missing << " item(s) without a prediction scored 0\n";
    std::cout << "mean reward: " << format_fixed(mean, 4) << " (" << total << "/" << by_id.size() << ")\n";
    return kExitOk;
}

int run_check(Command& c) {
    std::string in = c.required("scene");
    if (!fs::exists(in)) throw UsageError("scene file '" + in + "' not found");
    SceneProgram p = load_program(in);
    auto report = validate_program(p);
    for (const auto& issue : report.issues)
        std::cout << in << ":" << issue.span.line << ":" << issue.span.column << ": "
                  << (issue.severity == Severity::Error ? "error" : "warning") << ": " << issue.message << "\n";
    if (!report.ok) return kExitUsage;
    if (c.config.get_bool("print")) std::cout << print_program(p);
    return kExitOk;
}

// Line-delimited adapter protocol over stdio, answering with a bundled mock.
int run_mock_adapter(Command& c) {
    std::string name = c.required("name"), arg = c.get("arg");
    AdapterSpec spec;
    try {
        spec = parse_adapter_spec("mock:" + name + (arg.empty() ? "" : "(" + arg + ")"));
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    MockContext ctx;
    std::string dataset = c.get("dataset");
    if (!dataset.empty()) ctx = MockContext::from_manifest(load_dataset(dataset));
    if (spec.endpoint == "oracle-regenerator") ctx.predictions = read_predictions(spec.argument);
    std::string line;
    while (std::getline(std::cin, line)) {
        if (trim(line).empty()) continue;
        nlohmann::ordered_json resp;
        try {
            auto req = nlohmann::json::parse(line);
            resp["id"] = req.value("id", "");
            resp["text"] = mock_respond(spec.endpoint, spec.argument, req, ctx);
        } catch (const std::exception& e) {
            resp["id"] = "";
            resp["error"] = e.what();
        }
        std::cout << resp.dump() << std::endl;
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"georef: geometric referring-expression dataset synthesis and evaluation"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(tool_version()));
    std::string config_path;
    app.add_option("--config", config_path, "Settings file of 'key = value' lines; flags and GEOREF_* variables override it")
        ->check(CLI::ExistingFile);

    std::map<std::string, std::unique_ptr<Command>> commands;
    std::map<std::string, int (*)(Command&)> handlers;
    auto add = [&](const std::string& name, const std::string& help, int (*handler)(Command&)) -> Command& {
        auto cmd = std::make_unique<Command>();
        cmd->app = app.add_subcommand(name, help);
        auto& ref = *cmd;
        commands[name] = std::move(cmd);
        handlers[name] = handler;
        return ref;
    };
    const std::string data_dir(default_data_dir());

    auto& synth = add("synth", "Solve, render and serialize 1 Common + N Random scenes per template", run_synth);
    synth.setting("--templates", "templates", std::string(default_templates_dir()), "Directory of .scene templates", false);
    synth.setting("--out,-o", "out", "", "Output directory for scenes", false);
    synth.setting("--per-type-random", "per_type_random", "5", "Random-scheme scenes per template");
    synth.setting("--seed", "seed", "1", "Base seed");
    synth.setting("--max-restarts", "max_restarts", "50", "Solver restarts per scene");
    synth.setting("--jobs,-j", "jobs", default_jobs(), "Parallel scenes", false);

    auto& qagen = add("qagen", "Generate the QA dataset from a scenes directory", run_qagen);
    qagen.setting("--scenes", "scenes", "", "Scenes directory written by synth", false);
    qagen.setting("--out,-o", "out", "", "Dataset JSONL path", false);
    qagen.setting("--two-step-ratio", "two_step_ratio", "0.1", "Share of two-step questions per scene");
    qagen.setting("--seed", "seed", "1", "Question sampling seed");
    qagen.setting("--catalog", "catalog", "", "Question phrasing catalog JSON (bundled catalog if omitted)");

    auto& eval = add("eval", "Evaluate a model adapter on a dataset", run_eval);
    eval.setting("--dataset,-d", "dataset", "", "Dataset JSONL", false);
    eval.setting("--adapter,-a", "adapter", "", "Generator adapter: cmd:<command>, http://host:port or mock:<name>[(arg)]");
    eval.setting("--verifier", "verifier", "", "Verifier adapter for the verify modes (defaults to --adapter)");
    eval.setting("--mode", "mode", "plain", "plain, regenerate or from_verifier");
    eval.setting("--shots-file", "shots_file", data_dir + "/shots.jsonl", "Exemplar JSONL", false);
    eval.setting("--shots", "shots", "3", "Exemplars per prompt");
    eval.setting("--out,-o", "out", "", "Output directory for report.json, records.jsonl and timings.jsonl", false);
    eval.setting("--concurrency,-j", "concurrency", "8", "Items in flight", false);
    eval.setting("--timeout", "timeout", "120", "Seconds per adapter call");
    eval.setting("--retries", "retries", "2", "Retries after a timeout or transport failure");
    eval.setting("--backoff", "backoff", "0.5", "Seconds before the first retry, doubled per retry", false);
    eval.toggle("--skip-verified", "skip_verified", "Keep the initial answer when the verifier judges it correct");

    auto& splits = add("splits", "Build the Common / Random / Hybrid annotation-bias splits", run_splits);
    splits.setting("--dataset,-d", "dataset", "", "Dataset JSONL", false);
    splits.setting("--n", "n", "", "Items per split");
    splits.setting("--seed", "seed", "1", "Sampling seed");
    splits.setting("--out,-o", "out", "", "Output directory", false);

    auto& stats = add("stats", "Print dataset statistics", run_stats);
    stats.setting("--dataset,-d", "dataset", "", "Dataset JSONL", false);

    auto& render = add("render", "Render one scene to SVG", run_render);
    render.setting("--scene", "scene", "", "A .scene program or a scene .json document", false);
    render.setting("--seed", "seed", "1", "Solver and relabeling seed");
    render.setting("--scheme", "scheme", "common", "Identifier scheme: common or random");
    render.setting("--out,-o", "out", "", "SVG path", false);
    render.setting("--json", "json", "", "Also write the scene document here", false);
    render.setting("--stroke-width", "stroke_width", "2", "Stroke width");
    render.setting("--font-size", "font_size", "16", "Label font size");
    render.setting("--label-offset", "label_offset", "10", "Label distance from its point");
    render.setting("--background", "background", "white", "Background color");
    render.toggle("--no-right-angles", "no_right_angles", "Omit right-angle marks");

    auto& reward = add("reward", "Score predictions with the binary accuracy reward", run_reward);
    reward.setting("--predictions,-p", "predictions", "", "JSONL of {\"id\", \"prediction\"}", false);
    reward.setting("--dataset,-d", "dataset", "", "Dataset JSONL", false);
    reward.setting("--out,-o", "out", "", "Per-item rewards JSONL (stdout if omitted)", false);

    auto& check = add("check", "Parse and validate a .scene program", run_check);
    check.setting("--scene", "scene", "", "Scene program", false);
    check.toggle("--print", "print", "Print the canonical form", false);

    auto& mock = add("mock-adapter", "Serve a bundled mock over the line-delimited stdio protocol", run_mock_adapter);
    mock.setting("--name", "name", "", "oracle, null, shuffle, oracle-verifier, oracle-regenerator, fixed or prose", false);
    mock.setting("--arg", "arg", "", "Mock argument (shuffle seed, predictions file, fixed text)", false);
    mock.setting("--dataset,-d", "dataset", "", "Dataset supplying the ground truth", false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    for (auto& [name, cmd] : commands) {
        if (!cmd->app->parsed()) continue;
        try {
            cmd->resolve(config_path);
            return handlers[name](*cmd);
        } catch (const UsageError& e) {
            std::cerr << "georef " << name << ": " << e.what() << "\n";
            return kExitUsage;
        } catch (const SchemaError& e) {
            std::cerr << "georef " << name << ": " << e.what() << "\n";
            return kExitUsage;
        } catch (const ParseError& e) {
            std::cerr << "georef " << name << ": " << e.what() << "\n";
            return kExitUsage;
        } catch (const std::invalid_argument& e) {
            std::cerr << "georef " << name << ": " << e.what() << "\n";
            return kExitUsage;
        } catch (const std::exception& e) {
            std::cerr << "georef " << name << ": " << e.what() << "\n";
            return kExitRuntime;
        }
    }
    return kExitUsage;
}
