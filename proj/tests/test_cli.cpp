// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdio>
#include <fstream>

#include "georef/config.hpp"
#include "georef/util.hpp"
#include "support.hpp"

using namespace georef;

namespace {

struct Run {
    int code;
    std::string output;
};

// Runs the CLI with stdout and stderr captured together.
Run georef_cli(const std::string& args, const std::string& env = {}) {
    std::string cmd = env + (env.empty() ? "" : " ") + GEOREF_BIN + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::string out;
    char buf[4096];
    for (std::size_t n; (n = fread(buf, 1, sizeof buf, pipe)) > 0;) out.append(buf, n);
    int status = pclose(pipe);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

RunConfig synth_config() {
    RunConfig c;
    c.set_scope("synth");
    c.declare("seed", "1");
    c.declare("per_type_random", "5");
    c.declare("out", "", false);
    c.declare("jobs", "1", false);
    return c;
}

const char* no_env(const char*) { return nullptr; }

}  // namespace

TEST_CASE("settings precedence: flag over env over file over default") {
    auto c = synth_config();
    CHECK(c.get("seed") == "1");
    CHECK(c.source("seed") == RunConfig::Source::Default);
    c.parse_file("# comment\nseed = 3\nper_type_random = 2\n");
    CHECK(c.get_uint("seed") == 3);
    CHECK(c.source("seed") == RunConfig::Source::File);
    c.load_env([](const char* name) -> const char* { return std::string(name) == "GEOREF_SEED" ? "4" : nullptr; });
    CHECK(c.get_uint("seed") == 4);
    CHECK(c.source("seed") == RunConfig::Source::Env);
    CHECK(c.get_int("per_type_random") == 2);
    c.set_flag("seed", "5");
    CHECK(c.get_uint("seed") == 5);
    CHECK(c.source("seed") == RunConfig::Source::Flag);
    CHECK(RunConfig::env_name("two-step.ratio") == "GEOREF_TWO_STEP_RATIO");
}

TEST_CASE("config file sections and errors") {
    auto c = synth_config();
    c.parse_file("seed = 2\n[qagen]\nseed = 9\nbogus = 1\n[synth]\nper_type_random = 7\n");
    CHECK(c.get("seed") == "2");
    CHECK(c.get("per_type_random") == "7");
    CHECK_THROWS_AS(synth_config().parse_file("[synth]\nunknown_key = 1\n"), std::invalid_argument);
    CHECK_THROWS_AS(synth_config().parse_file("seed 3\n"), std::invalid_argument);
    auto d = synth_config();
    d.set_flag("seed", "abc");
    CHECK_THROWS_AS(d.get_uint("seed"), std::invalid_argument);
}

TEST_CASE("config hash covers only output-relevant settings") {
    auto a = synth_config(), b = synth_config();
    a.load_env(no_env);
    CHECK(a.hash() == b.hash());
    CHECK(a.hash().size() == 16);
    b.set_flag("out", "/elsewhere");
    b.set_flag("jobs", "16");
    CHECK(a.hash() == b.hash());
    b.set_flag("seed", "2");
    CHECK(a.hash() != b.hash());
    auto q = synth_config();
    q.set_scope("qagen");
    CHECK(q.hash() != a.hash());
}

TEST_CASE("cli exit codes and messages") {
    auto dir = scratch_dir("cli");
    SUBCASE("version and help") {
        CHECK(georef_cli("--version").code == 0);
        CHECK(georef_cli("--help").code == 0);
    }
    SUBCASE("usage errors exit 2") {
        CHECK(georef_cli("").code == 2);
        CHECK(georef_cli("frobnicate").code == 2);
        CHECK(georef_cli("synth --per-type-random").code == 2);
        CHECK(georef_cli("synth -o " + (dir / "s").string() + " --per-type-random many").code == 2);
    }
    SUBCASE("empty templates directory") {
        std::filesystem::create_directories(dir / "empty");
        auto r = georef_cli("synth --templates " + (dir / "empty").string() + " -o " + (dir / "out").string());
        CHECK(r.code != 0);
        CHECK(r.output.find("no templates") != std::string::npos);
    }
    SUBCASE("invalid scene program") {
        std::ofstream(dir / "bad.scene") << "point A; point A\n";
        auto r = georef_cli("check --scene " + (dir / "bad.scene").string());
        CHECK(r.code == 2);
        CHECK(r.output.find("duplicate identifier") != std::string::npos);
        CHECK(georef_cli("check --scene " + template_path("circle_tangent")).code == 0);
    }
    SUBCASE("invalid adapter spec") {
        auto r = georef_cli("eval -d " + (dir / "none.jsonl").string() + " -a bogus:thing -o " + (dir / "e").string());
        CHECK(r.code == 2);
    }
}

TEST_CASE("end-to-end through the cli") {
    auto dir = scratch_dir("cli_e2e");
    auto tdir = dir / "templates";
    std::filesystem::create_directories(tdir);
    for (const char* t : {"circle_tangent", "parallel_transversal", "triangle_midline"})
        std::filesystem::copy_file(template_path(t), tdir / (std::string(t) + ".scene"));
    auto scenes = (dir / "scenes").string(), qa = (dir / "qa.jsonl").string();

    auto synth = georef_cli("synth --templates " + tdir.string() + " -o " + scenes);
    REQUIRE(synth.code == 0);
    std::size_t svgs = 0;
    for (const auto& e : std::filesystem::directory_iterator(scenes)) svgs += e.path().extension() == ".svg";
    CHECK(svgs == 18);

    REQUIRE(georef_cli("qagen --scenes " + scenes + " -o " + qa).code == 0);
    auto stats = georef_cli("stats -d " + qa);
    CHECK(stats.code == 0);
    CHECK(stats.output.find("Total Questions") != std::string::npos);

    auto eval = georef_cli("eval -d " + qa + " -a mock:oracle -o " + (dir / "eval").string());
    REQUIRE(eval.code == 0);
    auto report = nlohmann::json::parse(read_file((dir / "eval" / "report.json").string()));
    CHECK(report.at("overall").at("accuracy").get<double>() == 100.0);

    // Env settings apply; flags beat them.
    CHECK(georef_cli("eval -d " + qa + " -a mock:null -o " + (dir / "env").string(), "GEOREF_ADAPTER=mock:oracle").code == 0);
    report = nlohmann::json::parse(read_file((dir / "env" / "report.json").string()));
    CHECK(report.at("overall").at("accuracy").get<double>() < 100.0);

    // The oracle's answers, fed back as predictions, earn full reward.
    std::ofstream preds(dir / "preds.jsonl");
    for (const auto& line : split_lines(read_file(qa))) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        preds << nlohmann::json{{"id", j.at("id")}, {"prediction", j.at("answers").at("canonical")}}.dump() << "\n";
    }
    preds.close();
    auto reward = georef_cli("reward -p " + (dir / "preds.jsonl").string() + " -d " + qa + " -o " + (dir / "rewards.jsonl").string());
    CHECK(reward.code == 0);
    CHECK(reward.output.find("mean reward: 1") != std::string::npos);

    auto splits = georef_cli("splits -d " + qa + " --n 10 -o " + (dir / "splits").string());
    CHECK(splits.code == 0);
    for (const char* f : {"common.jsonl", "random.jsonl", "hybrid.jsonl"}) CHECK(std::filesystem::exists(dir / "splits" / f));
    CHECK(georef_cli("splits -d " + qa + " --n 100000 -o " + (dir / "splits2").string()).code == 2);

    auto render = georef_cli("render --scene " + template_path("circle_tangent") + " -o " + (dir / "one.svg").string());
    CHECK(render.code == 0);
    CHECK(read_file((dir / "one.svg").string()).find("<svg") != std::string::npos);
}
