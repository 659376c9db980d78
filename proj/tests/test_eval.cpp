// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <atomic>
#include <deque>
#include <fstream>
#include <thread>

#include "georef/eval.hpp"
#include "georef/util.hpp"
#include "httplib.h"
#include "fixtures.hpp"
#include "support.hpp"

using namespace georef;

namespace {

// Replies from a fixed script and records every prompt it receives.
class Scripted : public ModelAdapter {
public:
    explicit Scripted(std::deque<std::string> replies) : replies_(std::move(replies)) {}
    std::string query(const Prompt& p) override {
        seen.push_back(p);
        if (replies_.empty()) return "";
        auto r = replies_.front();
        replies_.pop_front();
        return r;
    }
    std::vector<Prompt> seen;

private:
    std::deque<std::string> replies_;
};

// Counts queries across all adapters built by a factory.
class Counting : public ModelAdapter {
public:
    Counting(std::unique_ptr<ModelAdapter> inner, std::atomic<int>& calls) : inner_(std::move(inner)), calls_(calls) {}
    std::string query(const Prompt& p) override {
        ++calls_;
        return inner_->query(p);
    }

private:
    std::unique_ptr<ModelAdapter> inner_;
    std::atomic<int>& calls_;
};

// Writes a predictions file and returns the regenerator mock spec that replays it.
std::string regenerator_spec(const std::string& name, const std::map<std::string, std::string>& predictions) {
    auto path = scratch_dir(name) / "predictions.jsonl";
    std::ofstream out(path);
    for (const auto& [id, text] : predictions) out << nlohmann::json{{"id", id}, {"prediction", text}}.dump() << "\n";
    return "mock:oracle-regenerator(" + path.string() + ")";
}

AdapterFactory mock_factory(const std::string& spec, const DatasetManifest& m) {
    auto ctx = std::make_shared<MockContext>(MockContext::from_manifest(m));
    auto parsed = parse_adapter_spec(spec);
    return [parsed, ctx] { return make_adapter(parsed, ctx); };
}

EvalConfig plain(int shots = 0) {
    EvalConfig cfg;
    cfg.shots = shots;
    cfg.concurrency = 4;
    return cfg;
}

Prompt prompt_for(const QAItem& item) { return build_prompt(item, {}, 0, ""); }

}  // namespace

TEST_CASE("prompts") {
    auto shots = load_shots(data_dir() + "/shots.jsonl");
    REQUIRE(shots.size() >= 3);
    auto item = make_item("q1", Category::Position, "D", {"D"});
    SUBCASE("three worked examples precede the question") {
        auto p = build_prompt(item, shots, 3, "");
        CHECK(p.shots.size() == 3);
        auto text = p.text();
        std::size_t last = 0;
        for (int i = 0; i < 3; ++i) {
            auto at = text.find(shots[i].question);
            REQUIRE(at != std::string::npos);
            CHECK(at >= last);
            last = at;
        }
        CHECK(text.find("Example 3") != std::string::npos);
        CHECK(text.find("Example 4") == std::string::npos);
        CHECK(text.rfind(item.question) > last);
        CHECK(build_prompt(item, shots, 3, "").text() == text);
    }
    SUBCASE("zero-shot has no exemplar block") {
        auto p = build_prompt(item, shots, 0, "");
        CHECK(p.shots.empty());
        CHECK(p.text().find("Example") == std::string::npos);
    }
    SUBCASE("exemplars must be disjoint from the dataset") {
        DatasetManifest m;
        m.items = {make_item(shots[0].id, Category::Position, "D", {"D"})};
        CHECK_THROWS_AS(check_shots(shots, 3, m), std::invalid_argument);
        CHECK_THROWS_AS(check_shots(shots, 99, eval_fixture()), std::invalid_argument);
        CHECK_NOTHROW(check_shots(shots, 3, eval_fixture()));
    }
    SUBCASE("missing exemplar file") {
        CHECK_THROWS(load_shots(data_dir() + "/does_not_exist.jsonl"));
    }
    SUBCASE("request document fields") {
        auto j = build_prompt(item, shots, 1, "").to_request();
        for (const char* k : {"id", "question", "image_path", "system", "shots", "history", "role", "decoding_hint"})
            CHECK(j.contains(k));
    }
}

TEST_CASE("answer extraction") {
    CHECK(extract_answer("Let me think.\nThe lines cross at E.\nAnswer: angle FBA") == "angle FBA");
    CHECK(extract_answer("The tangent point is A.").find('A') != std::string::npos);
    CHECK(extract_answer("") == "");
    CHECK(extract_answer("first\n\nsegment DA.\n\n") == "segment DA");
    CHECK(extract_answer("answer: AB\nANSWER: CD") == "CD");
}

TEST_CASE("scoring") {
    auto ad = make_item("a", Category::Shape, "AD", {"AD", "DA"});
    CHECK(score_item("DA", ad) == 1);
    CHECK(score_item("BC", ad) == 0);
    auto inherited = make_item("b", Category::Relationship, "AD", {"AD", "AE", "DA", "DE", "EA", "ED"});
    CHECK(score_item("ED", inherited) == 1);
}

TEST_CASE("hand-scored fixture") {
    auto m = eval_fixture();
    SUBCASE("oracle") {
        auto r = evaluate(m, {}, mock_factory("mock:oracle", m), nullptr, plain(), "oracle");
        CHECK(r.overall.accuracy == 100.0);
    }
    SUBCASE("null") {
        auto r = evaluate(m, {}, mock_factory("mock:null", m), nullptr, plain(), "null");
        CHECK(r.overall.correct == 2);
        CHECK(r.overall.accuracy == 20.0);
        CHECK(r.categories.at(Category::Position).accuracy == doctest::Approx(100.0 / 3.0));
        CHECK(r.categories.at(Category::Shape).accuracy == doctest::Approx(100.0 / 3.0));
        CHECK(r.categories.at(Category::Relationship).accuracy == 0.0);
    }
    SUBCASE("fixed letter") {
        auto r = evaluate(m, {}, mock_factory("mock:fixed(A)", m), nullptr, plain(), "fixed");
        CHECK(r.categories.at(Category::Position).correct == 1);
        CHECK(r.categories.at(Category::Shape).correct == 0);
        CHECK(r.categories.at(Category::Relationship).correct == 1);
        CHECK(r.categories.at(Category::Relationship).accuracy == 25.0);
        CHECK(r.overall.accuracy == 20.0);
        std::size_t n = 0;
        for (const auto& [c, s] : r.categories) n += s.n;
        CHECK(n == r.overall.n);
    }
    SUBCASE("records are sorted and rewards agree with correctness") {
        auto r = evaluate(m, {}, mock_factory("mock:fixed(segment AC)", m), nullptr, plain(), "fixed");
        CHECK(r.overall.correct == 1);
        for (std::size_t i = 1; i < r.records.size(); ++i) CHECK(r.records[i - 1].item_id < r.records[i].item_id);
        for (const auto& rec : r.records) CHECK(rec.reward == (rec.correct ? 1 : 0));
    }
}

TEST_CASE("adapter specs") {
    CHECK(parse_adapter_spec("mock:shuffle(7)").argument == "7");
    CHECK(parse_adapter_spec("cmd:python3 model.py").transport == Transport::Subprocess);
    CHECK(parse_adapter_spec("http://localhost:8000").transport == Transport::Http);
    CHECK_THROWS_AS(parse_adapter_spec("ftp://x"), std::invalid_argument);
    CHECK_THROWS_AS(parse_adapter_spec("cmd:"), std::invalid_argument);
}

TEST_CASE("verify and regenerate") {
    auto m = eval_fixture();
    const auto& item = m.items[3];  // s1, answer AB
    auto ctx = std::make_shared<MockContext>(MockContext::from_manifest(m));
    SUBCASE("oracle verifier catches a wrong answer and the regenerator corrects it") {
        auto gen = make_adapter(parse_adapter_spec(regenerator_spec("eval_regen_wrong", {{"s1", "CD"}})), ctx);
        auto ver = make_adapter(parse_adapter_spec("mock:oracle-verifier"), ctx);
        auto t = verify_and_regenerate(prompt_for(item), *gen, *ver);
        CHECK(t.initial_answer == "CD");
        CHECK(t.verifier_judgment == Judgment::Incorrect);
        CHECK(score_item(t.final_answer, item) == 1);
        CHECK(t.calls == 3);
    }
    SUBCASE("verified-correct answers skip regeneration when asked") {
        auto gen = make_adapter(parse_adapter_spec(regenerator_spec("eval_regen_right", {{"s1", "BA"}})), ctx);
        auto ver = make_adapter(parse_adapter_spec("mock:oracle-verifier"), ctx);
        VerifyConfig cfg;
        cfg.skip_when_verified_correct = true;
        auto t = verify_and_regenerate(prompt_for(item), *gen, *ver, cfg);
        CHECK(t.verifier_judgment == Judgment::Correct);
        CHECK(t.final_answer == t.initial_answer);
        CHECK(t.calls == 2);
    }
    SUBCASE("untagged verifier output still regenerates with the raw text as feedback") {
        Scripted gen({"CD", "AB"}), ver({"Looks plausible to me."});
        auto t = verify_and_regenerate(prompt_for(item), gen, ver);
        CHECK(t.verifier_judgment == Judgment::Unparseable);
        CHECK(t.calls == 3);
        CHECK(t.final_answer == "AB");
        REQUIRE(gen.seen.size() == 2);
        const auto& history = gen.seen[1].history;
        REQUIRE(history.size() >= 3);
        CHECK(history[1].content == "CD");
        CHECK(history.back().content.find("Looks plausible to me.") != std::string::npos);
    }
    SUBCASE("verdict parsing") {
        auto [reasoning, j] = parse_verdict("<reasoning>AB is the chord.</reasoning><judgment>correct</judgment>");
        CHECK(reasoning == "AB is the chord.");
        CHECK(j == Judgment::Correct);
        CHECK(parse_verdict("<judgment> Incorrect </judgment>").second == Judgment::Incorrect);
        CHECK(parse_verdict("no tags").second == Judgment::Unparseable);
    }
}

TEST_CASE("generation from the verifier") {
    auto m = eval_fixture();
    const auto& item = m.items[6];  // r1, answer EF
    SUBCASE("tag content becomes the final answer") {
        Scripted gen({"GH"}), ver({"<new_answer>AD</new_answer>"});
        auto t = generation_from_verifier(prompt_for(item), gen, ver);
        CHECK(t.final_answer == "AD");
        CHECK(t.mode == EvalMode::FromVerifier);
        CHECK(t.calls == 2);
    }
    SUBCASE("prose falls back to the initial answer") {
        Scripted gen({"GH"}), ver({"I would say the answer is AD."});
        CHECK(generation_from_verifier(prompt_for(item), gen, ver).final_answer == "GH");
    }
    SUBCASE("oracle verifier is always right") {
        auto ctx = std::make_shared<MockContext>(MockContext::from_manifest(m));
        auto gen = make_adapter(parse_adapter_spec("mock:null"), ctx);
        auto ver = make_adapter(parse_adapter_spec("mock:oracle-verifier"), ctx);
        for (const auto& it : m.items) CHECK(score_item(generation_from_verifier(prompt_for(it), *gen, *ver).final_answer, it) == 1);
    }
}

TEST_CASE("verify modes in batch") {
    auto m = eval_fixture();
    std::map<std::string, std::string> preds;
    for (const auto& it : m.items) preds[it.id] = it.id[0] == 'r' ? "QQ" : it.answers.canonical;
    auto gen = mock_factory(regenerator_spec("eval_batch", preds), m);
    auto base = evaluate(m, {}, gen, nullptr, plain(), "gen");
    CHECK(base.overall.accuracy == 60.0);
    auto cfg = plain();
    cfg.mode = EvalMode::Regenerate;
    auto verified = evaluate(m, {}, gen, mock_factory("mock:oracle-verifier", m), cfg, "gen");
    CHECK(verified.overall.accuracy == 100.0);
    cfg.mode = EvalMode::FromVerifier;
    auto prose = evaluate(m, {}, gen, mock_factory("mock:prose", m), cfg, "gen");
    CHECK(prose.overall.accuracy == base.overall.accuracy);
    for (std::size_t i = 0; i < prose.records.size(); ++i) {
        REQUIRE(prose.records[i].trace.has_value());
        CHECK(prose.records[i].trace->final_answer == prose.records[i].trace->initial_answer);
    }
}

TEST_CASE("resuming an interrupted run gives the same report") {
    auto m = eval_fixture();
    auto dir = scratch_dir("eval_resume");
    auto cfg = plain();
    cfg.out_dir = (dir / "full").string();
    auto full = evaluate(m, {}, mock_factory("mock:fixed(A)", m), nullptr, cfg, "fixed");

    auto partial_dir = dir / "partial";
    std::filesystem::create_directories(partial_dir);
    auto lines = split_lines(read_file((dir / "full" / "records.jsonl").string()));
    std::ofstream out(partial_dir / "records.jsonl");
    for (std::size_t i = 0; i < 4; ++i) out << lines[i] << "\n";
    out.close();

    std::atomic<int> calls{0};
    auto inner = mock_factory("mock:fixed(A)", m);
    AdapterFactory counting = [&] { return std::make_unique<Counting>(inner(), calls); };
    cfg.out_dir = partial_dir.string();
    auto resumed = evaluate(m, {}, counting, nullptr, cfg, "fixed");
    CHECK(calls == 6);
    CHECK(report_to_json(resumed).dump() == report_to_json(full).dump());
    CHECK(read_file((partial_dir / "report.json").string()) == read_file((dir / "full" / "report.json").string()));
    CHECK(read_file((partial_dir / "records.jsonl").string()) == read_file((dir / "full" / "records.jsonl").string()));
}

TEST_CASE("per-item failures are isolated") {
    auto m = eval_fixture();
    auto oracle = mock_factory("mock:oracle", m);
    class Flaky : public ModelAdapter {
    public:
        explicit Flaky(std::unique_ptr<ModelAdapter> inner) : inner_(std::move(inner)) {}
        std::string query(const Prompt& p) override {
            if (p.id == "s2") throw TransportError("connection reset");
            return inner_->query(p);
        }

    private:
        std::unique_ptr<ModelAdapter> inner_;
    };
    auto r = evaluate(m, {}, [&] { return std::make_unique<Flaky>(oracle()); }, nullptr, plain(), "flaky");
    CHECK(r.overall.correct == 9);
    for (const auto& rec : r.records) {
        if (rec.item_id == "s2") {
            CHECK_FALSE(rec.correct);
            CHECK(rec.error.find("connection reset") != std::string::npos);
        } else {
            CHECK(rec.correct);
        }
    }
}

TEST_CASE("subprocess transport") {
    auto m = eval_fixture();
    auto dir = scratch_dir("eval_subprocess");
    auto path = (dir / "qa.jsonl").string();
    write_dataset(m, path);
    auto ctx = std::make_shared<MockContext>(MockContext::from_manifest(m));
    SUBCASE("bundled oracle over stdio") {
        auto spec = parse_adapter_spec(std::string("cmd:") + GEOREF_BIN + " mock-adapter --name oracle -d " + path);
        auto a = make_adapter(spec, ctx);
        for (const auto& it : m.items) CHECK(a->query(prompt_for(it)) == it.answers.canonical);
    }
    SUBCASE("non-conforming responses are malformed") {
        auto a = make_adapter(parse_adapter_spec("cmd:cat"), ctx);
        CHECK_THROWS_AS(a->query(prompt_for(m.items[0])), MalformedResponse);
    }
    SUBCASE("silent child times out") {
        auto spec = parse_adapter_spec("cmd:sleep 30");
        spec.timeout = 0.2;
        spec.max_retries = 0;
        auto a = make_adapter(spec, ctx);
        CHECK_THROWS_AS(a->query(prompt_for(m.items[0])), TimeoutError);
    }
}

TEST_CASE("http transport") {
    auto m = eval_fixture();
    auto ctx = std::make_shared<MockContext>(MockContext::from_manifest(m));
    SUBCASE("unreachable endpoint") {
        auto spec = parse_adapter_spec("http://127.0.0.1:1");
        spec.max_retries = 1;
        spec.backoff = 0.01;
        spec.timeout = 1.0;
        auto a = make_adapter(spec, ctx);
        CHECK_THROWS_AS(a->query(prompt_for(m.items[0])), TransportError);
    }
    SUBCASE("local server") {
        httplib::Server server;
        server.Post("/v1/answer", [](const httplib::Request& req, httplib::Response& res) {
            auto j = nlohmann::json::parse(req.body);
            nlohmann::json out = {{"id", j.at("id")}, {"text", "Answer: segment BA"}};
            res.set_content(out.dump(), "application/json");
        });
        int port = server.bind_to_any_port("127.0.0.1");
        std::thread t([&] { server.listen_after_bind(); });
        server.wait_until_ready();
        auto a = make_adapter(parse_adapter_spec("http://127.0.0.1:" + std::to_string(port)), ctx);
        auto raw = a->query(prompt_for(m.items[3]));
        server.stop();
        t.join();
        CHECK(score_item(extract_answer(raw), m.items[3]) == 1);
    }
}

TEST_CASE("shuffle adapter is nearly always wrong") {
    auto m = eval_fixture();
    auto r = evaluate(m, {}, mock_factory("mock:shuffle(3)", m), nullptr, plain(), "shuffle");
    CHECK(r.overall.correct == 0);
}
