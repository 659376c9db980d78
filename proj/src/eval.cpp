// SPDX-License-Identifier: Apache-2.0
#include "georef/eval.hpp"

#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstring>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "georef/util.hpp"
#include "httplib.h"

namespace georef {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;
namespace fs = std::filesystem;

constexpr std::string_view kSystemPrompt =
    "You are given a geometry diagram whose points are labeled with capital letters, and a question that refers to "
    "one element of the diagram. Identify that element and reply with its name: a single letter for a point, two "
    "letters for a segment or line, three letters with the vertex in the middle for an angle. Finish with a line of "
    "the form 'Answer: <name>'.";

constexpr std::string_view kVerifyInstruction =
    "Check whether the answer above correctly identifies the requested element in the diagram. Give your reasoning "
    "inside <reasoning></reasoning> tags, then your verdict as <judgment>correct</judgment> or "
    "<judgment>incorrect</judgment>.";

constexpr std::string_view kRegenerateInstruction =
    "A reviewer assessed your answer:\n{feedback}\nTaking this feedback into account, give your final answer as "
    "'Answer: <name>'.";

constexpr std::string_view kCorrectInstruction =
    "Check whether the answer above correctly identifies the requested element in the diagram. If it is wrong, "
    "provide the corrected answer. In either case put the final answer inside <new_answer></new_answer> tags.";

std::string tag_content(std::string_view text, std::string_view tag) {
    std::string open = "<" + std::string(tag) + ">", close = "</" + std::string(tag) + ">";
    auto a = text.rfind(open);
    if (a == std::string_view::npos) return {};
    auto b = text.find(close, a + open.size());
    if (b == std::string_view::npos) return {};
    return std::string(text.substr(a + open.size(), b - a - open.size()));
}

bool has_tag(std::string_view text, std::string_view tag) {
    std::string open = "<" + std::string(tag) + ">", close = "</" + std::string(tag) + ">";
    auto a = text.rfind(open);
    return a != std::string_view::npos && text.find(close, a) != std::string_view::npos;
}

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string parse_response(const std::string& body, const std::string& id) {
    json j;
    try {
        j = json::parse(body);
    } catch (const json::parse_error&) {
        throw MalformedResponse("response is not JSON: " + body.substr(0, 200));
    }
    if (!j.is_object() || !j.contains("text") || !j["text"].is_string()) throw MalformedResponse("response lacks a text field");
    if (j.contains("id") && j["id"].is_string() && j["id"].get<std::string>() != id)
        throw MalformedResponse("response id '" + j["id"].get<std::string>() + "' does not match request '" + id + "'");
    return j["text"].get<std::string>();
}

// ---------------------------------------------------------------------------
// Transports

class SubprocessAdapter : public ModelAdapter {
public:
    SubprocessAdapter(std::string command, double timeout) : command_(std::move(command)), timeout_(timeout) {}
    ~SubprocessAdapter() override { stop(); }

    std::string query(const Prompt& p) override {
        std::string line = p.to_request().dump() + "\n";
        if (pid_ < 0) start();
        const char* data = line.data();
        std::size_t left = line.size();
        while (left > 0) {
            ssize_t n = ::write(in_fd_, data, left);
            if (n < 0) {
                if (errno == EINTR) continue;
                stop();
                throw TransportError("cannot write to adapter process: " + std::string(std::strerror(errno)));
            }
            data += n;
            left -= static_cast<std::size_t>(n);
        }
        auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_);
        for (;;) {
            auto nl = buffer_.find('\n');
            if (nl != std::string::npos) {
                std::string resp = buffer_.substr(0, nl);
                buffer_.erase(0, nl + 1);
                return parse_response(resp, p.id);
            }
            auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
            if (remaining.count() <= 0) {
                stop();
                throw TimeoutError("adapter process did not answer within " + format_double(timeout_) + " s");
            }
            pollfd pfd{out_fd_, POLLIN, 0};
            int r = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(remaining.count(), 1000)));
            if (r < 0 && errno != EINTR) {
                stop();
                throw TransportError("poll failed");
            }
            if (r <= 0) continue;
            char buf[65536];
            ssize_t n = ::read(out_fd_, buf, sizeof buf);
            if (n < 0 && errno == EINTR) continue;
            if (n <= 0) {
                stop();
                throw TransportError("adapter process closed its output");
            }
            buffer_.append(buf, static_cast<std::size_t>(n));
        }
    }

private:
    void start() {
        int to_child[2], from_child[2];
        if (::pipe(to_child) != 0 || ::pipe(from_child) != 0) throw TransportError("cannot create pipes");
        pid_t pid = ::fork();
        if (pid < 0) throw TransportError("cannot fork adapter process");
        if (pid == 0) {
            // Own process group, so stop() also reaches grandchildren of the shell.
            ::setpgid(0, 0);
            ::dup2(to_child[0], STDIN_FILENO);
            ::dup2(from_child[1], STDOUT_FILENO);
            ::close(to_child[0]);
            ::close(to_child[1]);
            ::close(from_child[0]);
            ::close(from_child[1]);
            ::execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
            ::_exit(127);
        }
        ::setpgid(pid, pid);
        ::close(to_child[0]);
        ::close(from_child[1]);
        pid_ = pid;
        in_fd_ = to_child[1];
        out_fd_ = from_child[0];
        buffer_.clear();
    }

    void stop() {
        if (pid_ < 0) return;
        ::close(in_fd_);
        ::close(out_fd_);
        int status = 0;
        for (int i = 0; i < 50; ++i) {
            if (::waitpid(pid_, &status, WNOHANG) != 0) {
                pid_ = -1;
                return;
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(10));
        }
        ::kill(-pid_, SIGKILL);
        ::waitpid(pid_, &status, 0);
        pid_ = -1;
    }

    std::string command_;
    double timeout_;
    pid_t pid_ = -1;
    int in_fd_ = -1, out_fd_ = -1;
    std::string buffer_;
};

class HttpAdapter : public ModelAdapter {
public:
    HttpAdapter(const std::string& url, double timeout) : client_(url) {
        auto secs = static_cast<time_t>(timeout);
        auto usecs = static_cast<time_t>((timeout - static_cast<double>(secs)) * 1e6);
        client_.set_connection_timeout(secs, usecs);
        client_.set_read_timeout(secs, usecs);
        client_.set_write_timeout(secs, usecs);
    }

    std::string query(const Prompt& p) override {
        auto res = client_.Post("/v1/answer", p.to_request().dump(), "application/json");
        if (!res) {
            auto err = res.error();
            if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read)
                throw TimeoutError("HTTP adapter timed out (" + httplib::to_string(err) + ")");
            throw TransportError("HTTP adapter unreachable (" + httplib::to_string(err) + ")");
        }
        if (res->status != 200) throw TransportError("HTTP adapter returned status " + std::to_string(res->status));
        return parse_response(res->body, p.id);
    }

private:
    httplib::Client client_;
};

class MockAdapter : public ModelAdapter {
public:
    MockAdapter(std::string name, std::string arg, std::shared_ptr<const MockContext> ctx)
        : name_(std::move(name)), arg_(std::move(arg)), ctx_(std::move(ctx)) {}

    std::string query(const Prompt& p) override {
        return mock_respond(name_, arg_, json::parse(p.to_request().dump()), *ctx_);
    }

private:
    std::string name_, arg_;
    std::shared_ptr<const MockContext> ctx_;
};

class RetryingAdapter : public ModelAdapter {
public:
    RetryingAdapter(std::unique_ptr<ModelAdapter> inner, int retries, double backoff)
        : inner_(std::move(inner)), retries_(retries), backoff_(backoff) {}

    std::string query(const Prompt& p) override {
        for (int attempt = 0;; ++attempt) {
            try {
                return inner_->query(p);
            } catch (const TimeoutError&) {
                if (attempt >= retries_) throw;
            } catch (const TransportError&) {
                if (attempt >= retries_) throw;
            }
            std::this_thread::sleep_for(std::chrono::duration<double>(backoff_ * static_cast<double>(1 << attempt)));
        }
    }

private:
    std::unique_ptr<ModelAdapter> inner_;
    int retries_;
    double backoff_;
};

const std::set<std::string>& mock_names() {
    static const std::set<std::string> names = {"oracle", "null",  "shuffle", "oracle-verifier", "oracle-regenerator",
                                                "fixed",  "prose"};
    return names;
}

// Cyclic permutation of A-Z (no fixed points) drawn from the seed.
std::string derangement(std::uint64_t seed) {
    std::string letters = "ABCDEFGHIJKLMNOPQRSTUVWXYZ";
    Rng rng(mix_seed(seed, 0xde7a));
    for (std::size_t i = letters.size() - 1; i > 0; --i) std::swap(letters[i], letters[rng.below(i)]);
    return letters;
}

std::string last_turn(const json& req, const std::string& role) {
    const auto& h = req.value("history", json::array());
    for (auto it = h.rbegin(); it != h.rend(); ++it)
        if (it->value("role", "") == role) return it->value("content", "");
    return {};
}

}  // namespace

// ---------------------------------------------------------------------------
// Specs and mocks

std::string AdapterSpec::describe() const {
    switch (transport) {
        case Transport::Subprocess: return "cmd:" + endpoint;
        case Transport::Http: return endpoint;
        case Transport::Mock: return "mock:" + endpoint + (argument.empty() ? "" : "(" + argument + ")");
    }
    return endpoint;
}

AdapterSpec parse_adapter_spec(std::string_view spec) {
    AdapterSpec a;
    std::string s = trim(spec);
    auto mock = [&](std::string body) {
        a.transport = Transport::Mock;
        auto open = body.find('(');
        if (open != std::string::npos) {
            if (body.back() != ')') throw std::invalid_argument("malformed mock adapter '" + s + "'");
            a.argument = body.substr(open + 1, body.size() - open - 2);
            body = body.substr(0, open);
        }
        if (!mock_names().count(body)) throw std::invalid_argument("unknown mock adapter '" + body + "'");
        if ((body == "shuffle" || body == "oracle-regenerator" || body == "fixed") && a.argument.empty())
            throw std::invalid_argument("mock adapter '" + body + "' needs an argument");
        if (body == "shuffle") {
            try {
                std::size_t used = 0;
                std::stoull(a.argument, &used);
                if (used != a.argument.size()) throw std::invalid_argument("");
            } catch (const std::exception&) {
                throw std::invalid_argument("shuffle seed must be an integer, got '" + a.argument + "'");
            }
        }
        a.endpoint = body;
        return a;
    };
    if (s.rfind("mock:", 0) == 0) return mock(s.substr(5));
    if (s.rfind("cmd:mock-", 0) == 0) return mock(s.substr(9));
    if (s.rfind("cmd:", 0) == 0) {
        a.transport = Transport::Subprocess;
        a.endpoint = trim(s.substr(4));
        if (a.endpoint.empty()) throw std::invalid_argument("empty adapter command");
        return a;
    }
    if (s.rfind("http://", 0) == 0) {
        a.transport = Transport::Http;
        a.endpoint = s;
        while (!a.endpoint.empty() && a.endpoint.back() == '/') a.endpoint.pop_back();
        if (a.endpoint.size() <= 7) throw std::invalid_argument("adapter URL has no host");
        return a;
    }
    if (s.rfind("https://", 0) == 0) throw std::invalid_argument("https adapters are not supported; use http:// or cmd:");
    throw std::invalid_argument("invalid adapter spec '" + s + "' (expected cmd:..., http://... or mock:...)");
}

MockContext MockContext::from_manifest(const DatasetManifest& m) {
    MockContext c;
    for (const auto& it : m.items) c.answers[it.id] = it.answers;
    return c;
}

std::string mock_respond(const std::string& name, const std::string& argument, const json& req, const MockContext& ctx) {
    const std::string id = req.value("id", "");
    const std::string role = req.value("role", std::string(kRoleGenerator));
    auto it = ctx.answers.find(id);
    const std::string truth = it == ctx.answers.end() ? "X" : it->second.canonical;
    auto judge = [&]() {
        std::string candidate = extract_answer(last_turn(req, "assistant"));
        bool ok = it != ctx.answers.end() && answers_match(candidate, it->second);
        return "<reasoning>The proposed answer " + candidate + (ok ? " names" : " does not name") +
               " the requested element.</reasoning><judgment>" + (ok ? "correct" : "incorrect") + "</judgment>";
    };
    if (name == "null") return "X";
    if (name == "fixed") return argument;
    if (name == "prose") return "I looked at the diagram and the answer seems reasonable to me.";
    if (name == "shuffle") {
        std::string perm = derangement(std::stoull(argument)), out = truth;
        for (auto& c : out)
            if (c >= 'A' && c <= 'Z') c = perm[c - 'A'];
        return out;
    }
    if (name == "oracle" || name == "oracle-verifier") {
        if (role == kRoleVerifier) return judge();
        if (role == kRoleCorrector) return "<reasoning>Checked against the diagram.</reasoning><new_answer>" + truth + "</new_answer>";
        return truth;
    }
    if (name == "oracle-regenerator") {
        auto p = ctx.predictions.find(id);
        std::string initial = p == ctx.predictions.end() ? "X" : p->second;
        if (role == kRoleRegenerator) {
            auto [reasoning, verdict] = parse_verdict(last_turn(req, "user"));
            return verdict == Judgment::Correct ? initial : truth;
        }
        return initial;
    }
    throw std::invalid_argument("unknown mock adapter '" + name + "'");
}

std::unique_ptr<ModelAdapter> make_adapter(const AdapterSpec& spec, std::shared_ptr<const MockContext> ctx) {
    if (!(spec.timeout > 0.0)) throw std::invalid_argument("adapter timeout must be positive");
    std::unique_ptr<ModelAdapter> inner;
    switch (spec.transport) {
        case Transport::Subprocess:
            ::signal(SIGPIPE, SIG_IGN);
            inner = std::make_unique<SubprocessAdapter>(spec.endpoint, spec.timeout);
            break;
        case Transport::Http: inner = std::make_unique<HttpAdapter>(spec.endpoint, spec.timeout); break;
        case Transport::Mock: {
            if (!ctx) ctx = std::make_shared<MockContext>();
            if (spec.endpoint == "oracle-regenerator" && ctx->predictions.empty()) {
                auto copy = std::make_shared<MockContext>(*ctx);
                copy->predictions = read_predictions(spec.argument);
                ctx = copy;
            }
            return std::make_unique<MockAdapter>(spec.endpoint, spec.argument, ctx);
        }
    }
    return std::make_unique<RetryingAdapter>(std::move(inner), spec.max_retries, spec.backoff);
}

std::map<std::string, std::string> read_predictions(const std::string& path) {
    std::map<std::string, std::string> out;
    int no = 0;
    for (const auto& line : split_lines(read_file(path))) {
        ++no;
        if (trim(line).empty()) continue;
        try {
            json j = json::parse(line);
            out[j.at("id").get<std::string>()] = j.at("prediction").get<std::string>();
        } catch (const json::exception& e) {
            throw SchemaError(std::string("malformed prediction: ") + e.what(), no);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Prompts

std::string Prompt::text() const {
    std::ostringstream o;
    o << system << "\n\n";
    for (std::size_t i = 0; i < shots.size(); ++i)
        o << "Example " << i + 1 << "\nImage: " << shots[i].image << "\nQuestion: " << shots[i].question
          << "\nAnswer: " << shots[i].answer << "\n\n";
    o << "Image: " << image_path << "\nQuestion: " << question << "\n";
    for (std::size_t i = 1; i < history.size(); ++i)
        o << (history[i].role == "assistant" ? "Assistant: " : "User: ") << history[i].content << "\n";
    return o.str();
}

ordered_json Prompt::to_request() const {
    ordered_json j;
    j["id"] = id;
    j["question"] = question;
    j["image_path"] = image_path;
    if (!image_svg.empty()) j["image_svg"] = image_svg;
    j["system"] = system;
    ordered_json s = ordered_json::array();
    for (const auto& sh : shots) s.push_back({{"question", sh.question}, {"image_path", sh.image}, {"answer", sh.answer}});
    j["shots"] = s;
    ordered_json h = ordered_json::array();
    for (const auto& t : history) h.push_back({{"role", t.role}, {"content", t.content}});
    j["history"] = h;
    j["role"] = role;
    j["decoding_hint"] = {{"temperature", 0}, {"max_tokens", 1024}};
    j["prompt"] = text();
    return j;
}

std::vector<Shot> load_shots(const std::string& path) {
    std::vector<Shot> out;
    fs::path dir = fs::path(path).parent_path();
    int no = 0;
    for (const auto& line : split_lines(read_file(path))) {
        ++no;
        if (trim(line).empty()) continue;
        try {
            json j = json::parse(line);
            Shot s{j.at("id").get<std::string>(), j.at("question").get<std::string>(), j.at("image").get<std::string>(),
                   j.at("answer").get<std::string>()};
            if (!s.image.empty() && fs::path(s.image).is_relative()) s.image = (dir / s.image).lexically_normal().string();
            out.push_back(std::move(s));
        } catch (const json::exception& e) {
            throw SchemaError(std::string("malformed exemplar: ") + e.what(), no);
        }
    }
    return out;
}

void check_shots(const std::vector<Shot>& shots, int count, const DatasetManifest& m) {
    if (count < 0) throw std::invalid_argument("shot count must be non-negative");
    if (static_cast<std::size_t>(count) > shots.size())
        throw std::invalid_argument("exemplar file has " + std::to_string(shots.size()) + " exemplars, " +
                                    std::to_string(count) + " requested");
    std::set<std::string> ids;
    for (const auto& it : m.items) ids.insert(it.id);
    for (int i = 0; i < count; ++i)
        if (ids.count(shots[i].id)) throw std::invalid_argument("exemplar '" + shots[i].id + "' overlaps the dataset");
}

Prompt build_prompt(const QAItem& item, const std::vector<Shot>& shots, int count, const std::string& images_dir) {
    if (count < 0 || static_cast<std::size_t>(count) > shots.size())
        throw std::invalid_argument("not enough exemplars for a " + std::to_string(count) + "-shot prompt");
    Prompt p;
    p.id = item.id;
    p.system = std::string(kSystemPrompt);
    p.shots.assign(shots.begin(), shots.begin() + count);
    p.question = item.question;
    fs::path image = images_dir.empty() ? fs::path(item.image) : fs::path(images_dir) / item.image;
    p.image_path = image.string();
    if (!images_dir.empty() && fs::exists(image)) p.image_svg = read_file(p.image_path);
    p.history.push_back({"user", item.question});
    return p;
}

// ---------------------------------------------------------------------------
// Extraction and scoring

std::string extract_answer(std::string_view raw) {
    std::string text(raw);
    std::string low = lower(text);
    auto marker = low.rfind("answer:");
    std::string candidate;
    if (marker != std::string::npos) {
        candidate = text.substr(marker + 7);
        auto nl = candidate.find('\n');
        if (nl != std::string::npos) candidate = candidate.substr(0, nl);
        candidate = trim(candidate);
    }
    if (candidate.empty()) {
        auto lines = split_lines(text);
        for (auto it = lines.rbegin(); it != lines.rend(); ++it)
            if (!trim(*it).empty()) {
                candidate = trim(*it);
                break;
            }
    }
    while (!candidate.empty() && (candidate.back() == '.' || candidate.back() == ',' || candidate.back() == ';'))
        candidate.pop_back();
    return candidate;
}

int score_item(std::string_view prediction, const QAItem& item) { return answers_match(prediction, item.answers) ? 1 : 0; }

// ---------------------------------------------------------------------------
// Verify flows

std::string_view eval_mode_name(EvalMode m) {
    static constexpr std::string_view names[] = {"plain", "regenerate", "from_verifier"};
    return names[static_cast<int>(m)];
}

EvalMode eval_mode_from_name(std::string_view s) {
    for (int i = 0; i < 3; ++i)
        if (eval_mode_name(static_cast<EvalMode>(i)) == s) return static_cast<EvalMode>(i);
    throw std::invalid_argument("unknown eval mode '" + std::string(s) + "' (expected plain, regenerate or from_verifier)");
}

std::string_view judgment_name(Judgment j) {
    static constexpr std::string_view names[] = {"correct", "incorrect", "unparseable"};
    return names[static_cast<int>(j)];
}

std::pair<std::string, Judgment> parse_verdict(std::string_view text) {
    std::string reasoning = trim(tag_content(text, "reasoning"));
    if (!has_tag(text, "judgment")) return {reasoning, Judgment::Unparseable};
    std::string verdict = lower(trim(tag_content(text, "judgment")));
    if (verdict == "correct") return {reasoning, Judgment::Correct};
    if (verdict == "incorrect") return {reasoning, Judgment::Incorrect};
    return {reasoning, Judgment::Unparseable};
}

std::optional<std::string> parse_new_answer(std::string_view text) {
    if (!has_tag(text, "new_answer")) return std::nullopt;
    std::string v = trim(tag_content(text, "new_answer"));
    if (v.empty()) return std::nullopt;
    return v;
}

VerifyTrace verify_and_regenerate(const Prompt& base, ModelAdapter& gen, ModelAdapter& ver, const VerifyConfig& cfg) {
    VerifyTrace t;
    t.mode = EvalMode::Regenerate;
    Prompt p = base;
    p.role = std::string(kRoleGenerator);
    std::string first = gen.query(p);
    ++t.calls;
    t.initial_answer = extract_answer(first);

    Prompt v = base;
    v.role = std::string(kRoleVerifier);
    v.history.push_back({"assistant", first});
    v.history.push_back({"user", std::string(kVerifyInstruction)});
    std::string verdict = ver.query(v);
    ++t.calls;
    auto [reasoning, judgment] = parse_verdict(verdict);
    t.verifier_reasoning = judgment == Judgment::Unparseable ? verdict : reasoning;
    t.verifier_judgment = judgment;

    if (cfg.skip_when_verified_correct && judgment == Judgment::Correct) {
        t.final_answer = t.initial_answer;
        return t;
    }
    Prompt r = base;
    r.role = std::string(kRoleRegenerator);
    r.history.push_back({"assistant", first});
    std::string feedback(kRegenerateInstruction);
    feedback.replace(feedback.find("{feedback}"), 10, verdict);
    r.history.push_back({"user", feedback});
    std::string second = gen.query(r);
    ++t.calls;
    t.final_answer = extract_answer(second);
    if (t.final_answer.empty()) t.final_answer = t.initial_answer;
    return t;
}

VerifyTrace generation_from_verifier(const Prompt& base, ModelAdapter& gen, ModelAdapter& ver) {
    VerifyTrace t;
    t.mode = EvalMode::FromVerifier;
    Prompt p = base;
    p.role = std::string(kRoleGenerator);
    std::string first = gen.query(p);
    ++t.calls;
    t.initial_answer = extract_answer(first);

    Prompt v = base;
    v.role = std::string(kRoleCorrector);
    v.history.push_back({"assistant", first});
    v.history.push_back({"user", std::string(kCorrectInstruction)});
    std::string reply = ver.query(v);
    ++t.calls;
    auto [reasoning, judgment] = parse_verdict(reply);
    t.verifier_reasoning = reasoning.empty() ? reply : reasoning;
    t.verifier_judgment = judgment;
    auto corrected = parse_new_answer(reply);
    t.final_answer = corrected ? *corrected : t.initial_answer;
    return t;
}

// ---------------------------------------------------------------------------
// Batch evaluation

ordered_json record_to_json(const EvalRecord& r) {
    ordered_json j;
    j["id"] = r.item_id;
    j["raw_output"] = r.raw_output;
    j["extracted"] = r.extracted;
    j["correct"] = r.correct;
    j["reward"] = r.reward;
    if (!r.error.empty()) j["error"] = r.error;
    if (r.trace) {
        const auto& t = *r.trace;
        j["trace"] = {{"initial_answer", t.initial_answer},
                      {"verifier_reasoning", t.verifier_reasoning},
                      {"verifier_judgment", judgment_name(t.verifier_judgment)},
                      {"final_answer", t.final_answer},
                      {"mode", eval_mode_name(t.mode)},
                      {"calls", t.calls}};
    }
    return j;
}

EvalRecord record_from_json(const json& j) {
    EvalRecord r;
    r.item_id = j.at("id").get<std::string>();
    r.raw_output = j.at("raw_output").get<std::string>();
    r.extracted = j.at("extracted").get<std::string>();
    r.correct = j.at("correct").get<bool>();
    r.reward = j.at("reward").get<int>();
    r.error = j.value("error", std::string());
    if (j.contains("trace")) {
        const auto& jt = j["trace"];
        VerifyTrace t;
        t.initial_answer = jt.at("initial_answer").get<std::string>();
        t.verifier_reasoning = jt.at("verifier_reasoning").get<std::string>();
        std::string jn = jt.at("verifier_judgment").get<std::string>();
        t.verifier_judgment = jn == "correct" ? Judgment::Correct : jn == "incorrect" ? Judgment::Incorrect : Judgment::Unparseable;
        t.final_answer = jt.at("final_answer").get<std::string>();
        t.mode = eval_mode_from_name(jt.at("mode").get<std::string>());
        t.calls = jt.at("calls").get<int>();
        r.trace = t;
    }
    return r;
}

EvalReport summarize(const DatasetManifest& m, std::vector<EvalRecord> records) {
    EvalReport rep;
    std::map<std::string, const QAItem*> by_id;
    for (const auto& it : m.items) by_id[it.id] = &it;
    std::sort(records.begin(), records.end(), [](const EvalRecord& a, const EvalRecord& b) { return a.item_id < b.item_id; });
    for (Category c : {Category::Position, Category::Shape, Category::Relationship}) rep.categories[c] = {};
    for (const auto& r : records) {
        auto it = by_id.find(r.item_id);
        if (it == by_id.end()) continue;
        auto& cs = rep.categories[it->second->category];
        ++cs.n;
        cs.correct += r.correct;
        ++rep.overall.n;
        rep.overall.correct += r.correct;
    }
    auto pct = [](CategoryScore& s) { s.accuracy = s.n ? static_cast<double>(s.correct) / static_cast<double>(s.n) * 100.0 : 0.0; };
    for (auto& [c, s] : rep.categories) pct(s);
    pct(rep.overall);
    rep.records = std::move(records);
    return rep;
}

ordered_json report_to_json(const EvalReport& r) {
    auto score = [](const CategoryScore& s) {
        return ordered_json{{"n", s.n}, {"correct", s.correct}, {"accuracy", s.accuracy}};
    };
    ordered_json j;
    j["v"] = kSchemaVersion;
    j["adapter"] = r.adapter_id;
    j["mode"] = r.mode;
    j["config_hash"] = r.config_hash;
    j["overall"] = score(r.overall);
    ordered_json cats;
    for (const auto& [c, s] : r.categories) cats[std::string(category_name(c))] = score(s);
    j["categories"] = cats;
    return j;
}

std::string format_report(const EvalReport& r) {
    std::ostringstream o;
    o << "Category          N        Accuracy\n";
    auto row = [&](std::string_view label, const CategoryScore& s) {
        o << label;
        for (std::size_t i = label.size(); i < 18; ++i) o << ' ';
        std::string n = std::to_string(s.n);
        o << n;
        for (std::size_t i = n.size(); i < 9; ++i) o << ' ';
        o << format_fixed(s.accuracy, 2) << "\n";
    };
    for (const auto& [c, s] : r.categories) row(category_name(c), s);
    row("Overall", r.overall);
    return o.str();
}

EvalReport evaluate(const DatasetManifest& m, const std::vector<Shot>& shots, const AdapterFactory& generator,
                    const AdapterFactory& verifier, const EvalConfig& cfg, const std::string& adapter_id) {
    check_shots(shots, cfg.shots, m);
    if (cfg.concurrency < 1) throw std::invalid_argument("concurrency must be at least 1");
    if (cfg.mode != EvalMode::Plain && !verifier) throw std::invalid_argument("verify modes need a verifier adapter");

    const bool persist = !cfg.out_dir.empty();
    const fs::path dir(cfg.out_dir);
    const fs::path records_path = dir / "records.jsonl", timings_path = dir / "timings.jsonl";
    std::map<std::string, EvalRecord> done;
    std::set<std::string> ids;
    for (const auto& it : m.items) ids.insert(it.id);
    if (persist) {
        fs::create_directories(dir);
        if (fs::exists(records_path)) {
            for (const auto& line : split_lines(read_file(records_path.string()))) {
                try {
                    EvalRecord r = record_from_json(json::parse(line));
                    if (ids.count(r.item_id)) done[r.item_id] = std::move(r);
                } catch (const std::exception&) {
                    // A line cut short by an interrupted run; the item is simply redone.
                }
            }
        }
    }

    std::vector<const QAItem*> pending;
    for (const auto& it : m.items)
        if (!done.count(it.id)) pending.push_back(&it);

    std::mutex mu;
    std::ofstream records_out, timings_out;
    if (persist) {
        // Rewrite the surviving records so a truncated tail line does not linger.
        std::ofstream fresh(records_path, std::ios::trunc);
        for (const auto& [id, r] : done) fresh << record_to_json(r).dump() << "\n";
        fresh.close();
        records_out.open(records_path, std::ios::app);
        timings_out.open(timings_path, std::ios::app);
    }
    std::vector<EvalRecord> fresh_records;
    std::atomic<std::size_t> next{0};

    auto worker = [&]() {
        std::unique_ptr<ModelAdapter> gen, ver;
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= pending.size()) break;
            const QAItem& item = *pending[i];
            EvalRecord rec;
            rec.item_id = item.id;
            auto t0 = std::chrono::steady_clock::now();
            try {
                if (!gen) gen = generator();
                Prompt p = build_prompt(item, shots, cfg.shots, m.images_dir);
                if (cfg.mode == EvalMode::Plain) {
                    rec.raw_output = gen->query(p);
                    rec.extracted = extract_answer(rec.raw_output);
                } else {
                    if (!ver) ver = verifier();
                    VerifyTrace t = cfg.mode == EvalMode::Regenerate ? verify_and_regenerate(p, *gen, *ver, cfg.verify)
                                                                     : generation_from_verifier(p, *gen, *ver);
                    rec.raw_output = t.final_answer;
                    rec.extracted = t.final_answer;
                    rec.trace = t;
                }
                rec.reward = score_item(rec.extracted, item);
                rec.correct = rec.reward == 1;
            } catch (const std::exception& e) {
                rec.error = e.what();
                rec.correct = false;
                rec.reward = 0;
            }
            rec.latency = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            std::lock_guard<std::mutex> lock(mu);
            if (persist) {
                records_out << record_to_json(rec).dump() << "\n" << std::flush;
                timings_out << json{{"id", rec.item_id}, {"latency", rec.latency}}.dump() << "\n" << std::flush;
            }
            fresh_records.push_back(std::move(rec));
        }
    };
    std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(cfg.concurrency), std::max<std::size_t>(pending.size(), 1));
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    std::vector<EvalRecord> all;
    for (auto& [id, r] : done) all.push_back(std::move(r));
    for (auto& r : fresh_records) all.push_back(std::move(r));
    EvalReport rep = summarize(m, std::move(all));
    rep.adapter_id = adapter_id;
    rep.mode = std::string(eval_mode_name(cfg.mode));
    rep.config_hash = cfg.config_hash;

    if (persist) {
        records_out.close();
        timings_out.close();
        std::string body;
        for (const auto& r : rep.records) body += record_to_json(r).dump() + "\n";
        write_file(records_path.string(), body);
        write_file((dir / "report.json").string(), report_to_json(rep).dump(2) + "\n");
    }
    return rep;
}

}  // namespace georef
