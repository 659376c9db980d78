// SPDX-License-Identifier: Apache-2.0
//
// Evaluation harness: prompting, model adapters, answer extraction, scoring,
// and the verify-and-regenerate loop.
#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "georef/dataset.hpp"
#include "georef/qa.hpp"
#include "json.hpp"

namespace georef {

// ---------------------------------------------------------------------------
// Adapters

enum class Transport { Subprocess, Http, Mock };

struct AdapterSpec {
    Transport transport = Transport::Mock;
    std::string endpoint;  // command line, base URL, or mock name
    std::string argument;  // mock argument, e.g. the shuffle seed
    double timeout = 120.0;
    int max_retries = 2;
    double backoff = 0.5;  // seconds before the first retry, doubled each time

    std::string describe() const;
};

// Accepts "cmd:<command line>", "http://host:port", "mock:<name>[(<arg>)]"
// and "cmd:mock-<name>[(<arg>)]" (the bundled mocks, run in-process).
// Throws std::invalid_argument.
AdapterSpec parse_adapter_spec(std::string_view spec);

class AdapterError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class TimeoutError : public AdapterError {
public:
    using AdapterError::AdapterError;
};
class TransportError : public AdapterError {
public:
    using AdapterError::AdapterError;
};
class MalformedResponse : public AdapterError {
public:
    using AdapterError::AdapterError;
};

struct Turn {
    std::string role;  // "user" | "assistant"
    std::string content;

    bool operator==(const Turn&) const = default;
};

struct Shot {
    std::string id;
    std::string question;
    std::string image;
    std::string answer;
};

// Roles a request can play in a call chain.
inline constexpr std::string_view kRoleGenerator = "generator";
inline constexpr std::string_view kRoleVerifier = "verifier";
inline constexpr std::string_view kRoleRegenerator = "regenerator";
inline constexpr std::string_view kRoleCorrector = "corrector";

struct Prompt {
    std::string id;
    std::string system;
    std::vector<Shot> shots;
    std::string question;
    std::string image_path;
    std::string image_svg;
    std::vector<Turn> history;
    std::string role = std::string(kRoleGenerator);

    // Flat rendering for adapters that take a single text.
    std::string text() const;
    nlohmann::ordered_json to_request() const;
};

class ModelAdapter {
public:
    virtual ~ModelAdapter() = default;
    // One request/response exchange; throws AdapterError subclasses.
    virtual std::string query(const Prompt& p) = 0;
};

// Ground truth and scripted predictions available to the bundled mocks.
struct MockContext {
    std::map<std::string, AnswerSet> answers;
    std::map<std::string, std::string> predictions;

    static MockContext from_manifest(const DatasetManifest& m);
};

// Answers one request document with the named mock's behavior.
std::string mock_respond(const std::string& name, const std::string& argument, const nlohmann::json& request,
                         const MockContext& ctx);

// Retries on timeout and transport failures with exponential backoff.
std::unique_ptr<ModelAdapter> make_adapter(const AdapterSpec& spec, std::shared_ptr<const MockContext> ctx);

// Predictions files: one {"id": ..., "prediction": ...} document per line.
std::map<std::string, std::string> read_predictions(const std::string& path);

// ---------------------------------------------------------------------------
// Prompting, extraction, scoring

std::vector<Shot> load_shots(const std::string& path);
// Throws std::invalid_argument if too few shots or a shot id collides with a dataset id.
void check_shots(const std::vector<Shot>& shots, int count, const DatasetManifest& m);
Prompt build_prompt(const QAItem& item, const std::vector<Shot>& shots, int count, const std::string& images_dir);

std::string extract_answer(std::string_view raw);
int score_item(std::string_view prediction, const QAItem& item);

// ---------------------------------------------------------------------------
// Verify flows

enum class EvalMode { Plain, Regenerate, FromVerifier };
std::string_view eval_mode_name(EvalMode m);
EvalMode eval_mode_from_name(std::string_view s);

enum class Judgment { Correct, Incorrect, Unparseable };
std::string_view judgment_name(Judgment j);

struct VerifyTrace {
    std::string initial_answer;
    std::string verifier_reasoning;
    Judgment verifier_judgment = Judgment::Unparseable;
    std::string final_answer;
    EvalMode mode = EvalMode::Regenerate;
    int calls = 0;
};

struct VerifyConfig {
    bool skip_when_verified_correct = false;
};

// Parses <reasoning>..</reasoning><judgment>correct|incorrect</judgment>.
std::pair<std::string, Judgment> parse_verdict(std::string_view text);
std::optional<std::string> parse_new_answer(std::string_view text);

VerifyTrace verify_and_regenerate(const Prompt& base, ModelAdapter& gen, ModelAdapter& ver, const VerifyConfig& cfg = {});
VerifyTrace generation_from_verifier(const Prompt& base, ModelAdapter& gen, ModelAdapter& ver);

// ---------------------------------------------------------------------------
// Batch evaluation

struct EvalRecord {
    std::string item_id;
    std::string raw_output;
    std::string extracted;
    bool correct = false;
    int reward = 0;
    double latency = 0.0;  // seconds; kept out of records.jsonl
    std::string error;
    std::optional<VerifyTrace> trace;
};

nlohmann::ordered_json record_to_json(const EvalRecord& r);
EvalRecord record_from_json(const nlohmann::json& j);

struct CategoryScore {
    std::size_t n = 0;
    std::size_t correct = 0;
    double accuracy = 0.0;
};

struct EvalReport {
    std::map<Category, CategoryScore> categories;
    CategoryScore overall;
    std::string adapter_id;
    std::string mode;
    std::string config_hash;
    std::vector<EvalRecord> records;  // sorted by item id
};

struct EvalConfig {
    EvalMode mode = EvalMode::Plain;
    int shots = 3;
    int concurrency = 8;
    VerifyConfig verify;
    std::string config_hash;
    // Output directory for records.jsonl, timings.jsonl and report.json; empty keeps results in memory.
    std::string out_dir;
};

using AdapterFactory = std::function<std::unique_ptr<ModelAdapter>()>;

EvalReport evaluate(const DatasetManifest& m, const std::vector<Shot>& shots, const AdapterFactory& generator,
                    const AdapterFactory& verifier, const EvalConfig& cfg, const std::string& adapter_id);

EvalReport summarize(const DatasetManifest& m, std::vector<EvalRecord> records);
nlohmann::ordered_json report_to_json(const EvalReport& r);
std::string format_report(const EvalReport& r);

}  // namespace georef
