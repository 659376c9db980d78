// SPDX-License-Identifier: Apache-2.0
//
// Referring-expression questions with equivalence-closed answer sets.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "georef/facts.hpp"
#include "georef/kernel.hpp"

namespace georef {

struct AnswerSet {
    std::string canonical;
    std::vector<std::string> variants;  // surface forms, sorted and unique

    bool operator==(const AnswerSet&) const = default;
};

struct QAItem {
    std::string id;
    std::string image;  // file name relative to the dataset's images directory
    Category category = Category::Position;
    std::string question;
    AnswerSet answers;
    int steps = 1;
    FactKind fact_kind = FactKind::IntersectionPoint;
    std::string template_id;
    IdentifierScheme scheme = IdentifierScheme::Common;
    std::uint64_t seed = 0;

    bool operator==(const QAItem&) const = default;
};

struct QuestionPhrasing {
    std::string id;
    std::string text;
};

// Phrasings per fact kind. Slots: {i} expands to the i-th subject's noun
// phrase ("angle DEA"), {name:i} to its bare letters ("DEA").
struct QuestionCatalog {
    struct Entry {
        std::vector<QuestionPhrasing> questions;  // 1..3
        std::string compose;                      // phrasing when the subject is described indirectly
        std::string chain;                        // noun phrase describing this fact's answer
    };
    std::map<FactKind, Entry> kinds;
};

QuestionCatalog load_catalog(const std::string& path);
QuestionCatalog parse_catalog(std::string_view json_text);
// The catalog shipped in data/question_templates.json.
const QuestionCatalog& default_catalog();

struct QAConfig {
    double two_step_ratio = 0.1;
};

std::string fill_slots(const std::string& phrasing, const std::vector<Ref>& subjects);

std::vector<QAItem> generate_qa(const ConcreteScene& s, const std::vector<Fact>& facts, const QAConfig& cfg,
                                std::uint64_t seed, const QuestionCatalog& catalog = default_catalog());

// A question about fact2 whose subject is given through fact1's description.
// The scene, when supplied, widens the answer set with alternate names.
std::optional<QAItem> compose_two_step(const std::vector<Fact>& facts, std::uint64_t seed,
                                       const QuestionCatalog& catalog = default_catalog(),
                                       const ConcreteScene* s = nullptr);

// Throws std::invalid_argument when the target does not exist in the scene.
AnswerSet build_answer_set(const Ref& target, const ConcreteScene& s, bool inherit);
// Scene-free closure: endpoint orders, angle outer orders, polygon rotations/reflections.
AnswerSet closure_of(const Ref& target);

std::string normalize_answer(std::string_view text);
// Standalone letter tokens (1-4 capitals, optionally prefixed by an element
// word or the angle sign) in order of appearance.
std::vector<std::string> entity_tokens(std::string_view text);
bool answers_match(std::string_view prediction, const AnswerSet& a);

}  // namespace georef
