// SPDX-License-Identifier: Apache-2.0
#include "georef/qa.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <set>
#include <stdexcept>

#include "georef/embedded.hpp"
#include "georef/util.hpp"
#include "json.hpp"

namespace georef {

namespace {

using json = nlohmann::json;

constexpr double kTol = 1e-6;

bool symmetric(FactKind k) {
    switch (k) {
        case FactKind::ParallelPair:
        case FactKind::PerpendicularPair:
        case FactKind::EqualAngles:
        case FactKind::EqualSegments:
        case FactKind::VerticalAngles:
        case FactKind::AlternateInteriorAngles:
        case FactKind::CorrespondingAngles:
        case FactKind::CoInteriorAngles: return true;
        default: return false;
    }
}

bool inherits(FactKind k) { return k == FactKind::ParallelPair || k == FactKind::PerpendicularPair; }

bool is_linear(const Ref& r) {
    return (r.kind == RefKind::Segment || r.kind == RefKind::Line || r.kind == RefKind::Ray) && r.name.size() == 2;
}

// One way of asking about a fact: subjects given, target elicited.
struct Oriented {
    FactKind kind;
    std::vector<Ref> subjects;
    Ref target;
};

std::vector<Oriented> orient(const std::vector<Fact>& facts) {
    std::vector<Oriented> out;
    for (const auto& f : facts) {
        out.push_back({f.kind, f.subjects, f.answer_target});
        if (symmetric(f.kind) && f.subjects.size() == 1) out.push_back({f.kind, {f.answer_target}, f.subjects[0]});
        if (f.kind == FactKind::CollinearTriple && f.subjects.size() == 2) {
            out.push_back({f.kind, {f.subjects[0], f.answer_target}, f.subjects[1]});
            out.push_back({f.kind, {f.subjects[1], f.answer_target}, f.subjects[0]});
        }
    }
    for (auto& o : out)
        if (o.kind == FactKind::CollinearTriple) std::sort(o.subjects.begin(), o.subjects.end());
    return out;
}

std::string fill(const std::string& phrasing, const std::vector<std::string>& nouns, const std::vector<std::string>& names) {
    std::string out;
    for (std::size_t i = 0; i < phrasing.size(); ++i) {
        if (phrasing[i] != '{') {
            out += phrasing[i];
            continue;
        }
        auto close = phrasing.find('}', i);
        if (close == std::string::npos) throw std::invalid_argument("unterminated slot in '" + phrasing + "'");
        std::string slot = phrasing.substr(i + 1, close - i - 1);
        bool bare = slot.rfind("name:", 0) == 0;
        if (bare) slot = slot.substr(5);
        std::size_t idx = 0;
        try {
            idx = std::stoul(slot);
        } catch (const std::exception&) {
            throw std::invalid_argument("bad slot '{" + slot + "}' in '" + phrasing + "'");
        }
        const auto& src = bare ? names : nouns;
        if (idx >= src.size()) throw std::out_of_range("slot {" + slot + "} has no subject in '" + phrasing + "'");
        out += src[idx];
        i = close;
    }
    return out;
}

AnswerSet make_set(std::set<std::string> variants, std::string canonical) {
    variants.insert(canonical);
    return {std::move(canonical), {variants.begin(), variants.end()}};
}

AnswerSet merge(const AnswerSet& a, const AnswerSet& b) {
    std::set<std::string> v(a.variants.begin(), a.variants.end());
    v.insert(b.variants.begin(), b.variants.end());
    return make_set(std::move(v), a.canonical);
}

void add_pair(std::set<std::string>& v, char a, char b) {
    v.insert(std::string{a, b});
    v.insert(std::string{b, a});
}

const std::set<std::string>& stop_words() {
    static const std::set<std::string> words = {"ANGLE", "SEGMENT", "LINE", "RAY", "TRIANGLE", "QUADRILATERAL", "POINT", "CIRCLE"};
    return words;
}

struct Group {
    FactKind kind;
    std::string template_id;
    std::vector<Ref> subjects;
    std::set<Ref> targets;
};

// Questions keyed by their text; targets of facts sharing a question are pooled.
std::vector<std::pair<std::string, Group>> group_questions(const std::vector<Oriented>& facts, const QuestionCatalog& cat) {
    std::vector<std::pair<std::string, Group>> groups;
    std::map<std::string, std::size_t> index;
    for (const auto& f : facts) {
        auto it = cat.kinds.find(f.kind);
        if (it == cat.kinds.end()) continue;
        for (const auto& ph : it->second.questions) {
            std::string text;
            try {
                text = fill_slots(ph.text, f.subjects);
            } catch (const std::out_of_range&) {
                continue;
            }
            auto [pos, fresh] = index.try_emplace(text, groups.size());
            if (fresh) groups.push_back({text, Group{f.kind, ph.id, f.subjects, {}}});
            groups[pos->second].second.targets.insert(f.target);
        }
    }
    return groups;
}

struct Chain {
    std::size_t first, second;
};

// Pairs (f1, f2) where f1 names its target uniquely and f2 asks about that target.
std::vector<Chain> chains(const std::vector<Oriented>& facts, const QuestionCatalog& cat) {
    std::map<std::pair<FactKind, std::vector<Ref>>, std::set<Ref>> answers;
    for (const auto& f : facts) answers[{f.kind, f.subjects}].insert(f.target);
    std::vector<Chain> out;
    for (std::size_t i = 0; i < facts.size(); ++i) {
        const auto& f1 = facts[i];
        auto c1 = cat.kinds.find(f1.kind);
        if (c1 == cat.kinds.end() || c1->second.chain.empty() || answers[{f1.kind, f1.subjects}].size() != 1) continue;
        for (std::size_t j = 0; j < facts.size(); ++j) {
            const auto& f2 = facts[j];
            auto c2 = cat.kinds.find(f2.kind);
            if (classify_fact(f2.kind) != Category::Relationship || c2 == cat.kinds.end() || c2->second.compose.empty())
                continue;
            if (f2.subjects.size() != 1 || f2.subjects[0] != f1.target) continue;
            const auto& targets = answers[{f2.kind, f2.subjects}];
            bool leaks = false;
            for (const auto& t : targets)
                leaks = leaks || t == f1.target || std::find(f1.subjects.begin(), f1.subjects.end(), t) != f1.subjects.end();
            // Keep one representative per (f1, f2 question).
            if (leaks || *targets.begin() != f2.target) continue;
            out.push_back({i, j});
        }
    }
    return out;
}

std::string composed_question(const Oriented& f1, const Oriented& f2, const QuestionCatalog& cat) {
    std::string phrase = fill_slots(cat.kinds.at(f1.kind).chain, f1.subjects);
    return fill(cat.kinds.at(f2.kind).compose, {phrase}, {phrase});
}

AnswerSet answers_for(const std::set<Ref>& targets, FactKind kind, const ConcreteScene* s) {
    std::optional<AnswerSet> out;
    for (const auto& t : targets) {
        AnswerSet a = s ? build_answer_set(t, *s, inherits(kind)) : closure_of(t);
        out = out ? merge(*out, a) : a;
    }
    return *out;
}

QAItem composed_item(const std::vector<Oriented>& facts, const Chain& c, const QuestionCatalog& cat, const ConcreteScene* s) {
    const auto& f1 = facts[c.first];
    const auto& f2 = facts[c.second];
    std::set<Ref> targets;
    for (const auto& f : facts)
        if (f.kind == f2.kind && f.subjects == f2.subjects) targets.insert(f.target);
    QAItem item;
    item.category = classify_fact(f2.kind);
    item.fact_kind = f2.kind;
    item.question = composed_question(f1, f2, cat);
    item.answers = answers_for(targets, f2.kind, s);
    item.steps = 2;
    item.template_id = cat.kinds.at(f2.kind).questions.front().id + "+" + std::string(fact_kind_name(f1.kind));
    return item;
}

}  // namespace

// ---------------------------------------------------------------------------
// Catalog

QuestionCatalog parse_catalog(std::string_view json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("question catalog is not valid JSON: ") + e.what());
    }
    QuestionCatalog cat;
    try {
        for (const auto& [name, entry] : doc.at("kinds").items()) {
            FactKind k = fact_kind_from_name(name);
            QuestionCatalog::Entry e;
            for (const auto& q : entry.at("questions")) e.questions.push_back({q.at("id").get<std::string>(), q.at("text").get<std::string>()});
            if (e.questions.empty() || e.questions.size() > 3)
                throw std::invalid_argument("question catalog: " + name + " needs 1 to 3 phrasings");
            e.compose = entry.value("compose", std::string());
            e.chain = entry.value("chain", std::string());
            cat.kinds[k] = std::move(e);
        }
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("question catalog schema error: ") + e.what());
    }
    return cat;
}

QuestionCatalog load_catalog(const std::string& path) { return parse_catalog(read_file(path)); }

const QuestionCatalog& default_catalog() {
    static const QuestionCatalog cat = parse_catalog(embedded_question_catalog());
    return cat;
}

std::string fill_slots(const std::string& phrasing, const std::vector<Ref>& subjects) {
    std::vector<std::string> nouns, names;
    for (const auto& r : subjects) {
        nouns.push_back(describe(r));
        names.push_back(r.name);
    }
    return fill(phrasing, nouns, names);
}

// ---------------------------------------------------------------------------
// Answer sets

AnswerSet closure_of(const Ref& target) {
    std::set<std::string> v;
    const std::string& n = target.name;
    switch (target.kind) {
        case RefKind::Segment:
        case RefKind::Line:
        case RefKind::Ray:
            if (n.size() == 2) add_pair(v, n[0], n[1]);
            break;
        case RefKind::Angle:
            if (n.size() == 3) {
                v.insert(n);
                v.insert(std::string{n[2], n[1], n[0]});
            }
            break;
        case RefKind::Polygon:
            for (std::size_t r = 0; r < n.size(); ++r) {
                std::string rot = n.substr(r) + n.substr(0, r);
                v.insert(rot);
                v.insert(std::string(rot.rbegin(), rot.rend()));
            }
            break;
        default: break;
    }
    return make_set(std::move(v), n);
}

AnswerSet build_answer_set(const Ref& target, const ConcreteScene& s, bool inherit) {
    for (char c : target.name)
        if (!s.has_point(c)) throw std::invalid_argument("unknown answer target " + ref_to_string(target));
    if (target.name.empty() || (target.kind == RefKind::Circle && !s.program.find_circle(target.name[0])))
        throw std::invalid_argument("unknown answer target " + ref_to_string(target));
    AnswerSet base = closure_of(target);
    std::set<std::string> v(base.variants.begin(), base.variants.end());
    if (target.kind == RefKind::Angle || (inherit && is_linear(target))) {
        SymbolicModel m(s);
        if (target.kind == RefKind::Angle) {
            char a = target.name[0], vx = target.name[1], c = target.name[2];
            auto ray_points = [&](char through) {
                std::string out(1, through);
                auto car = m.carrier_of(vx, through);
                if (!car) return out;
                Vec2 dir = s.at(through) - s.at(vx);
                for (char x : m.carriers()[*car].points)
                    if (x != through && x != vx && dot(s.at(x) - s.at(vx), dir) > kTol && m.visible(vx, x)) out += x;
                return out;
            };
            for (char x : ray_points(a))
                for (char y : ray_points(c)) {
                    v.insert(std::string{x, vx, y});
                    v.insert(std::string{y, vx, x});
                }
        } else if (auto car = m.carrier_of(target.name[0], target.name[1])) {
            double t0 = m.position(*car, target.name[0]), t1 = m.position(*car, target.name[1]);
            double lo = std::min(t0, t1), hi = std::max(t0, t1);
            constexpr double inf = std::numeric_limits<double>::infinity();
            if (target.kind == RefKind::Line) lo = -inf, hi = inf;
            if (target.kind == RefKind::Ray) (t1 > t0 ? hi : lo) = t1 > t0 ? inf : -inf;
            std::string on;
            for (char x : m.carriers()[*car].points) {
                double t = m.position(*car, x);
                if (t >= lo - kTol && t <= hi + kTol) on += x;
            }
            for (std::size_t i = 0; i < on.size(); ++i)
                for (std::size_t j = i + 1; j < on.size(); ++j) add_pair(v, on[i], on[j]);
        }
    }
    return make_set(std::move(v), base.canonical);
}

// ---------------------------------------------------------------------------
// Matching

std::string normalize_answer(std::string_view text) {
    static const std::string angle_sign = "\xE2\x88\xA0", triangle_sign = "\xE2\x96\xB3";
    std::string t(text);
    for (const auto* sign : {&angle_sign, &triangle_sign})
        for (auto pos = t.find(*sign); pos != std::string::npos; pos = t.find(*sign)) t.replace(pos, sign->size(), " ");
    std::vector<std::string> words;
    std::string cur;
    for (char ch : t) {
        auto u = static_cast<unsigned char>(ch);
        if (u < 128 && std::isalnum(u)) {
            cur += static_cast<char>(std::toupper(u));
        } else if (!cur.empty()) {
            words.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) words.push_back(cur);
    bool has_content = std::any_of(words.begin(), words.end(), [](const std::string& w) { return !stop_words().count(w); });
    std::string out;
    for (const auto& w : words)
        if (!has_content || !stop_words().count(w)) out += w;
    if (out.size() == 2 && out[1] < out[0]) std::swap(out[0], out[1]);
    if (out.size() == 3 && out[2] < out[0]) std::swap(out[0], out[2]);
    return out;
}

std::vector<std::string> entity_tokens(std::string_view text) {
    static const std::regex re(
        "((?:[Aa]ngle|[Ss]egment|[Ll]ine|[Rr]ay|[Pp]oint|[Tt]riangle|[Cc]ircle)\\s+|\xE2\x88\xA0\\s*)?\\b([A-Z]{1,4})\\b");
    std::vector<std::string> out;
    std::string s(text);
    for (auto it = std::sregex_iterator(s.begin(), s.end(), re); it != std::sregex_iterator(); ++it) out.push_back(it->str());
    return out;
}

bool answers_match(std::string_view prediction, const AnswerSet& a) {
    std::set<std::string> accepted;
    for (const auto& v : a.variants) accepted.insert(normalize_answer(v));
    std::string whole = normalize_answer(prediction);
    if (!whole.empty() && accepted.count(whole)) return true;
    for (const auto& tok : entity_tokens(prediction))
        if (accepted.count(normalize_answer(tok))) return true;
    return false;
}

// ---------------------------------------------------------------------------
// Generation

std::vector<QAItem> generate_qa(const ConcreteScene& s, const std::vector<Fact>& facts, const QAConfig& cfg,
                                std::uint64_t seed, const QuestionCatalog& catalog) {
    if (!(cfg.two_step_ratio >= 0.0 && cfg.two_step_ratio <= 1.0))
        throw std::invalid_argument("two_step_ratio must lie in [0, 1]");
    std::vector<Oriented> oriented = orient(facts);
    auto groups = group_questions(oriented, catalog);
    std::stable_sort(groups.begin(), groups.end(), [](const auto& x, const auto& y) {
        return std::tuple(classify_fact(x.second.kind), x.second.kind, x.first) <
               std::tuple(classify_fact(y.second.kind), y.second.kind, y.first);
    });
    std::vector<Chain> links = chains(oriented, catalog);
    Rng rng(mix_seed(seed, 0x7157e9));

    std::vector<QAItem> items;
    std::set<std::string> composed_seen;
    for (const auto& [text, g] : groups) {
        QAItem item;
        item.category = classify_fact(g.kind);
        item.fact_kind = g.kind;
        item.question = text;
        item.answers = answers_for(g.targets, g.kind, &s);
        item.template_id = g.template_id;
        if (item.category == Category::Relationship && cfg.two_step_ratio > 0.0) {
            std::vector<Chain> mine;
            for (const auto& c : links)
                if (oriented[c.second].kind == g.kind && oriented[c.second].subjects == g.subjects) mine.push_back(c);
            if (!mine.empty() && rng.uniform() < cfg.two_step_ratio) {
                QAItem two = composed_item(oriented, mine[rng.below(mine.size())], catalog, &s);
                if (composed_seen.insert(two.question).second) item = std::move(two);
            }
        }
        items.push_back(std::move(item));
    }
    for (std::size_t i = 0; i < items.size(); ++i) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "_q%03zu", i);
        items[i].id = s.id() + buf;
        items[i].image = s.id() + ".svg";
        items[i].scheme = s.scheme;
        items[i].seed = s.seed;
    }
    return items;
}

std::optional<QAItem> compose_two_step(const std::vector<Fact>& facts, std::uint64_t seed, const QuestionCatalog& catalog,
                                       const ConcreteScene* s) {
    std::vector<Oriented> oriented = orient(facts);
    std::vector<Chain> links = chains(oriented, catalog);
    if (links.empty()) return std::nullopt;
    Rng rng(mix_seed(seed, 0x2c4a1));
    return composed_item(oriented, links[rng.below(links.size())], catalog, s);
}

}  // namespace georef
