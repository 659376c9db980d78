// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include "georef/scene.hpp"
#include "georef/util.hpp"

namespace georef {

namespace {

bool distinct(const std::string& s) {
    std::set<char> seen(s.begin(), s.end());
    return seen.size() == s.size();
}

bool is_point_decl(const Declaration& d) { return d.kind == DeclKind::FreePoint || d.kind == DeclKind::ConstructedPoint; }

std::set<std::string> drawn_pairs(const SceneProgram& p) {
    std::set<std::string> pairs;
    auto add = [&](char a, char b) {
        pairs.insert(std::string{std::min(a, b), std::max(a, b)});
    };
    for (const auto& d : p.declarations) {
        if (d.kind == DeclKind::Segment || d.kind == DeclKind::Line || d.kind == DeclKind::Ray) add(d.points[0], d.points[1]);
        if (d.kind == DeclKind::Polygon)
            for (std::size_t i = 0; i < d.points.size(); ++i) add(d.points[i], d.points[(i + 1) % d.points.size()]);
    }
    return pairs;
}

std::string map_text(const std::string& text, const std::string& map) {
    std::string out = text;
    std::size_t i = 0;
    while (i < out.size()) {
        if (out[i] >= 'A' && out[i] <= 'Z' && (i == 0 || !std::isalpha(static_cast<unsigned char>(out[i - 1])))) {
            std::size_t j = i;
            while (j < out.size() && out[j] >= 'A' && out[j] <= 'Z') ++j;
            bool standalone = j == out.size() || !std::isalpha(static_cast<unsigned char>(out[j]));
            bool all_points = standalone;
            for (std::size_t k = i; k < j && all_points; ++k) all_points = map[out[k] - 'A'] != '?';
            if (all_points)
                for (std::size_t k = i; k < j; ++k) out[k] = map[out[k] - 'A'];
            i = j;
        } else {
            ++i;
        }
    }
    return out;
}

}  // namespace

void ValidationReport::add(Severity sev, std::string message, SourceSpan span) {
    issues.push_back({sev, std::move(message), span});
    if (sev == Severity::Error) ok = false;
}

std::string ValidationReport::summary() const {
    std::ostringstream out;
    for (const auto& i : issues) {
        out << (i.severity == Severity::Error ? "error" : "warning");
        if (i.span.line > 0) out << " " << i.span.line << ":" << i.span.column;
        out << ": " << i.message << "\n";
    }
    return out.str();
}

ValidationReport validate_program(const SceneProgram& p) {
    ValidationReport rep;
    int elements = 0;
    bool relational = false;
    const auto drawn = drawn_pairs(p);

    for (const auto& d : p.declarations) {
        if (d.stage != 1 && d.stage != 2)
            rep.add(Severity::Error, "invalid stage " + std::to_string(d.stage) + " (expected 1 or 2)", d.span);
        switch (d.kind) {
            case DeclKind::FreePoint: ++elements; break;
            case DeclKind::ConstructedPoint: ++elements; relational = true; break;
            case DeclKind::Segment:
            case DeclKind::Line:
            case DeclKind::Ray:
            case DeclKind::Circle:
            case DeclKind::Polygon:
                ++elements;
                if (!distinct(d.points))
                    rep.add(Severity::Error, std::string(decl_kind_name(d.kind)) + " repeats a point: " + d.points, d.span);
                break;
            case DeclKind::Constraint: relational = true; break;
            case DeclKind::Annotation: break;
        }

        if (d.kind != DeclKind::ConstructedPoint && d.kind != DeclKind::Constraint) continue;
        for (const auto& a : d.args) {
            if (a.type == ArgType::Branch && a.number != 0.0 && a.number != 1.0)
                rep.add(Severity::Error,
                        "invalid branch selector " + std::to_string(static_cast<long long>(a.number)) + " (expected 0 or 1)",
                        d.span);
            if ((a.type == ArgType::Pair || a.type == ArgType::Angle || a.type == ArgType::Quad) && !distinct(a.letters))
                rep.add(Severity::Error, "argument " + a.letters + " repeats a point", d.span);
            if (a.type == ArgType::Pair && distinct(a.letters) &&
                !drawn.count(std::string{std::min(a.letters[0], a.letters[1]), std::max(a.letters[0], a.letters[1])}))
                rep.add(Severity::Warning, "carrier " + a.letters + " is not a drawn segment, line, ray or polygon edge",
                        d.span);
        }
        if (d.kind == DeclKind::ConstructedPoint) {
            if (d.constructor == Constructor::ExtensionPoint) {
                double f = d.args[1].number;
                if (f >= 0.0 && f <= 1.0)
                    rep.add(Severity::Error, "extension factor must lie outside [0, 1]", d.span);
            }
            std::string pts;
            for (const auto& a : d.args)
                if (a.type == ArgType::Point) pts += a.letters;
            if (!distinct(pts)) rep.add(Severity::Error, "constructor arguments repeat a point", d.span);
            if (d.constructor == Constructor::IntersectionCircleCircle && d.args[0].letters == d.args[1].letters)
                rep.add(Severity::Error, "circle intersected with itself", d.span);
            if (d.constructor == Constructor::IntersectionLineLine && d.args[0].letters == d.args[1].letters)
                rep.add(Severity::Error, "line intersected with itself", d.span);
        } else {
            if (d.constraint == ConstraintKind::IsCentralAngle && d.args[0].letters[1] != d.args[1].letters[0])
                rep.add(Severity::Error, "central angle vertex must be the circle center", d.span);
            if (d.constraint == ConstraintKind::Collinear) {
                std::string pts = d.args[0].letters + d.args[1].letters + d.args[2].letters;
                if (!distinct(pts)) rep.add(Severity::Error, "collinear repeats a point", d.span);
            }
        }
    }
    if (elements < 2) rep.add(Severity::Error, "fewer than two elements");
    if (!relational) rep.add(Severity::Error, "no relationship-bearing construct (constructed point or constraint)");
    return rep;
}

std::string_view scheme_name(IdentifierScheme s) { return s == IdentifierScheme::Common ? "common" : "random"; }

IdentifierScheme scheme_from_name(std::string_view s) {
    if (s == "common") return IdentifierScheme::Common;
    if (s == "random") return IdentifierScheme::Random;
    throw std::invalid_argument("unknown identifier scheme '" + std::string(s) + "'");
}

SceneProgram apply_letter_map(const SceneProgram& p, const std::string& map) {
    auto m = [&](char c) { return map[c - 'A']; };
    SceneProgram out = p;
    for (auto& d : out.declarations) {
        if (is_point_decl(d)) d.name = m(d.name);
        for (auto& c : d.points) c = m(c);
        for (auto& a : d.args)
            if (a.type != ArgType::Number && a.type != ArgType::Branch)
                for (auto& c : a.letters) c = m(c);
        if (d.kind == DeclKind::Annotation) d.text = map_text(d.text, map);
    }
    return out;
}

SceneProgram relabel(const SceneProgram& p, IdentifierScheme scheme, std::uint64_t seed) {
    const std::string pts = p.point_letters();
    if (pts.size() > 26) throw std::invalid_argument("scene has more points than available letters");
    std::string map(26, '?');

    if (scheme == IdentifierScheme::Random) {
        std::vector<char> letters;
        for (char c = 'A'; c <= 'Z'; ++c) letters.push_back(c);
        Rng rng(mix_seed(seed, 0x5eed1abe1ULL));
        rng.shuffle(letters);
        for (std::size_t i = 0; i < pts.size(); ++i) map[pts[i] - 'A'] = letters[i];
        return apply_letter_map(p, map);
    }

    std::set<char> centers;
    for (const auto& d : p.declarations) {
        if (d.kind == DeclKind::Circle) centers.insert(d.points[0]);
        if (d.kind == DeclKind::ConstructedPoint && d.constructor == Constructor::CircleCenter) centers.insert(d.name);
    }
    std::set<char> used;
    const char center_letters[] = {'O', 'P', 'Q'};
    std::size_t next_center = 0;
    for (char c : pts) {
        if (centers.count(c) && next_center < 3) {
            map[c - 'A'] = center_letters[next_center++];
            used.insert(map[c - 'A']);
        }
    }
    char next = 'A';
    for (char c : pts) {
        if (map[c - 'A'] != '?') continue;
        while (used.count(next)) ++next;
        map[c - 'A'] = next;
        used.insert(next);
    }
    return apply_letter_map(p, map);
}

std::uint64_t structural_hash(const SceneProgram& p) {
    const std::string pts = p.point_letters();
    std::string map(26, '?');
    for (std::size_t i = 0; i < pts.size(); ++i) map[pts[i] - 'A'] = static_cast<char>('A' + i);
    SceneProgram canon = apply_letter_map(p, map);
    canon.name.clear();
    return fnv1a64(print_program(canon));
}

}  // namespace georef
