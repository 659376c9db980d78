// SPDX-License-Identifier: Apache-2.0
//
// Independent reference computations shared by the unit tests and the
// acceptance binary: finite-difference Jacobians and brute-force relation
// enumeration.
#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "georef/facts.hpp"
#include "georef/kernel.hpp"
#include "georef/util.hpp"

namespace georef::test {

// One program per constraint kind, free points only, so every residual
// depends directly on the sampled coordinates.
inline std::string constraint_program(ConstraintKind k) {
    const std::string circle = "point O; point R; circle O R; ";
    switch (k) {
        case ConstraintKind::Parallel: return "point A; point B; point C; point D; segment A B; segment C D; constraint parallel(AB, CD)";
        case ConstraintKind::Perpendicular:
            return "point A; point B; point C; point D; segment A B; segment C D; constraint perpendicular(AB, CD)";
        case ConstraintKind::Tangent: return circle + "point A; point B; segment A B; constraint tangent(AB, circle O)";
        case ConstraintKind::OnCircle: return circle + "point A; segment O A; constraint on_circle(A, circle O)";
        case ConstraintKind::Collinear: return "point A; point B; point C; segment A B; segment B C; constraint collinear(A, B, C)";
        case ConstraintKind::EqualLength:
            return "point A; point B; point C; point D; segment A B; segment C D; constraint equal_length(AB, CD)";
        case ConstraintKind::EqualAngle:
            return "point A; point B; point C; point D; point E; point F; segment A B; segment B C; segment D E; segment E F; "
                   "constraint equal_angle(ABC, DEF)";
        case ConstraintKind::AngleBisector:
            return "point A; point B; point C; point D; segment A B; segment B C; segment B D; constraint angle_bisector(ABC, D)";
        case ConstraintKind::IsDiameter: return circle + "point A; point B; segment A B; constraint is_diameter(AB, circle O)";
        case ConstraintKind::IsChord: return circle + "point A; point B; segment A B; constraint is_chord(AB, circle O)";
        case ConstraintKind::IsInscribedAngle:
            return circle + "point A; point B; point C; segment A B; segment B C; constraint is_inscribed_angle(ABC, circle O)";
        case ConstraintKind::IsCentralAngle:
            return circle + "point A; point B; segment O A; segment O B; constraint is_central_angle(AOB, circle O)";
        case ConstraintKind::IsParallelogram: return "point A; point B; point C; point D; polygon A B C D; constraint is_parallelogram(ABCD)";
    }
    return {};
}

struct JacobianCheck {
    double max_rel_error = 0.0;
    int configurations = 0;
};

// Compares the analytic gradient with central differences, relative to
// max(|fd|, 1) per entry, at `count` random configurations in the canvas.
inline JacobianCheck check_jacobian(ConstraintKind k, int count, std::uint64_t seed) {
    SceneProgram p = parse_program(constraint_program(k));
    const Declaration* c = nullptr;
    for (const auto& d : p.declarations)
        if (d.kind == DeclKind::Constraint) c = &d;
    std::string vars = p.point_letters();
    Rng rng(seed);
    JacobianCheck out;
    const double h = 1e-4;
    while (out.configurations < count) {
        std::map<char, Vec2> coords;
        for (char v : vars) coords[v] = {rng.uniform(60.0, 450.0), rng.uniform(60.0, 450.0)};
        auto jac = constraint_jacobian(p, *c, coords, vars);
        double worst = 0.0;
        bool straddles = false;
        for (std::size_t i = 0; i < vars.size(); ++i) {
            for (int axis = 0; axis < 2; ++axis) {
                auto plus = coords, minus = coords;
                (axis ? plus[vars[i]].y : plus[vars[i]].x) += h;
                (axis ? minus[vars[i]].y : minus[vars[i]].x) -= h;
                auto rp = constraint_residuals(p, *c, plus), rm = constraint_residuals(p, *c, minus);
                for (std::size_t r = 0; r < rp.size(); ++r) {
                    // A jump of this size means the step crossed an angle's
                    // 2*pi branch cut; the configuration is redrawn.
                    if (std::abs(rp[r] - rm[r]) > 1.0) straddles = true;
                    double fd = (rp[r] - rm[r]) / (2.0 * h);
                    double an = jac.gradient[r][2 * i + axis];
                    worst = std::max(worst, std::abs(an - fd) / std::max(std::abs(fd), 1.0));
                }
            }
        }
        if (straddles) continue;
        out.max_rel_error = std::max(out.max_rel_error, worst);
        ++out.configurations;
    }
    return out;
}

// Relations of the four brute-checked kinds as (kind, a, b) triples with a < b
// for symmetric pairs; collinear triples as sorted letters.
using RelationSet = std::set<std::tuple<FactKind, std::string, std::string>>;

inline RelationSet relations_of(const std::vector<Fact>& facts) {
    RelationSet out;
    for (const auto& f : facts) {
        switch (f.kind) {
            case FactKind::ParallelPair:
            case FactKind::PerpendicularPair:
            case FactKind::EqualSegments: {
                auto a = ref_to_string(f.subjects[0]), b = ref_to_string(f.answer_target);
                out.insert({f.kind, std::min(a, b), std::max(a, b)});
                break;
            }
            case FactKind::CollinearTriple: {
                std::string t = f.subjects[0].name + f.subjects[1].name + f.answer_target.name;
                std::sort(t.begin(), t.end());
                out.insert({f.kind, t, ""});
                break;
            }
            default: break;
        }
    }
    return out;
}

// Exhaustive numeric enumeration over every pair of drawn linear elements,
// every pair of visible segments and every point triple, intersected with
// symbolic provability.
inline RelationSet brute_force_relations(const ConcreteScene& s, double eps = 1e-6) {
    SymbolicModel model(s);
    RelationSet out;
    auto key = [](const Ref& a, const Ref& b) {
        auto x = ref_to_string(a), y = ref_to_string(b);
        return std::pair(std::min(x, y), std::max(x, y));
    };
    const auto& drawn = model.drawn_linear();
    for (std::size_t i = 0; i < drawn.size(); ++i)
        for (std::size_t j = i + 1; j < drawn.size(); ++j) {
            const Ref &a = drawn[i], &b = drawn[j];
            auto [x, y] = key(a, b);
            if (numeric_predicate(s, PredicateKind::Parallel, {a, b}, eps) && model.provable_parallel(a, b))
                out.insert({FactKind::ParallelPair, x, y});
            if (numeric_predicate(s, PredicateKind::Perpendicular, {a, b}, eps) && model.provable_perpendicular(a, b))
                out.insert({FactKind::PerpendicularPair, x, y});
        }
    std::string pts;
    for (const auto& [c, v] : s.coords) pts.push_back(c);
    std::vector<Ref> segs;
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j)
            if (model.visible(pts[i], pts[j])) segs.push_back(segment_ref(pts[i], pts[j]));
    for (std::size_t i = 0; i < segs.size(); ++i)
        for (std::size_t j = i + 1; j < segs.size(); ++j)
            if (numeric_predicate(s, PredicateKind::EqualLength, {segs[i], segs[j]}, eps) &&
                model.provable_equal_length(segs[i], segs[j])) {
                auto [x, y] = key(segs[i], segs[j]);
                out.insert({FactKind::EqualSegments, x, y});
            }
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j)
            for (std::size_t k = j + 1; k < pts.size(); ++k) {
                std::vector<Ref> args{point_ref(pts[i]), point_ref(pts[j]), point_ref(pts[k])};
                if (numeric_predicate(s, PredicateKind::Collinear, args, eps) && model.provable_collinear(pts[i], pts[j], pts[k]))
                    out.insert({FactKind::CollinearTriple, std::string{pts[i], pts[j], pts[k]}, ""});
            }
    return out;
}

}  // namespace georef::test
