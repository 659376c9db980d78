// SPDX-License-Identifier: Apache-2.0
#include "georef/facts.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <tuple>

namespace georef {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPi = 3.14159265358979323846;
constexpr double kEmitEps = 1e-6;
constexpr double kPosTol = 1e-6;

bool is_linear(const Ref& r) {
    return (r.kind == RefKind::Segment || r.kind == RefKind::Line || r.kind == RefKind::Ray) && r.name.size() == 2;
}

void add_unique(std::string& s, char c) {
    if (s.find(c) == std::string::npos) s += c;
}

bool contains(const std::string& s, char c) { return s.find(c) != std::string::npos; }

int find_root(std::vector<int>& parent, int i) {
    while (parent[i] != i) {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    return i;
}

bool unite(std::vector<int>& parent, int a, int b) {
    a = find_root(parent, a);
    b = find_root(parent, b);
    if (a == b) return false;
    if (a > b) std::swap(a, b);
    parent[b] = a;
    return true;
}

}  // namespace

// ---------------------------------------------------------------------------
// Names

Category classify_fact(FactKind k) {
    int i = static_cast<int>(k);
    if (i <= static_cast<int>(FactKind::Centroid)) return Category::Position;
    if (i <= static_cast<int>(FactKind::AngleBisector)) return Category::Shape;
    return Category::Relationship;
}

std::string_view category_name(Category c) {
    static constexpr std::string_view names[] = {"Position", "Shape", "Relationship"};
    return names[static_cast<int>(c)];
}

Category category_from_name(std::string_view s) {
    for (int i = 0; i < 3; ++i)
        if (category_name(static_cast<Category>(i)) == s) return static_cast<Category>(i);
    throw std::invalid_argument("unknown fact category '" + std::string(s) + "'");
}

std::string_view fact_kind_name(FactKind k) {
    static constexpr std::string_view names[] = {
        "IntersectionPoint", "TangencyPoint",     "Midpoint",
        "CircleCenter",      "FootOfPerpendicular", "PointOnExtension",
        "Incenter",          "Circumcenter",      "Centroid",
        "TangentLine",       "Secant",            "Chord",
        "Diameter",          "Radius",            "InscribedAngle",
        "CentralAngle",      "Triangle",          "Parallelogram",
        "PerpendicularBisector", "AngleBisector", "ParallelPair",
        "PerpendicularPair", "EqualAngles",       "EqualSegments",
        "VerticalAngles",    "AlternateInteriorAngles", "CorrespondingAngles",
        "CoInteriorAngles",  "CollinearTriple",   "AngleBisects",
    };
    return names[static_cast<int>(k)];
}

FactKind fact_kind_from_name(std::string_view s) {
    for (int i = 0; i < kFactKindCount; ++i)
        if (fact_kind_name(static_cast<FactKind>(i)) == s) return static_cast<FactKind>(i);
    throw std::invalid_argument("unknown fact kind '" + std::string(s) + "'");
}

std::string_view derivation_name(Derivation d) {
    static constexpr std::string_view names[] = {"symbolic", "numeric", "both"};
    return names[static_cast<int>(d)];
}

Derivation derivation_from_name(std::string_view s) {
    for (int i = 0; i < 3; ++i)
        if (derivation_name(static_cast<Derivation>(i)) == s) return static_cast<Derivation>(i);
    throw std::invalid_argument("unknown derivation '" + std::string(s) + "'");
}

bool Fact::operator<(const Fact& o) const {
    return std::tie(category, kind, subjects, answer_target) < std::tie(o.category, o.kind, o.subjects, o.answer_target);
}

bool Fact::operator==(const Fact& o) const {
    return category == o.category && kind == o.kind && subjects == o.subjects && answer_target == o.answer_target;
}

Ref canonical_angle(char a, char vertex, char b) {
    if (b < a) std::swap(a, b);
    return angle_ref(a, vertex, b);
}

Ref canonical_segment(char a, char b) {
    if (b < a) std::swap(a, b);
    return segment_ref(a, b);
}

// ---------------------------------------------------------------------------
// Residuals

double fact_residual(const Fact& f, const ConcreteScene& s) {
    const auto& sub = f.subjects;
    const Ref& tgt = f.answer_target;
    auto fail = [&](const std::string& why) {
        return ArityError(std::string(fact_kind_name(f.kind)) + ": " + why);
    };
    auto need = [&](std::size_t n) {
        if (sub.size() != n) throw fail("expected " + std::to_string(n) + " subjects, got " + std::to_string(sub.size()));
    };
    auto point_of = [&](const Ref& r) {
        if (r.kind != RefKind::Point || r.name.size() != 1) throw fail(ref_to_string(r) + " is not a point");
        return s.at(r.name[0]);
    };
    auto linear = [&](const Ref& r) {
        if (!is_linear(r)) throw fail(ref_to_string(r) + " is not a segment, line or ray");
        return std::pair{s.at(r.name[0]), s.at(r.name[1])};
    };
    auto angle = [&](const Ref& r) {
        if (r.kind != RefKind::Angle || r.name.size() != 3) throw fail(ref_to_string(r) + " is not an angle");
        return angle_at(s.at(r.name[0]), s.at(r.name[1]), s.at(r.name[2]));
    };
    auto circle = [&](const Ref& r) {
        if (r.kind != RefKind::Circle || r.name.size() != 1) throw fail(ref_to_string(r) + " is not a circle");
        return std::pair{s.at(r.name[0]), s.circle_radius(r.name[0])};
    };
    auto triangle = [&](const Ref& r) {
        if (r.kind != RefKind::Polygon || r.name.size() != 3) throw fail(ref_to_string(r) + " is not a triangle");
        return std::tuple{s.at(r.name[0]), s.at(r.name[1]), s.at(r.name[2])};
    };
    auto off_carrier = [&](Vec2 x, const Ref& r) {
        if (r.kind == RefKind::Circle) {
            auto [o, rad] = circle(r);
            return std::abs(dist(o, x) - rad);
        }
        auto [a, b] = linear(r);
        return line_distance(x, a, b);
    };
    auto on_circle = [&](const Ref& c, char p) {
        auto [o, rad] = circle(c);
        return std::abs(dist(o, s.at(p)) - rad);
    };
    auto unit_dir = [&](const Ref& r) {
        auto [a, b] = linear(r);
        Vec2 v = b - a;
        return v / norm(v);
    };
    auto bisect_residual = [&](const Ref& ang, const Ref& line) {
        char v = ang.name[1];
        if (!contains(line.name, v)) throw fail("bisector does not pass through the vertex");
        char d = line.name[0] == v ? line.name[1] : line.name[0];
        Vec2 a = s.at(ang.name[0]), b = s.at(v), c = s.at(ang.name[2]), x = s.at(d);
        double t1 = angle_at(a, b, x), t2 = angle_at(x, b, c);
        return std::max(std::abs(t1 - t2), std::abs(t1 + t2 - angle_at(a, b, c)));
    };

    switch (f.kind) {
        case FactKind::IntersectionPoint: {
            need(2);
            Vec2 x = point_of(tgt);
            return std::max(off_carrier(x, sub[0]), off_carrier(x, sub[1]));
        }
        case FactKind::TangencyPoint: {
            need(2);
            Vec2 x = point_of(tgt);
            auto [a, b] = linear(sub[0]);
            auto [o, rad] = circle(sub[1]);
            return std::max({std::abs(dist(o, x) - rad), line_distance(x, a, b), std::abs(line_distance(o, a, b) - rad)});
        }
        case FactKind::Midpoint: {
            need(1);
            auto [a, b] = linear(sub[0]);
            return dist(point_of(tgt), midpoint(a, b));
        }
        case FactKind::CircleCenter: {
            need(1);
            return dist(point_of(tgt), circle(sub[0]).first);
        }
        case FactKind::FootOfPerpendicular: {
            need(2);
            auto [a, b] = linear(sub[1]);
            return dist(point_of(tgt), foot_of_perpendicular(point_of(sub[0]), a, b));
        }
        case FactKind::PointOnExtension: {
            need(1);
            auto [a, b] = linear(sub[0]);
            Vec2 x = point_of(tgt), d = b - a;
            double t = dot(x - a, d) / dot(d, d);
            if (t > 0.0 && t < 1.0) return kInf;
            return line_distance(x, a, b);
        }
        case FactKind::Incenter: {
            need(1);
            auto [a, b, c] = triangle(sub[0]);
            return dist(point_of(tgt), incenter(a, b, c));
        }
        case FactKind::Circumcenter: {
            need(1);
            auto [a, b, c] = triangle(sub[0]);
            return dist(point_of(tgt), circumcenter(a, b, c));
        }
        case FactKind::Centroid: {
            need(1);
            auto [a, b, c] = triangle(sub[0]);
            return dist(point_of(tgt), centroid(a, b, c));
        }
        case FactKind::TangentLine: {
            need(1);
            auto [a, b] = linear(tgt);
            auto [o, rad] = circle(sub[0]);
            return std::abs(line_distance(o, a, b) - rad);
        }
        case FactKind::Secant: {
            need(3);
            auto [a, b] = linear(tgt);
            double r = 0.0;
            for (int i = 1; i < 3; ++i) {
                Vec2 x = point_of(sub[i]);
                r = std::max({r, on_circle(sub[0], sub[i].name[0]), line_distance(x, a, b)});
            }
            if (sub[1] == sub[2]) return kInf;
            return r;
        }
        case FactKind::Chord:
        case FactKind::Diameter: {
            need(1);
            linear(tgt);
            double r = std::max(on_circle(sub[0], tgt.name[0]), on_circle(sub[0], tgt.name[1]));
            if (f.kind == FactKind::Diameter)
                r = std::max(r, line_distance(circle(sub[0]).first, s.at(tgt.name[0]), s.at(tgt.name[1])));
            return r;
        }
        case FactKind::Radius: {
            need(1);
            linear(tgt);
            char o = sub[0].name[0];
            if (!contains(tgt.name, o)) throw fail("radius does not end at the center");
            char x = tgt.name[0] == o ? tgt.name[1] : tgt.name[0];
            return on_circle(sub[0], x);
        }
        case FactKind::InscribedAngle:
        case FactKind::CentralAngle: {
            need(2);
            angle(tgt);
            linear(sub[1]);
            std::string outer{tgt.name[0], tgt.name[2]}, chord = sub[1].name;
            std::sort(outer.begin(), outer.end());
            std::sort(chord.begin(), chord.end());
            if (outer != chord) throw fail("angle does not subtend the chord");
            double r = std::max(on_circle(sub[0], tgt.name[0]), on_circle(sub[0], tgt.name[2]));
            if (f.kind == FactKind::InscribedAngle) return std::max(r, on_circle(sub[0], tgt.name[1]));
            return std::max(r, dist(s.at(tgt.name[1]), circle(sub[0]).first));
        }
        case FactKind::Triangle: {
            need(0);
            auto [a, b, c] = triangle(tgt);
            double longest = std::max({dist(a, b), dist(b, c), dist(c, a)});
            return std::abs(cross(b - a, c - a)) / longest > kEmitEps ? 0.0 : kInf;
        }
        case FactKind::Parallelogram: {
            need(0);
            if (tgt.kind != RefKind::Polygon || tgt.name.size() != 4) throw fail(ref_to_string(tgt) + " is not a quadrilateral");
            Vec2 a = s.at(tgt.name[0]), b = s.at(tgt.name[1]), c = s.at(tgt.name[2]), d = s.at(tgt.name[3]);
            return norm((a + c) - (b + d));
        }
        case FactKind::PerpendicularBisector: {
            need(1);
            auto [a, b] = linear(sub[0]);
            auto [p, q] = linear(tgt);
            return std::max(line_distance(midpoint(a, b), p, q), std::abs(dot(unit_dir(sub[0]), unit_dir(tgt))));
        }
        case FactKind::AngleBisector:
            need(1);
            angle(sub[0]);
            linear(tgt);
            return bisect_residual(sub[0], tgt);
        case FactKind::AngleBisects:
            need(1);
            angle(tgt);
            linear(sub[0]);
            return bisect_residual(tgt, sub[0]);
        case FactKind::ParallelPair:
            need(1);
            return std::abs(cross(unit_dir(sub[0]), unit_dir(tgt)));
        case FactKind::PerpendicularPair:
            need(1);
            return std::abs(dot(unit_dir(sub[0]), unit_dir(tgt)));
        case FactKind::EqualSegments: {
            need(1);
            auto [a, b] = linear(sub[0]);
            auto [c, d] = linear(tgt);
            return std::abs(dist(a, b) - dist(c, d));
        }
        case FactKind::EqualAngles:
        case FactKind::AlternateInteriorAngles:
        case FactKind::CorrespondingAngles:
            need(1);
            return std::abs(angle(sub[0]) - angle(tgt));
        case FactKind::VerticalAngles:
            need(1);
            if (sub[0].name.size() == 3 && tgt.name.size() == 3 && sub[0].name[1] != tgt.name[1])
                throw fail("vertical angles must share a vertex");
            return std::abs(angle(sub[0]) - angle(tgt));
        case FactKind::CoInteriorAngles:
            need(1);
            return std::abs(angle(sub[0]) + angle(tgt) - kPi);
        case FactKind::CollinearTriple: {
            need(2);
            Vec2 a = point_of(sub[0]), b = point_of(sub[1]), c = point_of(tgt);
            double longest = std::max({dist(a, b), dist(b, c), dist(c, a)});
            if (!(longest > 0.0)) return 0.0;
            return std::abs(cross(b - a, c - a)) / longest;
        }
    }
    return kInf;
}

bool verify_fact(const Fact& f, const ConcreteScene& s, double eps) {
    try {
        return fact_residual(f, s) <= eps;
    } catch (const DegenerateConstruction&) {
        return false;
    }
}

// ---------------------------------------------------------------------------
// Symbolic model

SymbolicModel::SymbolicModel(const ConcreteScene& s) : scene_(s) {
    const SceneProgram& p = s.program;
    std::vector<std::string> sets;
    auto add_set = [&](const std::string& pts) {
        std::string u;
        for (char c : pts) add_unique(u, c);
        if (u.size() >= 2) sets.push_back(u);
    };
    auto add_member = [&](char center, char x) { add_unique(circles_[center], x); };
    auto add_midpoint = [&](char m, char a, char b) {
        std::string ends{std::min(a, b), std::max(a, b)};
        for (const auto& [x, e] : midpoints_)
            if (x == m && e == ends) return;
        midpoints_.emplace_back(m, ends);
    };

    struct Triple {
        char out;
        std::string abc;
    };
    std::vector<Triple> circumcenters, centroids, incenters;
    std::vector<std::pair<char, std::string>> intersections;  // (point, "ACBD")
    std::string parallelogram;

    for (const auto& d : p.declarations) {
        if (d.kind == DeclKind::Circle) circles_[d.points[0]];
    }
    for (const auto& d : p.declarations) {
        const auto& a = d.args;
        switch (d.kind) {
            case DeclKind::Segment:
            case DeclKind::Line:
            case DeclKind::Ray: add_set(d.points); break;
            case DeclKind::Polygon:
                for (std::size_t i = 0; i < d.points.size(); ++i)
                    add_set(std::string{d.points[i], d.points[(i + 1) % d.points.size()]});
                break;
            case DeclKind::Circle: add_member(d.points[0], d.points[1]); break;
            case DeclKind::ConstructedPoint: {
                char x = d.name;
                switch (d.constructor) {
                    case Constructor::Midpoint:
                        add_set(std::string{a[0].letters[0], a[1].letters[0], x});
                        add_midpoint(x, a[0].letters[0], a[1].letters[0]);
                        break;
                    case Constructor::IntersectionLineLine:
                        add_set(a[0].letters + x);
                        add_set(a[1].letters + x);
                        intersections.emplace_back(x, a[0].letters + a[1].letters);
                        break;
                    case Constructor::IntersectionLineCircle:
                        add_set(a[0].letters + x);
                        add_member(a[1].letters[0], x);
                        break;
                    case Constructor::IntersectionCircleCircle:
                        add_member(a[0].letters[0], x);
                        add_member(a[1].letters[0], x);
                        break;
                    case Constructor::FootOfPerpendicular:
                        add_set(a[1].letters + x);
                        add_set(std::string{a[0].letters[0], x});
                        break;
                    case Constructor::TangentPoint:
                        add_set(std::string{a[0].letters[0], x});
                        add_set(std::string{a[1].letters[0], x});
                        add_member(a[1].letters[0], x);
                        break;
                    case Constructor::PointOn:
                        if (a[0].type == ArgType::Circle)
                            add_member(a[0].letters[0], x);
                        else
                            add_set(a[0].letters + x);
                        break;
                    case Constructor::ExtensionPoint: add_set(a[0].letters + x); break;
                    case Constructor::CircleCenter:
                    case Constructor::Circumcenter:
                        circumcenters.push_back({x, a[0].letters + a[1].letters + a[2].letters});
                        break;
                    case Constructor::Incenter: {
                        std::string abc = a[0].letters + a[1].letters + a[2].letters;
                        for (char v : abc) add_set(std::string{v, x});
                        incenters.push_back({x, abc});
                        break;
                    }
                    case Constructor::Centroid:
                        centroids.push_back({x, a[0].letters + a[1].letters + a[2].letters});
                        break;
                }
                break;
            }
            case DeclKind::Constraint:
                switch (d.constraint) {
                    case ConstraintKind::Parallel:
                    case ConstraintKind::Perpendicular:
                        add_set(a[0].letters);
                        add_set(a[1].letters);
                        break;
                    case ConstraintKind::Tangent: add_set(a[0].letters); break;
                    case ConstraintKind::OnCircle: add_member(a[1].letters[0], a[0].letters[0]); break;
                    case ConstraintKind::Collinear:
                        add_set(a[0].letters + a[1].letters + a[2].letters);
                        break;
                    case ConstraintKind::AngleBisector:
                        add_set(std::string{a[0].letters[1], a[1].letters[0]});
                        break;
                    case ConstraintKind::IsDiameter:
                        add_set(a[0].letters + a[1].letters);
                        add_member(a[1].letters[0], a[0].letters[0]);
                        add_member(a[1].letters[0], a[0].letters[1]);
                        add_midpoint(a[1].letters[0], a[0].letters[0], a[0].letters[1]);
                        break;
                    case ConstraintKind::IsChord:
                        add_set(a[0].letters);
                        add_member(a[1].letters[0], a[0].letters[0]);
                        add_member(a[1].letters[0], a[0].letters[1]);
                        break;
                    case ConstraintKind::IsInscribedAngle:
                        for (char c : a[0].letters) add_member(a[1].letters[0], c);
                        break;
                    case ConstraintKind::IsCentralAngle:
                        add_member(a[1].letters[0], a[0].letters[0]);
                        add_member(a[1].letters[0], a[0].letters[2]);
                        break;
                    case ConstraintKind::IsParallelogram: {
                        const std::string& q = a[0].letters;
                        for (int i = 0; i < 4; ++i) add_set(std::string{q[i], q[(i + 1) % 4]});
                        parallelogram = q;
                        break;
                    }
                    case ConstraintKind::EqualLength:
                    case ConstraintKind::EqualAngle: break;
                }
                break;
            default: break;
        }
    }

    for (const auto& t : circumcenters) {
        if (circles_.count(t.out))
            for (char c : t.abc) add_member(t.out, c);
    }
    for (const auto& t : centroids) {
        for (int i = 0; i < 3; ++i) {
            char v = t.abc[i], u = t.abc[(i + 1) % 3], w = t.abc[(i + 2) % 3];
            for (const auto& [m, ends] : midpoints_)
                if (ends == std::string{std::min(u, w), std::max(u, w)}) add_set(std::string{v, m, t.out});
        }
    }
    if (!parallelogram.empty()) {
        auto same = [](std::string a, std::string b) {
            std::sort(a.begin(), a.end());
            std::sort(b.begin(), b.end());
            return a == b;
        };
        std::string d1{parallelogram[0], parallelogram[2]}, d2{parallelogram[1], parallelogram[3]};
        for (const auto& [x, lines] : intersections) {
            std::string l1 = lines.substr(0, 2), l2 = lines.substr(2, 2);
            if ((same(l1, d1) && same(l2, d2)) || (same(l1, d2) && same(l2, d1))) {
                add_midpoint(x, d1[0], d1[1]);
                add_midpoint(x, d2[0], d2[1]);
            }
        }
    }

    // Merge point sets sharing two points: they lie on one line.
    for (bool changed = true; changed;) {
        changed = false;
        for (std::size_t i = 0; i < sets.size() && !changed; ++i) {
            for (std::size_t j = i + 1; j < sets.size() && !changed; ++j) {
                int common = 0;
                for (char c : sets[j]) common += contains(sets[i], c);
                if (common >= 2) {
                    for (char c : sets[j]) add_unique(sets[i], c);
                    sets.erase(sets.begin() + static_cast<std::ptrdiff_t>(j));
                    changed = true;
                }
            }
        }
    }

    for (const auto& set : sets) {
        Carrier c;
        char a = 0, b = 0;
        double best = -1.0;
        for (char u : set)
            for (char v : set)
                if (u < v && dist(s.at(u), s.at(v)) > best) {
                    best = dist(s.at(u), s.at(v));
                    a = u;
                    b = v;
                }
        c.origin = s.at(a);
        c.direction = best > 0.0 ? (s.at(b) - s.at(a)) / best : Vec2{1.0, 0.0};
        c.points = set;
        std::sort(c.points.begin(), c.points.end(), [&](char u, char v) {
            double tu = dot(s.at(u) - c.origin, c.direction), tv = dot(s.at(v) - c.origin, c.direction);
            return tu != tv ? tu < tv : u < v;
        });
        carriers_.push_back(std::move(c));
    }

    // Drawn extents along each carrier.
    std::vector<std::vector<std::pair<double, double>>> raw(carriers_.size());
    auto add_drawn = [&](RefKind kind, char u, char v) {
        int c = *carrier_of(u, v);
        double tu = position(c, u), tv = position(c, v);
        if (kind == RefKind::Segment)
            raw[c].emplace_back(std::min(tu, tv), std::max(tu, tv));
        else if (kind == RefKind::Line)
            raw[c].emplace_back(-kInf, kInf);
        else if (tv > tu)
            raw[c].emplace_back(tu, kInf);
        else
            raw[c].emplace_back(-kInf, tu);
        Ref r = kind == RefKind::Ray ? Ref{kind, std::string{u, v}} : Ref{kind, canonical_segment(u, v).name};
        if (std::find(drawn_linear_.begin(), drawn_linear_.end(), r) == drawn_linear_.end()) drawn_linear_.push_back(r);
    };
    for (const auto& d : p.declarations) {
        if (d.kind == DeclKind::Segment) add_drawn(RefKind::Segment, d.points[0], d.points[1]);
        if (d.kind == DeclKind::Line) add_drawn(RefKind::Line, d.points[0], d.points[1]);
        if (d.kind == DeclKind::Ray) add_drawn(RefKind::Ray, d.points[0], d.points[1]);
        if (d.kind == DeclKind::Polygon)
            for (std::size_t i = 0; i < d.points.size(); ++i)
                add_drawn(RefKind::Segment, d.points[i], d.points[(i + 1) % d.points.size()]);
    }
    for (std::size_t c = 0; c < carriers_.size(); ++c) {
        auto iv = raw[c];
        std::sort(iv.begin(), iv.end());
        for (const auto& [lo, hi] : iv) {
            auto& merged = carriers_[c].drawn;
            if (!merged.empty() && lo <= merged.back().second + kPosTol)
                merged.back().second = std::max(merged.back().second, hi);
            else
                merged.emplace_back(lo, hi);
        }
    }
    for (const auto& c : carriers_)
        for (std::size_t i = 0; i < c.points.size(); ++i)
            for (std::size_t j = i + 1; j < c.points.size(); ++j)
                if (visible(c.points[i], c.points[j])) visible_.push_back(canonical_segment(c.points[i], c.points[j]));
    std::sort(visible_.begin(), visible_.end());

    // Equal lengths.
    eq_parent_.resize(26 * 26);
    for (int i = 0; i < 26 * 26; ++i) eq_parent_[i] = i;
    auto eq = [&](char a, char b, char c, char d) { unite(eq_parent_, pair_index(a, b), pair_index(c, d)); };
    for (const auto& [m, ends] : midpoints_) eq(m, ends[0], m, ends[1]);
    for (const auto& [o, members] : circles_)
        for (std::size_t i = 1; i < members.size(); ++i) eq(o, members[0], o, members[i]);
    for (const auto& t : circumcenters) {
        eq(t.out, t.abc[0], t.out, t.abc[1]);
        eq(t.out, t.abc[0], t.out, t.abc[2]);
    }
    if (!parallelogram.empty()) {
        const std::string& q = parallelogram;
        eq(q[0], q[1], q[2], q[3]);
        eq(q[1], q[2], q[3], q[0]);
    }
    std::map<std::pair<char, char>, std::string> tangents;  // (external point, center) -> tangency points
    for (const auto& d : p.declarations) {
        if (d.kind == DeclKind::ConstructedPoint && d.constructor == Constructor::TangentPoint)
            tangents[{d.args[0].letters[0], d.args[1].letters[0]}] += d.name;
        if (d.kind == DeclKind::Constraint && d.constraint == ConstraintKind::EqualLength)
            eq(d.args[0].letters[0], d.args[0].letters[1], d.args[1].letters[0], d.args[1].letters[1]);
    }
    for (const auto& [key, pts] : tangents)
        for (std::size_t i = 1; i < pts.size(); ++i) eq(key.first, pts[0], key.first, pts[i]);

    // Parallel and perpendicular relations between carriers.
    par_parent_.resize(carriers_.size());
    for (std::size_t i = 0; i < carriers_.size(); ++i) par_parent_[i] = static_cast<int>(i);
    std::vector<std::pair<int, int>> perp_raw;
    auto car = [&](char a, char b) { return carrier_of(a, b).value_or(-1); };
    auto perp = [&](int a, int b) {
        if (a >= 0 && b >= 0 && a != b) perp_raw.emplace_back(a, b);
    };
    auto par = [&](int a, int b) {
        if (a >= 0 && b >= 0) unite(par_parent_, a, b);
    };

    for (const auto& d : p.declarations) {
        const auto& a = d.args;
        if (d.kind == DeclKind::Constraint) {
            switch (d.constraint) {
                case ConstraintKind::Parallel: par(car(a[0].letters[0], a[0].letters[1]), car(a[1].letters[0], a[1].letters[1])); break;
                case ConstraintKind::Perpendicular:
                    perp(car(a[0].letters[0], a[0].letters[1]), car(a[1].letters[0], a[1].letters[1]));
                    break;
                case ConstraintKind::IsParallelogram: {
                    const std::string& q = a[0].letters;
                    par(car(q[0], q[1]), car(q[2], q[3]));
                    par(car(q[1], q[2]), car(q[3], q[0]));
                    break;
                }
                case ConstraintKind::Tangent: {
                    int line = car(a[0].letters[0], a[0].letters[1]);
                    char o = a[1].letters[0];
                    for (char t : carriers_[line].points)
                        if (on_circle(t, o)) perp(car(o, t), line);
                    break;
                }
                default: break;
            }
        } else if (d.kind == DeclKind::ConstructedPoint) {
            if (d.constructor == Constructor::FootOfPerpendicular)
                perp(car(a[0].letters[0], d.name), car(a[1].letters[0], a[1].letters[1]));
            if (d.constructor == Constructor::TangentPoint)
                perp(car(a[0].letters[0], d.name), car(a[1].letters[0], d.name));
        }
    }
    // Angle in a semicircle.
    for (const auto& [o, members] : circles_) {
        for (const auto& c : carriers_) {
            if (!contains(c.points, o)) continue;
            std::string ends;
            for (char m : members)
                if (contains(c.points, m)) ends += m;
            if (ends.size() != 2) continue;
            add_midpoint(o, ends[0], ends[1]);
            for (char z : members)
                if (!contains(ends, z)) perp(car(ends[0], z), car(ends[1], z));
        }
    }
    // Common chord of two circles is perpendicular to the line of centers.
    for (auto i = circles_.begin(); i != circles_.end(); ++i) {
        for (auto j = std::next(i); j != circles_.end(); ++j) {
            std::string common;
            for (char m : i->second)
                if (contains(j->second, m)) common += m;
            if (common.size() >= 2) perp(car(common[0], common[1]), car(i->first, j->first));
        }
    }
    // Bisector of the apex angle of an isosceles triangle.
    for (const auto& d : p.declarations) {
        if (d.kind != DeclKind::Constraint || d.constraint != ConstraintKind::AngleBisector) continue;
        char b = d.args[0].letters[0], apex = d.args[0].letters[1], c = d.args[0].letters[2], x = d.args[1].letters[0];
        if (find_eq(pair_index(apex, b)) != find_eq(pair_index(apex, c))) continue;
        int bisector = car(apex, x), base = car(b, c);
        if (bisector < 0 || base < 0) continue;
        perp(bisector, base);
        for (char e : carriers_[bisector].points)
            if (contains(carriers_[base].points, e)) {
                add_midpoint(e, b, c);
                eq(e, b, e, c);
            }
    }
    // Midline of a triangle.
    for (std::size_t i = 0; i < midpoints_.size(); ++i) {
        for (std::size_t j = i + 1; j < midpoints_.size(); ++j) {
            const auto& [m1, e1] = midpoints_[i];
            const auto& [m2, e2] = midpoints_[j];
            std::string shared, rest;
            for (char c : e1) (contains(e2, c) ? shared : rest) += c;
            if (shared.size() != 1) continue;
            for (char c : e2)
                if (!contains(e1, c)) rest += c;
            par(car(m1, m2), car(rest[0], rest[1]));
        }
    }
    // Lines perpendicular to parallel lines are parallel.
    for (bool changed = true; changed;) {
        changed = false;
        for (std::size_t i = 0; i < perp_raw.size(); ++i)
            for (std::size_t j = i + 1; j < perp_raw.size(); ++j) {
                auto [a, b] = perp_raw[i];
                auto [c, d] = perp_raw[j];
                if (find_par(a) == find_par(c)) changed |= unite(par_parent_, b, d);
                if (find_par(a) == find_par(d)) changed |= unite(par_parent_, b, c);
                if (find_par(b) == find_par(c)) changed |= unite(par_parent_, a, d);
                if (find_par(b) == find_par(d)) changed |= unite(par_parent_, a, c);
            }
    }
    for (auto [a, b] : perp_raw) {
        int ra = find_par(a), rb = find_par(b);
        perp_.insert({std::min(ra, rb), std::max(ra, rb)});
    }
}

int SymbolicModel::pair_index(char a, char b) const {
    if (a > b) std::swap(a, b);
    return (a - 'A') * 26 + (b - 'A');
}

int SymbolicModel::find_eq(int i) const { return find_root(eq_parent_, i); }
int SymbolicModel::find_par(int i) const { return find_root(par_parent_, i); }
int SymbolicModel::parallel_class(int carrier) const { return find_par(carrier); }

std::optional<int> SymbolicModel::carrier_of(char a, char b) const {
    if (a == b) return std::nullopt;
    for (std::size_t i = 0; i < carriers_.size(); ++i)
        if (contains(carriers_[i].points, a) && contains(carriers_[i].points, b)) return static_cast<int>(i);
    return std::nullopt;
}

bool SymbolicModel::on_circle(char p, char center) const {
    auto it = circles_.find(center);
    return it != circles_.end() && contains(it->second, p);
}

const std::string& SymbolicModel::circle_members(char center) const {
    static const std::string empty;
    auto it = circles_.find(center);
    return it == circles_.end() ? empty : it->second;
}

std::vector<char> SymbolicModel::circle_centers() const {
    std::vector<char> out;
    for (const auto& [c, m] : circles_) out.push_back(c);
    return out;
}

double SymbolicModel::position(int carrier, char p) const {
    const Carrier& c = carriers_[carrier];
    return dot(scene_.at(p) - c.origin, c.direction);
}

bool SymbolicModel::visible(char a, char b) const {
    auto c = carrier_of(a, b);
    if (!c) return false;
    double ta = position(*c, a), tb = position(*c, b);
    double lo = std::min(ta, tb), hi = std::max(ta, tb);
    for (const auto& [x, y] : carriers_[*c].drawn)
        if (x <= lo + kPosTol && y >= hi - kPosTol) return true;
    return false;
}

bool SymbolicModel::provable_parallel(const Ref& a, const Ref& b) const {
    if (!is_linear(a) || !is_linear(b)) return false;
    auto ca = carrier_of(a.name[0], a.name[1]), cb = carrier_of(b.name[0], b.name[1]);
    return ca && cb && *ca != *cb && find_par(*ca) == find_par(*cb);
}

bool SymbolicModel::provable_perpendicular(const Ref& a, const Ref& b) const {
    if (!is_linear(a) || !is_linear(b)) return false;
    auto ca = carrier_of(a.name[0], a.name[1]), cb = carrier_of(b.name[0], b.name[1]);
    if (!ca || !cb) return false;
    int ra = find_par(*ca), rb = find_par(*cb);
    return perp_.count({std::min(ra, rb), std::max(ra, rb)}) != 0;
}

bool SymbolicModel::provable_collinear(char a, char b, char c) const {
    if (a == b || b == c || a == c) return true;
    auto ab = carrier_of(a, b);
    return ab && contains(carriers_[*ab].points, c);
}

bool SymbolicModel::provable_equal_length(const Ref& a, const Ref& b) const {
    if (!is_linear(a) || !is_linear(b) || a.name[0] == a.name[1] || b.name[0] == b.name[1]) return false;
    return find_eq(pair_index(a.name[0], a.name[1])) == find_eq(pair_index(b.name[0], b.name[1]));
}

// ---------------------------------------------------------------------------
// Fact derivation

class FactBuilder {
public:
    explicit FactBuilder(const ConcreteScene& s) : s_(s), m_(s) {}

    std::vector<Fact> all() {
        position();
        shape();
        relationship();
        angles();
        return finish();
    }

    std::vector<Fact> angle_only() {
        angles();
        return finish();
    }

private:
    void emit(FactKind k, std::vector<Ref> subjects, Ref target) {
        Fact f;
        f.category = classify_fact(k);
        f.kind = k;
        f.subjects = std::move(subjects);
        f.answer_target = std::move(target);
        f.derivation = Derivation::Both;
        try {
            f.witness = fact_residual(f, s_);
        } catch (const std::exception&) {
            return;
        }
        if (f.witness <= kEmitEps) out_.push_back(std::move(f));
    }

    std::vector<Fact> finish() {
        std::sort(out_.begin(), out_.end());
        out_.erase(std::unique(out_.begin(), out_.end()), out_.end());
        return std::move(out_);
    }

    // The drawn element carrying exactly a and b, or the segment between them.
    Ref linear(char a, char b) const {
        std::optional<Ref> best;
        for (const auto& d : s_.program.declarations) {
            if (d.kind != DeclKind::Segment && d.kind != DeclKind::Line && d.kind != DeclKind::Ray) continue;
            if (!((d.points[0] == a && d.points[1] == b) || (d.points[0] == b && d.points[1] == a))) continue;
            RefKind k = d.kind == DeclKind::Segment ? RefKind::Segment : d.kind == DeclKind::Line ? RefKind::Line : RefKind::Ray;
            Ref r = k == RefKind::Ray ? Ref{k, d.points} : Ref{k, canonical_segment(a, b).name};
            if (!best || r.kind < best->kind) best = r;
        }
        return best ? *best : canonical_segment(a, b);
    }

    Ref triangle(const std::string& abc) const {
        std::string key = abc;
        std::sort(key.begin(), key.end());
        for (const auto& d : s_.program.declarations) {
            if (d.kind != DeclKind::Polygon || d.points.size() != 3) continue;
            std::string k = d.points;
            std::sort(k.begin(), k.end());
            if (k == key) return {RefKind::Polygon, d.points};
        }
        return {RefKind::Polygon, abc};
    }

    bool angle_drawn(const Ref& a) const { return m_.visible(a.name[1], a.name[0]) && m_.visible(a.name[1], a.name[2]); }

    void position() {
        for (const auto& d : s_.program.declarations) {
            const auto& a = d.args;
            if (d.kind == DeclKind::ConstructedPoint) {
                Ref x = point_ref(d.name);
                switch (d.constructor) {
                    case Constructor::IntersectionLineLine: {
                        std::vector<Ref> sub{linear(a[0].letters[0], a[0].letters[1]), linear(a[1].letters[0], a[1].letters[1])};
                        std::sort(sub.begin(), sub.end());
                        emit(FactKind::IntersectionPoint, sub, x);
                        break;
                    }
                    case Constructor::IntersectionLineCircle:
                        emit(FactKind::IntersectionPoint, {linear(a[0].letters[0], a[0].letters[1]), circle_ref(a[1].letters[0])}, x);
                        break;
                    case Constructor::IntersectionCircleCircle:
                        emit(FactKind::IntersectionPoint, {circle_ref(a[0].letters[0]), circle_ref(a[1].letters[0])}, x);
                        break;
                    case Constructor::FootOfPerpendicular:
                        emit(FactKind::FootOfPerpendicular, {point_ref(a[0].letters[0]), linear(a[1].letters[0], a[1].letters[1])}, x);
                        break;
                    case Constructor::TangentPoint:
                        if (m_.visible(a[0].letters[0], d.name))
                            emit(FactKind::TangencyPoint, {linear(a[0].letters[0], d.name), circle_ref(a[1].letters[0])}, x);
                        break;
                    case Constructor::ExtensionPoint:
                        if (m_.visible(a[0].letters[0], a[0].letters[1]))
                            emit(FactKind::PointOnExtension, {canonical_segment(a[0].letters[0], a[0].letters[1])}, x);
                        break;
                    case Constructor::CircleCenter:
                    case Constructor::Circumcenter:
                        emit(FactKind::Circumcenter, {triangle(a[0].letters + a[1].letters + a[2].letters)}, x);
                        break;
                    case Constructor::Incenter:
                        emit(FactKind::Incenter, {triangle(a[0].letters + a[1].letters + a[2].letters)}, x);
                        break;
                    case Constructor::Centroid:
                        emit(FactKind::Centroid, {triangle(a[0].letters + a[1].letters + a[2].letters)}, x);
                        break;
                    default: break;
                }
            } else if (d.kind == DeclKind::Constraint && d.constraint == ConstraintKind::Tangent) {
                auto line = m_.carrier_of(a[0].letters[0], a[0].letters[1]);
                char o = a[1].letters[0];
                for (char t : m_.carriers()[*line].points)
                    if (m_.on_circle(t, o))
                        emit(FactKind::TangencyPoint, {linear(a[0].letters[0], a[0].letters[1]), circle_ref(o)}, point_ref(t));
            }
        }
        for (const auto& [mid, ends] : m_.midpoints())
            if (m_.visible(ends[0], ends[1])) emit(FactKind::Midpoint, {canonical_segment(ends[0], ends[1])}, point_ref(mid));
        for (char o : m_.circle_centers()) emit(FactKind::CircleCenter, {circle_ref(o)}, point_ref(o));
    }

    void shape() {
        const auto& prog = s_.program;
        for (const auto& d : prog.declarations) {
            const auto& a = d.args;
            if (d.kind == DeclKind::ConstructedPoint && d.constructor == Constructor::TangentPoint &&
                m_.visible(a[0].letters[0], d.name))
                emit(FactKind::TangentLine, {circle_ref(a[1].letters[0])}, linear(a[0].letters[0], d.name));
            if (d.kind == DeclKind::Constraint && d.constraint == ConstraintKind::Tangent)
                emit(FactKind::TangentLine, {circle_ref(a[1].letters[0])}, linear(a[0].letters[0], a[0].letters[1]));
            if (d.kind == DeclKind::Polygon && d.points.size() == 3) emit(FactKind::Triangle, {}, {RefKind::Polygon, d.points});
            if (d.kind == DeclKind::Constraint && d.constraint == ConstraintKind::IsParallelogram) {
                const std::string& q = a[0].letters;
                bool drawn = true;
                for (int i = 0; i < 4; ++i) drawn = drawn && m_.visible(q[i], q[(i + 1) % 4]);
                if (drawn) emit(FactKind::Parallelogram, {}, {RefKind::Polygon, q});
            }
            if (d.kind == DeclKind::Constraint && d.constraint == ConstraintKind::AngleBisector) {
                char v = a[0].letters[1], x = a[1].letters[0];
                if (m_.visible(v, x)) bisector(canonical_angle(a[0].letters[0], v, a[0].letters[2]), linear(v, x));
            }
            if (d.kind == DeclKind::ConstructedPoint && d.constructor == Constructor::Incenter) {
                std::string abc = a[0].letters + a[1].letters + a[2].letters;
                for (int i = 0; i < 3; ++i) {
                    char v = abc[i];
                    if (m_.visible(v, d.name))
                        bisector(canonical_angle(abc[(i + 1) % 3], v, abc[(i + 2) % 3]), linear(v, d.name));
                }
            }
        }

        for (char o : m_.circle_centers()) {
            const std::string& members = m_.circle_members(o);
            Ref c = circle_ref(o);
            // Secants: drawn linear elements through two circle points that continue past the circle.
            for (const Ref& e : m_.drawn_linear()) {
                int car = *m_.carrier_of(e.name[0], e.name[1]);
                double t0 = m_.position(car, e.name[0]), t1 = m_.position(car, e.name[1]);
                double lo = std::min(t0, t1), hi = std::max(t0, t1);
                if (e.kind == RefKind::Line) lo = -kInf, hi = kInf;
                if (e.kind == RefKind::Ray) (t1 > t0 ? hi : lo) = t1 > t0 ? kInf : -kInf;
                std::string on;
                for (char x : m_.carriers()[car].points) {
                    double t = m_.position(car, x);
                    if (contains(members, x) && t >= lo - kPosTol && t <= hi + kPosTol) on += x;
                }
                bool beyond = e.kind != RefKind::Segment || !contains(members, e.name[0]) || !contains(members, e.name[1]);
                if (on.size() == 2 && beyond) emit(FactKind::Secant, {c, point_ref(on[0]), point_ref(on[1])}, e);
            }
            for (const Ref& seg : m_.visible_segments()) {
                char x = seg.name[0], y = seg.name[1];
                if (contains(members, x) && contains(members, y)) {
                    emit(FactKind::Chord, {c}, seg);
                    if (m_.provable_collinear(x, y, o)) emit(FactKind::Diameter, {c}, seg);
                }
                if ((x == o && contains(members, y)) || (y == o && contains(members, x))) emit(FactKind::Radius, {c}, seg);
            }
            for (std::size_t i = 0; i < members.size(); ++i)
                for (std::size_t j = 0; j < members.size(); ++j) {
                    char x = members[i], y = members[j];
                    if (!(x < y)) continue;
                    Ref chord = canonical_segment(x, y);
                    if (m_.visible(o, x) && m_.visible(o, y) && !m_.provable_collinear(x, o, y))
                        emit(FactKind::CentralAngle, {c, chord}, canonical_angle(x, o, y));
                    for (char v : members) {
                        if (v == x || v == y) continue;
                        if (m_.visible(v, x) && m_.visible(v, y))
                            emit(FactKind::InscribedAngle, {c, chord}, canonical_angle(x, v, y));
                    }
                }
        }

        for (const auto& [mid, ends] : m_.midpoints()) {
            if (!m_.visible(ends[0], ends[1])) continue;
            Ref seg = canonical_segment(ends[0], ends[1]);
            int base = *m_.carrier_of(ends[0], ends[1]);
            for (const Ref& e : m_.drawn_linear()) {
                int car = *m_.carrier_of(e.name[0], e.name[1]);
                if (car != base && contains(m_.carriers()[car].points, mid) && m_.provable_perpendicular(e, seg))
                    emit(FactKind::PerpendicularBisector, {seg}, e);
            }
        }
    }

    void bisector(const Ref& angle, const Ref& line) {
        emit(FactKind::AngleBisector, {angle}, line);
        emit(FactKind::AngleBisects, {line}, angle);
    }

    void relationship() {
        const auto& drawn = m_.drawn_linear();
        for (std::size_t i = 0; i < drawn.size(); ++i)
            for (std::size_t j = 0; j < drawn.size(); ++j) {
                if (!(drawn[i] < drawn[j])) continue;
                if (m_.provable_parallel(drawn[i], drawn[j])) emit(FactKind::ParallelPair, {drawn[i]}, drawn[j]);
                if (m_.provable_perpendicular(drawn[i], drawn[j])) emit(FactKind::PerpendicularPair, {drawn[i]}, drawn[j]);
            }
        const auto& vis = m_.visible_segments();
        for (std::size_t i = 0; i < vis.size(); ++i)
            for (std::size_t j = i + 1; j < vis.size(); ++j)
                if (m_.provable_equal_length(vis[i], vis[j])) emit(FactKind::EqualSegments, {vis[i]}, vis[j]);
        for (const auto& d : s_.program.declarations) {
            if (d.kind != DeclKind::Constraint || d.constraint != ConstraintKind::EqualAngle) continue;
            const std::string &p = d.args[0].letters, &q = d.args[1].letters;
            Ref a = canonical_angle(p[0], p[1], p[2]), b = canonical_angle(q[0], q[1], q[2]);
            if (b < a) std::swap(a, b);
            if (a != b && angle_drawn(a) && angle_drawn(b)) emit(FactKind::EqualAngles, {a}, b);
        }
        for (const auto& c : m_.carriers()) {
            std::string pts = c.points;
            std::sort(pts.begin(), pts.end());
            for (std::size_t i = 0; i < pts.size(); ++i)
                for (std::size_t j = i + 1; j < pts.size(); ++j)
                    for (std::size_t k = j + 1; k < pts.size(); ++k)
                        emit(FactKind::CollinearTriple, {point_ref(pts[i]), point_ref(pts[j])}, point_ref(pts[k]));
        }
    }

    // Nearest labeled point from v along the carrier in direction `sign`,
    // provided the stroke between them is drawn; 0 if none.
    char nearest(int car, char v, double sign) const {
        char best = 0;
        double best_d = kInf, tv = m_.position(car, v);
        for (char x : m_.carriers()[car].points) {
            double dt = sign * (m_.position(car, x) - tv);
            if (x != v && dt > kPosTol && dt < best_d) {
                best_d = dt;
                best = x;
            }
        }
        return best && m_.visible(v, best) ? best : 0;
    }

    void pair(FactKind k, char a1, char v1, char b1, char a2, char v2, char b2) {
        if (!a1 || !b1 || !a2 || !b2) return;
        Ref x = canonical_angle(a1, v1, b1), y = canonical_angle(a2, v2, b2);
        if (y < x) std::swap(x, y);
        if (x != y) emit(k, {x}, y);
    }

    static char common_point(const std::string& a, const std::string& b) {
        for (char c : a)
            if (contains(b, c)) return c;
        return 0;
    }

    void angles() {
        const auto& cs = m_.carriers();
        const int n = static_cast<int>(cs.size());
        for (int l1 = 0; l1 < n; ++l1) {
            for (int l2 = 0; l2 < n; ++l2) {
                if (l1 == l2 || m_.parallel_class(l1) != m_.parallel_class(l2)) continue;
                double s2 = dot(cs[l1].direction, cs[l2].direction) > 0.0 ? 1.0 : -1.0;
                for (int t = 0; t < n; ++t) {
                    if (m_.parallel_class(t) == m_.parallel_class(l1)) continue;
                    char p1 = common_point(cs[t].points, cs[l1].points), p2 = common_point(cs[t].points, cs[l2].points);
                    if (!p1 || !p2) continue;
                    double ts = m_.position(t, p2) > m_.position(t, p1) ? 1.0 : -1.0;
                    char to1 = nearest(t, p1, ts), away1 = nearest(t, p1, -ts);
                    char to2 = nearest(t, p2, -ts), away2 = nearest(t, p2, ts);
                    for (double s : {1.0, -1.0}) {
                        char a1 = nearest(l1, p1, s), a2 = nearest(l2, p2, s * s2), b2 = nearest(l2, p2, -s * s2);
                        pair(FactKind::CorrespondingAngles, a1, p1, to1, a2, p2, away2);
                        pair(FactKind::CorrespondingAngles, a1, p1, away1, a2, p2, to2);
                        pair(FactKind::AlternateInteriorAngles, a1, p1, to1, b2, p2, to2);
                        pair(FactKind::CoInteriorAngles, a1, p1, to1, a2, p2, to2);
                    }
                }
            }
        }
        for (int c1 = 0; c1 < n; ++c1)
            for (int c2 = c1 + 1; c2 < n; ++c2) {
                char x = common_point(cs[c1].points, cs[c2].points);
                if (!x) continue;
                char ap = nearest(c1, x, 1.0), am = nearest(c1, x, -1.0);
                char bp = nearest(c2, x, 1.0), bm = nearest(c2, x, -1.0);
                pair(FactKind::VerticalAngles, ap, x, bp, am, x, bm);
                pair(FactKind::VerticalAngles, ap, x, bm, am, x, bp);
            }
    }

    const ConcreteScene& s_;
    SymbolicModel m_;
    std::vector<Fact> out_;
};

std::vector<Fact> derive_facts(const ConcreteScene& s) { return FactBuilder(s).all(); }

std::vector<Fact> angle_relations(const ConcreteScene& s) { return FactBuilder(s).angle_only(); }

}  // namespace georef
