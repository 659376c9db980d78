// SPDX-License-Identifier: Apache-2.0
#include "georef/kernel.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "georef/util.hpp"

namespace georef {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPi = 3.14159265358979323846;

template <class T>
struct PointTable {
    std::array<V2<T>, 26> pts{};
    std::array<bool, 26> set{};

    const V2<T>& operator[](char c) const {
        if (c < 'A' || c > 'Z' || !set[c - 'A']) throw std::out_of_range(std::string("no coordinates for point ") + c);
        return pts[c - 'A'];
    }
    void put(char c, V2<T> v) {
        pts[c - 'A'] = std::move(v);
        set[c - 'A'] = true;
    }
};

template <class T>
T radius_of(const SceneProgram& p, const PointTable<T>& P, char center) {
    const Declaration* c = p.find_circle(center);
    if (!c) throw std::invalid_argument(std::string("no circle centered at ") + center);
    return dist(P[c->points[0]], P[c->points[1]]);
}

template <class T>
V2<T> construct(const SceneProgram& p, const Declaration& d, const PointTable<T>& P, double param) {
    const auto& a = d.args;
    auto pt = [&](std::size_t i, std::size_t k = 0) -> const V2<T>& { return P[a[i].letters[k]]; };
    auto branch = [&](std::size_t i) { return static_cast<int>(a[i].number); };
    switch (d.constructor) {
        case Constructor::Midpoint: return midpoint(pt(0), pt(1));
        case Constructor::IntersectionLineLine: return intersect_lines(pt(0, 0), pt(0, 1), pt(1, 0), pt(1, 1));
        case Constructor::IntersectionLineCircle:
            return intersect_line_circle(pt(0, 0), pt(0, 1), pt(1), radius_of(p, P, a[1].letters[0]), branch(2));
        case Constructor::IntersectionCircleCircle:
            return intersect_circles(pt(0), radius_of(p, P, a[0].letters[0]), pt(1), radius_of(p, P, a[1].letters[0]),
                                     branch(2));
        case Constructor::FootOfPerpendicular: return foot_of_perpendicular(pt(0), pt(1, 0), pt(1, 1));
        case Constructor::TangentPoint: return tangent_point(pt(0), pt(1), radius_of(p, P, a[1].letters[0]), branch(2));
        case Constructor::PointOn: {
            if (a[0].type == ArgType::Circle) {
                const Declaration* c = p.find_circle(a[0].letters[0]);
                return point_on_circle(P[c->points[0]], P[c->points[1]], param);
            }
            return point_along(pt(0, 0), pt(0, 1), param);
        }
        case Constructor::ExtensionPoint: return point_along(pt(0, 0), pt(0, 1), a[1].number);
        case Constructor::CircleCenter:
        case Constructor::Circumcenter: return circumcenter(pt(0), pt(1), pt(2));
        case Constructor::Incenter: return incenter(pt(0), pt(1), pt(2));
        case Constructor::Centroid: return centroid(pt(0), pt(1), pt(2));
    }
    throw std::logic_error("unhandled constructor");
}

template <class T>
V2<T> unit(const V2<T>& v) {
    T n = norm(v);
    if (!(value(n) > 0.0)) throw DegenerateConstruction("zero-length direction");
    return v / n;
}

template <class T>
void residuals_of(const SceneProgram& p, const Declaration& d, const PointTable<T>& P, std::vector<T>& out) {
    const auto& a = d.args;
    auto pt = [&](std::size_t i, std::size_t k = 0) -> const V2<T>& { return P[a[i].letters[k]]; };
    auto dir = [&](std::size_t i) { return unit(pt(i, 1) - pt(i, 0)); };
    auto on_circle = [&](const V2<T>& x, char center) { out.push_back(dist(P[center], x) - radius_of(p, P, center)); };
    auto angle = [&](std::size_t i) { return angle_at(pt(i, 0), pt(i, 1), pt(i, 2)); };
    switch (d.constraint) {
        case ConstraintKind::Parallel: out.push_back(cross(dir(0), dir(1))); break;
        case ConstraintKind::Perpendicular: out.push_back(dot(dir(0), dir(1))); break;
        case ConstraintKind::Tangent:
            out.push_back(line_distance(pt(1), pt(0, 0), pt(0, 1)) - radius_of(p, P, a[1].letters[0]));
            break;
        case ConstraintKind::OnCircle: on_circle(pt(0), a[1].letters[0]); break;
        case ConstraintKind::Collinear: {
            const V2<T>&A = pt(0), &B = pt(1), &C = pt(2);
            T ab = dist(A, B), bc = dist(B, C), ca = dist(C, A);
            T longest = ab;
            if (value(bc) > value(longest)) longest = bc;
            if (value(ca) > value(longest)) longest = ca;
            if (!(value(longest) > 0.0)) throw DegenerateConstruction("coincident points");
            out.push_back(cross(B - A, C - A) / longest);
            break;
        }
        case ConstraintKind::EqualLength:
            out.push_back(dist(pt(0, 0), pt(0, 1)) - dist(pt(1, 0), pt(1, 1)));
            break;
        case ConstraintKind::EqualAngle: out.push_back(angle(0) - angle(1)); break;
        case ConstraintKind::AngleBisector: {
            const V2<T>&A = pt(0, 0), &B = pt(0, 1), &C = pt(0, 2), &D = pt(1);
            T left = angle_at(A, B, D), right = angle_at(D, B, C);
            out.push_back(left - right);
            // keeps the ray inside the angle rather than on the external bisector
            out.push_back(left + right - angle_at(A, B, C));
            break;
        }
        case ConstraintKind::IsDiameter: {
            char c = a[1].letters[0];
            on_circle(pt(0, 0), c);
            on_circle(pt(0, 1), c);
            V2<T> m = midpoint(pt(0, 0), pt(0, 1));
            out.push_back(m.x - P[c].x);
            out.push_back(m.y - P[c].y);
            break;
        }
        case ConstraintKind::IsChord:
            on_circle(pt(0, 0), a[1].letters[0]);
            on_circle(pt(0, 1), a[1].letters[0]);
            break;
        case ConstraintKind::IsInscribedAngle:
            for (int k = 0; k < 3; ++k) on_circle(pt(0, k), a[1].letters[0]);
            break;
        case ConstraintKind::IsCentralAngle:
            on_circle(pt(0, 0), a[1].letters[0]);
            on_circle(pt(0, 2), a[1].letters[0]);
            break;
        case ConstraintKind::IsParallelogram: {
            V2<T> g = pt(0, 0) + pt(0, 2) - pt(0, 1) - pt(0, 3);
            out.push_back(g.x);
            out.push_back(g.y);
            break;
        }
    }
}

// Free points are the optimization variables; point_on parameters left open in
// the program are fixed per restart.
struct Layout {
    std::string free;
    std::vector<double> params;  // per declaration index
    std::vector<const Declaration*> constraints;
};

Layout make_layout(const SceneProgram& p) {
    Layout l;
    l.params.assign(p.declarations.size(), 0.5);
    for (std::size_t i = 0; i < p.declarations.size(); ++i) {
        const auto& d = p.declarations[i];
        if (d.kind == DeclKind::FreePoint) l.free.push_back(d.name);
        if (d.kind == DeclKind::ConstructedPoint && d.constructor == Constructor::PointOn && d.args.size() == 2)
            l.params[i] = d.args[1].number;
        if (d.kind == DeclKind::Constraint) l.constraints.push_back(&d);
    }
    return l;
}

bool has_open_param(const Declaration& d) {
    return d.kind == DeclKind::ConstructedPoint && d.constructor == Constructor::PointOn && d.args.size() == 1;
}

template <class T>
void fill_points(const SceneProgram& p, const Layout& l, const std::vector<T>& x, PointTable<T>& P) {
    for (std::size_t i = 0; i < l.free.size(); ++i) P.put(l.free[i], {x[2 * i], x[2 * i + 1]});
    for (std::size_t i = 0; i < p.declarations.size(); ++i) {
        const auto& d = p.declarations[i];
        if (d.kind == DeclKind::ConstructedPoint) P.put(d.name, construct(p, d, P, l.params[i]));
    }
}

bool finite_all(const std::vector<double>& r) {
    return std::all_of(r.begin(), r.end(), [](double v) { return std::isfinite(v); });
}

// Cost at x, or +inf when a construction degenerates.
double cost_at(const SceneProgram& p, const Layout& l, const std::vector<double>& x) {
    try {
        PointTable<double> P;
        fill_points(p, l, x, P);
        std::vector<double> r;
        for (const auto* c : l.constraints) residuals_of(p, *c, P, r);
        if (!finite_all(r)) return kInf;
        double s = 0.0;
        for (double v : r) s += v * v;
        return s;
    } catch (const DegenerateConstruction&) {
        return kInf;
    }
}

bool jacobian_at(const SceneProgram& p, const Layout& l, const std::vector<double>& x, Eigen::VectorXd& r,
                 Eigen::MatrixXd& J) {
    try {
        std::vector<Dual> xv(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) xv[i] = Dual::variable(x[i], static_cast<int>(i));
        PointTable<Dual> P;
        fill_points(p, l, xv, P);
        std::vector<Dual> res;
        for (const auto* c : l.constraints) residuals_of(p, *c, P, res);
        const auto m = static_cast<Eigen::Index>(res.size()), n = static_cast<Eigen::Index>(x.size());
        r.resize(m);
        J.resize(m, n);
        for (Eigen::Index i = 0; i < m; ++i) {
            r[i] = res[i].v;
            for (Eigen::Index j = 0; j < n; ++j) J(i, j) = res[i].d[j];
        }
        return r.allFinite() && J.allFinite();
    } catch (const DegenerateConstruction&) {
        return false;
    }
}

// Damped Gauss-Newton with Marquardt scaling. Returns the final cost.
double minimize(const SceneProgram& p, const Layout& l, std::vector<double>& x, int max_iterations) {
    constexpr double kPolish = 1e-26;
    Eigen::VectorXd r;
    Eigen::MatrixXd J;
    if (!jacobian_at(p, l, x, r, J)) return kInf;
    double cost = r.squaredNorm();
    double lambda = 1e-3;
    const auto n = static_cast<Eigen::Index>(x.size());
    for (int it = 0; it < max_iterations && cost > kPolish; ++it) {
        Eigen::MatrixXd A = J.transpose() * J;
        Eigen::VectorXd g = J.transpose() * r;
        Eigen::MatrixXd M = A;
        for (Eigen::Index i = 0; i < n; ++i) M(i, i) += lambda * std::max(A(i, i), 1e-9);
        Eigen::VectorXd step = M.ldlt().solve(g);
        std::vector<double> trial(x);
        for (Eigen::Index i = 0; i < n; ++i) trial[i] -= step[i];
        double trial_cost = step.allFinite() ? cost_at(p, l, trial) : kInf;
        if (trial_cost < cost) {
            bool stalled = cost - trial_cost <= 1e-15 * cost;
            x = std::move(trial);
            if (!jacobian_at(p, l, x, r, J)) return kInf;
            cost = r.squaredNorm();
            lambda = std::max(lambda * 0.3, 1e-15);
            if (stalled) break;
        } else {
            lambda *= 10.0;
            if (lambda > 1e16) break;
        }
    }
    return cost;
}

template <class T>
std::map<char, Vec2> to_coords(const PointTable<T>& P) {
    std::map<char, Vec2> out;
    for (int i = 0; i < 26; ++i)
        if (P.set[i]) out[static_cast<char>('A' + i)] = values(P.pts[i]);
    return out;
}

std::vector<Element> build_elements(const SceneProgram& p, const std::map<char, Vec2>& c) {
    std::vector<Element> out;
    for (const auto& d : p.declarations) {
        Element e;
        e.points = d.points;
        switch (d.kind) {
            case DeclKind::Segment: e.kind = ElementKind::Segment; break;
            case DeclKind::Line: e.kind = ElementKind::Line; break;
            case DeclKind::Ray: e.kind = ElementKind::Ray; break;
            case DeclKind::Circle: e.kind = ElementKind::Circle; break;
            case DeclKind::Polygon: e.kind = ElementKind::Polygon; break;
            default: continue;
        }
        if (e.kind == ElementKind::Circle) {
            e.radius = dist(c.at(d.points[0]), c.at(d.points[1]));
        } else if (e.kind != ElementKind::Polygon) {
            Vec2 v = c.at(d.points[1]) - c.at(d.points[0]);
            double n = norm(v);
            e.direction = n > 0 ? v / n : Vec2{};
        }
        out.push_back(std::move(e));
    }
    return out;
}

PointTable<double> table_from(const std::map<char, Vec2>& coords) {
    PointTable<double> P;
    for (const auto& [k, v] : coords) P.put(k, v);
    return P;
}

// Drawn element (segment, ray, line or polygon edge) carrying the pair, if any.
// Returns the kind and whether its orientation runs a->b.
std::optional<std::pair<ElementKind, bool>> drawn_carrier(const SceneProgram& p, char a, char b) {
    std::optional<std::pair<ElementKind, bool>> best;
    for (const auto& d : p.declarations) {
        if (d.kind == DeclKind::Segment || d.kind == DeclKind::Ray || d.kind == DeclKind::Line) {
            bool fwd = d.points[0] == a && d.points[1] == b;
            bool rev = d.points[0] == b && d.points[1] == a;
            if (!fwd && !rev) continue;
            ElementKind k = d.kind == DeclKind::Segment ? ElementKind::Segment
                            : d.kind == DeclKind::Ray  ? ElementKind::Ray
                                                       : ElementKind::Line;
            if (!best || static_cast<int>(k) < static_cast<int>(best->first)) best = {{k, fwd}};
        } else if (d.kind == DeclKind::Polygon) {
            for (std::size_t i = 0; i < d.points.size(); ++i) {
                char u = d.points[i], v = d.points[(i + 1) % d.points.size()];
                if ((u == a && v == b) || (u == b && v == a)) best = {{ElementKind::Segment, u == a}};
            }
        }
    }
    return best;
}

// Parameter of the projection of x onto a->b.
double along(const Vec2& x, const Vec2& a, const Vec2& b) {
    Vec2 d = b - a;
    return dot(x - a, d) / dot(d, d);
}

double degrees(double rad) { return rad * 180.0 / kPi; }

std::string f2(double v) { return format_fixed(v, 2); }

Vec2 coord(const ConcreteScene& s, const Ref& r, std::size_t k) {
    if (k >= r.name.size()) throw ArityError("element " + ref_to_string(r) + " has too few points");
    return s.at(r.name[k]);
}

}  // namespace

Ref Element::ref() const {
    switch (kind) {
        case ElementKind::Segment: return {RefKind::Segment, points};
        case ElementKind::Line: return {RefKind::Line, points};
        case ElementKind::Ray: return {RefKind::Ray, points};
        case ElementKind::Circle: return {RefKind::Circle, points.substr(0, 1)};
        case ElementKind::Polygon: return {RefKind::Polygon, points};
    }
    return {};
}

Vec2 ConcreteScene::at(char p) const {
    auto it = coords.find(p);
    if (it == coords.end()) throw std::out_of_range(std::string("no coordinates for point ") + p);
    return it->second;
}

std::string ConcreteScene::id() const {
    return program.name + "_" + std::string(scheme_name(scheme)) + "_" + std::to_string(seed);
}

const Element* ConcreteScene::find_element(const Ref& r) const {
    for (const auto& e : elements) {
        Ref er = e.ref();
        if (er.kind != r.kind) continue;
        if (er.name == r.name) return &e;
        if ((r.kind == RefKind::Segment || r.kind == RefKind::Line) && er.name.size() == 2 && r.name.size() == 2 &&
            er.name[0] == r.name[1] && er.name[1] == r.name[0])
            return &e;
    }
    return nullptr;
}

double ConcreteScene::circle_radius(char center) const {
    const Declaration* c = program.find_circle(center);
    if (!c) throw std::invalid_argument(std::string("no circle centered at ") + center);
    return dist(at(c->points[0]), at(c->points[1]));
}

ConcreteScene realize(const SceneProgram& p, const std::map<char, Vec2>& free_points, const std::map<char, double>& params) {
    Layout l = make_layout(p);
    for (std::size_t i = 0; i < p.declarations.size(); ++i) {
        const auto& d = p.declarations[i];
        if (has_open_param(d)) {
            auto it = params.find(d.name);
            l.params[i] = it == params.end() ? 0.5 : it->second;
        }
    }
    std::vector<double> x;
    for (char c : l.free) {
        auto it = free_points.find(c);
        if (it == free_points.end()) throw std::invalid_argument(std::string("missing coordinates for free point ") + c);
        x.push_back(it->second.x);
        x.push_back(it->second.y);
    }
    PointTable<double> P;
    fill_points(p, l, x, P);
    ConcreteScene s;
    s.program = p;
    s.coords = to_coords(P);
    s.elements = build_elements(p, s.coords);
    s.solver.final_residual = residual(s);
    s.solver.converged = true;
    return s;
}

ConcreteScene instantiate(const SceneProgram& p, std::uint64_t seed, const SolverConfig& cfg, const QualityConfig& q) {
    if (!(cfg.accept_tol > 0.0) || cfg.max_restarts < 1) throw std::invalid_argument("invalid solver configuration");
    if (auto rep = validate_program(p); !rep.ok) throw std::invalid_argument("invalid program:\n" + rep.summary());
    const Layout base = make_layout(p);
    const double lo_x = q.margin, hi_x = cfg.canvas.width - q.margin;
    const double lo_y = q.margin, hi_y = cfg.canvas.height - q.margin;
    double best = kInf;

    for (int restart = 0; restart < cfg.max_restarts; ++restart) {
        Rng rng(mix_seed(mix_seed(seed, cfg.rng_seed), static_cast<std::uint64_t>(restart)));
        Layout l = base;
        std::vector<double> x;
        for (std::size_t i = 0; i < l.free.size(); ++i) {
            x.push_back(rng.uniform(lo_x, hi_x));
            x.push_back(rng.uniform(lo_y, hi_y));
        }
        // A circle spanned by two free points gets a radius that fits the canvas.
        for (const auto& d : p.declarations) {
            if (d.kind != DeclKind::Circle) continue;
            auto ci = l.free.find(d.points[0]), ti = l.free.find(d.points[1]);
            if (ci == std::string::npos || ti == std::string::npos) continue;
            const double span = std::min(hi_x - lo_x, hi_y - lo_y);
            const double r = rng.uniform(std::max(q.min_feature_size, 0.15 * span), 0.4 * span);
            const double cx = rng.uniform(q.margin + r, cfg.canvas.width - q.margin - r);
            const double cy = rng.uniform(q.margin + r, cfg.canvas.height - q.margin - r);
            const double phi = rng.uniform(0.0, 2.0 * kPi);
            x[2 * ci] = cx;
            x[2 * ci + 1] = cy;
            x[2 * ti] = cx + r * std::cos(phi);
            x[2 * ti + 1] = cy + r * std::sin(phi);
        }
        for (std::size_t i = 0; i < p.declarations.size(); ++i) {
            const auto& d = p.declarations[i];
            if (!has_open_param(d)) continue;
            l.params[i] = d.args[0].type == ArgType::Circle ? rng.uniform() : rng.uniform(0.2, 0.8);
        }

        double cost = l.constraints.empty() ? cost_at(p, l, x) : minimize(p, l, x, cfg.max_iterations);
        best = std::min(best, cost);
        if (!(cost <= cfg.accept_tol)) continue;

        PointTable<double> P;
        try {
            fill_points(p, l, x, P);
        } catch (const DegenerateConstruction&) {
            continue;
        }
        ConcreteScene s;
        s.program = p;
        s.coords = to_coords(P);
        s.elements = build_elements(p, s.coords);
        s.seed = seed;
        s.canvas = cfg.canvas;
        s.solver = {restart + 1, cost, true};
        if (!quality_check(s, q).ok) continue;
        return s;
    }
    throw NoSolution("no acceptable layout for '" + p.name + "' after " + std::to_string(cfg.max_restarts) +
                     " restarts (best residual " + (std::isfinite(best) ? format_double(best) : "inf") + ")");
}

std::vector<double> constraint_residuals(const SceneProgram& p, const Declaration& constraint,
                                         const std::map<char, Vec2>& coords) {
    PointTable<double> P = table_from(coords);
    std::vector<double> out;
    residuals_of(p, constraint, P, out);
    return out;
}

ResidualJacobian constraint_jacobian(const SceneProgram& p, const Declaration& constraint,
                                     const std::map<char, Vec2>& coords, const std::string& vars) {
    if (vars.size() * 2 > static_cast<std::size_t>(kMaxVars)) throw std::invalid_argument("too many variables");
    PointTable<Dual> P;
    for (const auto& [k, v] : coords) P.put(k, {Dual(v.x), Dual(v.y)});
    for (std::size_t i = 0; i < vars.size(); ++i) {
        Vec2 v = coords.at(vars[i]);
        P.put(vars[i], {Dual::variable(v.x, static_cast<int>(2 * i)), Dual::variable(v.y, static_cast<int>(2 * i + 1))});
    }
    std::vector<Dual> res;
    residuals_of(p, constraint, P, res);
    ResidualJacobian out;
    for (const auto& r : res) {
        out.values.push_back(r.v);
        out.gradient.emplace_back(r.d.begin(), r.d.begin() + static_cast<std::ptrdiff_t>(2 * vars.size()));
    }
    return out;
}

double residual(const ConcreteScene& s) {
    PointTable<double> P = table_from(s.coords);
    std::vector<double> r;
    for (const auto& d : s.program.declarations)
        if (d.kind == DeclKind::Constraint) residuals_of(s.program, d, P, r);
    double sum = 0.0;
    for (double v : r) sum += v * v;
    return sum;
}

ValidationReport quality_check(const ConcreteScene& s, const QualityConfig& q) {
    ValidationReport rep;
    const auto& c = s.coords;
    for (auto i = c.begin(); i != c.end(); ++i) {
        const auto& [name, p] = *i;
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
            rep.add(Severity::Error, std::string("point ") + name + " has non-finite coordinates");
            continue;
        }
        if (p.x < q.margin || p.x > s.canvas.width - q.margin || p.y < q.margin || p.y > s.canvas.height - q.margin)
            rep.add(Severity::Error, std::string("margin: point ") + name + " lies outside the canvas margin");
        for (auto j = std::next(i); j != c.end(); ++j) {
            double d = dist(p, j->second);
            if (d < q.min_point_separation)
                rep.add(Severity::Error,
                        std::string("min_point_separation: points ") + name + " and " + j->first + " are " + f2(d) + " apart");
        }
    }
    if (!rep.ok) return rep;

    for (const auto& d : s.program.declarations) {
        if (d.kind == DeclKind::Segment) {
            double len = dist(s.at(d.points[0]), s.at(d.points[1]));
            if (len < q.min_feature_size)
                rep.add(Severity::Error, "min_feature_size: segment " + d.points + " has length " + f2(len));
        } else if (d.kind == DeclKind::Circle) {
            double r = dist(s.at(d.points[0]), s.at(d.points[1]));
            Vec2 o = s.at(d.points[0]);
            if (r < q.min_feature_size)
                rep.add(Severity::Error, std::string("min_feature_size: circle ") + d.points[0] + " has radius " + f2(r));
            if (o.x - r < 0.0 || o.x + r > s.canvas.width || o.y - r < 0.0 || o.y + r > s.canvas.height)
                rep.add(Severity::Error, std::string("visibility: circle ") + d.points[0] + " leaves the canvas");
        } else if (d.kind == DeclKind::Polygon) {
            const std::size_t n = d.points.size();
            for (std::size_t i = 0; i < n; ++i) {
                Vec2 prev = s.at(d.points[(i + n - 1) % n]), v = s.at(d.points[i]), next = s.at(d.points[(i + 1) % n]);
                double len = dist(v, next);
                if (len < q.min_feature_size)
                    rep.add(Severity::Error, std::string("min_feature_size: edge ") + d.points[i] +
                                                 d.points[(i + 1) % n] + " has length " + f2(len));
                double ang = degrees(angle_at(prev, v, next));
                if (ang < q.min_vertex_angle)
                    rep.add(Severity::Error, std::string("min_vertex_angle: vertex ") + d.points[i] + " of polygon " +
                                                 d.points + " is " + f2(ang) + " degrees");
            }
        } else if (d.kind == DeclKind::ConstructedPoint) {
            // Points constructed on a drawn segment or ray must land on its visible part.
            if (d.constructor != Constructor::IntersectionLineLine && d.constructor != Constructor::IntersectionLineCircle &&
                d.constructor != Constructor::FootOfPerpendicular)
                continue;
            for (const auto& a : d.args) {
                if (a.type != ArgType::Pair) continue;
                auto carrier = drawn_carrier(s.program, a.letters[0], a.letters[1]);
                if (!carrier || carrier->first == ElementKind::Line) continue;
                Vec2 from = s.at(carrier->second ? a.letters[0] : a.letters[1]);
                Vec2 to = s.at(carrier->second ? a.letters[1] : a.letters[0]);
                double t = along(s.at(d.name), from, to);
                bool visible = carrier->first == ElementKind::Segment ? (t >= 0.0 && t <= 1.0) : t >= 0.0;
                if (!visible)
                    rep.add(Severity::Error, std::string("visibility: point ") + d.name + " falls off drawn " +
                                                 (carrier->first == ElementKind::Segment ? "segment " : "ray ") + a.letters);
            }
        } else if (d.kind == DeclKind::Constraint && d.constraint == ConstraintKind::Tangent) {
            auto carrier = drawn_carrier(s.program, d.args[0].letters[0], d.args[0].letters[1]);
            if (!carrier || carrier->first != ElementKind::Segment) continue;
            Vec2 a = s.at(d.args[0].letters[0]), b = s.at(d.args[0].letters[1]);
            double t = along(s.at(d.args[1].letters[0]), a, b);
            if (t < 0.0 || t > 1.0)
                rep.add(Severity::Error, "visibility: tangency point lies off segment " + d.args[0].letters);
        }
    }
    return rep;
}

std::string_view predicate_name(PredicateKind k) {
    static constexpr std::string_view names[] = {"parallel",   "perpendicular", "tangent",     "on_circle",    "collinear",
                                                 "point_on_segment", "equal_length", "equal_angle", "point_between"};
    return names[static_cast<int>(k)];
}

double predicate_residual(const ConcreteScene& s, PredicateKind pred, const std::vector<Ref>& args) {
    auto need = [&](std::initializer_list<RefKind> kinds) {
        if (args.size() != kinds.size())
            throw ArityError(std::string(predicate_name(pred)) + " expects " + std::to_string(kinds.size()) +
                             " arguments, got " + std::to_string(args.size()));
        std::size_t i = 0;
        for (RefKind k : kinds) {
            const Ref& r = args[i++];
            bool linear = r.kind == RefKind::Segment || r.kind == RefKind::Line || r.kind == RefKind::Ray;
            bool ok = k == RefKind::Segment ? (linear && r.name.size() == 2) : r.kind == k;
            if (k == RefKind::Point) ok = ok && r.name.size() == 1;
            if (k == RefKind::Angle) ok = ok && r.name.size() == 3;
            if (!ok) throw ArityError(std::string(predicate_name(pred)) + ": argument " + ref_to_string(r) + " has the wrong kind");
        }
    };
    auto dir = [&](const Ref& r) {
        Vec2 v = coord(s, r, 1) - coord(s, r, 0);
        double n = norm(v);
        if (!(n > 0.0)) throw DegenerateConstruction("zero-length carrier " + r.name);
        return v / n;
    };
    auto circle = [&](const Ref& r) { return std::pair{s.at(r.name[0]), s.circle_radius(r.name[0])}; };
    auto seg_distance = [&](Vec2 x, Vec2 a, Vec2 b) {
        double t = std::clamp(along(x, a, b), 0.0, 1.0);
        return dist(x, a + (b - a) * t);
    };

    using K = RefKind;
    switch (pred) {
        case PredicateKind::Parallel: need({K::Segment, K::Segment}); return std::abs(cross(dir(args[0]), dir(args[1])));
        case PredicateKind::Perpendicular: need({K::Segment, K::Segment}); return std::abs(dot(dir(args[0]), dir(args[1])));
        case PredicateKind::Tangent: {
            need({K::Segment, K::Circle});
            auto [o, r] = circle(args[1]);
            return std::abs(line_distance(o, coord(s, args[0], 0), coord(s, args[0], 1)) - r);
        }
        case PredicateKind::OnCircle: {
            need({K::Point, K::Circle});
            auto [o, r] = circle(args[1]);
            return std::abs(dist(o, coord(s, args[0], 0)) - r);
        }
        case PredicateKind::Collinear: {
            need({K::Point, K::Point, K::Point});
            Vec2 a = coord(s, args[0], 0), b = coord(s, args[1], 0), c = coord(s, args[2], 0);
            double longest = std::max({dist(a, b), dist(b, c), dist(c, a)});
            if (!(longest > 0.0)) return 0.0;
            return std::abs(cross(b - a, c - a)) / longest;
        }
        case PredicateKind::PointOnSegment:
            need({K::Point, K::Segment});
            return seg_distance(coord(s, args[0], 0), coord(s, args[1], 0), coord(s, args[1], 1));
        case PredicateKind::EqualLength:
            need({K::Segment, K::Segment});
            return std::abs(dist(coord(s, args[0], 0), coord(s, args[0], 1)) - dist(coord(s, args[1], 0), coord(s, args[1], 1)));
        case PredicateKind::EqualAngle:
            need({K::Angle, K::Angle});
            return std::abs(angle_at(coord(s, args[0], 0), coord(s, args[0], 1), coord(s, args[0], 2)) -
                            angle_at(coord(s, args[1], 0), coord(s, args[1], 1), coord(s, args[1], 2)));
        case PredicateKind::PointBetween: {
            need({K::Point, K::Point, K::Point});
            Vec2 x = coord(s, args[0], 0), a = coord(s, args[1], 0), b = coord(s, args[2], 0);
            double t = along(x, a, b);
            if (!(t > 0.0 && t < 1.0)) return kInf;
            return seg_distance(x, a, b);
        }
    }
    return kInf;
}

bool numeric_predicate(const ConcreteScene& s, PredicateKind pred, const std::vector<Ref>& args, double eps) {
    return predicate_residual(s, pred, args) <= eps;
}

}  // namespace georef
