// SPDX-License-Identifier: Apache-2.0
//
// Scalar-generic plane geometry. Everything here is written once over a scalar
// type T and instantiated for double (realization, predicates) and Dual
// (exact first derivatives for the layout solver).
#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace georef {

// 26 labeled points, two coordinates each.
inline constexpr int kMaxVars = 52;

// Forward-mode dual number carrying the gradient with respect to every free
// coordinate of a scene.
struct Dual {
    double v = 0.0;
    std::array<double, kMaxVars> d{};

    Dual() = default;
    Dual(double value) : v(value) {}  // NOLINT: implicit constant promotion is intended

    static Dual variable(double value, int index) {
        Dual x(value);
        x.d[index] = 1.0;
        return x;
    }

    Dual& operator+=(const Dual& o) {
        v += o.v;
        for (int i = 0; i < kMaxVars; ++i) d[i] += o.d[i];
        return *this;
    }
    Dual& operator-=(const Dual& o) {
        v -= o.v;
        for (int i = 0; i < kMaxVars; ++i) d[i] -= o.d[i];
        return *this;
    }
};

inline Dual scaled(const Dual& a, double value, double k) {
    Dual r(value);
    for (int i = 0; i < kMaxVars; ++i) r.d[i] = k * a.d[i];
    return r;
}

inline Dual operator+(Dual a, const Dual& b) { return a += b; }
inline Dual operator-(Dual a, const Dual& b) { return a -= b; }
inline Dual operator-(const Dual& a) { return scaled(a, -a.v, -1.0); }
inline Dual operator*(const Dual& a, const Dual& b) {
    Dual r(a.v * b.v);
    for (int i = 0; i < kMaxVars; ++i) r.d[i] = a.d[i] * b.v + a.v * b.d[i];
    return r;
}
inline Dual operator/(const Dual& a, const Dual& b) {
    Dual r(a.v / b.v);
    const double inv = 1.0 / b.v;
    for (int i = 0; i < kMaxVars; ++i) r.d[i] = (a.d[i] - r.v * b.d[i]) * inv;
    return r;
}
inline Dual operator*(const Dual& a, double k) { return scaled(a, a.v * k, k); }
inline Dual operator*(double k, const Dual& a) { return scaled(a, a.v * k, k); }
inline Dual operator/(const Dual& a, double k) { return scaled(a, a.v / k, 1.0 / k); }
inline Dual operator/(double k, const Dual& a) { return scaled(a, k / a.v, -k / (a.v * a.v)); }

inline Dual sqrt(const Dual& a) {
    const double s = std::sqrt(a.v);
    return scaled(a, s, s > 0.0 ? 0.5 / s : 0.0);
}
inline Dual abs(const Dual& a) { return a.v < 0.0 ? -a : a; }
inline Dual cos(const Dual& a) { return scaled(a, std::cos(a.v), -std::sin(a.v)); }
inline Dual sin(const Dual& a) { return scaled(a, std::sin(a.v), std::cos(a.v)); }
inline Dual atan2(const Dual& y, const Dual& x) {
    const double den = x.v * x.v + y.v * y.v;
    Dual r(std::atan2(y.v, x.v));
    if (den > 0.0)
        for (int i = 0; i < kMaxVars; ++i) r.d[i] = (x.v * y.d[i] - y.v * x.d[i]) / den;
    return r;
}

inline double value(double x) { return x; }
inline double value(const Dual& x) { return x.v; }

template <class T>
struct V2 {
    T x{}, y{};
};

template <class T>
V2<T> operator+(const V2<T>& a, const V2<T>& b) { return {a.x + b.x, a.y + b.y}; }
template <class T>
V2<T> operator-(const V2<T>& a, const V2<T>& b) { return {a.x - b.x, a.y - b.y}; }
template <class T, class S>
V2<T> operator*(const V2<T>& a, const S& k) { return {a.x * k, a.y * k}; }
template <class T, class S>
V2<T> operator/(const V2<T>& a, const S& k) { return {a.x / k, a.y / k}; }

template <class T>
T dot(const V2<T>& a, const V2<T>& b) { return a.x * b.x + a.y * b.y; }
template <class T>
T cross(const V2<T>& a, const V2<T>& b) { return a.x * b.y - a.y * b.x; }
template <class T>
T norm(const V2<T>& a) {
    using std::sqrt;
    return sqrt(a.x * a.x + a.y * a.y);
}
template <class T>
T dist(const V2<T>& a, const V2<T>& b) { return norm(a - b); }
template <class T>
V2<T> perp(const V2<T>& a) { return {-a.y, a.x}; }

using Vec2 = V2<double>;

template <class T>
Vec2 values(const V2<T>& p) { return {value(p.x), value(p.y)}; }

// Raised when a construction is undefined at the current coordinates
// (parallel lines, non-meeting circles, point inside circle for a tangent...).
class DegenerateConstruction : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr double kDegeneracyThreshold = 1e-12;

// Unsigned angle at vertex v between rays v->a and v->b, in [0, pi].
template <class T>
T angle_at(const V2<T>& a, const V2<T>& v, const V2<T>& b) {
    using std::abs;
    using std::atan2;
    V2<T> u = a - v, w = b - v;
    return atan2(abs(cross(u, w)), dot(u, w));
}

// Distance from p to the infinite line through a, b.
template <class T>
T line_distance(const V2<T>& p, const V2<T>& a, const V2<T>& b) {
    using std::abs;
    return abs(cross(b - a, p - a)) / norm(b - a);
}

// ---------------------------------------------------------------------------
// Constructions

template <class T>
V2<T> midpoint(const V2<T>& a, const V2<T>& b) { return (a + b) * 0.5; }

template <class T>
V2<T> centroid(const V2<T>& a, const V2<T>& b, const V2<T>& c) { return (a + b + c) / 3.0; }

template <class T>
V2<T> intersect_lines(const V2<T>& a, const V2<T>& b, const V2<T>& c, const V2<T>& d) {
    V2<T> r = b - a, s = d - c;
    T den = cross(r, s);
    double scale = value(norm(r)) * value(norm(s));
    if (!(scale > 0.0) || std::abs(value(den)) / scale < kDegeneracyThreshold)
        throw DegenerateConstruction("lines do not intersect");
    T t = cross(c - a, s) / den;
    return a + r * t;
}

// branch 0: the intersection nearer to a along a->b, branch 1: the farther one.
template <class T>
V2<T> intersect_line_circle(const V2<T>& a, const V2<T>& b, const V2<T>& center, const T& radius, int branch) {
    using std::sqrt;
    V2<T> dir = b - a;
    T len = norm(dir);
    if (!(value(len) > kDegeneracyThreshold)) throw DegenerateConstruction("line direction undefined");
    V2<T> u = dir / len;
    V2<T> f = a - center;
    T t0 = -dot(f, u);
    V2<T> closest = f + u * t0;
    T h2 = radius * radius - dot(closest, closest);
    if (value(h2) / (value(radius) * value(radius)) < kDegeneracyThreshold)
        throw DegenerateConstruction("line misses circle");
    T h = sqrt(h2);
    T t = branch == 0 ? t0 - h : t0 + h;
    return a + u * t;
}

// branch 0: left of the center line c1->c2, branch 1: right of it.
template <class T>
V2<T> intersect_circles(const V2<T>& c1, const T& r1, const V2<T>& c2, const T& r2, int branch) {
    using std::sqrt;
    V2<T> delta = c2 - c1;
    T d = norm(delta);
    double dv = value(d), a1 = value(r1), a2 = value(r2);
    if (!(dv > kDegeneracyThreshold) || dv >= a1 + a2 || dv <= std::abs(a1 - a2))
        throw DegenerateConstruction("circles do not meet");
    T a = (d * d + r1 * r1 - r2 * r2) / (d * 2.0);
    T h2 = r1 * r1 - a * a;
    if (value(h2) / (a1 * a1) < kDegeneracyThreshold) throw DegenerateConstruction("circles are tangent");
    T h = sqrt(h2);
    V2<T> u = delta / d;
    V2<T> base = c1 + u * a;
    V2<T> off = perp(u) * h;
    return branch == 0 ? base + off : base - off;
}

template <class T>
V2<T> foot_of_perpendicular(const V2<T>& p, const V2<T>& a, const V2<T>& b) {
    V2<T> dir = b - a;
    T len2 = dot(dir, dir);
    if (!(value(len2) > kDegeneracyThreshold)) throw DegenerateConstruction("line direction undefined");
    return a + dir * (dot(p - a, dir) / len2);
}

// Tangency point of the tangent from external point p. branch 0 turns
// counter-clockwise from center->p, branch 1 clockwise.
template <class T>
V2<T> tangent_point(const V2<T>& p, const V2<T>& center, const T& radius, int branch) {
    using std::sqrt;
    V2<T> w = p - center;
    T d = norm(w);
    double dv = value(d), rv = value(radius);
    if (!(dv > 0.0) || (dv * dv - rv * rv) / (dv * dv) < kDegeneracyThreshold)
        throw DegenerateConstruction("point is not outside the circle");
    V2<T> u = w / d;
    T c = radius / d;
    T s = sqrt(T(1.0) - c * c);
    V2<T> side = perp(u) * s;
    V2<T> dirn = branch == 0 ? u * c + side : u * c - side;
    return center + dirn * radius;
}

template <class T>
V2<T> circumcenter(const V2<T>& a, const V2<T>& b, const V2<T>& c) {
    V2<T> ab = b - a, ac = c - a;
    T den = cross(ab, ac) * 2.0;
    double scale = value(norm(ab)) * value(norm(ac));
    if (!(scale > 0.0) || std::abs(value(den)) / scale < kDegeneracyThreshold)
        throw DegenerateConstruction("points are collinear");
    T ab2 = dot(ab, ab), ac2 = dot(ac, ac);
    V2<T> off{(ac.y * ab2 - ab.y * ac2) / den, (ab.x * ac2 - ac.x * ab2) / den};
    return a + off;
}

template <class T>
V2<T> incenter(const V2<T>& a, const V2<T>& b, const V2<T>& c) {
    T la = dist(b, c), lb = dist(c, a), lc = dist(a, b);
    T per = la + lb + lc;
    double area2 = std::abs(value(cross(b - a, c - a)));
    if (!(value(per) > 0.0) || area2 / (value(per) * value(per)) < kDegeneracyThreshold)
        throw DegenerateConstruction("points are collinear");
    return (a * la + b * lb + c * lc) / per;
}

// Point at fraction t along a->b (any real t).
template <class T>
V2<T> point_along(const V2<T>& a, const V2<T>& b, double t) { return a + (b - a) * t; }

// Point on a circle at fraction t of a full turn, measured counter-clockwise
// from the direction center->through.
template <class T>
V2<T> point_on_circle(const V2<T>& center, const V2<T>& through, double t) {
    using std::atan2;
    using std::cos;
    using std::sin;
    V2<T> w = through - center;
    T r = norm(w);
    T ang = atan2(w.y, w.x) + T(2.0 * M_PI * t);
    return center + V2<T>{cos(ang) * r, sin(ang) * r};
}

}  // namespace georef
