// SPDX-License-Identifier: Apache-2.0
#include "georef/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "georef/facts.hpp"
#include "georef/util.hpp"

namespace georef {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kTol = 1e-6;
constexpr double kMarkerSize = 10.0;
constexpr double kGlyphRadius = 2.5;

std::string f2(double v) { return format_fixed(v, 2); }

// Clips the parametric line a + t*d (t in [lo, hi]) to the canvas.
bool clip(Vec2 a, Vec2 d, double& lo, double& hi, const Canvas& c) {
    auto edge = [&](double p, double q) {
        if (std::abs(p) < 1e-15) return q >= 0.0;
        double r = q / p;
        if (p < 0.0) lo = std::max(lo, r);
        else hi = std::min(hi, r);
        return lo <= hi;
    };
    return edge(-d.x, a.x) && edge(d.x, c.width - a.x) && edge(-d.y, a.y) && edge(d.y, c.height - a.y);
}

// Parameter range of a linear element along p0 -> p1 (t = 0 at p0, 1 at p1).
std::pair<double, double> extent(const Element& e) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    switch (e.kind) {
        case ElementKind::Line: return {-inf, inf};
        case ElementKind::Ray: return {0.0, inf};
        default: return {0.0, 1.0};
    }
}

// Directions (radians, SVG orientation) of strokes leaving point p.
std::vector<double> incident_directions(const ConcreteScene& s, char label) {
    Vec2 p = s.at(label);
    std::vector<double> dirs;
    auto add = [&](Vec2 v) {
        if (norm(v) > kTol) dirs.push_back(std::atan2(v.y, v.x));
    };
    auto linear = [&](Vec2 a, Vec2 b, double lo, double hi) {
        Vec2 d = b - a;
        double len2 = dot(d, d);
        if (!(len2 > 0.0)) return;
        double t = dot(p - a, d) / len2;
        if (line_distance(p, a, b) > kTol || t < lo - kTol || t > hi + kTol) return;
        if (t > lo + kTol) add(d * -1.0);
        if (t < hi - kTol) add(d);
    };
    for (const auto& e : s.elements) {
        if (e.kind == ElementKind::Circle) {
            Vec2 o = s.at(e.points[0]);
            if (std::abs(dist(o, p) - e.radius) <= kTol) {
                Vec2 t = perp(p - o);
                add(t);
                add(t * -1.0);
            }
        } else if (e.kind == ElementKind::Polygon) {
            for (std::size_t i = 0; i < e.points.size(); ++i)
                linear(s.at(e.points[i]), s.at(e.points[(i + 1) % e.points.size()]), 0.0, 1.0);
        } else {
            auto [lo, hi] = extent(e);
            linear(s.at(e.points[0]), s.at(e.points[1]), lo, hi);
        }
    }
    std::sort(dirs.begin(), dirs.end());
    return dirs;
}

double angular_distance(double a, double b) {
    double d = std::fmod(std::abs(a - b), 2.0 * kPi);
    return d > kPi ? 2.0 * kPi - d : d;
}

// Endpoints of linear elements as drawn segments (polygon edges expanded).
struct Stroke {
    Vec2 a, b;
    double lo, hi;
};

std::vector<Stroke> strokes_for(const ConcreteScene& s, const Ref& r) {
    std::vector<Stroke> out;
    for (const auto& e : s.elements) {
        if (e.kind == ElementKind::Polygon) {
            for (std::size_t i = 0; i < e.points.size(); ++i) {
                char u = e.points[i], v = e.points[(i + 1) % e.points.size()];
                if (r.kind == RefKind::Segment && canonical_segment(u, v).name == canonical_segment(r.name[0], r.name[1]).name)
                    out.push_back({s.at(u), s.at(v), 0.0, 1.0});
            }
        } else if (e.kind != ElementKind::Circle) {
            Ref er = e.ref();
            bool same = er.kind == r.kind &&
                        (er.name == r.name || (r.kind != RefKind::Ray && er.name[0] == r.name[1] && er.name[1] == r.name[0]));
            if (same) {
                auto [lo, hi] = extent(e);
                out.push_back({s.at(e.points[0]), s.at(e.points[1]), lo, hi});
            }
        }
    }
    return out;
}

}  // namespace

void validate_render_config(const RenderConfig& cfg) {
    if (!(cfg.stroke_width > 0.0) || !(cfg.font_size > 0.0) || !(cfg.label_offset > 0.0))
        throw std::invalid_argument("render sizes must be positive");
}

std::map<char, Vec2> place_labels(const ConcreteScene& s, const RenderConfig& cfg) {
    validate_render_config(cfg);
    const double up_right = std::atan2(-1.0, 1.0);
    std::map<char, Vec2> out;
    for (const auto& [label, p] : s.coords) {
        std::vector<double> dirs = incident_directions(s, label);
        double best = up_right;
        if (!dirs.empty()) {
            double best_gap = -1.0;
            for (std::size_t i = 0; i < dirs.size(); ++i) {
                double from = dirs[i];
                double to = i + 1 < dirs.size() ? dirs[i + 1] : dirs[0] + 2.0 * kPi;
                double gap = to - from, mid = from + gap / 2.0;
                bool wider = gap > best_gap + 1e-9;
                bool tie = std::abs(gap - best_gap) <= 1e-9 && angular_distance(mid, up_right) < angular_distance(best, up_right);
                if (wider || tie) {
                    best_gap = gap;
                    best = mid;
                }
            }
        }
        Vec2 q = p + Vec2{std::cos(best), std::sin(best)} * cfg.label_offset;
        double m = cfg.font_size / 2.0;
        q.x = std::clamp(q.x, m, s.canvas.width - m);
        q.y = std::clamp(q.y, m, s.canvas.height - m);
        out[label] = q;
    }
    return out;
}

std::string render_svg(const ConcreteScene& s, const RenderConfig& cfg) {
    validate_render_config(cfg);
    const Canvas& c = s.canvas;
    std::ostringstream o;
    o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << f2(c.width) << "\" height=\""
      << f2(c.height) << "\" viewBox=\"0 0 " << f2(c.width) << " " << f2(c.height) << "\">\n";
    o << "<rect x=\"0\" y=\"0\" width=\"" << f2(c.width) << "\" height=\"" << f2(c.height) << "\" fill=\""
      << cfg.background << "\"/>\n";
    o << "<g fill=\"none\" stroke=\"black\" stroke-width=\"" << f2(cfg.stroke_width)
      << "\" stroke-linecap=\"round\" stroke-linejoin=\"round\">\n";
    for (const auto& e : s.elements) {
        switch (e.kind) {
            case ElementKind::Circle: {
                Vec2 ctr = s.at(e.points[0]);
                o << "<circle cx=\"" << f2(ctr.x) << "\" cy=\"" << f2(ctr.y) << "\" r=\"" << f2(e.radius) << "\"/>\n";
                break;
            }
            case ElementKind::Polygon: {
                o << "<path d=\"";
                for (std::size_t i = 0; i < e.points.size(); ++i) {
                    Vec2 v = s.at(e.points[i]);
                    o << (i == 0 ? "M " : " L ") << f2(v.x) << " " << f2(v.y);
                }
                o << " Z\"/>\n";
                break;
            }
            default: {
                Vec2 a = s.at(e.points[0]), b = s.at(e.points[1]);
                auto [lo, hi] = extent(e);
                if (e.kind != ElementKind::Segment) clip(a, b - a, lo, hi, c);
                Vec2 p = a + (b - a) * lo, q = a + (b - a) * hi;
                o << "<line x1=\"" << f2(p.x) << "\" y1=\"" << f2(p.y) << "\" x2=\"" << f2(q.x) << "\" y2=\"" << f2(q.y)
                  << "\"/>\n";
                break;
            }
        }
    }
    if (cfg.show_right_angle_marks) {
        std::set<std::string> drawn;
        for (const auto& f : derive_facts(s)) {
            if (f.kind != FactKind::PerpendicularPair) continue;
            for (const auto& s1 : strokes_for(s, f.subjects[0])) {
                for (const auto& s2 : strokes_for(s, f.answer_target)) {
                    Vec2 x;
                    try {
                        x = intersect_lines(s1.a, s1.b, s2.a, s2.b);
                    } catch (const DegenerateConstruction&) {
                        continue;
                    }
                    auto arm = [&](const Stroke& st, Vec2& dir) {
                        Vec2 d = st.b - st.a;
                        double t = dot(x - st.a, d) / dot(d, d);
                        if (t < st.lo - kTol || t > st.hi + kTol) return false;
                        double len = norm(d);
                        // Point the arm at the longer drawn part of the stroke.
                        double ahead = std::isinf(st.hi) ? 1e18 : (st.hi - t) * len;
                        double behind = std::isinf(st.lo) ? 1e18 : (t - st.lo) * len;
                        dir = (ahead >= behind ? d : d * -1.0) / len;
                        return true;
                    };
                    Vec2 u, v;
                    if (!arm(s1, u) || !arm(s2, v)) continue;
                    Vec2 p1 = x + u * kMarkerSize, p2 = x + u * kMarkerSize + v * kMarkerSize, p3 = x + v * kMarkerSize;
                    std::string pts = f2(p1.x) + "," + f2(p1.y) + " " + f2(p2.x) + "," + f2(p2.y) + " " + f2(p3.x) + "," +
                                      f2(p3.y);
                    if (drawn.insert(f2(x.x) + "," + f2(x.y)).second)
                        o << "<polyline class=\"right-angle\" points=\"" << pts << "\"/>\n";
                }
            }
        }
    }
    o << "</g>\n";
    o << "<g fill=\"black\" stroke=\"none\">\n";
    for (const auto& [label, p] : s.coords)
        o << "<circle cx=\"" << f2(p.x) << "\" cy=\"" << f2(p.y) << "\" r=\"" << f2(kGlyphRadius) << "\"/>\n";
    o << "</g>\n";
    o << "<g fill=\"black\" font-family=\"sans-serif\" font-size=\"" << f2(cfg.font_size)
      << "\" text-anchor=\"middle\" dominant-baseline=\"central\">\n";
    for (const auto& [label, q] : place_labels(s, cfg))
        o << "<text x=\"" << f2(q.x) << "\" y=\"" << f2(q.y) << "\">" << label << "</text>\n";
    o << "</g>\n</svg>\n";
    return o.str();
}

}  // namespace georef
