// SPDX-License-Identifier: Apache-2.0
//
// Geometry kernel: turns a SceneProgram into coordinates by randomized damped
// Gauss-Newton over the free points, and answers numeric predicates about the
// result.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "georef/geometry.hpp"
#include "georef/ref.hpp"
#include "georef/scene.hpp"

namespace georef {

struct Canvas {
    double width = 512.0;
    double height = 512.0;
};

struct SolverConfig {
    double accept_tol = 1e-8;
    int max_restarts = 50;
    int max_iterations = 500;
    Canvas canvas;
    std::uint64_t rng_seed = 0;  // mixed with the instantiate seed
};

struct QualityConfig {
    double min_point_separation = 24.0;
    double min_vertex_angle = 15.0;  // degrees
    double min_feature_size = 40.0;
    double margin = 20.0;
};

struct SolverDiagnostics {
    int restarts_used = 0;
    double final_residual = 0.0;
    bool converged = false;
};

enum class ElementKind { Segment, Line, Ray, Circle, Polygon };

struct Element {
    ElementKind kind = ElementKind::Segment;
    std::string points;      // endpoints / center+through / vertex cycle
    double radius = 0.0;     // circles
    Vec2 direction{};        // unit direction for segments, lines, rays

    Ref ref() const;
};

struct ConcreteScene {
    SceneProgram program;
    std::map<char, Vec2> coords;
    std::vector<Element> elements;
    SolverDiagnostics solver;
    IdentifierScheme scheme = IdentifierScheme::Common;
    std::uint64_t seed = 0;
    Canvas canvas;

    Vec2 at(char p) const;
    bool has_point(char p) const { return coords.count(p) != 0; }
    // "<template>_<scheme>_<seed>"
    std::string id() const;
    const Element* find_element(const Ref& r) const;
    double circle_radius(char center) const;  // throws if no such circle
};

class NoSolution : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Solves a validated program. Deterministic for fixed arguments.
ConcreteScene instantiate(const SceneProgram& p, std::uint64_t seed, const SolverConfig& cfg = {},
                          const QualityConfig& q = {});

// Builds a scene from explicit free-point coordinates; constructed points are
// computed from their constructors. point_on without an explicit parameter
// uses `params` (keyed by point letter) or 0.5. Throws DegenerateConstruction.
ConcreteScene realize(const SceneProgram& p, const std::map<char, Vec2>& free_points,
                      const std::map<char, double>& params = {});

// Sum of squared constraint residuals at the scene's coordinates.
double residual(const ConcreteScene& s);

// Residual components of one constraint at the given coordinates.
std::vector<double> constraint_residuals(const SceneProgram& p, const Declaration& constraint,
                                         const std::map<char, Vec2>& coords);

// Residual components of one constraint together with their gradient with
// respect to the coordinates of `vars` (x then y per point, in order).
struct ResidualJacobian {
    std::vector<double> values;
    std::vector<std::vector<double>> gradient;  // one row per component
};
ResidualJacobian constraint_jacobian(const SceneProgram& p, const Declaration& constraint,
                                     const std::map<char, Vec2>& coords, const std::string& vars);

ValidationReport quality_check(const ConcreteScene& s, const QualityConfig& q = {});

enum class PredicateKind {
    Parallel,
    Perpendicular,
    Tangent,
    OnCircle,
    Collinear,
    PointOnSegment,
    EqualLength,
    EqualAngle,
    PointBetween,
};

std::string_view predicate_name(PredicateKind k);

class ArityError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Magnitude of the predicate's residual; predicates hold when it is <= eps.
//   Parallel/Perpendicular(line, line)   |cross| / |dot| of unit directions
//   Tangent(line, circle)                |dist(center, line) - r|
//   OnCircle(point, circle)              |dist(center, p) - r|
//   Collinear(p, q, r)                   |2 * signed area| / longest side
//   PointOnSegment(p, segment)           distance from p to the closed segment
//   EqualLength(segment, segment)        |len1 - len2|
//   EqualAngle(angle, angle)             |theta1 - theta2|
//   PointBetween(p, a, b)                distance to segment ab; infinite unless p projects strictly inside
double predicate_residual(const ConcreteScene& s, PredicateKind pred, const std::vector<Ref>& args);
bool numeric_predicate(const ConcreteScene& s, PredicateKind pred, const std::vector<Ref>& args, double eps);

}  // namespace georef
