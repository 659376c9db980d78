// SPDX-License-Identifier: Apache-2.0
//
// Scene language: a line-oriented declarative description of a plane-geometry
// figure. See docs/grammar.md for the full grammar.
#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace georef {

enum class DeclKind { FreePoint, ConstructedPoint, Segment, Line, Ray, Circle, Polygon, Constraint, Annotation };

enum class Constructor {
    Midpoint,
    IntersectionLineLine,
    IntersectionLineCircle,
    IntersectionCircleCircle,
    FootOfPerpendicular,
    TangentPoint,
    PointOn,
    ExtensionPoint,
    CircleCenter,
    Incenter,
    Circumcenter,
    Centroid,
};

enum class ConstraintKind {
    Parallel,
    Perpendicular,
    Tangent,
    OnCircle,
    Collinear,
    EqualLength,
    EqualAngle,
    AngleBisector,
    IsDiameter,
    IsChord,
    IsInscribedAngle,
    IsCentralAngle,
    IsParallelogram,
};

inline constexpr int kConstructorCount = 12;
inline constexpr int kConstraintCount = 13;

std::string_view constructor_name(Constructor c);
std::optional<Constructor> constructor_from_name(std::string_view s);
std::string_view constraint_name(ConstraintKind k);
std::optional<ConstraintKind> constraint_from_name(std::string_view s);
std::string_view decl_kind_name(DeclKind k);

// Argument slot types. Pair is a carrier named by two points ("AB"), Angle is
// three points with the vertex in the middle, Quad four points.
enum class ArgType { Point, Pair, Angle, Quad, Circle, Number, Branch };

struct Arg {
    ArgType type = ArgType::Point;
    std::string letters;  // Point/Pair/Angle/Quad letters, circle center for Circle
    double number = 0.0;  // Number value, or branch index for Branch

    bool operator==(const Arg&) const = default;
};

struct SourceSpan {
    int line = 0;
    int column = 0;
};

struct Declaration {
    DeclKind kind = DeclKind::FreePoint;
    int stage = 1;
    // Point letter for points; unused otherwise.
    char name = 0;
    // Segment/Line/Ray: two endpoints. Circle: center then through-point. Polygon: vertex cycle.
    std::string points;
    Constructor constructor = Constructor::Midpoint;
    ConstraintKind constraint = ConstraintKind::Parallel;
    std::vector<Arg> args;
    std::string text;  // annotation payload
    SourceSpan span;

    // Source spans are not part of the structure.
    bool operator==(const Declaration& o) const {
        return kind == o.kind && stage == o.stage && name == o.name && points == o.points &&
               (kind != DeclKind::ConstructedPoint || constructor == o.constructor) &&
               (kind != DeclKind::Constraint || constraint == o.constraint) && args == o.args && text == o.text;
    }
};

struct SceneProgram {
    std::string name;
    std::vector<Declaration> declarations;

    bool operator==(const SceneProgram&) const = default;

    // Declared point letters in declaration order.
    std::string point_letters() const;
    const Declaration* find_point(char letter) const;
    const Declaration* find_circle(char center) const;
    bool is_point(char letter) const { return find_point(letter) != nullptr; }
};

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& msg, int line, int column);
    int line() const { return line_; }
    int column() const { return column_; }

private:
    int line_;
    int column_;
};

SceneProgram parse_program(std::string_view text);
SceneProgram load_program(const std::string& path);
// Canonical source form; parse_program(print_program(p)) == p.
std::string print_program(const SceneProgram& p);

enum class Severity { Warning, Error };

struct Issue {
    Severity severity = Severity::Error;
    std::string message;
    SourceSpan span;
};

struct ValidationReport {
    bool ok = true;
    std::vector<Issue> issues;

    void add(Severity sev, std::string message, SourceSpan span = {});
    std::string summary() const;
};

ValidationReport validate_program(const SceneProgram& p);

enum class IdentifierScheme { Common, Random };

std::string_view scheme_name(IdentifierScheme s);
IdentifierScheme scheme_from_name(std::string_view s);

// Renames points. Common applies the convention table (circle centers O, P, Q;
// everything else alphabetical by declaration order); Random draws a seeded
// injective map from A-Z.
SceneProgram relabel(const SceneProgram& p, IdentifierScheme scheme, std::uint64_t seed);
// Applies an explicit letter map (index = old letter - 'A', value = new letter).
SceneProgram apply_letter_map(const SceneProgram& p, const std::string& map);

// Hash of the program with names erased (points renamed by first appearance,
// scene name dropped). Invariant under relabel.
std::uint64_t structural_hash(const SceneProgram& p);

// Signature of argument slots for a constructor / constraint.
std::vector<ArgType> constructor_signature(Constructor c, const std::vector<Arg>& actual);
std::vector<ArgType> constraint_signature(ConstraintKind k);

}  // namespace georef
