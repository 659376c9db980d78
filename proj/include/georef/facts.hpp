// SPDX-License-Identifier: Apache-2.0
//
// Semantic facts about a solved scene. Facts are derived from the program's
// structure and each one is confirmed numerically before it is emitted, so
// relations that only hold by accident of the random layout never appear.
#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "georef/kernel.hpp"
#include "georef/ref.hpp"

namespace georef {

enum class Category { Position, Shape, Relationship };

enum class FactKind {
    // Position
    IntersectionPoint,
    TangencyPoint,
    Midpoint,
    CircleCenter,
    FootOfPerpendicular,
    PointOnExtension,
    Incenter,
    Circumcenter,
    Centroid,
    // Shape
    TangentLine,
    Secant,
    Chord,
    Diameter,
    Radius,
    InscribedAngle,
    CentralAngle,
    Triangle,
    Parallelogram,
    PerpendicularBisector,
    AngleBisector,
    // Relationship
    ParallelPair,
    PerpendicularPair,
    EqualAngles,
    EqualSegments,
    VerticalAngles,
    AlternateInteriorAngles,
    CorrespondingAngles,
    CoInteriorAngles,
    CollinearTriple,
    AngleBisects,
};

inline constexpr int kFactKindCount = 30;

enum class Derivation { Symbolic, Numeric, Both };

struct Fact {
    Category category = Category::Position;
    FactKind kind = FactKind::IntersectionPoint;
    std::vector<Ref> subjects;
    Ref answer_target;
    double witness = 0.0;  // residual of the defining predicate
    Derivation derivation = Derivation::Both;

    // Ordering and identity ignore the witness.
    bool operator<(const Fact& o) const;
    bool operator==(const Fact& o) const;
};

Category classify_fact(FactKind k);
std::string_view category_name(Category c);
Category category_from_name(std::string_view s);
std::string_view fact_kind_name(FactKind k);
FactKind fact_kind_from_name(std::string_view s);
std::string_view derivation_name(Derivation d);
Derivation derivation_from_name(std::string_view s);

// All facts of the scene, sorted by (category, kind, subjects).
std::vector<Fact> derive_facts(const ConcreteScene& s);

// Angle pairs around transversals of parallel carriers and around crossing
// carriers (vertical angles).
std::vector<Fact> angle_relations(const ConcreteScene& s);

// Residual of the fact's defining predicate; throws ArityError on wrong subjects.
double fact_residual(const Fact& f, const ConcreteScene& s);
bool verify_fact(const Fact& f, const ConcreteScene& s, double eps);

// Canonical angle name: outer letters sorted around the fixed vertex.
Ref canonical_angle(char a, char vertex, char b);
// Canonical segment name: endpoints sorted.
Ref canonical_segment(char a, char b);

// What the program's structure proves about the scene. Exposed so tests can
// run an independent enumeration against it.
class SymbolicModel {
public:
    explicit SymbolicModel(const ConcreteScene& s);

    struct Carrier {
        std::string points;  // labeled points on the carrier, ordered by position
        Vec2 origin{};
        Vec2 direction{};
        std::vector<std::pair<double, double>> drawn;  // merged drawn intervals along direction
    };

    const std::vector<Carrier>& carriers() const { return carriers_; }
    std::optional<int> carrier_of(char a, char b) const;
    bool on_circle(char p, char center) const;
    const std::string& circle_members(char center) const;
    std::vector<char> circle_centers() const;

    // Drawn linear elements (declared segments, lines, rays and polygon edges).
    const std::vector<Ref>& drawn_linear() const { return drawn_linear_; }
    // Every segment between two labeled points that is fully covered by drawn strokes.
    const std::vector<Ref>& visible_segments() const { return visible_; }
    bool visible(char a, char b) const;
    double position(int carrier, char p) const;

    bool provable_parallel(const Ref& a, const Ref& b) const;
    bool provable_perpendicular(const Ref& a, const Ref& b) const;
    bool provable_collinear(char a, char b, char c) const;
    bool provable_equal_length(const Ref& a, const Ref& b) const;

    // Midpoints known from construction or structural rules: (midpoint, segment ends).
    const std::vector<std::pair<char, std::string>>& midpoints() const { return midpoints_; }
    int parallel_class(int carrier) const;

private:
    friend class FactBuilder;

    int pair_index(char a, char b) const;
    int find_eq(int i) const;
    int find_par(int i) const;
    void add_perpendicular(int ca, int cb);

    const ConcreteScene& scene_;
    std::vector<Carrier> carriers_;
    std::map<char, std::string> circles_;
    std::vector<Ref> drawn_linear_;
    std::vector<Ref> visible_;
    std::set<std::pair<int, int>> perp_;       // pairs of parallel-class roots
    mutable std::vector<int> par_parent_;
    mutable std::vector<int> eq_parent_;
    std::vector<std::pair<char, std::string>> midpoints_;
};

}  // namespace georef
