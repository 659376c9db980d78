// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <compare>
#include <string>
#include <string_view>

namespace georef {

enum class RefKind { Point, Segment, Line, Ray, Angle, Circle, Polygon };

// A letter-named element of a scene. Circles are named by their center letter,
// angles by three letters with the vertex in the middle.
struct Ref {
    RefKind kind = RefKind::Point;
    std::string name;

    auto operator<=>(const Ref&) const = default;
    bool operator==(const Ref&) const = default;
};

std::string_view ref_kind_name(RefKind k);
RefKind ref_kind_from_name(std::string_view s);  // throws std::invalid_argument

// Human-readable noun phrase, e.g. "segment AB", "angle ABC", "circle O", "triangle ABC".
std::string describe(const Ref& r);
// Compact tag used in serialized documents, e.g. "segment:AB".
std::string ref_to_string(const Ref& r);
Ref ref_from_string(std::string_view s);

inline Ref point_ref(char c) { return {RefKind::Point, std::string(1, c)}; }
inline Ref segment_ref(char a, char b) { return {RefKind::Segment, std::string{a, b}}; }
inline Ref angle_ref(char a, char v, char b) { return {RefKind::Angle, std::string{a, v, b}}; }
inline Ref circle_ref(char center) { return {RefKind::Circle, std::string(1, center)}; }

}  // namespace georef
