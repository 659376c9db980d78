// SPDX-License-Identifier: Apache-2.0
//
// Hand-built cases shared by the unit tests and the acceptance binary.
#pragma once

#include <string>
#include <vector>

#include "georef/qa.hpp"
#include "support.hpp"

namespace georef::test {

// Ten hand-scored items: two answer "X", two answer "A"-prefixed forms.
// The null adapter ("X") scores p1 and s3: 2/10 overall, 1/3 Position,
// 1/3 Shape, 0/4 Relationship.
inline DatasetManifest eval_fixture() {
    DatasetManifest m;
    m.items = {
        make_item("p1", Category::Position, "X", {"X"}),
        make_item("p2", Category::Position, "A", {"A"}),
        make_item("p3", Category::Position, "M", {"M"}),
        make_item("s1", Category::Shape, "AB", {"AB", "BA"}),
        make_item("s2", Category::Shape, "CD", {"CD", "DC"}),
        make_item("s3", Category::Shape, "X", {"X"}),
        make_item("r1", Category::Relationship, "EF", {"EF", "FE"}),
        make_item("r2", Category::Relationship, "AC", {"AC", "CA"}),
        make_item("r3", Category::Relationship, "A", {"A"}),
        make_item("r4", Category::Relationship, "GH", {"GH", "HG"}),
    };
    return m;
}

// A on the left, D on the right with E between them; BC parallel to AD below.
inline ConcreteScene trapezoid_with_e() {
    return scene_at("point A; point D; point B; point C; segment A D; segment B C; segment A B; segment C D; point E = point_on(AD, 0.4)",
                    {{'A', {100, 150}}, {'D', {420, 150}}, {'B', {150, 380}}, {'C', {370, 380}}});
}

struct MatchCase {
    std::string prediction;
    AnswerSet answers;
    bool expected;
};

inline std::vector<MatchCase> matching_suite() {
    auto s = trapezoid_with_e();
    const AnswerSet ad = closure_of(segment_ref('A', 'D'));
    const AnswerSet ad_inherit = build_answer_set(segment_ref('A', 'D'), s, true);
    const AnswerSet abf = closure_of(canonical_angle('A', 'B', 'F'));
    const AnswerSet pt_a = closure_of(point_ref('A'));
    const AnswerSet tri = closure_of(Ref{RefKind::Polygon, "ABC"});
    return {
        // Accepted forms.
        {"DA", ad, true},
        {"AD", ad, true},
        {"segment DA", ad, true},
        {"da", ad, true},
        {"The answer is segment AD.", ad, true},
        {"ED", ad_inherit, true},
        {"segment AE", ad_inherit, true},
        {"\xE2\x88\xA0" "FBA", abf, true},
        {"\xE2\x88\xA0" "ABF", abf, true},
        {"angle FBA", abf, true},
        {"Angle ABF", abf, true},
        {"The angle is \xE2\x88\xA0" "FBA.", abf, true},
        {"A", pt_a, true},
        {"point A", pt_a, true},
        {"The tangent point is A.", pt_a, true},
        {"triangle CBA", tri, true},
        {"BCA", tri, true},
        {"Answer: angle FBA", abf, true},
        {"I think it's AD", ad, true},
        {"  d  A  ", ad, true},
        // Rejected forms.
        {"AC", ad, false},
        {"BC", ad, false},
        {"ED", ad, false},
        {"X", ad, false},
        {"", ad, false},
        {"ABD", ad, false},
        {"BAF", abf, false},
        {"angle AFB", abf, false},
        {"AB", abf, false},
        {"B", pt_a, false},
        {"point X", pt_a, false},
        {"segment BE", ad_inherit, false},
        {"ABD", tri, false},
        {"none of these", ad, false},
    };
}

}  // namespace georef::test
