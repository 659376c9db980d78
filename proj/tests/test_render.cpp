// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <regex>

#include "georef/pipeline.hpp"
#include "georef/render.hpp"
#include "support.hpp"

using namespace georef;

namespace {

std::size_t count(const std::string& text, const std::string& needle) {
    std::size_t n = 0;
    for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
    return n;
}

double angle_of(Vec2 from, Vec2 to) { return std::atan2(to.y - from.y, to.x - from.x); }

}  // namespace

TEST_CASE("triangle renders three labels and one closed path") {
    auto s = scene_at("point A; point B; point C; polygon A B C", {{'A', {100, 400}}, {'B', {400, 400}}, {'C', {250, 120}}});
    auto svg = render_svg(s);
    CHECK(count(svg, "<text") == 3);
    CHECK(count(svg, "<path") == 1);
    std::smatch m;
    REQUIRE(std::regex_search(svg, m, std::regex("<path d=\"([^\"]*)\"")));
    CHECK(m[1].str().back() == 'Z');
    for (char c : {'A', 'B', 'C'}) CHECK(svg.find(std::string(">") + c + "</text>") != std::string::npos);
}

TEST_CASE("rendering is byte-identical across calls") {
    for (const auto& path : list_templates(templates_dir())) {
        auto s = instantiate(relabel(load_program(path), IdentifierScheme::Random, 7), 7);
        CHECK(render_svg(s) == render_svg(s));
    }
}

TEST_CASE("perpendicular segments get a right-angle mark") {
    const std::string prog = "point A; point B; point C; segment A B; segment B C; polygon A B C; constraint perpendicular(AB, BC)";
    auto s = instantiate(parse_program(prog), 2);
    CHECK(count(render_svg(s), "class=\"right-angle\"") == 1);
    RenderConfig cfg;
    cfg.show_right_angle_marks = false;
    CHECK(count(render_svg(s, cfg), "class=\"right-angle\"") == 0);
}

TEST_CASE("label placement") {
    RenderConfig cfg;
    SUBCASE("isolated point goes up-right") {
        auto isolated = scene_at("point A; point B; point C; segment A B", {{'A', {100, 300}}, {'B', {400, 300}}, {'C', {250, 150}}});
        auto q = place_labels(isolated, cfg).at('C');
        CHECK(q.x == doctest::Approx(250 + cfg.label_offset / std::sqrt(2.0)));
        CHECK(q.y == doctest::Approx(150 - cfg.label_offset / std::sqrt(2.0)));
    }
    SUBCASE("bisects the widest gap between incident strokes") {
        // Strokes leave B to the right and straight up; the widest gap is the
        // 270 degree sweep whose bisector points down-left.
        auto s = scene_at("point A; point B; point C; segment B A; segment B C", {{'A', {400, 300}}, {'B', {200, 300}}, {'C', {200, 100}}});
        auto q = place_labels(s, cfg).at('B');
        CHECK(angle_of(s.at('B'), q) == doctest::Approx(3.0 * M_PI / 4.0));
        CHECK(dist(s.at('B'), q) == doctest::Approx(cfg.label_offset));
    }
    SUBCASE("equal gaps break toward up-right") {
        // A horizontal through-line at B splits the plane into two equal gaps;
        // the upper one is closer to up-right.
        auto s = scene_at("point A; point C; segment A C; point B = midpoint(A, C)", {{'A', {100, 300}}, {'C', {400, 300}}});
        auto q = place_labels(s, cfg).at('B');
        CHECK(q.y < s.at('B').y);
    }
    SUBCASE("labels stay inside the canvas") {
        auto s = scene_at("point A; point B; segment A B", {{'A', {510, 2}}, {'B', {300, 300}}});
        for (const auto& [c, q] : place_labels(s, cfg)) {
            CHECK(q.x >= 0.0);
            CHECK(q.x <= s.canvas.width);
            CHECK(q.y >= 0.0);
            CHECK(q.y <= s.canvas.height);
        }
    }
}

TEST_CASE("render configuration is validated") {
    auto s = scene_at("point A; point B; segment A B", {{'A', {100, 300}}, {'B', {400, 300}}});
    RenderConfig bad;
    bad.font_size = 0.0;
    CHECK_THROWS_AS(render_svg(s, bad), std::invalid_argument);
    bad = {};
    bad.stroke_width = -1.0;
    CHECK_THROWS_AS(render_svg(s, bad), std::invalid_argument);
}

TEST_CASE("every drawn element appears in the image") {
    auto s = instantiate(load_program(template_path("circle_tangent")), 3);
    auto svg = render_svg(s);
    std::size_t circles = 0, lines = 0;
    for (const auto& e : s.elements) {
        circles += e.kind == ElementKind::Circle;
        lines += e.kind == ElementKind::Segment || e.kind == ElementKind::Line || e.kind == ElementKind::Ray;
    }
    // Point glyphs are circles too.
    CHECK(count(svg, "<circle") == circles + s.coords.size());
    CHECK(count(svg, "<line") == lines);
}
