// SPDX-License-Identifier: Apache-2.0
//
// Deterministic SVG rendering of a solved scene. Scene coordinates are used
// directly as SVG user units (y grows downward).
#pragma once

#include <map>
#include <string>

#include "georef/kernel.hpp"

namespace georef {

struct RenderConfig {
    double stroke_width = 2.0;
    double font_size = 16.0;
    double label_offset = 10.0;
    bool show_right_angle_marks = true;
    std::string background = "white";
};

// Throws std::invalid_argument on non-positive sizes.
void validate_render_config(const RenderConfig& cfg);

// Label anchor per labeled point: label_offset away from the point, bisecting
// the widest angular gap between incident strokes (up-right when free), then
// clamped inside the canvas.
std::map<char, Vec2> place_labels(const ConcreteScene& s, const RenderConfig& cfg = {});

std::string render_svg(const ConcreteScene& s, const RenderConfig& cfg = {});

}  // namespace georef
