// SPDX-License-Identifier: Apache-2.0
#include "georef/ref.hpp"

#include <stdexcept>

namespace georef {

std::string_view ref_kind_name(RefKind k) {
    static constexpr std::string_view names[] = {"point", "segment", "line", "ray", "angle", "circle", "polygon"};
    return names[static_cast<int>(k)];
}

RefKind ref_kind_from_name(std::string_view s) {
    for (int i = 0; i <= static_cast<int>(RefKind::Polygon); ++i)
        if (ref_kind_name(static_cast<RefKind>(i)) == s) return static_cast<RefKind>(i);
    throw std::invalid_argument("unknown element kind '" + std::string(s) + "'");
}

std::string describe(const Ref& r) {
    if (r.kind == RefKind::Polygon) {
        switch (r.name.size()) {
            case 3: return "triangle " + r.name;
            case 4: return "quadrilateral " + r.name;
            default: return "polygon " + r.name;
        }
    }
    return std::string(ref_kind_name(r.kind)) + " " + r.name;
}

std::string ref_to_string(const Ref& r) { return std::string(ref_kind_name(r.kind)) + ":" + r.name; }

Ref ref_from_string(std::string_view s) {
    auto colon = s.find(':');
    if (colon == std::string_view::npos) throw std::invalid_argument("malformed element reference '" + std::string(s) + "'");
    return {ref_kind_from_name(s.substr(0, colon)), std::string(s.substr(colon + 1))};
}

}  // namespace georef
