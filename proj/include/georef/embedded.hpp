// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string_view>

namespace georef {

// Contents of data/question_templates.json at build time.
std::string_view embedded_question_catalog();
// Absolute path of the source tree's data directory at build time.
std::string_view default_data_dir();
// Absolute path of the bundled template pool.
std::string_view default_templates_dir();
std::string_view tool_version();

}  // namespace georef
