#pragma once

#include <array>
#include <string_view>
#include <utility>

namespace pnl {

inline constexpr std::string_view kToolkitVersion = "1.0.0";

inline constexpr std::array<std::pair<std::string_view, std::string_view>, 8>
    kModuleVersions{{
        {"ensemble-core", "1.0.0"},
        {"readout-sim", "1.0.0"},
        {"noise-decomposition", "1.0.0"},
        {"model-fit", "1.0.0"},
        {"dd-spectroscopy", "1.0.0"},
        {"state-reconstruction", "1.0.0"},
        {"sensitivity", "1.0.0"},
        {"cli", "1.0.0"},
    }};

}  // namespace pnl
