#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include "config.hpp"
#include "output.hpp"
#include "pnl/parallel.hpp"

namespace pnl::cli {

struct Context {
    std::uint64_t seed = 1;
    std::filesystem::path config_dir = ".";
    Execution exec = Execution::parallel;
};

// Parsing happens in the prepare step so that every key is read (and
// validated) before reject_unknown runs; the returned runner does the work.
using Runner = std::function<void(OutputSink&)>;

Runner prepare_crossover(const ConfigNode& root, const Context& ctx);
Runner prepare_rabi(const ConfigNode& root, const Context& ctx);
Runner prepare_t1_decay(const ConfigNode& root, const Context& ctx);
Runner prepare_dd_spec(const ConfigNode& root, const Context& ctx);
Runner prepare_reconstruct(const ConfigNode& root, const Context& ctx);
Runner prepare_sensitivity(const ConfigNode& root, const Context& ctx);
Runner prepare_calibrate_apd(const ConfigNode& root, const Context& ctx);

}  // namespace pnl::cli
