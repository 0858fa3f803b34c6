#include "pnl/cli.hpp"

#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "pnl/error.hpp"
#include "pnl/version.hpp"

namespace pnl {

namespace {

using cli::json;

int parse_threads(const std::string& text, const std::string& source) {
    try {
        std::size_t used = 0;
        const long v = std::stol(text, &used);
        if (used == text.size() && v >= 1 && v <= 4096)
            return static_cast<int>(v);
    } catch (const std::exception&) {
    }
    throw ConfigError(source + ": expected a thread count >= 1 (got '" + text + "')");
}

// "lo..hi" keeps the configured point count; "a,b,c" is an explicit list.
void apply_m_values(json& doc, const std::string& spec) {
    json& block = doc["crossover"];
    if (!block.is_object())
        throw ConfigError("crossover: expected an object");
    for (const char* key : {"m_values", "m_min", "m_max"})
        block.erase(key);
    const auto dots = spec.find("..");
    try {
        if (dots != std::string::npos) {
            block["m_min"] = std::stod(spec.substr(0, dots));
            block["m_max"] = std::stod(spec.substr(dots + 2));
            return;
        }
        json list = json::array();
        std::size_t pos = 0;
        while (pos <= spec.size()) {
            const auto comma = spec.find(',', pos);
            list.push_back(std::stod(spec.substr(pos, comma - pos)));
            if (comma == std::string::npos)
                break;
            pos = comma + 1;
        }
        block.erase("m_points");
        block.erase("m_spacing");
        block["m_values"] = list;
    } catch (const std::logic_error&) {
        throw ConfigError("--m-values: expected lo..hi or a comma-separated list (got '" +
                          spec + "')");
    }
}

}  // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"Projection-noise-limited readout toolkit", "pnl"};
    app.set_version_flag("--version", std::string(kToolkitVersion));
    app.require_subcommand(1);

    std::string config_path, out_dir, format, seed_text, threads_text, m_values;
    app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    app.add_option("--seed", seed_text, "Master seed (unsigned 64-bit)");
    app.add_option("--out", out_dir, "Output directory");
    app.add_option("--format", format, "Table format")->check(CLI::IsMember({"csv", "json"}));
    app.add_option("--threads", threads_text, "Worker threads (default: PNL_READOUT_THREADS)");

    struct Sub {
        const char* name;
        const char* help;
        cli::Runner (*prepare)(const cli::ConfigNode&, const cli::Context&);
    };
    const Sub subs[] = {
        {"crossover", "Shot-noise to projection-noise crossover sweep and fit",
         cli::prepare_crossover},
        {"rabi", "Rabi rotation of the nuclear ensemble", cli::prepare_rabi},
        {"t1-decay", "Polarization decay under repeated readout", cli::prepare_t1_decay},
        {"dd-spec", "XY8 spectroscopy, tomography histograms and relaxation",
         cli::prepare_dd_spec},
        {"reconstruct", "Collective-state reconstruction from axis histograms",
         cli::prepare_reconstruct},
        {"sensitivity", "Conventional vs repetitive readout sensitivity map",
         cli::prepare_sensitivity},
        {"calibrate-apd", "Detector width factor from reference windows",
         cli::prepare_calibrate_apd},
    };
    std::vector<CLI::App*> handles;
    for (const auto& s : subs) {
        CLI::App* sub = app.add_subcommand(s.name, s.help);
        sub->fallthrough();
        if (std::string(s.name) == "crossover")
            sub->add_option("--m-values", m_values, "Repetition counts: lo..hi or a,b,c");
        handles.push_back(sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    std::size_t which = 0;
    while (which < handles.size() && !handles[which]->parsed())
        ++which;
    const Sub& sub = subs[which];

    try {
        json doc = config_path.empty() ? json::object() : cli::load_config(config_path);
        if (!doc.is_object())
            throw ConfigError("config root must be an object");
        if (!seed_text.empty()) {
            try {
                std::size_t used = 0;
                if (seed_text.front() == '-')
                    throw std::invalid_argument(seed_text);
                const unsigned long long v = std::stoull(seed_text, &used);
                if (used != seed_text.size())
                    throw std::invalid_argument(seed_text);
                doc["seed"] = static_cast<std::uint64_t>(v);
            } catch (const std::logic_error&) {
                throw ConfigError("--seed: expected an unsigned 64-bit integer (got '" +
                                  seed_text + "')");
            }
        }
        if (!format.empty())
            doc["output"]["format"] = format;
        if (!m_values.empty())
            apply_m_values(doc, m_values);

        cli::Context ctx;
        if (!config_path.empty())
            ctx.config_dir = std::filesystem::absolute(config_path).parent_path();

        const cli::ConfigNode root = cli::ConfigNode::root(doc);
        ctx.seed = root.count("seed", 1);
        const cli::ConfigNode output = root.block("output");
        const auto table_format = cli::table_format_from_string(output.text("format", "csv"));
        std::filesystem::path dir = out_dir;
        if (dir.empty()) {
            const std::filesystem::path configured = output.text("dir", "");
            if (configured.empty())
                dir = "pnl_out";
            else
                dir = configured.is_absolute() ? configured : ctx.config_dir / configured;
        }

        int threads = 0;
        if (!threads_text.empty()) {
            threads = parse_threads(threads_text, "--threads");
        } else if (const char* env = std::getenv("PNL_READOUT_THREADS"); env && *env) {
            threads = parse_threads(env, "PNL_READOUT_THREADS");
        }
        if (threads > 0)
            set_thread_count(threads);
        ctx.exec = threads == 1 ? Execution::serial : Execution::parallel;

        const cli::Runner runner = sub.prepare(root, ctx);
        cli::reject_unknown(doc, root.registry());

        cli::OutputSink sink(dir, table_format, sub.name, ctx.seed, doc);
        try {
            runner(sink);
        } catch (...) {
            for (const auto& p : sink.written())
                std::cout << p.string() << '\n';
            throw;
        }
        for (const auto& p : sink.written())
            std::cout << p.string() << '\n';
        return kExitOk;
    } catch (const ConfigError& e) {
        std::cerr << "pnl " << sub.name << ": config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const NumericalError& e) {
        std::cerr << "pnl " << sub.name << ": numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "pnl " << sub.name << ": " << e.what() << '\n';
        return kExitFailure;
    }
}

}  // namespace pnl
