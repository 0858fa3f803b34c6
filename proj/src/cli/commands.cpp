#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

#include "pnl/dd.hpp"
#include "pnl/error.hpp"
#include "pnl/fit.hpp"
#include "pnl/noise.hpp"
#include "pnl/readout_sim.hpp"
#include "pnl/reconstruction.hpp"
#include "pnl/sensitivity.hpp"

namespace pnl::cli {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

json num(double v) { return std::isfinite(v) ? json(v) : json(format_number(v)); }

// `<name>_values` as an explicit list, or `<name>_min`, `<name>_max`,
// `<name>_points`, `<name>_spacing` (log|linear).
std::vector<double> read_grid(const ConfigNode& node, const std::string& name, double lo,
                              double hi, std::uint64_t points, bool log_default) {
    const std::string list = name + "_values";
    if (node.has(list)) {
        for (const char* suffix : {"_min", "_max", "_points", "_spacing"})
            if (node.has(name + suffix))
                throw ConfigError(node.child_path(name + suffix) + ": conflicts with " +
                                  node.child_path(list));
        auto v = node.numbers(list, {});
        if (v.empty())
            throw ConfigError(node.child_path(list) + ": must not be empty");
        return v;
    }
    lo = node.number(name + "_min", lo);
    hi = node.number(name + "_max", hi);
    points = node.count(name + "_points", points);
    const std::string spacing = node.text(name + "_spacing", log_default ? "log" : "linear");
    if (spacing != "log" && spacing != "linear")
        throw ConfigError(node.child_path(name + "_spacing") + ": expected log or linear");
    if (points < 1)
        throw ConfigError(node.child_path(name + "_points") + ": must be >= 1");
    if (hi < lo)
        throw ConfigError(node.child_path(name + "_max") + ": must be >= " + name + "_min");
    const bool log = spacing == "log";
    if (log && lo <= 0.0)
        throw ConfigError(node.child_path(name + "_min") + ": must be > 0 for log spacing");
    std::vector<double> out(points);
    for (std::uint64_t i = 0; i < points; ++i) {
        const double t = points == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(points - 1);
        out[i] = log ? lo * std::pow(hi / lo, t) : lo + (hi - lo) * t;
    }
    return out;
}

std::vector<std::uint64_t> to_counts(const std::vector<double>& values, const std::string& path) {
    std::vector<std::uint64_t> out;
    for (double v : values) {
        if (!(v >= 1.0))
            throw ConfigError(path + ": repetition counts must be >= 1");
        out.push_back(static_cast<std::uint64_t>(std::llround(v)));
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

EnsembleConfig read_ensemble(const ConfigNode& root, EnsembleConfig cfg = {}) {
    const ConfigNode e = root.block("ensemble");
    cfg.n_nv = e.count("n_nv", cfg.n_nv);
    cfg.species = SpinSpecies::from_value(e.number("spin", cfg.species.value()));
    cfg.contrast = e.number("contrast", cfg.contrast);
    cfg.photons_per_unit = e.number("photons_per_unit", cfg.photons_per_unit);
    cfg.decay_counts = e.number("decay_counts", cfg.decay_counts);
    cfg.p0 = e.number("p0", cfg.p0);
    cfg.validate();
    return cfg;
}

json ensemble_json(const EnsembleConfig& cfg) {
    return {{"n_nv", cfg.n_nv},
            {"spin", cfg.species.value()},
            {"contrast", cfg.contrast},
            {"photons_per_unit", cfg.photons_per_unit},
            {"decay_counts", cfg.decay_counts},
            {"p0", cfg.p0}};
}

ApdModel read_apd(const ConfigNode& node) {
    ApdModel apd;
    apd.mode = apd_mode_from_string(node.text("mode", "linear"));
    apd.k = node.number("k", apd.mode == ApdMode::multiplicative_k ? 0.99 : 1.0);
    apd.dead_time = node.number("dead_time", 0.0);
    try {
        apd.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(node.path() + ": " + e.what());
    }
    return apd;
}

json apd_json(const ApdModel& apd) {
    return {{"mode", to_string(apd.mode)}, {"k", apd.k}, {"dead_time", apd.dead_time}};
}

// Either {"m_t1": x} (equal redraw probability for every level) or
// per-level lifetimes {"m_up", "m_zero", "m_down"}; absent levels are pinned.
std::optional<TelegraphRates> read_telegraph(const ConfigNode& node) {
    if (!node.present())
        return std::nullopt;
    const auto m_t1 = node.optional_number("m_t1");
    const auto up = node.optional_number("m_up");
    const auto zero = node.optional_number("m_zero");
    const auto down = node.optional_number("m_down");
    const bool lifetimes = up || zero || down;
    if (m_t1 && lifetimes)
        throw ConfigError(node.child_path("m_t1") + ": conflicts with per-level lifetimes");
    TelegraphRates rates;
    try {
        if (m_t1) {
            rates = TelegraphRates::symmetric(*m_t1);
        } else if (lifetimes) {
            const double inf = std::numeric_limits<double>::infinity();
            rates = TelegraphRates::from_lifetimes(up.value_or(inf), zero.value_or(inf),
                                                   down.value_or(inf));
        } else {
            return std::nullopt;
        }
        rates.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(node.path() + ": " + e.what());
    }
    return rates;
}

struct ReadoutBlock {
    std::uint64_t shots = 3000;
    std::uint64_t m = 1250;
    ApdModel apd;
    std::optional<TelegraphRates> rates;
};

ReadoutBlock read_readout(const ConfigNode& root, ReadoutBlock d = {}) {
    const ConfigNode r = root.block("readout");
    d.shots = r.count("shots", d.shots);
    if (d.shots < 2)
        throw ConfigError(r.child_path("shots") + ": must be >= 2");
    d.m = r.count("m", d.m);
    if (d.m < 1)
        throw ConfigError(r.child_path("m") + ": must be >= 1");
    d.apd = read_apd(r.block("apd"));
    d.rates = read_telegraph(r.block("telegraph"));
    return d;
}

SimulationPlan make_plan(const EnsembleConfig& cfg, const ReadoutBlock& rb, std::uint64_t seed) {
    SimulationPlan plan;
    plan.cfg = cfg;
    plan.shots = rb.shots;
    plan.m = rb.m;
    plan.seed = seed;
    plan.apd = rb.apd;
    plan.rates = rb.rates;
    return plan;
}

json rates_json(const TelegraphRates& r) {
    return {{"up", r.up}, {"zero", r.zero}, {"down", r.down}};
}

json fit_json(const FitResult& f) {
    json params = json::array();
    for (const auto& p : f.params)
        params.push_back({{"name", p.name},
                          {"value", num(p.value)},
                          {"error", num(p.error)},
                          {"at_bound", p.at_bound},
                          {"identifiable", p.identifiable}});
    json cov = json::array();
    for (Eigen::Index i = 0; i < f.covariance.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < f.covariance.cols(); ++j)
            row.push_back(num(f.covariance(i, j)));
        cov.push_back(std::move(row));
    }
    return {{"parameters", params},
            {"covariance", cov},
            {"chi2", num(f.chi2)},
            {"dof", f.dof},
            {"residual_norm", num(f.residual_norm)},
            {"converged", f.converged},
            {"iterations", f.iterations},
            {"message", f.message}};
}

DecayBracket bracket_from_string(const std::string& s, const std::string& path) {
    if (s == "derived")
        return DecayBracket::derived;
    if (s == "main_text")
        return DecayBracket::main_text;
    throw ConfigError(path + ": unknown bracket '" + s + "' (expected derived|main_text)");
}

DecayForm form_from_string(const std::string& s, const std::string& path) {
    if (s == "relaxation")
        return DecayForm::relaxation;
    if (s == "literal")
        return DecayForm::literal;
    throw ConfigError(path + ": unknown decay form '" + s + "' (expected relaxation|literal)");
}

std::vector<ReadoutAxis> reconstruction_axes() {
    std::vector<ReadoutAxis> axes{ReadoutAxis::z()};
    for (int i = 0; i < 9; ++i) {
        const double az = -90.0 + 22.5 * i;
        axes.push_back({"E" + std::to_string(i), 90.0 * kDeg, az * kDeg});
    }
    return axes;
}

std::filesystem::path resolve(const Context& ctx, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : ctx.config_dir / path;
}

}  // namespace

// crossover ---------------------------------------------------------------

Runner prepare_crossover(const ConfigNode& root, const Context& ctx) {
    const EnsembleConfig cfg = read_ensemble(root);
    const ReadoutBlock rb = read_readout(root);
    const ConfigNode c = root.block("crossover");
    const auto ms = to_counts(read_grid(c, "m", 1250.0, 25000.0, 10, true), c.child_path("m_values"));
    const DecayBracket bracket =
        bracket_from_string(c.text("bracket", "derived"), c.child_path("bracket"));
    const auto fixed_contrast = c.optional_number("contrast");
    const bool dump = c.flag("dump_records", false);
    if (fixed_contrast && !(*fixed_contrast > 0.0 && *fixed_contrast < 1.0))
        throw ConfigError(c.child_path("contrast") + ": must lie in (0, 1)");

    SimulationPlan plan = make_plan(cfg, rb, ctx.seed);
    plan.sequence = SequenceKind::crossover;
    plan.validate();

    return [=](OutputSink& out) {
        DecomposeOptions opts;
        opts.contrast = fixed_contrast;
        const CrossoverCurve curve = sweep_crossover(plan, ms, opts, ctx.exec);

        Table t({"m", "n", "sigma_prime", "err", "sigma_shot_prime", "sigma_proj",
                 "sigma_proj_err", "db_gap", "mean_jz", "clipped"});
        for (const auto& p : curve.points)
            t.add({p.m, p.n, p.sigma_prime, p.err, p.detail.sigma_shot_prime,
                   p.detail.sigma_proj, p.detail.sigma_proj_err, p.detail.db_gap(),
                   p.detail.mean_jz, std::int64_t{p.detail.clipped ? 1 : 0}});
        out.write_table("curve", t);

        if (dump) {
            for (std::size_t i = 0; i < ms.size(); ++i) {
                SimulationPlan p = plan;
                p.m = ms[i];
                p.stream = plan.stream + i;
                const auto records = simulate_experiment(p, ctx.exec);
                Table r({"shot", "a", "b", "r1", "r2"});
                for (std::size_t s = 0; s < records.size(); ++s)
                    r.add({std::uint64_t{s}, records[s].a, records[s].b, records[s].r1,
                           records[s].r2});
                out.write_table("records_m" + std::to_string(ms[i]), r);
            }
        }

        CrossoverModel model;
        model.species = plan.cfg.species;
        model.contrast = curve.contrast();
        model.bracket = bracket;
        const FitResult fit = fit_crossover(curve, model);

        const auto& last = curve.points.back();
        const double plateau =
            model.sigma_proj(last.n, fit.value("n_nv"), fit.value("n_t1"));
        json doc = fit_json(fit);
        doc["model"] = {{"contrast", model.contrast}, {"bracket", to_string(bracket)}};
        doc["ensemble"] = ensemble_json(plan.cfg);
        doc["apd"] = apd_json(plan.apd);
        doc["shots"] = plan.shots;
        doc["largest_n"] = {{"n", last.n},
                            {"sigma_proj_fit", num(plateau)},
                            {"sigma_shot_prime", last.detail.sigma_shot_prime},
                            {"db_gap_fit", num(20.0 * std::log10(plateau / last.detail.sigma_shot_prime))},
                            {"db_gap_measured", num(last.detail.db_gap())}};
        out.write_json("fit.json", doc);
        if (!fit.converged)
            throw NumericalError("crossover fit did not converge: " + fit.message);
    };
}

// rabi --------------------------------------------------------------------

Runner prepare_rabi(const ConfigNode& root, const Context& ctx) {
    const EnsembleConfig cfg = read_ensemble(root);
    const ReadoutBlock rb = read_readout(root);
    const ConfigNode r = root.block("rabi");
    const auto angles_deg = read_grid(r, "angle_deg", 0.0, 360.0, 25, false);
    const ConfigNode init = r.block("init");
    Initialization in;
    in.kind = Initialization::Kind::polarized;
    const std::string kind = init.text("kind", "polarized");
    if (kind == "thermal")
        in.kind = Initialization::Kind::thermal;
    else if (kind != "polarized")
        throw ConfigError(init.child_path("kind") + ": expected thermal or polarized");
    in.level = level_from_string(init.text("level", "up"));
    in.fidelity = init.number("fidelity", 1.0);
    in.active_fraction = init.number("active_fraction", 1.0);
    const bool histograms = r.flag("histograms", true);

    SimulationPlan plan = make_plan(cfg, rb, ctx.seed);
    plan.sequence = SequenceKind::rabi;
    plan.init = in;
    plan.validate();
    std::vector<double> angles;
    for (double a : angles_deg)
        angles.push_back(a * kDeg);

    return [=](OutputSink& out) {
        const auto points = run_rabi_sequence(plan, angles, ctx.exec);
        Table t({"angle_deg", "mean_jz", "sigma_jz", "sigma_jz_err"});
        for (std::size_t i = 0; i < points.size(); ++i)
            t.add({angles_deg[i], points[i].mean_jz, points[i].sigma_jz, points[i].sigma_jz_err});
        out.write_table("rabi", t);
        if (histograms) {
            Table h({"angle_deg", "bin", "center", "count"});
            for (std::size_t i = 0; i < points.size(); ++i) {
                const Histogram& hist = points[i].histogram;
                for (std::size_t b = 0; b < hist.size(); ++b)
                    h.add({angles_deg[i], std::uint64_t{b}, hist.center(b), hist.counts[b]});
            }
            out.write_table("rabi_histograms", h);
        }
    };
}

// t1-decay ----------------------------------------------------------------

Runner prepare_t1_decay(const ConfigNode& root, const Context& ctx) {
    const EnsembleConfig cfg = read_ensemble(root);
    ReadoutBlock defaults;
    defaults.shots = 1000;
    const ReadoutBlock rb = read_readout(root, defaults);
    const ConfigNode t = root.block("t1");
    const Level level = level_from_string(t.text("level", "up"));
    const auto ms = to_counts(read_grid(t, "m", 200.0, 100000.0, 12, true), t.child_path("m_values"));
    const DecayForm form = form_from_string(t.text("form", "relaxation"), t.child_path("form"));

    SimulationPlan plan = make_plan(cfg, rb, ctx.seed);
    plan.sequence = SequenceKind::t1_decay;
    if (!plan.rates)
        plan.rates = TelegraphRates::symmetric(19430.0);
    plan.validate();

    return [=](OutputSink& out) {
        const auto points = run_t1_sequence(plan, level, ms, ctx.exec);
        Table tab({"m", "p_obs", "err"});
        for (const auto& p : points)
            tab.add({static_cast<std::uint64_t>(p.m), p.p_obs, p.err});
        out.write_table("t1", tab);

        DecayFitOptions opts;
        opts.form = form;
        const auto data = to_decay_points(points);
        const FitResult fit = fit_polarization_decay(data, opts);
        json doc = fit_json(fit);
        doc["level"] = to_string(level);
        doc["form"] = to_string(form);
        doc["rates"] = rates_json(plan.effective_rates());
        out.write_json("fit.json", doc);
        if (!fit.converged)
            throw NumericalError("decay fit did not converge: " + fit.message);
    };
}

// dd-spec -----------------------------------------------------------------

Runner prepare_dd_spec(const ConfigNode& root, const Context& ctx) {
    const EnsembleConfig cfg = read_ensemble(root);
    const ConfigNode d = root.block("dd");
    TomographyPlan plan;
    plan.cfg = cfg;
    plan.signal.b_osc = d.number("b_osc", plan.signal.b_osc);
    plan.signal.frequency = d.number("frequency", plan.signal.frequency);
    plan.seq.n_pulses = static_cast<unsigned>(d.count("n_pulses", plan.seq.n_pulses));
    plan.convention = sinc_convention_from_string(d.text("convention", "literal"));
    plan.shots = d.count("shots", plan.shots);
    plan.m = d.count("m", plan.m);
    plan.k1 = d.number("k1", plan.k1);
    plan.histogram_bins = d.count("histogram_bins", 0);
    plan.seed = ctx.seed;
    plan.signal.validate();
    const double t0 = plan.signal.resonant_spacing();
    const auto taus = read_grid(d, "tau", 0.8 * t0, 1.2 * t0, 41, false);
    for (double tau : taus)
        if (!(tau > 0.0))
            throw ConfigError(d.child_path("tau_values") + ": pulse spacings must be > 0");

    const ConfigNode rel = root.block("relaxation");
    const bool relax = rel.flag("enabled", true);
    const auto times = read_grid(rel, "t", 0.0, 3.0, 13, false);
    const std::uint64_t relax_shots = rel.count("shots", 2000);
    const std::uint64_t relax_n = rel.count("n_nv", cfg.n_nv);
    if (relax && relax_shots < 2)
        throw ConfigError(rel.child_path("shots") + ": must be >= 2");
    plan.seq.tau = t0;
    plan.validate();

    return [=](OutputSink& out) {
        std::vector<AxisResult> all;
        Table sweep({"axis", "tau", "alpha_prime", "mean", "sigma_prime", "err",
                     "sigma_shot_prime", "sigma_proj", "sigma_proj_err"});
        for (std::size_t i = 0; i < taus.size(); ++i) {
            TomographyPlan p = plan;
            p.seq.tau = taus[i];
            p.stream = i;
            for (const auto& r : simulate_tomography(p, ctx.exec)) {
                sweep.add({r.axis.label, taus[i], r.alpha_prime, r.mean, r.sigma_prime, r.err,
                           r.sigma_shot_prime, r.sigma_proj, r.sigma_proj_err});
                all.push_back(r);
            }
        }
        out.write_table("dd_spec", sweep);

        TomographyPlan res = plan;
        res.seq = DdSequence::resonant(plan.signal, plan.seq.n_pulses);
        res.axes = reconstruction_axes();
        res.stream = taus.size();
        const auto results = simulate_tomography(res, ctx.exec);
        Table hist({"axis", "bin", "lo", "center", "count"});
        json meta_axes = json::array();
        for (const auto& r : results) {
            for (std::size_t b = 0; b < r.histogram.size(); ++b)
                hist.add({r.axis.label, std::uint64_t{b},
                          r.histogram.lo + r.histogram.width * static_cast<double>(b),
                          r.histogram.center(b), r.histogram.counts[b]});
            meta_axes.push_back({{"label", r.axis.label},
                                 {"polar", r.axis.polar},
                                 {"azimuth", r.axis.azimuth},
                                 {"n", r.n},
                                 {"c", r.c},
                                 {"k", 1.0},
                                 {"lo", r.histogram.lo},
                                 {"width", r.histogram.width},
                                 {"bins", r.histogram.size()},
                                 {"mean", r.mean},
                                 {"sigma_proj", r.sigma_proj},
                                 {"alpha_prime", r.alpha_prime}});
            all.push_back(r);
        }
        out.write_table("histograms", hist);
        out.write_json("histograms_meta.json",
                       {{"n_nv", plan.cfg.n_nv},
                        {"tau", res.seq.tau},
                        {"shots", plan.shots},
                        {"axes", meta_axes}});

        const K1Fit k1 = fit_k1(all, plan.cfg.n_nv);
        const auto strength = interaction_strength(res.seq, plan.signal, plan.convention);
        out.write_json("k1.json", {{"k1", num(k1.k1)},
                                   {"err", num(k1.err)},
                                   {"chi2", num(k1.chi2)},
                                   {"k1_injected", plan.k1},
                                   {"alpha", strength.alpha},
                                   {"alpha_prime", strength.alpha_prime},
                                   {"convention", to_string(plan.convention)}});

        if (relax) {
            Table rt({"noise", "t", "mean", "mean_err", "sigma", "sigma_err", "model_mean"});
            for (DriveNoise noise : {DriveNoise::common_drive, DriveNoise::independent}) {
                const auto pts = correlated_vs_uncorrelated_t1(relax_n, noise, times,
                                                               relax_shots, ctx.seed, ctx.exec);
                for (const auto& p : pts)
                    rt.add({to_string(noise), p.t, p.mean, p.mean_err, p.sigma, p.sigma_err,
                            relaxation_mean(noise, p.t)});
            }
            out.write_table("relaxation", rt);
        }
    };
}

// reconstruct -------------------------------------------------------------

namespace {

struct HistogramInput {
    std::filesystem::path histograms;
    std::filesystem::path metadata;
};

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ','))
        out.push_back(cell);
    if (!line.empty() && line.back() == ',')
        out.emplace_back();
    return out;
}

double parse_double(const std::string& s, const std::string& where) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size())
            throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(where + ": cannot parse number '" + s + "'");
    }
}

// axis label -> (bin -> count)
std::map<std::string, std::map<std::size_t, double>> read_histogram_table(
    const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError(path.string() + ": cannot open histogram table");
    std::map<std::string, std::map<std::size_t, double>> out;
    auto add = [&](const std::string& axis, double bin, double count, const std::string& where) {
        if (bin < 0.0 || bin != std::floor(bin))
            throw ConfigError(where + ": bin index must be a non-negative integer");
        if (count < 0.0)
            throw ConfigError(where + ": counts must be >= 0");
        out[axis][static_cast<std::size_t>(bin)] = count;
    };
    if (path.extension() == ".json") {
        json doc;
        try {
            doc = json::parse(in);
        } catch (const json::exception& e) {
            throw ConfigError(path.string() + ": " + e.what());
        }
        if (!doc.contains("rows") || !doc["rows"].is_array())
            throw ConfigError(path.string() + ": expected a table with a rows array");
        for (const auto& row : doc["rows"]) {
            if (!row.contains("axis") || !row.contains("bin") || !row.contains("count"))
                throw ConfigError(path.string() + ": rows need axis, bin and count");
            add(row["axis"].get<std::string>(), row["bin"].get<double>(),
                row["count"].get<double>(), path.string());
        }
        return out;
    }
    std::string line;
    if (!std::getline(in, line))
        throw ConfigError(path.string() + ": empty histogram table");
    const auto header = split_csv_line(line);
    auto col = [&](const std::string& name) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end())
            throw ConfigError(path.string() + ": missing column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t ia = col("axis"), ib = col("bin"), ic = col("count");
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty())
            continue;
        const auto cells = split_csv_line(line);
        const std::string where = path.string() + ":" + std::to_string(lineno);
        if (cells.size() != header.size())
            throw ConfigError(where + ": wrong number of columns");
        add(cells[ia], parse_double(cells[ib], where), parse_double(cells[ic], where), where);
    }
    return out;
}

struct SyntheticInput {
    double j = 13.0;
    double delta_phi_deg = 60.0;
    double theta_deg = 90.0;
    double thermal_weight = 0.3;
    std::uint64_t components = 51;
    double samples = 3000.0;
};

}  // namespace

Runner prepare_reconstruct(const ConfigNode& root, const Context& ctx) {
    const ConfigNode input = root.required_block("input");
    std::optional<HistogramInput> files;
    std::optional<SyntheticInput> synthetic;
    if (input.has("synthetic")) {
        if (input.has("histograms") || input.has("metadata"))
            throw ConfigError(input.child_path("synthetic") +
                              ": conflicts with histogram file input");
        const ConfigNode s = input.block("synthetic");
        SyntheticInput si;
        si.j = s.number("j", si.j);
        si.delta_phi_deg = s.number("delta_phi_deg", si.delta_phi_deg);
        si.theta_deg = s.number("theta_deg", si.theta_deg);
        si.thermal_weight = s.number("thermal_weight", si.thermal_weight);
        si.components = s.count("components", si.components);
        si.samples = s.number("samples", si.samples);
        if (!(si.samples > 0.0))
            throw ConfigError(s.child_path("samples") + ": must be > 0");
        CoherentStateMixture::ansatz(si.j, si.delta_phi_deg * kDeg, si.theta_deg * kDeg,
                                     si.thermal_weight, si.components)
            .validate();
        synthetic = si;
    } else {
        const std::string h = input.text("histograms", "");
        const std::string m = input.text("metadata", "");
        if (h.empty())
            throw ConfigError(input.child_path("histograms") + ": missing required key");
        if (m.empty())
            throw ConfigError(input.child_path("metadata") + ": missing required key");
        files = HistogramInput{resolve(ctx, h), resolve(ctx, m)};
    }

    const ConfigNode r = root.block("reconstruct");
    DeconvolutionOptions dopt;
    dopt.max_iterations = static_cast<int>(r.count("max_iterations", dopt.max_iterations));
    dopt.tolerance = r.number("tolerance", dopt.tolerance);
    const std::string kernel = r.text("kernel", "automatic");
    if (kernel == "gaussian")
        dopt.kernel = KernelKind::gaussian;
    else if (kernel == "skellam")
        dopt.kernel = KernelKind::skellam;
    else if (kernel != "automatic")
        throw ConfigError(r.child_path("kernel") + ": expected automatic, gaussian or skellam");

    const ConfigNode f = r.block("fit");
    MixtureFitOptions fopt;
    fopt.components = f.count("components", fopt.components);
    fopt.delta_phi_step_deg = f.number("delta_phi_step_deg", fopt.delta_phi_step_deg);
    fopt.theta_min_deg = f.number("theta_min_deg", fopt.theta_min_deg);
    fopt.theta_max_deg = f.number("theta_max_deg", fopt.theta_max_deg);
    fopt.theta_step_deg = f.number("theta_step_deg", fopt.theta_step_deg);
    fopt.thermal_step = f.number("thermal_step", fopt.thermal_step);
    fopt.refine = f.flag("refine", fopt.refine);

    const ConfigNode q = r.block("husimi");
    const std::uint64_t n_theta = q.count("n_theta", 64);
    const std::uint64_t n_phi = q.count("n_phi", 128);
    const bool include_thermal = q.flag("include_thermal", false);
    if (n_theta < 2 || n_phi < 2)
        throw ConfigError(q.path() + ": grid needs at least 2 points per direction");

    return [=](OutputSink& out) {
        std::vector<MarginalDistribution> marginals;
        std::vector<std::string> labels;
        json deconv = json::array();
        if (synthetic) {
            const auto mix = CoherentStateMixture::ansatz(
                synthetic->j, synthetic->delta_phi_deg * kDeg, synthetic->theta_deg * kDeg,
                synthetic->thermal_weight, synthetic->components);
            for (const auto& axis : reconstruction_axes()) {
                auto m = marginal_of_mixture(mix, axis.polar, axis.azimuth);
                m.samples = synthetic->samples;
                marginals.push_back(std::move(m));
                labels.push_back(axis.label);
            }
        } else {
            std::ifstream min(files->metadata);
            if (!min)
                throw ConfigError(files->metadata.string() + ": cannot open metadata");
            json meta;
            try {
                meta = json::parse(min);
            } catch (const json::exception& e) {
                throw ConfigError(files->metadata.string() + ": " + e.what());
            }
            const auto counts = read_histogram_table(files->histograms);
            try {
                const auto n_nv = meta.at("n_nv").get<std::size_t>();
                for (const auto& ax : meta.at("axes")) {
                    const auto label = ax.at("label").get<std::string>();
                    const auto it = counts.find(label);
                    if (it == counts.end())
                        throw ConfigError(files->histograms.string() + ": no rows for axis " + label);
                    Histogram h;
                    h.lo = ax.at("lo").get<double>();
                    h.width = ax.at("width").get<double>();
                    h.counts.assign(ax.at("bins").get<std::size_t>(), 0.0);
                    for (const auto& [bin, count] : it->second) {
                        if (bin >= h.counts.size())
                            throw ConfigError(files->histograms.string() + ": bin out of range for axis " + label);
                        h.counts[bin] = count;
                    }
                    const Deconvolution dc =
                        deconvolve_skellam(h, n_nv, ax.at("n").get<double>(),
                                           ax.at("c").get<double>(), ax.value("k", 1.0), dopt);
                    MarginalDistribution m = dc.marginal;
                    m.polar = ax.at("polar").get<double>();
                    m.azimuth = ax.at("azimuth").get<double>();
                    deconv.push_back({{"axis", label},
                                      {"iterations", dc.iterations},
                                      {"converged", dc.converged},
                                      {"low_confidence", dc.low_confidence},
                                      {"log_likelihood", num(dc.log_likelihood)}});
                    marginals.push_back(std::move(m));
                    labels.push_back(label);
                }
            } catch (const json::exception& e) {
                throw ConfigError(files->metadata.string() + ": " + e.what());
            }
            if (marginals.empty())
                throw ConfigError(files->metadata.string() + ": no axes listed");
        }

        Table mt({"axis", "polar_deg", "azimuth_deg", "m", "probability"});
        for (std::size_t a = 0; a < marginals.size(); ++a) {
            const auto& m = marginals[a];
            for (std::size_t i = 0; i < m.probabilities.size(); ++i)
                mt.add({labels[a], m.polar / kDeg, m.azimuth / kDeg,
                        -m.j + static_cast<double>(i), m.probabilities[i]});
        }
        out.write_table("marginals", mt);

        const MixtureFit fit = fit_mixture(marginals, fopt);
        const auto& mix = fit.mixture;
        const double integral =
            husimi_sphere_integral(mix, n_theta, n_phi, include_thermal);
        out.write_json("mixture.json", {{"j", mix.j},
                                        {"delta_phi_deg", mix.delta_phi / kDeg},
                                        {"theta_deg", mix.theta / kDeg},
                                        {"thermal_weight", mix.thermal_weight},
                                        {"coherent_weight", mix.coherent_weight()},
                                        {"components", mix.components.size()},
                                        {"log_likelihood", num(fit.log_likelihood)},
                                        {"identifiable", fit.identifiable},
                                        {"message", fit.message},
                                        {"husimi_integral", integral},
                                        {"deconvolution", deconv}});

        Table ht({"theta", "phi", "q"});
        for (const auto& s : husimi_grid(mix, n_theta, n_phi, include_thermal))
            ht.add({s.theta, s.phi, s.q});
        out.write_table("husimi", ht);
    };
}

// sensitivity -------------------------------------------------------------

Runner prepare_sensitivity(const ConfigNode& root, const Context& ctx) {
    const ConfigNode s = root.block("sensitivity");
    SensitivityParams p;
    p.tau_r = s.number("tau_r", p.tau_r);
    p.tau_r_rep = s.number("tau_r_rep", p.tau_r_rep);
    p.tau_init = s.number("tau_init", p.tau_init);
    p.tau_rf = s.number("tau_rf", p.tau_rf);
    p.tau_sq = s.number("tau_sq", p.tau_sq);
    p.n1_per_nv = s.number("n1_per_nv", p.n1_per_nv);
    p.c = s.number("contrast", p.c);
    p.m_t1 = s.number("m_t1", p.m_t1);
    p.n_nv = s.number("n_nv", p.n_nv);
    p.gamma_e = s.number("gamma_e", p.gamma_e);
    p.decay = contrast_decay_from_string(s.text("contrast_decay", "relaxation"));
    try {
        p.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(s.path() + ": " + e.what());
    }
    const auto taus = read_grid(s, "tau", 1.0, 1e5, 26, true);
    const auto m_raw = read_grid(s, "m", 1.0, 5e5, 58, true);
    std::vector<double> ms;
    for (auto m : to_counts(m_raw, s.child_path("m_values")))
        ms.push_back(static_cast<double>(m));
    for (double t : taus)
        if (!(t > 0.0))
            throw ConfigError(s.child_path("tau_values") + ": sensing times must be > 0");

    std::optional<SqueezingSpec> sq;
    const ConfigNode q = s.block("squeezing");
    if (q.present()) {
        SqueezingSpec spec;
        spec.xi_sq_db = q.number("xi_sq_db", 0.0);
        spec.convention = squeezing_convention_from_string(q.text("convention", "db_amplitude"));
        try {
            spec.validate();
        } catch (const ConfigError& e) {
            throw ConfigError(q.path() + ": " + e.what());
        }
        sq = spec;
    }

    return [=](OutputSink& out) {
        const auto cells = sensitivity_map(p, taus, ms, sq, ctx.exec);
        Table t({"tau_sens", "m", "eta_conv", "eta_rep", "ratio"});
        for (const auto& c : cells)
            t.add({c.tau_sens, c.m, c.eta_conv, c.eta_rep, c.ratio});
        out.write_table("map", t);

        json optimum = json::array();
        for (double tau : taus) {
            const auto best = optimize_repetitions(p, tau, sq);
            const double conv = eta_conventional(p, tau);
            json row{{"tau_sens", tau},
                     {"m_opt", best.m},
                     {"eta_rep", best.eta},
                     {"eta_conv", conv},
                     {"ratio", conv / best.eta}};
            if (sq) {
                const auto plain = optimize_repetitions(p, tau);
                row["m_opt_unsqueezed"] = plain.m;
                row["eta_rep_unsqueezed"] = plain.eta;
            }
            optimum.push_back(std::move(row));
        }
        json breakeven = json::object();
        for (ContrastDecay d : {ContrastDecay::relaxation, ContrastDecay::literal}) {
            SensitivityParams pd = p;
            pd.decay = d;
            try {
                breakeven[to_string(d)] = breakeven_sensing_time(pd, sq);
            } catch (const NumericalError&) {
                breakeven[to_string(d)] = nullptr;
            }
        }
        json doc{{"contrast_decay", to_string(p.decay)},
                 {"breakeven_tau_sens", breakeven},
                 {"optimum", optimum}};
        if (sq)
            doc["squeezing"] = {{"xi_sq_db", sq->xi_sq_db},
                                {"convention", to_string(sq->convention)},
                                {"amplitude_factor", sq->amplitude_factor()}};
        out.write_json("optimizer.json", doc);
    };
}

// calibrate-apd -----------------------------------------------------------

Runner prepare_calibrate_apd(const ConfigNode& root, const Context& ctx) {
    const ApdModel apd = read_apd(root.required_block("apd"));
    const EnsembleConfig cfg = read_ensemble(root);
    const ConfigNode c = root.block("calibration");
    const auto ms = to_counts(read_grid(c, "m", 1250.0, 20000.0, 5, true), c.child_path("m_values"));
    const std::uint64_t shots = c.count("shots", 3000);
    if (shots < 2)
        throw ConfigError(c.child_path("shots") + ": must be >= 2");
    SimulationPlan plan;
    plan.cfg = cfg;
    plan.apd = apd;
    plan.shots = shots;
    plan.seed = ctx.seed;
    plan.validate();

    return [=](OutputSink& out) {
        std::vector<std::vector<ReadoutRecord>> batches;
        for (std::size_t i = 0; i < ms.size(); ++i) {
            SimulationPlan p = plan;
            p.m = ms[i];
            p.stream = i;
            batches.push_back(simulate_experiment(p, ctx.exec));
        }
        const KCalibration k = calibrate_k(batches);
        Table t({"m", "n", "x", "y", "err"});
        for (std::size_t i = 0; i < k.points.size(); ++i)
            t.add({ms[i], k.points[i].n, k.points[i].x, k.points[i].y, k.points[i].err});
        out.write_table("calibration", t);
        out.write_json("k.json", {{"k", num(k.k)},
                                  {"err", num(k.err)},
                                  {"chi2", num(k.chi2)},
                                  {"single_point", k.single_point},
                                  {"clamped", k.clamped},
                                  {"apd", apd_json(apd)}});
    };
}

}  // namespace pnl::cli
