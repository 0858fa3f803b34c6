#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() /
                         ("pnl_cli_" + std::to_string(::getpid())) / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream(p, std::ios::binary) << text;
}

struct RunResult {
    int code = -1;
    std::string err;
};

RunResult run(const std::string& args, const fs::path& work, const std::string& env = "") {
    const fs::path err = work / "stderr.txt";
    const std::string cmd = env + " \"" PNL_CLI_PATH "\" " + args + " > \"" +
                            (work / "stdout.txt").string() + "\" 2> \"" + err.string() + "\"";
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.err = read_file(err);
    return r;
}

const char* kCrossoverConfig = R"({
  "seed": 11,
  "ensemble": {"n_nv": 31},
  "readout": {"shots": 120},
  "crossover": {"m_values": [1250, 2500, 5000, 10000, 20000]}
})";

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("tables are byte-identical across runs and thread counts") {
    const fs::path dir = scratch_dir("determinism");
    write_file(dir / "cfg.json", kCrossoverConfig);
    const std::string cfg = "--config \"" + (dir / "cfg.json").string() + "\"";
    REQUIRE(run("crossover " + cfg + " --out \"" + (dir / "a").string() + "\" --threads 1", dir)
                .code == 0);
    REQUIRE(run("crossover " + cfg + " --out \"" + (dir / "b").string() + "\" --threads 4", dir)
                .code == 0);
    REQUIRE(run("crossover " + cfg + " --out \"" + (dir / "c").string() + "\"", dir,
                "PNL_READOUT_THREADS=3")
                .code == 0);
    const std::string a = read_file(dir / "a" / "curve.csv");
    REQUIRE_FALSE(a.empty());
    CHECK(a == read_file(dir / "b" / "curve.csv"));
    CHECK(a == read_file(dir / "c" / "curve.csv"));
    CHECK(read_file(dir / "a" / "fit.json") == read_file(dir / "b" / "fit.json"));

    CHECK(a.rfind("m,n,sigma_prime,", 0) == 0);
    CHECK(a.find('\r') == std::string::npos);
    CHECK(a.back() == '\n');
    std::size_t lines = 0;
    for (char ch : a)
        lines += ch == '\n';
    CHECK(lines == 6);

    REQUIRE(run("crossover " + cfg + " --seed 12 --out \"" + (dir / "d").string() + "\"", dir)
                .code == 0);
    CHECK(a != read_file(dir / "d" / "curve.csv"));
}

TEST_CASE("every output carries a provenance sidecar") {
    const fs::path dir = scratch_dir("provenance");
    write_file(dir / "cfg.json", kCrossoverConfig);
    REQUIRE(run("crossover --config \"" + (dir / "cfg.json").string() + "\" --seed 99 --out \"" +
                    (dir / "out").string() + "\"",
                dir)
                .code == 0);
    for (const char* name : {"curve.csv", "fit.json"}) {
        const fs::path side = dir / "out" / (std::string(name) + ".provenance.json");
        REQUIRE(fs::exists(side));
        const json j = json::parse(read_file(side));
        CHECK(j.at("seed").get<std::uint64_t>() == 99);
        CHECK(j.at("config_hash").get<std::string>().rfind("fnv1a64:", 0) == 0);
        CHECK(j.at("module_versions").size() == 8);
        CHECK(j.at("command") == "crossover");
    }
}

TEST_CASE("config errors exit 2 and name the key path") {
    const fs::path dir = scratch_dir("errors");
    write_file(dir / "typo.json", R"({"readout": {"apd": {"mod": "linear"}}})");
    auto r = run("crossover --config \"" + (dir / "typo.json").string() + "\" --out \"" +
                     (dir / "o").string() + "\"",
                 dir);
    CHECK(r.code == 2);
    CHECK(r.err.find("readout.apd.mod") != std::string::npos);

    write_file(dir / "empty.json", "{}");
    r = run("reconstruct --config \"" + (dir / "empty.json").string() + "\" --out \"" +
                (dir / "o").string() + "\"",
            dir);
    CHECK(r.code == 2);
    CHECK(r.err.find("input") != std::string::npos);

    write_file(dir / "contrast.json", R"({"ensemble": {"contrast": 1.5}})");
    r = run("rabi --config \"" + (dir / "contrast.json").string() + "\" --out \"" +
                (dir / "o").string() + "\"",
            dir);
    CHECK(r.code == 2);

    CHECK(run("sensitivity --threads 0 --out \"" + (dir / "o").string() + "\"", dir).code == 2);
    CHECK(run("sensitivity --seed -4 --out \"" + (dir / "o").string() + "\"", dir).code == 2);
    CHECK(run("sensitivity --out \"" + (dir / "o").string() + "\"", dir,
              "PNL_READOUT_THREADS=many")
              .code == 2);
    CHECK(run("sensitivity --format xml", dir).code == 2);
    CHECK(run("", dir).code == 2);
}

TEST_CASE("json table format") {
    const fs::path dir = scratch_dir("json");
    REQUIRE(run("sensitivity --format json --out \"" + (dir / "o").string() + "\"", dir).code ==
            0);
    const json table = json::parse(read_file(dir / "o" / "map.json"));
    CHECK(table.at("columns").size() > 3);
    // The default m grid is rounded to whole repetitions and deduplicated.
    std::set<long long> ms;
    for (int i = 0; i < 58; ++i)
        ms.insert(std::llround(std::pow(10.0, std::log10(5e5) * i / 57.0)));
    CHECK(table.at("rows").size() == 26 * ms.size());
    CHECK(fs::exists(dir / "o" / "map.json.provenance.json"));
}

TEST_CASE("dd-spec histograms feed reconstruct") {
    const fs::path dir = scratch_dir("pipeline");
    write_file(dir / "dd.json", R"({
      "seed": 5,
      "ensemble": {"n_nv": 10},
      "dd": {"shots": 400, "tau_points": 3},
      "relaxation": {"enabled": false}
    })");
    REQUIRE(run("dd-spec --config \"" + (dir / "dd.json").string() + "\" --out \"" +
                    (dir / "dd").string() + "\"",
                dir)
                .code == 0);
    REQUIRE(fs::exists(dir / "dd" / "histograms.csv"));
    write_file(dir / "rec.json", R"({
      "input": {"histograms": "dd/histograms.csv", "metadata": "dd/histograms_meta.json"},
      "reconstruct": {"fit": {"delta_phi_step_deg": 5, "theta_step_deg": 5, "thermal_step": 0.05},
                      "husimi": {"n_theta": 8, "n_phi": 16}}
    })");
    const auto r = run("reconstruct --config \"" + (dir / "rec.json").string() + "\" --out \"" +
                           (dir / "rec").string() + "\"",
                       dir);
    INFO(r.err);
    REQUIRE(r.code == 0);
    const json mix = json::parse(read_file(dir / "rec" / "mixture.json"));
    CHECK(mix.contains("delta_phi_deg"));
    CHECK(fs::exists(dir / "rec" / "husimi.csv.provenance.json"));
}

}
