#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hsps/cli.hpp"
#include "hsps/config_io.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code = 0;
    std::string out;
    std::string err;
};

Result call(const std::vector<std::string>& args)
{
    std::ostringstream out, err;
    Result r;
    r.code = hsps::cli::run(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string slurp(const fs::path& p)
{
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name)
{
    const fs::path dir = fs::path("cli_scratch") / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("report prints the figures of merit")
{
    const auto dir = scratch("report");
    const auto r = call({"report", "--manifest", (dir / "m.json").string()});
    REQUIRE(r.code == hsps::cli::exit_ok);
    const auto doc = json::parse(r.out);
    CHECK(doc.contains("car"));
    CHECK(doc.contains("g_c2_exact"));
    const auto manifest = json::parse(slurp(dir / "m.json"));
    CHECK(manifest["subcommand"] == "report");
    CHECK(manifest["config_path"] == "builtin:demo");
}

TEST_CASE("sweep writes the contour grid and its metadata")
{
    const auto dir = scratch("sweep");
    const auto csv = dir / "grid.csv";
    const auto r = call({"sweep", "--p-pair", "0.02", "--grid", "0.5:1.5:0.5", "--out", csv.string()});
    REQUIRE(r.code == hsps::cli::exit_ok);
    CHECK(r.out.empty());

    std::ifstream f(csv);
    std::string line;
    std::getline(f, line);
    CHECK(line == "sigma_s_prime,sigma_i_prime,car,g_c2,h");
    int rows = 0;
    bool found = false;
    while (std::getline(f, line)) {
        ++rows;
        double s = 0, i = 0, car = 0, g = 0, h = 0;
        char c = 0;
        std::istringstream ls(line);
        ls >> s >> c >> i >> c >> car >> c >> g >> c >> h;
        if (s == 1.0 && i == 1.0) {
            // CAR = 1 + 1 / (4 P_pair) at unit bandwidths.
            CHECK(car == doctest::Approx(13.5));
            CHECK(h == doctest::Approx(0.5));
            found = true;
        }
    }
    CHECK(rows == 9);
    CHECK(found);

    const auto meta = json::parse(slurp(dir / "grid.csv.json"));
    CHECK(meta["p_pair"].get<double>() == 0.02);
    const auto manifest = json::parse(slurp(dir / "grid.csv.manifest.json"));
    CHECK(manifest["outputs"].size() == 2);
}

TEST_CASE("exit codes")
{
    const auto dir = scratch("codes");
    const auto m = (dir / "m.json").string();
    CHECK(call({}).code == hsps::cli::exit_validation);
    CHECK(call({"nonsense"}).code == hsps::cli::exit_validation);
    CHECK(call({"report", "--config", (dir / "missing.json").string(), "--manifest", m}).code ==
          hsps::cli::exit_validation);
    CHECK(call({"sweep", "--grid", "1:2", "--manifest", m}).code == hsps::cli::exit_validation);
    CHECK(call({"sweep", "--p-pair", "0", "--manifest", m}).code == hsps::cli::exit_validation);
    CHECK(call({"mc", "--source", "magic", "--manifest", m}).code == hsps::cli::exit_validation);
    CHECK(call({"mc", "--pulses", "1.5", "--manifest", m}).code == hsps::cli::exit_validation);

    const auto bad = call({"report", "--g-squared", "2", "--manifest", m});
    CHECK(bad.code == hsps::cli::exit_model);
    CHECK(bad.err.find("model validity") != std::string::npos);

    std::ofstream(dir / "broken.json") << "{\"pump\": ";
    CHECK(call({"report", "--config", (dir / "broken.json").string(), "--manifest", m}).code ==
          hsps::cli::exit_validation);

    CHECK(call({"--help"}).code == hsps::cli::exit_ok);
}

TEST_CASE("config files are read")
{
    const auto dir = scratch("config");
    auto c = hsps::ideal_config(1.0, 1.0, 0.01);
    std::ofstream(dir / "ideal.json") << hsps::config_to_json(c).dump(2);
    const auto r = call({"report", "--config", (dir / "ideal.json").string(), "--manifest", (dir / "m.json").string()});
    REQUIRE(r.code == hsps::cli::exit_ok);
    const auto doc = json::parse(r.out);
    CHECK(doc["car"].get<double>() == doctest::Approx(1.0 + 0.25 / doc["p_pair"].get<double>()));
    CHECK(doc["heralding_eff"].get<double>() == doctest::Approx(0.5));
}

TEST_CASE("mc output is reproducible")
{
    const auto dir = scratch("mc");
    auto run_mc = [&](const std::string& name, const std::string& workers) {
        const auto path = dir / name;
        const auto r = call({"mc", "--pulses", "200000", "--seed", "7", "--workers", workers, "--g-squared", "0.02",
                             "--out", path.string()});
        REQUIRE(r.code == hsps::cli::exit_ok);
        return slurp(path);
    };
    const auto a = run_mc("a.json", "1");
    const auto b = run_mc("b.json", "1");
    const auto c = run_mc("c.json", "3");
    CHECK(a == b);
    CHECK(a == c);
    const auto doc = json::parse(a);
    CHECK(doc["seed"] == 7);
    CHECK(doc["pulses"] == 200000);
    CHECK(doc.contains("prediction"));
}

TEST_CASE("records, fit and correction from the command line")
{
    const auto dir = scratch("chain");
    const auto records = dir / "records.csv";
    auto c = hsps::demo_config();
    for (auto& d : c.detectors) {
        d.gate_divisor = 1;
        d.efficiency = 0.5;
        d.dead_time_gates = 0;
    }
    const auto config = (dir / "bright.json").string();
    std::ofstream(config) << hsps::config_to_json(c).dump(2);
    auto r = call({"mc", "--config", config, "--pulses", "2000000", "--raman", "0.06,0.03", "--powers", "1,1.5,2,2.5",
                   "--out", records.string()});
    REQUIRE(r.code == hsps::cli::exit_ok);
    CHECK(slurp(records).rfind("p_ave_mw,", 0) == 0);

    r = call({"fit", "--config", config, "--in", records.string(), "--manifest", (dir / "fit.json").string()});
    REQUIRE(r.code == hsps::cli::exit_ok);
    CHECK(json::parse(r.out)["records"] == 4);

    r = call({"correct", "--config", config, "--in", records.string(), "--subtract-dark", "--manifest", (dir / "cor.json").string()});
    REQUIRE(r.code == hsps::cli::exit_ok);
    const auto doc = json::parse(r.out);
    CHECK(doc["points"].size() == 4);
    CHECK(doc.contains("h_corrected_vs_power"));

    CHECK(call({"mc", "--powers", "1,2", "--manifest", (dir / "x.json").string()}).code == hsps::cli::exit_validation);
    CHECK(call({"fit", "--in", (dir / "none.csv").string(), "--manifest", (dir / "x.json").string()}).code ==
          hsps::cli::exit_validation);
}

#ifdef HSPS_CLI_PATH
TEST_CASE("installed binary")
{
    const auto dir = scratch("binary");
    const std::string cmd = std::string(HSPS_CLI_PATH) + " report --out " + (dir / "r.json").string() + " > " +
                            (dir / "log.txt").string() + " 2>&1";
    CHECK(std::system(cmd.c_str()) == 0);
    CHECK(json::parse(slurp(dir / "r.json")).contains("car"));
    CHECK(fs::exists(dir / "r.json.manifest.json"));
}
#endif
