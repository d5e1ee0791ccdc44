#include "doctest.h"

#include "noarb/runner.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

using namespace noarb;
namespace fs = std::filesystem;

namespace {

const fs::path kScenarios = NOARB_SCENARIO_DIR;

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run cli(std::vector<std::string> args) {
    args.insert(args.begin(), "noarb");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("noarb_test_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

fs::path write(const fs::path& dir, const std::string& name, const std::string& text) {
    const fs::path p = dir / name;
    std::ofstream(p, std::ios::binary) << text;
    return p;
}

std::string scenario_text(const std::string& collateral, const std::string& engines) {
    return R"({
  "schema": "noarb.scenario/1",
  "id": "cli_call",
  "market": {"r": 0.03, "sigma": 0.2, "spot": 100},
  "payoff": {"type": "call", "strike": 100, "maturity": 1.0},
  "parties": {
    "A": {"lambda": 0.02, "bond_recovery": 0.4, "derivative_recovery": 0.4},
    "B": {"lambda": 0.05, "bond_recovery": 0.4, "derivative_recovery": 0.4}
  },
  "collateral": )" + collateral + R"(,
  "closeout": "proportional",
  "engines": )" + engines + R"(,
  "grid": {"n_space": 200, "n_time": 200}
}
)";
}

// engine -> prices in sweep order, from the CSV sweep output.
std::map<std::string, std::vector<double>> sweep_prices(const std::string& csv) {
    std::map<std::string, std::vector<double>> out;
    std::istringstream is(csv);
    std::string line;
    std::getline(is, line);
    CHECK(line == "param,value,engine,price,stderr");
    while (std::getline(is, line)) {
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string x;
        while (std::getline(ss, x, ',')) f.push_back(x);
        REQUIRE(f.size() == 5);
        out[f[2]].push_back(std::stod(f[3]));
    }
    return out;
}

} // namespace

TEST_CASE("price writes a report and the surface") {
    const fs::path dir = scratch("price");
    const auto r = cli({"price", (kScenarios / "call_default_free.json").string(), "--out", dir.string()});
    CHECK(r.code == 0);
    CHECK(r.out.rfind("engine,estimator,price,std_error,deviation_units\n", 0) == 0);
    CHECK(fs::exists(dir / "report.json"));
    CHECK(slurp(dir / "surface.csv").rfind("t,S,V,delta,gamma\n", 0) == 0);
    CHECK(slurp(dir / "weights.csv").rfind("t,S,h_S,h_A,h_B,M,epsilon\n", 0) == 0);
    const auto report = nlohmann::json::parse(slurp(dir / "report.json"));
    CHECK(report["schema"] == kReportSchema);
    CHECK(report["scenario_id"] == "call_default_free");
    CHECK(report["pass"] == true);
    CHECK(report["mc_estimates"].size() >= 1);
    for (const auto& m : report["mc_estimates"]) {
        CHECK(m.contains("mean"));
        CHECK(m.contains("std_error"));
        CHECK(m["seed"] == 42);
    }
}

TEST_CASE("reports are byte identical across runs") {
    const fs::path d1 = scratch("det1");
    const fs::path d2 = scratch("det2");
    const std::string sc = (kScenarios / "call_bilateral.json").string();
    REQUIRE(cli({"price", sc, "--out", d1.string()}).code == 0);
    REQUIRE(cli({"price", sc, "--out", d2.string()}).code == 0);
    for (const char* f : {"report.json", "surface.csv", "weights.csv"}) CHECK(slurp(d1 / f) == slurp(d2 / f));
}

TEST_CASE("json format on stdout") {
    const auto r = cli({"price", (kScenarios / "call_bilateral.json").string(), "--format", "json"});
    CHECK(r.code == 0);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j["scenario_id"] == "call_bilateral");
}

TEST_CASE("validation errors exit with 2 and name the field") {
    const auto r = cli({"price", (kScenarios / "bad_sigma.json").string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("market.sigma") != std::string::npos);
    CHECK(r.err.find("bad_sigma.json:6:") != std::string::npos);

    const fs::path dir = scratch("unknown");
    std::string text = scenario_text(R"({"type": "none"})", R"(["pde"])");
    text.replace(text.find("\"sigma\""), 0, "\"vol\": 0.3, ");
    const auto u = cli({"price", write(dir, "s.json", text).string()});
    CHECK(u.code == 2);
    CHECK(u.err.find(":4: market.vol: unknown field") != std::string::npos);

    const auto broken = cli({"price", write(dir, "b.json", "{\n  \"schema\": \n").string()});
    CHECK(broken.code == 2);
    CHECK(cli({"price", (dir / "missing.json").string()}).code == 2);
}

TEST_CASE("command line errors exit with 2") {
    CHECK(cli({}).code == 2);
    CHECK(cli({"bogus"}).code == 2);
    const std::string sc = (kScenarios / "call_bilateral.json").string();
    CHECK(cli({"sweep", sc, "--param", "market.sigma"}).code == 2);
    CHECK(cli({"price", sc, "--format", "xml"}).code == 2);
    CHECK(cli({"sweep", sc, "--param", "market.sigma", "--values", "0.1,abc"}).code == 2);
    CHECK(cli({"sweep", sc, "--param", "market.nothing", "--values", "0.1"}).code == 2);
    CHECK(cli({"sweep", sc, "--param", "market.sigma", "--values", "0.1,-0.2"}).code == 2);
}

TEST_CASE("simulate needs the sim engine") {
    const auto r = cli({"simulate", (kScenarios / "call_default_free.json").string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("engines") != std::string::npos);
}

TEST_CASE("simulate reports the arbitrage verdict as data") {
    const fs::path dir = scratch("bk13");
    const auto r = cli({"simulate", (kScenarios / "bk13_arbitrage.json").string(), "--out", dir.string()});
    CHECK(r.code == 0);
    const auto report = nlohmann::json::parse(slurp(dir / "report.json"));
    CHECK(report["simulation"]["verdict"] == "arbitrage");
    CHECK(report["simulation"]["arbitrage_flag"] == true);
    CHECK(slurp(dir / "sim_trace.csv").rfind("path,t,S,J_A,J_B,Pi,drift_pred\n", 0) == 0);
}

TEST_CASE("collateral sweep is monotone") {
    const fs::path dir = scratch("ksweep");
    const auto sc = write(dir, "s.json", scenario_text(R"({"type": "proportional", "k": 0.0})", R"(["pde", "analytic"])"));
    const auto r = cli({"sweep", sc.string(), "--param", "collateral.k", "--values", "0,0.25,0.5,0.75,1"});
    CHECK(r.code == 0);
    const auto prices = sweep_prices(r.out);
    for (const auto& [engine, v] : prices) {
        REQUIRE(v.size() == 5);
        for (std::size_t i = 1; i < v.size(); ++i) CHECK(v[i] >= v[i - 1]);
    }
    CHECK(prices.count("pde") == 1);
}

TEST_CASE("hazard sweep under full collateral is flat") {
    const fs::path dir = scratch("lsweep");
    const auto sc = write(dir, "s.json", scenario_text(R"({"type": "proportional", "k": 1.0})", R"(["pde", "analytic"])"));
    const auto r = cli({"sweep", sc.string(), "--param", "/parties/B/lambda", "--values", "0,0.05,0.2", "--out",
                        dir.string()});
    CHECK(r.code == 0);
    for (const auto& [engine, v] : sweep_prices(r.out)) {
        REQUIRE(v.size() == 3);
        CHECK(v[1] == v[0]);
        CHECK(v[2] == v[0]);
    }
    CHECK(slurp(dir / "sweep.csv") == r.out);
}
