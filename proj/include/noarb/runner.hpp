#pragma once

#include "noarb/scenario.hpp"

#include "json.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace noarb {

inline constexpr const char* kReportSchema = "noarb.report/1";

// One engine price (or, for the simulator, the mean drift).
struct PriceRow {
    std::string engine;
    std::string estimator;
    double price = 0.0;
    double std_error = 0.0;
    double tolerance = 0.0;  // own tolerance used in the cross-checks
};

struct CrossCheck {
    std::string a;
    std::string b;
    double deviation = 0.0;
    double tolerance = 0.0;  // combined
    double units = 0.0;      // deviation / tolerance
    bool pass = true;
};

struct RunResult {
    std::vector<PriceRow> prices;
    std::vector<CrossCheck> checks;
    std::optional<PriceSurface> surface;
    std::vector<WeightRow> weights;
    std::optional<SimReport> sim;
    nlohmann::json report;
    bool pass = true;
};

// Runs the scenario's engines (only the simulator when sim_only) and builds
// the report. `doc` is the parsed scenario document, hashed into the report.
RunResult run_scenario(const Scenario& sc, const nlohmann::json& doc, bool sim_only = false);

// Writes report.json, surface.csv, weights.csv and sim_trace.csv (when present).
void write_outputs(const RunResult& result, const std::filesystem::path& dir);

// Comparison table: engine,estimator,price,std_error,deviation_units.
void write_price_table(const RunResult& result, std::ostream& os);

// Command-line entry point. Exit codes: 0 pass, 1 cross-check or engine
// failure, 2 parse or validation error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace noarb
