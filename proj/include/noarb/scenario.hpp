#pragma once

#include "noarb/model.hpp"
#include "noarb/montecarlo.hpp"
#include "noarb/pde.hpp"
#include "noarb/replication_sim.hpp"

#include "json.hpp"

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace noarb {

inline constexpr const char* kScenarioSchema = "noarb.scenario/1";

enum class Engine { Pde, Analytic, Mc, Sim };

std::string_view to_string(Engine e);

struct MoneyAccountSpec {
    std::optional<MoneyAccountStructure> components;  // explicit structure
    std::optional<Preset> preset;                     // sized from the t = 0 state
    double r_R = 0.0;
    double r_F = 0.0;
    double r_C = 0.0;
    double h_B_P_B = 0.0;
};

struct SimSection {
    SimConfig cfg;
    StrategySpec strategy;
    double confidence = 0.99;
};

struct Scenario {
    std::string id;
    MarketParams market;
    PayoffSpec payoff;
    CounterpartyParams A;
    CounterpartyParams B;
    CollateralSpec collateral;
    CloseoutRule closeout = CloseoutRule::Proportional;
    MoneyAccountSpec money_account;
    std::vector<Engine> engines;
    GridSpec grid;
    McConfig mc;
    SimSection sim;

    bool wants(Engine e) const;
    double collateral_level() const;  // k for proportional collateral, else 0
};

// Parse or validation failure, anchored to a field path and a line of the source.
class ScenarioError : public std::runtime_error {
public:
    ScenarioError(const std::string& what, std::string field, int line)
        : std::runtime_error(what), field_(std::move(field)), line_(line) {}
    const std::string& field() const { return field_; }
    int line() const { return line_; }

private:
    std::string field_;
    int line_;
};

// Strict reader: unknown fields, wrong types and invalid values are errors.
// `origin` names the source in diagnostics (usually the file name).
Scenario parse_scenario(const std::string& text, const std::string& origin = "scenario");
Scenario scenario_from_json(const nlohmann::json& doc, const std::string& text,
                            const std::string& origin);
nlohmann::json parse_scenario_document(const std::string& text, const std::string& origin);

std::string read_text_file(const std::filesystem::path& path);

// Accepts a JSON pointer (/parties/B/lambda) or a dotted path (parties.B.lambda).
nlohmann::json::json_pointer parameter_pointer(const std::string& path);

// 64-bit FNV-1a of the canonical (sorted-key, compact) dump, as 16 hex digits.
std::string scenario_hash(const nlohmann::json& doc);

} // namespace noarb
