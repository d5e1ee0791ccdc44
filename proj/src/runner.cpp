#include "noarb/runner.hpp"

#include "noarb/analytic.hpp"
#include "noarb/error.hpp"
#include "noarb/hedge.hpp"

#include "CLI11.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

namespace noarb {

using nlohmann::json;

namespace {

const json& engine_versions() {
    static const json v = {{"pde", "1.0.0"}, {"analytic", "1.0.0"}, {"mc", "1.0.0"}, {"sim", "1.0.0"}};
    return v;
}

PriceSurface pricing_surface(const Scenario& sc) {
    if (sc.closeout == CloseoutRule::Proportional && !sc.collateral.is_scheduled())
        return solve_default_risky(sc.market, sc.payoff, sc.grid, sc.A, sc.B, sc.collateral);
    return solve_general_closeout(sc.market, sc.payoff, sc.grid, sc.A, sc.B, sc.closeout, sc.collateral);
}

PriceSurface sim_surface(const Scenario& sc) {
    const StrategySpec& st = sc.sim.strategy;
    if (st.kind == StrategyKind::BK13)
        return solve_semi_replication(sc.market, sc.payoff, sc.grid, sc.A, sc.B, st.epsilon);
    return solve_default_risky(sc.market, sc.payoff, sc.grid, sc.A, sc.B, CollateralSpec::proportional(st.k));
}

// Positions of the hedging strategy at one surface node.
WeightRow weight_row(const Scenario& sc, const StrategySpec& st, double t, double S, const Greeks& g) {
    const SurfacePoint pt{g.value, g.delta, S};
    WeightRow row{t, S, {}, 0.0};
    if (st.kind != StrategyKind::BK13) {
        row.w = collateralized_weights(pt, sc.A, sc.B, st.k);
        return row;
    }
    const double P_A = sc.A.bond_price * std::exp(bond_yield(sc.market, sc.A) * t);
    const double P_B = sc.B.bond_price * std::exp(bond_yield(sc.market, sc.B) * t);
    const double g_a = sc.A.derivative_recovery * g.value;
    const double g_b = sc.B.derivative_recovery * g.value;
    const double eps = st.epsilon(g.value);
    if (sc.A.bond_recovery >= 1.0) throw ValidationError("bond loss rate zero, hedge ratio undefined");
    // A-bond holding value leaving eps open at A's default.
    const double held = (g_a - g.value - eps) / (1.0 - sc.A.bond_recovery);
    const Bk13Weights bk = bk13_weights(pt, g_a, g_b, P_A, sc.A.bond_recovery * P_A, P_B, g.value + held);
    row.w = bk.weights;
    row.w.h_B = full_replication_weights(pt, sc.A, sc.B).h_B;
    row.w.M = -(row.w.h_S * S + g.value + row.w.h_A * P_A + row.w.h_B * P_B);
    row.epsilon = bk.epsilon;
    return row;
}

std::vector<WeightRow> weight_rows(const Scenario& sc, const StrategySpec& st, const PriceSurface& s) {
    std::vector<WeightRow> rows;
    const std::size_t stride = std::max<std::size_t>(1, (s.n_time() - 1) / 10);
    for (std::size_t i = 0; i < s.n_time(); i += stride) {
        for (std::size_t j = 0; j < s.n_space(); ++j) {
            const std::size_t k = s.index(i, j);
            rows.push_back(weight_row(sc, st, s.times[i], s.spots[j], {s.values[k], s.deltas[k], s.gammas[k]}));
        }
    }
    return rows;
}

MoneyAccountStructure sim_money_account(const Scenario& sc, const PriceSurface& surface) {
    const MoneyAccountSpec& m = sc.money_account;
    if (m.components) return *m.components;
    const Greeks g = greeks(surface, 0.0, sc.market.spot);
    const double k = sc.sim.strategy.k;
    PresetState st;
    st.V = g.value;
    st.Delta = g.delta;
    st.S = sc.market.spot;
    st.C = k * positive_part(g.value);
    st.g_B = collateral_adjusted_recovery(sc.B.derivative_recovery, k) * g.value;
    st.h_B_P_B = m.h_B_P_B;
    st.r = sc.market.r;
    st.r_R = m.r_R;
    st.r_F = m.r_F;
    st.r_C = m.r_C;
    return preset_money_account(*m.preset, st);
}

json money_account_json(const MoneyAccountStructure& ma, double r) {
    json comps = json::array();
    for (const auto& c : ma.components) comps.push_back({{"name", c.name}, {"weight", c.weight}, {"rate", c.rate}});
    const SpreadResult sp = money_account_spread(ma, r);
    return {{"components", comps}, {"rho", sp.rho}, {"spread", sp.spread}};
}

double relative_tolerance(double rel, double price, double spot) {
    return rel * std::max(std::abs(price), 1e-2 * spot);
}

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

} // namespace

RunResult run_scenario(const Scenario& sc, const json& doc, bool sim_only) {
    RunResult res;
    const double spot = sc.market.spot;
    const bool price_engines = !sim_only && (sc.wants(Engine::Pde) || sc.wants(Engine::Analytic) || sc.wants(Engine::Mc));

    std::vector<McEstimate> mc_estimates;
    if (price_engines) {
        if (sc.wants(Engine::Pde) || sc.wants(Engine::Mc)) {
            res.surface = pricing_surface(sc);
            res.weights = weight_rows(sc, StrategySpec::collateralized(sc.collateral_level()), *res.surface);
        }
        if (sc.wants(Engine::Pde)) {
            const double p = price_at_spot(*res.surface);
            res.prices.push_back({"pde", "pde", p, 0.0, relative_tolerance(1e-3, p, spot)});
        }
        if (sc.wants(Engine::Analytic)) {
            const double p = effective_hazard_price(sc.market, sc.payoff, sc.A, sc.B, sc.collateral_level());
            res.prices.push_back({"analytic", "analytic", p, 0.0, relative_tolerance(1e-10, p, spot)});
        }
        if (sc.wants(Engine::Mc)) {
            if (sc.closeout == CloseoutRule::Proportional && !sc.collateral.is_scheduled())
                mc_estimates.push_back(
                    mc_effective_discount(sc.market, sc.payoff, sc.A, sc.B, sc.collateral_level(), sc.mc));
            if (sc.closeout == CloseoutRule::Collateralized || sc.payoff.non_negative())
                mc_estimates.push_back(
                    mc_loss_integral(sc.market, sc.payoff, sc.A, sc.B, sc.collateral, *res.surface, sc.mc));
            for (const auto& e : mc_estimates)
                res.prices.push_back({"mc", e.estimator, e.mean, e.std_error, 3.0 * e.std_error});
        }
    }

    std::optional<MoneyAccountStructure> sim_ma;
    if (sc.wants(Engine::Sim)) {
        const PriceSurface surface = sim_surface(sc);
        sim_ma = sim_money_account(sc, surface);
        res.sim = simulate(sc.market, sc.payoff, sc.A, sc.B, sc.sim.strategy, *sim_ma, surface, sc.sim.cfg);
        const Verdict v = detect_arbitrage(*res.sim, sc.sim.confidence);
        res.sim->verdict = std::string(to_string(v));
        res.sim->arbitrage_flag = v == Verdict::Arbitrage || v == Verdict::NonClearingDrift;
        res.prices.push_back({"sim", "sim_" + res.sim->strategy, res.sim->mean_drift, res.sim->drift_std_error, 0.0});
        if (!res.surface) {
            res.weights = weight_rows(sc, sc.sim.strategy, surface);
            res.surface = surface;
        }
    }

    // Pairwise cross-checks between pricing engines.
    double max_units = 0.0;
    for (std::size_t i = 0; i < res.prices.size(); ++i) {
        for (std::size_t j = i + 1; j < res.prices.size(); ++j) {
            const PriceRow& a = res.prices[i];
            const PriceRow& b = res.prices[j];
            if (a.engine == "sim" || b.engine == "sim") continue;
            CrossCheck c;
            c.a = a.estimator;
            c.b = b.estimator;
            c.deviation = std::abs(a.price - b.price);
            if (a.std_error > 0.0 && b.std_error > 0.0)
                c.tolerance = 3.0 * std::hypot(a.std_error, b.std_error);
            else
                c.tolerance = a.tolerance + b.tolerance;
            c.units = c.tolerance > 0.0 ? c.deviation / c.tolerance : (c.deviation > 0.0 ? INFINITY : 0.0);
            c.pass = c.units <= 1.0;
            max_units = std::max(max_units, c.units);
            res.pass = res.pass && c.pass;
            res.checks.push_back(c);
        }
    }

    json& r = res.report;
    r["schema"] = kReportSchema;
    r["scenario_id"] = sc.id;
    r["scenario_hash"] = scenario_hash(doc);
    r["engine_versions"] = engine_versions();
    r["seeds"] = {{"mc", sc.mc.seed}, {"sim", sc.sim.cfg.seed}};
    json engines = json::array();
    for (Engine e : sc.engines)
        if (!sim_only || e == Engine::Sim) engines.push_back(std::string(to_string(e)));
    r["engines_run"] = engines;
    if (res.surface)
        r["surface"] = {{"label", res.surface->label},
                        {"n_time", res.surface->n_time()},
                        {"n_space", res.surface->n_space()},
                        {"market_cleared", res.surface->market_cleared},
                        {"price_at_spot", price_at_spot(*res.surface)}};
    json prices = json::array();
    for (const auto& p : res.prices)
        prices.push_back({{"engine", p.engine},
                          {"estimator", p.estimator},
                          {"price", p.price},
                          {"std_error", p.std_error},
                          {"tolerance", p.tolerance}});
    r["prices"] = prices;
    json mc = json::array();
    for (const auto& e : mc_estimates) mc.push_back(to_json(e, sc.id));
    r["mc_estimates"] = mc;
    json checks = json::array();
    for (const auto& c : res.checks)
        checks.push_back({{"a", c.a},
                          {"b", c.b},
                          {"deviation", c.deviation},
                          {"tolerance", c.tolerance},
                          {"deviation_units", c.units},
                          {"pass", c.pass}});
    r["cross_checks"] = checks;
    r["max_deviation_units"] = max_units;
    if (res.sim) {
        json s = to_json(*res.sim);
        s["confidence"] = sc.sim.confidence;
        s["money_account"] = money_account_json(*sim_ma, sc.market.r);
        r["simulation"] = s;
    }
    r["pass"] = res.pass;
    return res;
}

void write_outputs(const RunResult& result, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream os(dir / "report.json", std::ios::binary);
        os << result.report.dump(2) << '\n';
    }
    if (result.surface) {
        std::ofstream os(dir / "surface.csv", std::ios::binary);
        write_csv(*result.surface, os);
    }
    if (!result.weights.empty()) {
        std::ofstream os(dir / "weights.csv", std::ios::binary);
        write_weights_csv(result.weights, os);
    }
    if (result.sim && !result.sim->trace.empty()) {
        std::ofstream os(dir / "sim_trace.csv", std::ios::binary);
        write_trace_csv(result.sim->trace, os);
    }
}

void write_price_table(const RunResult& result, std::ostream& os) {
    os << "engine,estimator,price,std_error,deviation_units\n";
    for (const auto& p : result.prices) {
        double worst = 0.0;
        for (const auto& c : result.checks)
            if (c.a == p.estimator || c.b == p.estimator) worst = std::max(worst, c.units);
        os << p.engine << ',' << p.estimator << ',' << fmt(p.price) << ',' << fmt(p.std_error) << ','
           << fmt(worst) << '\n';
    }
}

namespace {

struct CliState {
    std::string scenario;
    std::string out_dir;
    std::string format = "csv";
    std::string param;
    std::string values;
};

std::vector<double> parse_values(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
        if (item.empty() || used != item.size() || !std::isfinite(v))
            throw ScenarioError("--values: '" + item + "' is not a number", "values", 1);
        out.push_back(v);
    }
    if (out.empty()) throw ScenarioError("--values: no values given", "values", 1);
    return out;
}

int run_single(const CliState& st, bool sim_only, std::ostream& out) {
    const std::string text = read_text_file(st.scenario);
    const json doc = parse_scenario_document(text, st.scenario);
    const Scenario sc = scenario_from_json(doc, text, st.scenario);
    if (sim_only && !sc.wants(Engine::Sim))
        throw ScenarioError(st.scenario + ":1: engines: simulate needs the sim engine", "engines", 1);
    const RunResult res = run_scenario(sc, doc, sim_only);
    if (!st.out_dir.empty()) write_outputs(res, st.out_dir);
    if (st.format == "json") out << res.report.dump(2) << '\n';
    else write_price_table(res, out);
    return res.pass ? 0 : 1;
}

int run_sweep(const CliState& st, std::ostream& out) {
    const std::string text = read_text_file(st.scenario);
    const json doc = parse_scenario_document(text, st.scenario);
    scenario_from_json(doc, text, st.scenario);
    const auto ptr = parameter_pointer(st.param);
    if (!doc.contains(ptr) || !doc.at(ptr).is_number())
        throw ScenarioError(st.scenario + ":1: " + st.param + ": sweep parameter must address a numeric field",
                            st.param, 1);
    const std::vector<double> values = parse_values(st.values);
    const bool integral = doc.at(ptr).is_number_integer();

    bool pass = true;
    json rows = json::array();
    std::ostringstream csv;
    csv << "param,value,engine,price,stderr\n";
    for (double v : values) {
        json d = doc;
        if (integral && v == std::floor(v) && v >= 0.0) d[ptr] = static_cast<std::uint64_t>(v);
        else d[ptr] = v;
        const Scenario sc = scenario_from_json(d, text, st.scenario);
        const RunResult res = run_scenario(sc, d, false);
        pass = pass && res.pass;
        for (const auto& p : res.prices) {
            csv << st.param << ',' << fmt(v) << ',' << p.estimator << ',' << fmt(p.price) << ','
                << fmt(p.std_error) << '\n';
            rows.push_back({{"param", st.param},
                            {"value", v},
                            {"engine", p.estimator},
                            {"price", p.price},
                            {"stderr", p.std_error}});
        }
    }
    if (!st.out_dir.empty()) {
        std::filesystem::create_directories(st.out_dir);
        std::ofstream os(std::filesystem::path(st.out_dir) / (st.format == "json" ? "sweep.json" : "sweep.csv"),
                         std::ios::binary);
        if (st.format == "json") os << rows.dump(2) << '\n';
        else os << csv.str();
    }
    if (st.format == "json") out << rows.dump(2) << '\n';
    else out << csv.str();
    return pass ? 0 : 1;
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Pricing and replication checks for default-risky derivatives", "noarb"};
    app.require_subcommand(1);
    CliState st;

    auto common = [&](CLI::App* sub) {
        sub->add_option("scenario", st.scenario, "Scenario JSON file")->required();
        sub->add_option("--out", st.out_dir, "Directory for report.json and the CSV outputs");
        sub->add_option("--format", st.format, "Output format on stdout")->check(CLI::IsMember({"csv", "json"}));
    };
    CLI::App* price = app.add_subcommand("price", "Run the scenario's engines and cross-check them");
    common(price);
    CLI::App* simulate_cmd = app.add_subcommand("simulate", "Run the replication simulator only");
    common(simulate_cmd);
    CLI::App* sweep = app.add_subcommand("sweep", "Re-run the scenario over values of one parameter");
    common(sweep);
    sweep->add_option("--param", st.param, "JSON pointer or dotted path of a numeric field")->required();
    sweep->add_option("--values", st.values, "Comma separated values")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }

    try {
        if (price->parsed()) return run_single(st, false, out);
        if (simulate_cmd->parsed()) return run_single(st, true, out);
        return run_sweep(st, out);
    } catch (const ScenarioError& e) {
        err << e.what() << '\n';
        return 2;
    } catch (const ValidationError& e) {
        err << st.scenario << ":1: " << e.what() << '\n';
        return 2;
    } catch (const json::exception& e) {
        err << st.scenario << ":1: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

} // namespace noarb
