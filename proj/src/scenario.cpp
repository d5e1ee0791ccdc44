#include "noarb/scenario.hpp"

#include "noarb/error.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace noarb {

using nlohmann::json;

std::string_view to_string(Engine e) {
    switch (e) {
    case Engine::Pde: return "pde";
    case Engine::Analytic: return "analytic";
    case Engine::Mc: return "mc";
    case Engine::Sim: return "sim";
    }
    return "?";
}

bool Scenario::wants(Engine e) const {
    return std::find(engines.begin(), engines.end(), e) != engines.end();
}

double Scenario::collateral_level() const {
    if (const auto* p = std::get_if<ProportionalCollateral>(&collateral.mode)) return p->k;
    return 0.0;
}

namespace {

// Error before line anchoring: a dotted field path and a message.
struct FieldError {
    std::string field;
    std::string message;
};

[[noreturn]] void fail(const std::string& field, const std::string& message) {
    throw FieldError{field, message};
}

std::vector<std::string> split_path(const std::string& field) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : field) {
        if (c == '.' || c == '[' || c == ']') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

// Line of the deepest key of `field` found by walking the raw text.
int anchor_line(const std::string& text, const std::string& field) {
    std::size_t pos = 0;
    bool found = false;
    for (const auto& seg : split_path(field)) {
        if (std::all_of(seg.begin(), seg.end(), [](char c) { return c >= '0' && c <= '9'; })) continue;
        const std::size_t at = text.find('"' + seg + '"', pos);
        if (at == std::string::npos) break;
        pos = at;
        found = true;
    }
    if (!found) return 1;
    return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(pos), '\n'));
}

class Reader {
public:
    Reader(const json& node, std::string path) : node_(node), path_(std::move(path)) {
        if (!node_.is_object()) fail(path_, "must be an object");
    }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    bool has(const std::string& key) const { return node_.contains(key); }

    const json& raw(const std::string& key) {
        seen_.insert(key);
        if (!node_.contains(key)) fail(field(key), "required field missing");
        return node_.at(key);
    }

    double number(const std::string& key) {
        const json& v = raw(key);
        if (!v.is_number()) fail(field(key), "must be a number");
        return v.get<double>();
    }
    double number(const std::string& key, double fallback) { return has(key) ? number(key) : (seen(key), fallback); }

    std::uint64_t count(const std::string& key) {
        const json& v = raw(key);
        if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
            fail(field(key), "must be a non-negative integer");
        return v.get<std::uint64_t>();
    }
    std::uint64_t count(const std::string& key, std::uint64_t fallback) {
        return has(key) ? count(key) : (seen(key), fallback);
    }

    bool boolean(const std::string& key, bool fallback) {
        if (!has(key)) return fallback;
        const json& v = raw(key);
        if (!v.is_boolean()) fail(field(key), "must be true or false");
        return v.get<bool>();
    }

    std::string text(const std::string& key) {
        const json& v = raw(key);
        if (!v.is_string()) fail(field(key), "must be a string");
        return v.get<std::string>();
    }
    std::string text(const std::string& key, const std::string& fallback) {
        return has(key) ? text(key) : (seen(key), fallback);
    }

    Reader object(const std::string& key) { return Reader(raw(key), field(key)); }

    // Every key present must have been read.
    void finish() const {
        for (const auto& [key, value] : node_.items())
            if (!seen_.count(key)) fail(field(key), "unknown field");
    }

private:
    void seen(const std::string& key) { seen_.insert(key); }

    const json& node_;
    std::string path_;
    std::set<std::string> seen_;
};

// Rethrows a model validation message under the scenario section it belongs to.
template <class Fn>
void validated(const std::string& section, Fn&& fn) {
    try {
        fn();
    } catch (const ValidationError& e) {
        std::string msg = e.what();
        const auto colon = msg.find(": ");
        std::string field = colon == std::string::npos ? section : msg.substr(0, colon);
        const std::string rest = colon == std::string::npos ? msg : msg.substr(colon + 2);
        if (colon != std::string::npos && field.rfind(section.substr(0, section.find('.')), 0) != 0)
            field = section + "." + field;
        fail(field, rest);
    }
}

std::vector<std::pair<double, double>> pairs(const json& v, const std::string& field) {
    if (!v.is_array()) fail(field, "must be an array of [x, y] pairs");
    std::vector<std::pair<double, double>> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const json& p = v[i];
        if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
            fail(field + "[" + std::to_string(i) + "]", "must be a [number, number] pair");
        out.emplace_back(p[0].get<double>(), p[1].get<double>());
    }
    return out;
}

Schedule schedule(Reader& r, const std::string& key) {
    if (!r.has(key)) return {};
    const auto knots = pairs(r.raw(key), r.field(key));
    if (knots.empty()) fail(r.field(key), "needs at least one knot");
    Schedule s;
    validated(r.field(key), [&] { s = Schedule(knots); });
    return s;
}

MarketParams read_market(Reader r) {
    MarketParams m;
    m.r = r.number("r");
    m.mu = r.number("mu", m.r);
    m.sigma = r.number("sigma");
    m.delta = r.number("delta", 0.0);
    m.spot = r.number("spot");
    r.finish();
    validated("market", [&] { m.validate(); });
    return m;
}

PayoffSpec read_payoff(Reader r) {
    PayoffSpec p;
    const std::string type = r.text("type");
    p.maturity = r.number("maturity");
    if (type == "call") p.kind = Call{r.number("strike")};
    else if (type == "put") p.kind = Put{r.number("strike")};
    else if (type == "forward") p.kind = Forward{r.number("strike")};
    else if (type == "piecewise_linear") p.kind = PiecewiseLinear{pairs(r.raw("points"), r.field("points"))};
    else fail(r.field("type"), "unknown payoff type '" + type + "'");
    r.finish();
    validated("payoff", [&] { p.validate(); });
    return p;
}

CounterpartyParams read_party(Reader r, const std::string& section) {
    CounterpartyParams c;
    c.lambda = r.number("lambda");
    c.bond_recovery = r.number("bond_recovery");
    c.derivative_recovery = r.number("derivative_recovery");
    c.bond_price = r.number("bond_price", 1.0);
    r.finish();
    validated(section, [&] { c.validate(); });
    return c;
}

CollateralSpec read_collateral(Reader r, double horizon) {
    CollateralSpec c;
    const std::string type = r.text("type");
    if (type == "none") {
        c = CollateralSpec::none();
    } else if (type == "proportional") {
        c = CollateralSpec::proportional(r.number("k"));
    } else if (type == "scheduled") {
        if (!r.has("C")) fail(r.field("C"), "required field missing");
        Schedule C = schedule(r, "C");
        Schedule I_A = schedule(r, "I_A");
        Schedule I_B = schedule(r, "I_B");
        c = CollateralSpec::scheduled(std::move(C), std::move(I_A), std::move(I_B), r.boolean("netted", true));
    } else {
        fail(r.field("type"), "unknown collateral type '" + type + "'");
    }
    c.r_C = r.number("r_C", 0.0);
    r.finish();
    validated("collateral", [&] { c.validate(horizon); });
    return c;
}

MoneyAccountSpec read_money_account(Reader r, double rate) {
    MoneyAccountSpec m;
    if (r.has("components") && r.has("preset"))
        fail(r.field("preset"), "give either components or a preset, not both");
    if (r.has("components")) {
        const json& arr = r.raw("components");
        if (!arr.is_array()) fail(r.field("components"), "must be an array");
        MoneyAccountStructure ma;
        for (std::size_t i = 0; i < arr.size(); ++i) {
            Reader c(arr[i], r.field("components") + "[" + std::to_string(i) + "]");
            MoneyAccountComponent comp;
            comp.name = c.text("name", "M" + std::to_string(i));
            comp.weight = c.number("weight");
            comp.rate = c.number("rate");
            c.finish();
            ma.components.push_back(comp);
        }
        validated("money_account", [&] { ma.validate(); });
        m.components = ma;
    } else if (r.has("preset")) {
        const std::string name = r.text("preset");
        validated(r.field("preset"), [&] { m.preset = preset_from_string(name); });
        m.r_R = r.number("r_R", rate);
        m.r_F = r.number("r_F", rate);
        m.r_C = r.number("r_C", rate);
        m.h_B_P_B = r.number("h_B_P_B", 0.0);
    } else {
        fail(r.field("components"), "required field missing (or give a preset)");
    }
    r.finish();
    return m;
}

GridSpec read_grid(Reader r) {
    GridSpec g;
    g.n_space = static_cast<int>(r.count("n_space", static_cast<std::uint64_t>(g.n_space)));
    g.n_time = static_cast<int>(r.count("n_time", static_cast<std::uint64_t>(g.n_time)));
    g.domain_mult = r.number("domain_mult", g.domain_mult);
    g.theta = r.number("scheme_theta", g.theta);
    g.rannacher_steps = static_cast<int>(r.count("rannacher_steps", static_cast<std::uint64_t>(g.rannacher_steps)));
    g.max_picard_iters = static_cast<int>(r.count("max_picard_iters", static_cast<std::uint64_t>(g.max_picard_iters)));
    g.picard_tol = r.number("picard_tol", g.picard_tol);
    r.finish();
    validated("grid", [&] { g.validate(); });
    return g;
}

McConfig read_mc(Reader r) {
    McConfig c;
    c.n_paths = r.count("n_paths");
    c.n_steps = static_cast<int>(r.count("n_steps", static_cast<std::uint64_t>(c.n_steps)));
    c.seed = r.count("seed");
    c.antithetic = r.boolean("antithetic", false);
    c.threads = static_cast<unsigned>(r.count("threads", 0));
    r.finish();
    validated("mc", [&] { c.validate(); });
    return c;
}

SimSection read_sim(Reader r, const Scenario& sc) {
    SimSection s;
    SimConfig& c = s.cfg;
    c.dt = r.number("dt");
    c.horizon = r.number("horizon", sc.payoff.maturity);
    c.n_paths = r.count("n_paths");
    c.seed = r.count("seed");
    c.threads = static_cast<unsigned>(r.count("threads", 0));
    c.trace_paths = r.count("trace_paths", 10);
    c.drift_blocks = static_cast<int>(r.count("drift_blocks", 4));
    s.confidence = r.number("confidence", 0.99);
    if (!(s.confidence > 0.0 && s.confidence < 1.0)) fail(r.field("confidence"), "must lie in (0, 1)");

    Reader st = r.object("strategy");
    const std::string kind = st.text("kind");
    if (kind == "full_replication") {
        s.strategy = StrategySpec::full_replication();
    } else if (kind == "collateralized") {
        if (!std::holds_alternative<ProportionalCollateral>(sc.collateral.mode))
            fail(st.field("kind"), "collateralized strategy needs proportional collateral");
        s.strategy = StrategySpec::collateralized(sc.collateral_level());
    } else if (kind == "bk13") {
        Reader e = st.object("epsilon");
        EpsilonRule eps;
        eps.constant = e.number("constant", 0.0);
        eps.proportional = e.number("proportional", 0.0);
        e.finish();
        s.strategy = StrategySpec::bk13(eps);
    } else {
        fail(st.field("kind"), "unknown strategy '" + kind + "'");
    }
    if (s.strategy.kind == StrategyKind::BK13 && !std::holds_alternative<NoCollateral>(sc.collateral.mode))
        fail(st.field("kind"), "bk13 strategy takes no collateral");
    s.strategy.k = sc.collateral_level();
    if (st.has("a_bonds")) {
        const json& arr = st.raw("a_bonds");
        if (!arr.is_array() || arr.empty()) fail(st.field("a_bonds"), "must be a non-empty array");
        BondPortfolio bp;
        for (std::size_t i = 0; i < arr.size(); ++i) {
            Reader b(arr[i], st.field("a_bonds") + "[" + std::to_string(i) + "]");
            BondIssue issue;
            issue.price = b.number("price");
            issue.recovery = b.number("recovery");
            issue.holding = b.number("weight");
            b.finish();
            if (!(issue.price > 0.0)) fail(b.field("price"), "must be > 0");
            if (!(issue.recovery >= 0.0 && issue.recovery <= 1.0)) fail(b.field("recovery"), "must lie in [0, 1]");
            bp.issues.push_back(issue);
        }
        s.strategy.a_bonds = bp;
    }
    st.finish();
    r.finish();
    validated("sim", [&] { c.validate(sc.A.lambda + sc.B.lambda); });
    if (c.horizon > sc.payoff.maturity) fail("sim.horizon", "must not exceed the payoff maturity");
    return s;
}

Scenario read_scenario(const json& doc) {
    Reader top(doc, "");
    const std::string schema = top.text("schema");
    if (schema != kScenarioSchema)
        fail("schema", "unsupported schema '" + schema + "', expected '" + kScenarioSchema + "'");

    Scenario sc;
    sc.id = top.text("id");
    if (sc.id.empty()) fail("id", "must not be empty");
    sc.market = read_market(top.object("market"));
    sc.payoff = read_payoff(top.object("payoff"));
    {
        Reader parties = top.object("parties");
        sc.A = read_party(parties.object("A"), "parties.A");
        sc.B = read_party(parties.object("B"), "parties.B");
        parties.finish();
    }
    if (top.has("collateral")) sc.collateral = read_collateral(top.object("collateral"), sc.payoff.maturity);
    if (top.has("closeout")) {
        const std::string rule = top.text("closeout");
        validated("closeout", [&] { sc.closeout = closeout_rule_from_string(rule); });
    }
    if (top.has("money_account")) sc.money_account = read_money_account(top.object("money_account"), sc.market.r);
    else sc.money_account.components = MoneyAccountStructure::single(sc.market.r);

    const json& engines = top.raw("engines");
    if (!engines.is_array() || engines.empty()) fail("engines", "must be a non-empty array");
    for (std::size_t i = 0; i < engines.size(); ++i) {
        const std::string f = "engines[" + std::to_string(i) + "]";
        if (!engines[i].is_string()) fail(f, "must be a string");
        const std::string name = engines[i].get<std::string>();
        Engine e;
        if (name == "pde") e = Engine::Pde;
        else if (name == "analytic") e = Engine::Analytic;
        else if (name == "mc") e = Engine::Mc;
        else if (name == "sim") e = Engine::Sim;
        else fail(f, "unknown engine '" + name + "'");
        if (sc.wants(e)) fail(f, "engine listed twice");
        sc.engines.push_back(e);
    }

    if (top.has("grid")) sc.grid = read_grid(top.object("grid"));
    if (top.has("mc")) sc.mc = read_mc(top.object("mc"));
    else if (sc.wants(Engine::Mc)) fail("mc", "required when the mc engine is requested");
    if (top.has("sim")) sc.sim = read_sim(top.object("sim"), sc);
    else if (sc.wants(Engine::Sim)) fail("sim", "required when the sim engine is requested");
    top.finish();

    // Engine applicability.
    const bool proportional = sc.closeout == CloseoutRule::Proportional;
    if (sc.wants(Engine::Analytic) && (!proportional || sc.collateral.is_scheduled()))
        fail("engines", "analytic engine needs the proportional closeout without a collateral schedule");
    if (sc.wants(Engine::Mc) && sc.closeout == CloseoutRule::PariPassuNetted)
        fail("engines", "mc engine does not support the pari_passu_netted closeout");
    if (sc.wants(Engine::Sim) && (!proportional || sc.collateral.is_scheduled()))
        fail("engines", "sim engine needs the proportional closeout without a collateral schedule");
    if (sc.closeout == CloseoutRule::Proportional && sc.collateral.is_scheduled())
        fail("closeout", "proportional rule takes no collateral schedule; use collateralized");
    if (sc.closeout == CloseoutRule::PariPassuNetted &&
        !std::holds_alternative<NoCollateral>(sc.collateral.mode))
        fail("closeout", "pari_passu_netted rule takes no collateral");
    return sc;
}

[[noreturn]] void raise(const FieldError& e, const std::string& text, const std::string& origin) {
    const int line = anchor_line(text, e.field);
    throw ScenarioError(origin + ":" + std::to_string(line) + ": " + e.field + ": " + e.message, e.field, line);
}

} // namespace

json parse_scenario_document(const std::string& text, const std::string& origin) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        const std::size_t byte = std::min<std::size_t>(e.byte, text.size());
        const int line = 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(byte), '\n'));
        throw ScenarioError(origin + ":" + std::to_string(line) + ": parse error: " + e.what(), "", line);
    }
}

Scenario scenario_from_json(const json& doc, const std::string& text, const std::string& origin) {
    try {
        return read_scenario(doc);
    } catch (const FieldError& e) {
        raise(e, text, origin);
    } catch (const json::exception& e) {
        raise(FieldError{"", e.what()}, text, origin);
    }
}

Scenario parse_scenario(const std::string& text, const std::string& origin) {
    return scenario_from_json(parse_scenario_document(text, origin), text, origin);
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ScenarioError(path.string() + ":1: cannot open file", "", 1);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json::json_pointer parameter_pointer(const std::string& path) {
    if (path.empty()) throw ScenarioError("parameter path is empty", "", 1);
    if (path.front() == '/') return json::json_pointer(path);
    std::string ptr;
    for (const auto& seg : split_path(path)) ptr += "/" + seg;
    return json::json_pointer(ptr);
}

std::string scenario_hash(const json& doc) {
    const std::string canonical = doc.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : canonical) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace noarb
