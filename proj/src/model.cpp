#include "noarb/model.hpp"

#include "noarb/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace noarb {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw ValidationError(msg);
}

bool finite(double x) { return std::isfinite(x); }

} // namespace

std::string_view to_string(Party p) { return p == Party::A ? "A" : "B"; }

void MarketParams::validate() const {
    require(finite(r), "r: must be finite");
    require(finite(mu), "mu: must be finite");
    require(finite(delta), "delta: must be finite");
    require(finite(sigma) && sigma > 0.0, "sigma: must be > 0");
    require(finite(spot) && spot > 0.0, "spot: must be > 0");
}

void CounterpartyParams::validate() const {
    require(finite(lambda) && lambda >= 0.0, "lambda: must be >= 0");
    require(bond_recovery >= 0.0 && bond_recovery <= 1.0, "bond_recovery: must lie in [0, 1]");
    require(derivative_recovery >= 0.0 && derivative_recovery <= 1.0,
            "derivative_recovery: must lie in [0, 1]");
    require(finite(bond_price) && bond_price > 0.0, "bond_price: must be > 0");
}

Schedule::Schedule(std::vector<std::pair<double, double>> knots) : knots_(std::move(knots)) {
    require(!knots_.empty(), "schedule: needs at least one knot");
    for (std::size_t i = 0; i < knots_.size(); ++i) {
        require(finite(knots_[i].first) && finite(knots_[i].second), "schedule: knots must be finite");
        if (i > 0) require(knots_[i].first > knots_[i - 1].first, "schedule: knot times must increase");
    }
}

double Schedule::value(double t) const {
    auto it = std::upper_bound(knots_.begin(), knots_.end(), t,
                               [](double x, const auto& k) { return x < k.first; });
    if (it == knots_.begin()) return knots_.front().second;
    return std::prev(it)->second;
}

double Schedule::prior(double t) const {
    auto it = std::lower_bound(knots_.begin(), knots_.end(), t,
                               [](const auto& k, double x) { return k.first < x; });
    if (it == knots_.begin()) return knots_.front().second;
    return std::prev(it)->second;
}

double Schedule::max_value() const {
    return std::max_element(knots_.begin(), knots_.end(),
                            [](const auto& a, const auto& b) { return a.second < b.second; })
        ->second;
}

double Schedule::min_value() const {
    return std::min_element(knots_.begin(), knots_.end(),
                            [](const auto& a, const auto& b) { return a.second < b.second; })
        ->second;
}

bool Schedule::is_zero() const {
    return std::all_of(knots_.begin(), knots_.end(), [](const auto& k) { return k.second == 0.0; });
}

CollateralSpec CollateralSpec::scheduled(Schedule C, Schedule I_A, Schedule I_B, bool netted) {
    CollateralSpec spec;
    spec.mode = ScheduledCollateral{std::move(C), std::move(I_A), std::move(I_B)};
    spec.netted = netted;
    return spec;
}

double CollateralSpec::unsecured_fraction() const {
    if (std::holds_alternative<NoCollateral>(mode)) return 1.0;
    if (const auto* p = std::get_if<ProportionalCollateral>(&mode)) return positive_part(1.0 - p->k);
    throw ValidationError("collateral: scheduled collateral has no constant unsecured fraction");
}

double CollateralSpec::scheduled_amount(double t, Party defaulter, bool lagged) const {
    const auto* s = std::get_if<ScheduledCollateral>(&mode);
    if (s == nullptr) return 0.0;
    auto read = [&](const Schedule& sch) { return lagged ? sch.prior(t) : sch.value(t); };
    double c = read(s->C);
    if (!netted) c += read(defaulter == Party::A ? s->I_A : s->I_B);
    return c;
}

double CollateralSpec::amount(double t, double v_hat, Party defaulter) const {
    if (std::holds_alternative<NoCollateral>(mode)) return 0.0;
    if (const auto* p = std::get_if<ProportionalCollateral>(&mode)) return p->k * positive_part(v_hat);
    return scheduled_amount(t, defaulter, false);
}

void CollateralSpec::validate(double horizon) const {
    require(finite(r_C), "collateral.r_C: must be finite");
    if (const auto* p = std::get_if<ProportionalCollateral>(&mode)) {
        require(finite(p->k) && p->k >= 0.0, "collateral.k: must be >= 0");
    }
    if (const auto* s = std::get_if<ScheduledCollateral>(&mode)) {
        auto check = [&](const Schedule& sch, const char* name) {
            require(sch.min_value() >= 0.0, std::string("collateral.") + name + ": must be non-negative");
            require(sch.knots().front().first <= 0.0,
                    std::string("collateral.") + name + ": first knot must be at t <= 0");
            require(sch.knots().back().first <= horizon,
                    std::string("collateral.") + name + ": knots must lie within [0, T]");
        };
        check(s->C, "C");
        check(s->I_A, "I_A");
        check(s->I_B, "I_B");
        require(!netted || (s->I_A.is_zero() && s->I_B.is_zero()),
                "collateral.netted: initial margin schedules require netted = false");
    }
}

double PayoffSpec::operator()(double S) const {
    return std::visit(
        [S](const auto& p) -> double {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, Call>) {
                return positive_part(S - p.strike);
            } else if constexpr (std::is_same_v<T, Put>) {
                return positive_part(p.strike - S);
            } else if constexpr (std::is_same_v<T, Forward>) {
                return S - p.strike;
            } else {
                const auto& pts = p.points;
                if (pts.size() == 1) return pts.front().second;
                std::size_t i = 1;
                while (i + 1 < pts.size() && S > pts[i].first) ++i;
                const auto& [x0, y0] = pts[i - 1];
                const auto& [x1, y1] = pts[i];
                return y0 + (y1 - y0) * (S - x0) / (x1 - x0);
            }
        },
        kind);
}

bool PayoffSpec::non_negative() const {
    return std::visit(
        [this](const auto& p) -> bool {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, Forward>) {
                return false;
            } else if constexpr (std::is_same_v<T, PiecewiseLinear>) {
                // Piecewise linear on [0, inf): check the value at 0, at every
                // breakpoint, and the slope of the right tail.
                if ((*this)(0.0) < 0.0) return false;
                for (const auto& pt : p.points)
                    if (pt.first >= 0.0 && pt.second < 0.0) return false;
                const double far = p.points.back().first + 1.0;
                return (*this)(far) >= p.points.back().second || p.points.size() == 1;
            } else {
                return true;
            }
        },
        kind);
}

std::string PayoffSpec::name() const {
    std::ostringstream os;
    std::visit(
        [&os](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, Call>) os << "call(" << p.strike << ")";
            else if constexpr (std::is_same_v<T, Put>) os << "put(" << p.strike << ")";
            else if constexpr (std::is_same_v<T, Forward>) os << "forward(" << p.strike << ")";
            else os << "piecewise_linear(" << p.points.size() << " points)";
        },
        kind);
    return os.str();
}

void PayoffSpec::validate() const {
    require(finite(maturity) && maturity > 0.0, "payoff.maturity: must be > 0");
    std::visit(
        [](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, PiecewiseLinear>) {
                require(!p.points.empty(), "payoff.breakpoints: must not be empty");
                for (std::size_t i = 0; i < p.points.size(); ++i) {
                    require(finite(p.points[i].first) && finite(p.points[i].second),
                            "payoff.breakpoints: must be finite");
                    require(p.points[i].first > 0.0, "payoff.breakpoints: S must be > 0");
                    if (i > 0)
                        require(p.points[i].first > p.points[i - 1].first,
                                "payoff.breakpoints: S must increase");
                }
            } else {
                require(finite(p.strike) && p.strike > 0.0, "payoff.strike: must be > 0");
            }
        },
        kind);
}

double MoneyAccountStructure::composite_rate() const {
    double rho = 0.0;
    for (const auto& c : components) rho += c.weight * c.rate;
    return rho;
}

void MoneyAccountStructure::validate() const {
    require(!components.empty(), "money_account.components: must not be empty");
    double total = 0.0;
    for (const auto& c : components) {
        require(finite(c.weight) && finite(c.rate),
                "money_account.components: weight and rate must be finite");
        total += c.weight;
    }
    require(std::abs(total - 1.0) <= 1e-12, "money_account.components: weights must sum to 1");
}

std::string_view to_string(CloseoutRule rule) {
    switch (rule) {
    case CloseoutRule::Proportional: return "proportional";
    case CloseoutRule::PariPassuNetted: return "pari_passu_netted";
    case CloseoutRule::Collateralized: return "collateralized";
    }
    return "?";
}

CloseoutRule closeout_rule_from_string(std::string_view s) {
    if (s == "proportional") return CloseoutRule::Proportional;
    if (s == "pari_passu_netted") return CloseoutRule::PariPassuNetted;
    if (s == "collateralized") return CloseoutRule::Collateralized;
    throw ValidationError("closeout: unknown rule '" + std::string(s) + "'");
}

double bond_yield(const MarketParams& mkt, const CounterpartyParams& cpty) {
    return mkt.r + (1.0 - cpty.bond_recovery) * cpty.lambda;
}

double loss_ratio(const CounterpartyParams& cpty) {
    const double bond_loss = 1.0 - cpty.bond_recovery;
    const double derivative_loss = 1.0 - cpty.derivative_recovery;
    if (bond_loss == 0.0) {
        if (derivative_loss == 0.0) return 0.0;
        throw ValidationError("bond loss rate zero, hedge ratio undefined");
    }
    return derivative_loss / bond_loss;
}

double collateral_adjusted_recovery(double chi, double k) {
    return 1.0 - positive_part(1.0 - k) * (1.0 - chi);
}

double closeout_residual(CloseoutRule rule, double v_hat, double C, double recovery,
                         Party defaulter) {
    switch (rule) {
    case CloseoutRule::Proportional:
        return recovery * v_hat;
    case CloseoutRule::Collateralized: {
        const double unsecured = v_hat - C;
        return negative_part(unsecured) + recovery * positive_part(unsecured) + C;
    }
    case CloseoutRule::PariPassuNetted:
        // Only the defaulter's liability is cut to its recovery.
        if (defaulter == Party::B) return recovery * positive_part(v_hat) + negative_part(v_hat);
        return positive_part(v_hat) + recovery * negative_part(v_hat);
    }
    return v_hat;
}

} // namespace noarb
