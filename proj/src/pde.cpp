#include "noarb/pde.hpp"

#include "noarb/error.hpp"
#include "noarb/tridiagonal.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

namespace noarb {

void GridSpec::validate() const {
    if (n_space < 50) throw ValidationError("grid.n_space: must be >= 50");
    if (n_time < 50) throw ValidationError("grid.n_time: must be >= 50");
    if (!(domain_mult > 0.0)) throw ValidationError("grid.domain_mult: must be > 0");
    if (!(theta >= 0.0 && theta <= 1.0)) throw ValidationError("grid.scheme_theta: must lie in [0, 1]");
    if (rannacher_steps < 0) throw ValidationError("grid.rannacher_steps: must be >= 0");
    if (max_picard_iters < 1) throw ValidationError("grid.max_picard_iters: must be >= 1");
    if (!(picard_tol > 0.0)) throw ValidationError("grid.picard_tol: must be > 0");
}

namespace {

struct Layout {
    std::vector<double> times;
    std::vector<double> spots;
    double log_step = 0.0;
    std::size_t spot_index = 0;
};

Layout make_layout(const MarketParams& mkt, double maturity, const GridSpec& grid) {
    Layout out;
    const auto n = static_cast<std::size_t>(grid.n_space);
    const double width = grid.domain_mult * mkt.sigma * std::sqrt(maturity);
    out.log_step = 2.0 * width / static_cast<double>(n - 1);
    out.spot_index = (n - 1) / 2;
    const double x_spot = std::log(mkt.spot);
    out.spots.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double offset = (static_cast<double>(j) - static_cast<double>(out.spot_index)) * out.log_step;
        out.spots[j] = std::exp(x_spot + offset);
    }
    out.spots[out.spot_index] = mkt.spot;

    const auto m = static_cast<std::size_t>(grid.n_time);
    out.times.resize(m + 1);
    for (std::size_t i = 0; i <= m; ++i)
        out.times[i] = maturity * static_cast<double>(i) / static_cast<double>(m);
    out.times[m] = maturity;
    return out;
}

void fill_greeks(PriceSurface& s, double h) {
    const std::size_t n = s.n_space();
    s.deltas.assign(s.values.size(), 0.0);
    s.gammas.assign(s.values.size(), 0.0);
    for (std::size_t i = 0; i < s.n_time(); ++i) {
        const double* v = &s.values[s.index(i, 0)];
        for (std::size_t j = 0; j < n; ++j) {
            double vx = 0.0;
            double vxx = 0.0;
            if (j == 0) {
                vx = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
                vxx = (v[0] - 2.0 * v[1] + v[2]) / (h * h);
            } else if (j == n - 1) {
                vx = (3.0 * v[j] - 4.0 * v[j - 1] + v[j - 2]) / (2.0 * h);
                vxx = (v[j] - 2.0 * v[j - 1] + v[j - 2]) / (h * h);
            } else {
                vx = (v[j + 1] - v[j - 1]) / (2.0 * h);
                vxx = (v[j + 1] - 2.0 * v[j] + v[j - 1]) / (h * h);
            }
            const double S = s.spots[j];
            s.deltas[s.index(i, j)] = vx / S;
            s.gammas[s.index(i, j)] = (vxx - vx) / (S * S);
        }
    }
}

// Backward induction over one slab, operating in place on `v`.
class SlabStepper {
public:
    SlabStepper(const std::vector<double>& spots, double h, double sigma)
        : spots_(spots), h_(h), half_var_(0.5 * sigma * sigma), sys_(spots.size()),
          explicit_(spots.size()), rhs_(spots.size()), next_(spots.size()),
          scratch_(spots.size()) {
        const std::size_t n = spots.size();
        omega_lo_ = (spots[0] - spots[1]) / (spots[2] - spots[1]);
        omega_hi_ = (spots[n - 1] - spots[n - 2]) / (spots[n - 2] - spots[n - 3]);
    }

    // Returns the number of Picard sweeps used.
    int step(std::vector<double>& v, double t_mid, double dt, double theta, double carry,
             double discount, const SourceTerm& source, const GridSpec& grid) {
        const std::size_t n = v.size();
        const double bx = carry - half_var_;
        const double lo = half_var_ / (h_ * h_) - bx / (2.0 * h_);
        const double up = half_var_ / (h_ * h_) + bx / (2.0 * h_);
        const double di = -2.0 * half_var_ / (h_ * h_) - discount;

        for (std::size_t j = 1; j + 1 < n; ++j) {
            double e = v[j];
            if (theta < 1.0) {
                e += dt * (1.0 - theta) * (lo * v[j - 1] + di * v[j] + up * v[j + 1]);
                if (source) e -= dt * (1.0 - theta) * source.eval(t_mid, spots_[j], v[j]);
            }
            explicit_[j] = e;
        }

        if (theta == 0.0) {
            for (std::size_t j = 1; j + 1 < n; ++j) v[j] = explicit_[j];
            apply_boundaries(v);
            return 1;
        }

        for (std::size_t j = 1; j + 1 < n; ++j) {
            sys_.lower[j] = -theta * dt * lo;
            sys_.diag[j] = 1.0 - theta * dt * di;
            sys_.upper[j] = -theta * dt * up;
        }
        // Zero-gamma rows, reduced to tridiagonal form against their neighbours.
        const double f_lo = -omega_lo_ / sys_.upper[1];
        sys_.diag[0] = 1.0 - f_lo * sys_.lower[1];
        sys_.upper[0] = -(1.0 - omega_lo_) - f_lo * sys_.diag[1];
        const double f_hi = omega_hi_ / sys_.lower[n - 2];
        sys_.diag[n - 1] = 1.0 - f_hi * sys_.upper[n - 2];
        sys_.lower[n - 1] = -(1.0 + omega_hi_) - f_hi * sys_.diag[n - 2];

        auto solve_with = [&](const std::vector<double>& guess) {
            for (std::size_t j = 1; j + 1 < n; ++j) {
                rhs_[j] = explicit_[j];
                if (source) rhs_[j] -= theta * dt * source.eval(t_mid, spots_[j], guess[j]);
            }
            rhs_[0] = -f_lo * rhs_[1];
            rhs_[n - 1] = -f_hi * rhs_[n - 2];
            solve_tridiagonal(sys_, rhs_, next_, scratch_);
        };

        if (!source) {
            solve_with(v);
            v.swap(next_);
            return 1;
        }

        double residual = 0.0;
        for (int it = 1; it <= grid.max_picard_iters; ++it) {
            solve_with(v);
            residual = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double d = std::abs(next_[j] - v[j]) / std::max(1.0, std::abs(next_[j]));
                residual = std::max(residual, d);
            }
            v.swap(next_);
            if (residual < grid.picard_tol) return it;
        }
        std::ostringstream os;
        os << "picard iteration did not converge at t=" << t_mid << " after "
           << grid.max_picard_iters << " sweeps (last residual " << residual << ")";
        throw ConvergenceError(os.str(), grid.max_picard_iters, residual);
    }

private:
    void apply_boundaries(std::vector<double>& v) const {
        const std::size_t n = v.size();
        v[0] = (1.0 - omega_lo_) * v[1] + omega_lo_ * v[2];
        v[n - 1] = (1.0 + omega_hi_) * v[n - 2] - omega_hi_ * v[n - 3];
    }

    const std::vector<double>& spots_;
    double h_;
    double half_var_;
    double omega_lo_ = 0.0;
    double omega_hi_ = 0.0;
    TridiagonalSystem sys_;
    std::vector<double> explicit_;
    std::vector<double> rhs_;
    std::vector<double> next_;
    std::vector<double> scratch_;
};

void validate_inputs(const MarketParams& mkt, const PayoffSpec& payoff, const GridSpec& grid) {
    mkt.validate();
    payoff.validate();
    grid.validate();
}

double default_intensity(const CounterpartyParams& a, const CounterpartyParams& b) {
    return (1.0 - a.derivative_recovery) * a.lambda + (1.0 - b.derivative_recovery) * b.lambda;
}

} // namespace

PriceSurface solve_generalized(const MarketParams& mkt, const PayoffSpec& payoff,
                               const GridSpec& grid, const RateFunction& carry,
                               const RateFunction& discount, const SourceTerm& source) {
    validate_inputs(mkt, payoff, grid);
    if (!carry || !discount) throw ValidationError("solve_generalized: carry and discount are required");

    const double T = payoff.maturity;
    const double dt = T / grid.n_time;
    if (source && std::max(grid.theta, grid.rannacher_steps > 0 ? 1.0 : 0.0) * dt * source.lipschitz >= 1.0)
        throw ValidationError("grid.n_time: nonlinear source needs theta * dt * lipschitz < 1");

    Layout layout = make_layout(mkt, T, grid);
    PriceSurface out;
    out.times = std::move(layout.times);
    out.spots = std::move(layout.spots);
    out.spot_index = layout.spot_index;
    const std::size_t n = out.n_space();
    const std::size_t m = out.n_time() - 1;
    out.values.assign(out.n_time() * n, 0.0);

    std::vector<double> v(n);
    for (std::size_t j = 0; j < n; ++j) v[j] = payoff(out.spots[j]);
    std::copy(v.begin(), v.end(), out.values.begin() + static_cast<std::ptrdiff_t>(out.index(m, 0)));

    SlabStepper stepper(out.spots, layout.log_step, mkt.sigma);
    for (std::size_t k = 0; k < m; ++k) {
        const std::size_t i_new = m - 1 - k;
        const double t_lo = out.times[i_new];
        const double t_hi = out.times[i_new + 1];
        const double t_mid = 0.5 * (t_lo + t_hi);
        const double theta = static_cast<int>(k) < grid.rannacher_steps ? 1.0 : grid.theta;
        stepper.step(v, t_mid, t_hi - t_lo, theta, carry(t_mid), discount(t_mid), source, grid);
        std::copy(v.begin(), v.end(), out.values.begin() + static_cast<std::ptrdiff_t>(out.index(i_new, 0)));
    }
    fill_greeks(out, layout.log_step);
    out.label = "generalized";
    return out;
}

PriceSurface solve_default_free(const MarketParams& mkt, const PayoffSpec& payoff,
                                const GridSpec& grid, double rho) {
    auto out = solve_generalized(
        mkt, payoff, grid, [&](double) { return rho - mkt.delta; }, [rho](double) { return rho; });
    out.label = "default_free";
    return out;
}

PriceSurface solve_default_risky(const MarketParams& mkt, const PayoffSpec& payoff,
                                 const GridSpec& grid, const CounterpartyParams& a,
                                 const CounterpartyParams& b, const CollateralSpec& collateral) {
    a.validate();
    b.validate();
    collateral.validate(payoff.maturity);
    if (collateral.is_scheduled())
        throw ValidationError(
            "collateral: scheduled collateral makes the equation nonlinear; use solve_general_closeout");
    const double spread = collateral.unsecured_fraction() * default_intensity(a, b);
    auto out = solve_generalized(
        mkt, payoff, grid, [&](double) { return mkt.r - mkt.delta; },
        [&](double) { return mkt.r + spread; });
    out.label = "default_risky";
    return out;
}

PriceSurface solve_general_closeout(const MarketParams& mkt, const PayoffSpec& payoff,
                                    const GridSpec& grid, const CounterpartyParams& a,
                                    const CounterpartyParams& b, CloseoutRule rule,
                                    const CollateralSpec& collateral) {
    a.validate();
    b.validate();
    collateral.validate(payoff.maturity);

    double rec_a = a.derivative_recovery;
    double rec_b = b.derivative_recovery;
    switch (rule) {
    case CloseoutRule::Proportional:
        if (collateral.is_scheduled())
            throw ValidationError("closeout: proportional rule takes no collateral schedule; use collateralized");
        rec_a = collateral_adjusted_recovery(rec_a, 1.0 - collateral.unsecured_fraction());
        rec_b = collateral_adjusted_recovery(rec_b, 1.0 - collateral.unsecured_fraction());
        break;
    case CloseoutRule::PariPassuNetted:
        if (!std::holds_alternative<NoCollateral>(collateral.mode))
            throw ValidationError("closeout: pari_passu_netted rule takes no collateral");
        rec_a = a.bond_recovery;
        rec_b = b.bond_recovery;
        break;
    case CloseoutRule::Collateralized:
        break;
    }
    const bool uses_collateral = rule == CloseoutRule::Collateralized;

    SourceTerm source;
    source.lipschitz = a.lambda + b.lambda;
    source.eval = [&, rule, rec_a, rec_b, uses_collateral](double t, double, double v) {
        const double c_a = uses_collateral ? collateral.amount(t, v, Party::A) : 0.0;
        const double c_b = uses_collateral ? collateral.amount(t, v, Party::B) : 0.0;
        const double v_a = closeout_residual(rule, v, c_a, rec_a, Party::A);
        const double v_b = closeout_residual(rule, v, c_b, rec_b, Party::B);
        return b.lambda * (v - v_b) + a.lambda * (v - v_a);
    };
    auto out = solve_generalized(
        mkt, payoff, grid, [&](double) { return mkt.r - mkt.delta; }, [&](double) { return mkt.r; },
        source);
    out.label = "general_closeout(" + std::string(to_string(rule)) + ")";
    return out;
}

PriceSurface solve_rho_structured(const MarketParams& mkt, const PayoffSpec& payoff,
                                  const GridSpec& grid, const CounterpartyParams& a,
                                  const CounterpartyParams& b, const MoneyAccountStructure& ma) {
    a.validate();
    b.validate();
    ma.validate();
    const double rho = ma.composite_rate();
    const double z_a = loss_ratio(a);
    const double z_b = loss_ratio(b);
    const double wedge = z_b * (bond_yield(mkt, b) - rho) + z_a * (bond_yield(mkt, a) - rho);
    auto out = solve_generalized(
        mkt, payoff, grid, [&](double) { return rho - mkt.delta; },
        [&](double) { return rho + wedge; });
    out.label = "rho_structured";
    out.market_cleared = false;
    return out;
}

PriceSurface solve_semi_replication(const MarketParams& mkt, const PayoffSpec& payoff,
                                    const GridSpec& grid, const CounterpartyParams& a,
                                    const CounterpartyParams& b, const EpsilonRule& epsilon) {
    a.validate();
    b.validate();
    const double spread = default_intensity(a, b);
    SourceTerm source;
    if (!epsilon.is_zero()) {
        source.lipschitz = a.lambda * std::abs(epsilon.proportional);
        source.eval = [lambda_a = a.lambda, epsilon](double, double, double v) {
            return lambda_a * epsilon(v);
        };
    }
    auto out = solve_generalized(
        mkt, payoff, grid, [&](double) { return mkt.r - mkt.delta; },
        [&](double) { return mkt.r + spread; }, source);
    out.label = "semi_replication";
    return out;
}

double price_at_spot(const PriceSurface& surface) { return surface.value(0, surface.spot_index); }

namespace {

struct Cell {
    std::size_t i;
    double wt;
    std::size_t j;
    double wx;
};

std::size_t time_cell(const PriceSurface& s, double t, double* wt) {
    const std::size_t m = s.n_time() - 1;
    const double T = s.maturity();
    const double pos = t / T * static_cast<double>(m);
    auto i = static_cast<std::size_t>(std::clamp(std::floor(pos), 0.0, static_cast<double>(m - 1)));
    *wt = std::clamp((t - s.times[i]) / (s.times[i + 1] - s.times[i]), 0.0, 1.0);
    return i;
}

Greeks interpolate(const PriceSurface& s, std::size_t i, double wt, std::size_t j, double wx) {
    auto lerp2 = [&](const std::vector<double>& a) {
        const double lo = (1.0 - wx) * a[s.index(i, j)] + wx * a[s.index(i, j + 1)];
        const double hi = (1.0 - wx) * a[s.index(i + 1, j)] + wx * a[s.index(i + 1, j + 1)];
        return (1.0 - wt) * lo + wt * hi;
    };
    return {lerp2(s.values), lerp2(s.deltas), lerp2(s.gammas)};
}

Cell locate(const PriceSurface& s, double t, double S) {
    Cell c{};
    c.i = time_cell(s, t, &c.wt);
    const std::size_t n = s.n_space();
    const double x0 = std::log(s.spots.front());
    const double h = (std::log(s.spots.back()) - x0) / static_cast<double>(n - 1);
    const double pos = (std::log(S) - x0) / h;
    c.j = static_cast<std::size_t>(std::clamp(std::floor(pos), 0.0, static_cast<double>(n - 2)));
    c.wx = std::clamp((std::log(S) - std::log(s.spots[c.j])) /
                          (std::log(s.spots[c.j + 1]) - std::log(s.spots[c.j])),
                      0.0, 1.0);
    return c;
}

} // namespace

Greeks greeks(const PriceSurface& s, double t, double S) {
    const double T = s.maturity();
    const double t_tol = 1e-12 * std::max(1.0, T);
    const double s_tol = 1e-12;
    if (!(t >= -t_tol && t <= T + t_tol))
        throw DomainError("greeks: t outside [0, T]");
    if (!(S >= s.s_min() * (1.0 - s_tol) && S <= s.s_max() * (1.0 + s_tol)))
        throw DomainError("greeks: S outside the grid");
    const Cell c = locate(s, t, S);
    return interpolate(s, c.i, c.wt, c.j, c.wx);
}

Greeks greeks_extrapolated(const PriceSurface& s, double t, double S, bool* off_grid) {
    const bool below = S < s.s_min();
    const bool above = S > s.s_max();
    if (off_grid != nullptr) *off_grid = below || above;
    if (!below && !above) return greeks(s, t, S);

    double wt = 0.0;
    const std::size_t i = time_cell(s, t, &wt);
    const std::size_t n = s.n_space();
    const std::size_t edge = below ? 0 : n - 1;
    const std::size_t inner = below ? 1 : n - 2;
    auto at = [&](std::size_t j) {
        return (1.0 - wt) * s.values[s.index(i, j)] + wt * s.values[s.index(i + 1, j)];
    };
    const double slope = (at(inner) - at(edge)) / (s.spots[inner] - s.spots[edge]);
    return {at(edge) + slope * (S - s.spots[edge]), slope, 0.0};
}

void write_csv(const PriceSurface& s, std::ostream& os) {
    os << "t,S,V,delta,gamma\n";
    char buf[160];
    for (std::size_t i = 0; i < s.n_time(); ++i) {
        for (std::size_t j = 0; j < s.n_space(); ++j) {
            const std::size_t k = s.index(i, j);
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n", s.times[i], s.spots[j],
                          s.values[k], s.deltas[k], s.gammas[k]);
            os << buf;
        }
    }
}

} // namespace noarb
