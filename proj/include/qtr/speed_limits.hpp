#pragma once

// Every bound in the framework: the MT-type rate bound, the super-fidelity
// QSL and its tightness condition, the rate-of-change bound, and the
// characteristic times tau_QTR and tau_MT.

#include <cmath>
#include <string>

#include "qtr/qtr_engine.hpp"

namespace qtr {

struct BoundReport {
    double t = 0.0;
    double lhs = 0.0;
    double rhs = 0.0;
    bool satisfied = false;
    double slack = 0.0;
    std::string tag;

    static BoundReport make(double t, double lhs, double rhs, std::string tag) {
        BoundReport r;
        r.t = t;
        r.lhs = lhs;
        r.rhs = rhs;
        r.slack = rhs - lhs;
        r.satisfied = r.slack >= -1e-9;
        r.tag = std::move(tag);
        return r;
    }
};

namespace detail {

inline DensityMatrix evolved_conditioned_state(const TransitionSetup& setup, double t) {
    const Mat u = setup.unitary(0.0, t);
    Mat m = u * setup.rhoA.mat() * u.adjoint();
    return DensityMatrix(0.5 * (m + Mat(m.adjoint())), 1e-9, 1e-8, 1e-8);
}

/// Delta_{rho_A} H(t): variance of the Heisenberg H(t) in rho_A, evaluated
/// as the variance of H_S(t) in rho_A(t) (one propagation, same number).
inline double energy_dispersion(const TransitionSetup& setup, double t) {
    const DensityMatrix rho_t = evolved_conditioned_state(setup, t);
    return std::sqrt(variance(rho_t, setup.schedule().at(t), 1e-8));
}

/// Time average (1/tau) int_0^tau Delta_{rho_A} H(t) dt by composite Simpson.
inline double avg_energy_dispersion(const TransitionSetup& setup, double tau, int steps) {
    if (tau == 0.0) return std::sqrt(variance(setup.rhoA, setup.schedule().at(0.0), 1e-8));
    if (steps < 2) steps = 2;
    if (steps % 2) ++steps;
    const double h = tau / steps;
    double s = 0.0;
    for (int i = 0; i <= steps; ++i) {
        const double w = (i == 0 || i == steps) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        s += w * energy_dispersion(setup, i * h);
    }
    return s * h / 3.0 / tau;
}

inline double clamped_arccos_sqrt(double x, const char* who) {
    if (x < -1e-9 || x > 1.0 + 1e-9)
        throw error(std::string(who) + ": arccos argument out of range (" + std::to_string(x) +
                    ")");
    x = std::min(1.0, std::max(0.0, x));
    return std::acos(std::sqrt(x));
}

}  // namespace detail

/// MT-type rate bound: |k| <= 2 Delta_{rho_A} H(t) sqrt(P(1-P)).
inline BoundReport mt_rate_bound(const TransitionSetup& setup, double t) {
    const double k = qtr_direct(setup, t);
    const double p = transition_probability(setup, t);
    const double dh = detail::energy_dispersion(setup, t);
    const double rhs = 2.0 * dh * std::sqrt(std::max(0.0, p * (1.0 - p)));
    return BoundReport::make(t, std::abs(k), rhs, "mt_rate");
}

/// Raw super-fidelity inequality F(rho_A(t), pi_B) <= P/d_B + M M.
inline BoundReport superfidelity_check(const TransitionSetup& setup, double t) {
    const DensityMatrix rho_t = detail::evolved_conditioned_state(setup, t);
    const double dB = static_cast<double>(setup.piB.rank());
    const DensityMatrix piB_state(Mat(setup.piB.mat() / dB));
    const double f = uhlmann_fidelity(rho_t, piB_state);
    const double p = transition_probability(setup, t);
    const double rhs = p / dB + mixedness(rho_t) * std::sqrt(1.0 - 1.0 / dB);
    return BoundReport::make(t, f, rhs, "superfidelity");
}

/// QTR-based QSL: tau >= arccos sqrt(P d_B^{-1} + M_{rho_A(tau)}
/// sqrt(1-d_B^{-1})) / avg Delta H. Reported as lhs = bound, rhs = tau.
inline BoundReport superfidelity_qsl(const TransitionSetup& setup, double tau, int steps) {
    const double dB = static_cast<double>(setup.piB.rank());
    if (dB < 1) throw error("superfidelity_qsl: d_B must be >= 1");
    const double p = transition_probability(setup, tau);
    const DensityMatrix rho_tau = detail::evolved_conditioned_state(setup, tau);
    const double arg = p / dB + mixedness(rho_tau) * std::sqrt(1.0 - 1.0 / dB);
    const double angle = detail::clamped_arccos_sqrt(arg, "superfidelity_qsl");
    const double avg = detail::avg_energy_dispersion(setup, tau, steps);
    const double bound = avg > 1e-14 ? angle / avg : 0.0;
    return BoundReport::make(tau, bound, tau, "sf_qsl");
}

/// Eq.-16 tightness condition:
/// P(B,t|A) + d_B M_{rho_A(t)} sqrt(1-1/d_B) <= d_B P(A,t|A).
inline BoundReport tightness_condition(const TransitionSetup& setup, double t) {
    const double dB = static_cast<double>(setup.piB.rank());
    const double pB = transition_probability(setup, t);
    const double pA = survival_probability(setup, t);
    const DensityMatrix rho_t = detail::evolved_conditioned_state(setup, t);
    const double lhs = pB + dB * mixedness(rho_t) * std::sqrt(1.0 - 1.0 / dB);
    return BoundReport::make(t, lhs, dB * pA, "tightness");
}

/// Rate-of-change bound with the Robertson factor 2 (the provably valid SM
/// form): |dk/dt| <= 2 [Delta J Delta H + Delta Pi_B Delta dH/dt]. The
/// factor-1 right-hand side printed in the main text is reported through
/// rhs_factor1 when requested. All variances are taken in rho_A with
/// Heisenberg-picture observables at time t.
inline BoundReport rate_change_bound(const TransitionSetup& setup, double t,
                                     double* rhs_factor1 = nullptr, double fd_dt = 0.0) {
    if (!setup.hamiltonian_like())
        throw error("rate_change_bound: requires Hamiltonian dynamics");
    if (fd_dt == 0.0) fd_dt = default_fd_dt(setup, t);
    if (!setup.grid.contains(t - fd_dt) || !setup.grid.contains(t + fd_dt))
        throw error("rate_change_bound: finite difference leaves the grid span");
    const double kdot =
        (qtr_direct(setup, t + fd_dt) - qtr_direct(setup, t - fd_dt)) / (2.0 * fd_dt);

    const HamiltonianSchedule& h = setup.schedule();
    const Mat u = setup.unitary(0.0, t);
    const Mat piB_h = u.adjoint() * setup.piB.mat() * u;
    const Mat h_h = u.adjoint() * h.at(t) * u;
    const Mat dh_h = u.adjoint() * h.deriv(t) * u;
    const Mat jb = commutator(piB_h, h_h) / cxd(0.0, 1.0);
    const double dj = std::sqrt(variance(setup.rhoA, jb, 1e-7));
    const double dh = std::sqrt(variance(setup.rhoA, h_h, 1e-8));
    const double dpi = std::sqrt(variance(setup.rhoA, piB_h, 1e-8));
    const double ddh = std::sqrt(variance(setup.rhoA, dh_h, 1e-8));
    const double rhs1 = dj * dh + dpi * ddh;
    if (rhs_factor1) *rhs_factor1 = rhs1;
    return BoundReport::make(t, std::abs(kdot), 2.0 * rhs1, "rate_change_2");
}

/// tau_QTR = Delta_{rho_A} J_B(t) / |dk/dt|.
inline double tau_qtr(const TransitionSetup& setup, double t, double fd_dt = 0.0) {
    if (fd_dt == 0.0) fd_dt = default_fd_dt(setup, t);
    const double kdot =
        (qtr_direct(setup, t + fd_dt) - qtr_direct(setup, t - fd_dt)) / (2.0 * fd_dt);
    if (std::abs(kdot) <= 1e-12) throw error("tau_qtr: stationary rate (|dk/dt| <= 1e-12)");
    const Mat jb = flux_operator(setup, t);
    const double dj = std::sqrt(variance(setup.rhoA, jb, 1e-7));
    return dj / std::abs(kdot);
}

/// MT time from the survival probability:
/// tau_MT = arccos sqrt(P(A,tau|A)) / avg Delta H.
inline double tau_mt(const TransitionSetup& setup, double tau, int steps) {
    if (tau == 0.0) return 0.0;
    const double pA = survival_probability(setup, tau);
    const double angle = detail::clamped_arccos_sqrt(pA, "tau_mt");
    const double avg = detail::avg_energy_dispersion(setup, tau, steps);
    return avg > 1e-14 ? angle / avg : 0.0;
}

}  // namespace qtr
