#pragma once

// Conditioned states, transition probabilities, flux operators, QTRs and the
// flux-flux correlator forms. The centered finite difference of P is the
// designated oracle; every analytic path is validated against it.

#include <atomic>
#include <cmath>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "qtr/evolution.hpp"
#include "qtr/operator_core.hpp"

namespace qtr {

struct ZenoDynamics {
    HamiltonianSchedule schedule;
    Projector pi;
    int n = 1;
    int steps_per_interval = 32;
};

using Dynamics = std::variant<HamiltonianSchedule, KrausFamily, LindbladGenerator, ZenoDynamics>;

inline std::atomic<long>& probability_clamp_count() {
    static std::atomic<long> count{0};
    return count;
}

/// rho_A = Pi_A rho0 Pi_A / P_A with P_A = tr(rho0 Pi_A).
inline std::pair<DensityMatrix, double> condition_state(const DensityMatrix& rho0,
                                                        const Projector& piA) {
    require_same_dim(rho0.mat(), piA.mat(), "condition_state");
    const double pA = (rho0.mat() * piA.mat()).trace().real();
    if (pA <= 1e-12) throw error("condition_state: empty conditioning (P_A <= 1e-12)");
    Mat m = piA.mat() * rho0.mat() * piA.mat() / pA;
    return {DensityMatrix(0.5 * (m + Mat(m.adjoint())), 1e-10, 1e-8, 1e-8), pA};
}

struct TransitionSetup {
    DensityMatrix rho0;
    Projector piA;
    Projector piB;
    Dynamics dynamics;
    TimeGrid grid;

    DensityMatrix rhoA;
    double pA = 0.0;
    int steps_per_unit = 512;  // midpoint steps per unit time for driven unitaries

    TransitionSetup(DensityMatrix rho0_, Projector piA_, Projector piB_, Dynamics dyn,
                    TimeGrid grid_, double disjoint_tol = 1e-10)
        : rho0(std::move(rho0_)),
          piA(std::move(piA_)),
          piB(std::move(piB_)),
          dynamics(std::move(dyn)),
          grid(grid_),
          rhoA(rho0) {
        require_same_dim(rho0.mat(), piA.mat(), "TransitionSetup");
        require_same_dim(piA.mat(), piB.mat(), "TransitionSetup");
        const double cross = max_abs(piA.mat() * piB.mat());
        if (cross > disjoint_tol)
            throw error("TransitionSetup: Pi_A Pi_B != 0 (defect " + std::to_string(cross) + ")");
        auto [ra, pa] = condition_state(rho0, piA);
        rhoA = std::move(ra);
        pA = pa;
    }

    Eigen::Index dim() const { return rho0.dim(); }
    bool hamiltonian_like() const {
        return std::holds_alternative<HamiltonianSchedule>(dynamics);
    }
    const HamiltonianSchedule& schedule() const {
        if (const auto* h = std::get_if<HamiltonianSchedule>(&dynamics)) return *h;
        if (const auto* z = std::get_if<ZenoDynamics>(&dynamics)) return z->schedule;
        throw error("TransitionSetup: dynamics has no Hamiltonian schedule");
    }

    int steps_for(double t0, double t1) const {
        const auto* h = std::get_if<HamiltonianSchedule>(&dynamics);
        if (h && h->constant) return 1;
        return std::max(16, static_cast<int>(std::ceil((t1 - t0) * steps_per_unit)));
    }

    Mat unitary(double t0, double t1) const {
        return propagator(schedule(), t0, t1, steps_for(t0, t1));
    }
};

namespace detail {

inline double clamp_probability(double p, const char* who) {
    if (p >= 0.0 && p <= 1.0) return p;
    if (p >= -1e-9 && p < 0.0) {
        probability_clamp_count()++;
        std::cerr << "[qtr] warning: " << who << " clamped " << p << " to 0\n";
        return 0.0;
    }
    if (p > 1.0 && p <= 1.0 + 1e-9) {
        probability_clamp_count()++;
        std::cerr << "[qtr] warning: " << who << " clamped " << p << " to 1\n";
        return 1.0;
    }
    throw error(std::string(who) + ": probability out of range (" + std::to_string(p) + ")");
}

inline double real_with_residue_check(cxd v, const char* who, double residue_tol = 1e-6) {
    if (std::abs(v.imag()) > residue_tol * std::max(1.0, std::abs(v.real())))
        throw error(std::string(who) + ": imaginary residue " + std::to_string(v.imag()));
    return v.real();
}

}  // namespace detail

/// P(B,t|A) under the setup's dynamics.
inline double transition_probability(const TransitionSetup& setup, double t) {
    if (!setup.grid.contains(t))
        throw error("transition_probability: t outside grid span");
    const Mat& piB = setup.piB.mat();
    double p = 0.0;
    if (const auto* h = std::get_if<HamiltonianSchedule>(&setup.dynamics)) {
        const Mat u = propagator(*h, 0.0, t, setup.steps_for(0.0, t));
        p = (u * setup.rhoA.mat() * u.adjoint() * piB).trace().real();
    } else if (const auto* k = std::get_if<KrausFamily>(&setup.dynamics)) {
        const DensityMatrix rt = kraus_apply(*k, setup.rhoA, t);
        p = (rt.mat() * piB).trace().real();
    } else if (const auto* l = std::get_if<LindbladGenerator>(&setup.dynamics)) {
        const Mat obs = lindblad_heisenberg_observable(*l, piB, t);
        p = (setup.rhoA.mat() * obs).trace().real();
    } else if (const auto* z = std::get_if<ZenoDynamics>(&setup.dynamics)) {
        if (t == 0.0) {
            p = (setup.rhoA.mat() * piB).trace().real();
        } else {
            auto [branch, weight] = zeno_state(z->schedule, ZenoSchedule(z->pi, z->n, t),
                                               setup.rhoA, z->steps_per_interval);
            p = (branch * piB).trace().real();
        }
    }
    return detail::clamp_probability(p, "transition_probability");
}

/// Survival P(A,t|A) = tr[rho_A Pi_A(t)] (unitary dynamics).
inline double survival_probability(const TransitionSetup& setup, double t) {
    const Mat u = setup.unitary(0.0, t);
    const double p =
        (u * setup.rhoA.mat() * u.adjoint() * setup.piA.mat()).trace().real();
    return detail::clamp_probability(p, "survival_probability");
}

/// Generalized flux J_B(t) = [Pi_B(t), H(t)]/i in the Heisenberg picture.
/// Hamiltonian dynamics only; channels use channel_qtr.
inline Mat flux_operator(const TransitionSetup& setup, double t) {
    if (!setup.hamiltonian_like() || std::holds_alternative<ZenoDynamics>(setup.dynamics))
        throw error("flux_operator: requires Hamiltonian dynamics");
    const HamiltonianSchedule& h = setup.schedule();
    const Mat u = setup.unitary(0.0, t);
    const Mat piB_h = u.adjoint() * setup.piB.mat() * u;
    const Mat h_h = u.adjoint() * h.at(t) * u;
    return commutator(piB_h, h_h) / cxd(0.0, 1.0);
}

/// k = tr[rho_A J_B(t)].
inline double qtr_direct(const TransitionSetup& setup, double t) {
    const Mat j = flux_operator(setup, t);
    return detail::real_with_residue_check((setup.rhoA.mat() * j).trace(), "qtr_direct");
}

/// Suggested finite-difference step: 1e-4 of the characteristic period.
inline double default_fd_dt(const TransitionSetup& setup, double t) {
    double scale = 1.0;
    if (setup.hamiltonian_like()) {
        const EighResult e = eigh(setup.schedule().at(t));
        scale = std::max(std::abs(e.eigenvalues(0)),
                         std::abs(e.eigenvalues(e.eigenvalues.size() - 1)));
    } else if (const auto* l = std::get_if<LindbladGenerator>(&setup.dynamics)) {
        const EighResult e = eigh(l->hamiltonian);
        scale = std::max(std::abs(e.eigenvalues(0)),
                         std::abs(e.eigenvalues(e.eigenvalues.size() - 1)));
        for (size_t i = 0; i < l->jumps.size(); ++i)
            scale += l->rates[i] * max_abs(l->jumps[i]) * max_abs(l->jumps[i]);
    }
    return 1e-4 * 2.0 * M_PI / std::max(scale, 1e-3);
}

/// Centered difference [P(t+dt) - P(t-dt)]/(2 dt): the oracle every other
/// QTR path is validated against. For driven unitaries the prefix U(0, t-dt)
/// is shared between both endpoints so stepping error cancels in the
/// difference.
inline double qtr_finite_difference(const TransitionSetup& setup, double t, double dt = 0.0) {
    if (dt == 0.0) dt = default_fd_dt(setup, t);
    if (!(dt > 0.0)) throw error("qtr_finite_difference: dt must be > 0");
    if (!setup.grid.contains(t - dt) || !setup.grid.contains(t + dt))
        throw error("qtr_finite_difference: t +/- dt outside grid span");
    if (const auto* h = std::get_if<HamiltonianSchedule>(&setup.dynamics)) {
        const Mat u_pre = propagator(*h, 0.0, t - dt, setup.steps_for(0.0, t - dt));
        const Mat u_seg = propagator(*h, t - dt, t + dt, std::max(16, setup.steps_for(t - dt, t + dt)));
        const Mat& piB = setup.piB.mat();
        auto prob = [&](const Mat& u) {
            return (u * setup.rhoA.mat() * u.adjoint() * piB).trace().real();
        };
        return (prob(Mat(u_seg * u_pre)) - prob(u_pre)) / (2.0 * dt);
    }
    return (transition_probability(setup, t + dt) - transition_probability(setup, t - dt)) /
           (2.0 * dt);
}

namespace detail {

/// The single-term flux-flux reduction is exact when rho_A commutes with the
/// Hamiltonian at the sampled times, and also when the conditioned state is
/// the rank-one projector Pi_A itself (the TLS-style setups).
inline void check_fluxflux_flags(const TransitionSetup& setup,
                                 std::initializer_list<double> times, const char* who) {
    const double comp = max_abs(setup.piA.mat() + setup.piB.mat() - identity(setup.dim()));
    if (comp > 1e-10)
        throw error(std::string(who) + ": precondition Pi_A + Pi_B = I fails (defect " +
                    std::to_string(comp) + ")");
    if (setup.piA.rank() == 1 && max_abs(setup.rhoA.mat() - setup.piA.mat()) <= 1e-10) return;
    const HamiltonianSchedule& h = setup.schedule();
    for (double s : times) {
        const double c = max_abs(commutator(setup.rhoA.mat(), h.at(s)));
        if (c > 1e-10)
            throw error(std::string(who) +
                        ": precondition [rho_A, H_S(t)] = 0 fails (defect " + std::to_string(c) +
                        ") and rho_A is not the rank-1 Pi_A");
    }
}

}  // namespace detail

/// Two-time flux-flux correlator C(t', t) = 2 Re tr[rho_A J_B(t') J_{B,t}]
/// with J_{B,t} = [Pi_B, H(t)]/i. Requires the Eq.-12 precondition flags:
/// Pi_A + Pi_B = I and [rho_A, H_S] = 0 (or rank-1 rho_A = Pi_A).
inline double flux_flux_correlator(const TransitionSetup& setup, double tprime, double t) {
    if (!setup.hamiltonian_like())
        throw error("flux_flux_correlator: requires Hamiltonian dynamics");
    const HamiltonianSchedule& h = setup.schedule();
    detail::check_fluxflux_flags(setup, {tprime, t}, "flux_flux_correlator");
    const Mat up = setup.unitary(0.0, tprime);
    const Mat piB_h = up.adjoint() * setup.piB.mat() * up;
    const Mat h_p = up.adjoint() * h.at(tprime) * up;
    const Mat jb_p = commutator(piB_h, h_p) / cxd(0.0, 1.0);
    const Mat ut = setup.unitary(0.0, t);
    const Mat h_t = ut.adjoint() * h.at(t) * ut;
    const Mat jb_t = commutator(setup.piB.mat(), h_t) / cxd(0.0, 1.0);
    return 2.0 * (setup.rhoA.mat() * jb_p * jb_t).trace().real();
}

namespace detail {

/// Composite Simpson over f sampled at 2m+1 uniform nodes on [0, t].
template <typename F>
double simpson_uniform(F&& f, double t, int panels) {
    if (panels < 2) panels = 2;
    if (panels % 2) ++panels;
    const double h = t / panels;
    double s = f(0, 0.0) + f(panels, t);
    for (int i = 1; i < panels; ++i) s += f(i, i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

}  // namespace detail

/// Eq.-12 path: k(t) = 2 int_0^t tr[rho_A J_B(t') J_B(0)] dt' for a
/// time-independent Hamiltonian with [rho_A, H] = 0 and Pi_A = I - Pi_B.
inline double qtr_from_flux_flux(const TransitionSetup& setup, double t, int quad_steps) {
    if (!setup.hamiltonian_like())
        throw error("qtr_from_flux_flux: requires Hamiltonian dynamics");
    const HamiltonianSchedule& h = setup.schedule();
    if (!h.constant) throw error("qtr_from_flux_flux: requires a time-independent Hamiltonian");
    detail::check_fluxflux_flags(setup, {0.0}, "qtr_from_flux_flux");
    if (t == 0.0) return 0.0;

    const Mat H = h.at(0.0);
    const EighResult eh = eigh(H);
    const Mat jb0 = commutator(setup.piB.mat(), H) / cxd(0.0, 1.0);
    auto correlator = [&](int, double tp) {
        Vec phases(eh.eigenvalues.size());
        for (Eigen::Index i = 0; i < phases.size(); ++i)
            phases(i) = std::exp(cxd(0.0, -eh.eigenvalues(i) * tp));
        const Mat u = eh.eigenvectors * phases.asDiagonal() * eh.eigenvectors.adjoint();
        const Mat jb_p = u.adjoint() * jb0 * u;
        return 2.0 * (setup.rhoA.mat() * jb_p * jb0).trace().real();
    };
    return detail::simpson_uniform(correlator, t, quad_steps);
}

/// Full four-term flux-flux form of the QTR, valid for arbitrary rho_A,
/// non-complementary projectors and driven Hamiltonians. All terms are
/// evaluated at the integration time t' (with the Schroedinger-picture Pi_A
/// inside J_{A,t'}); quadrature refines by panel doubling.
inline double qtr_general_fluxflux(const TransitionSetup& setup, double t, int quad_steps) {
    if (!setup.hamiltonian_like())
        throw error("qtr_general_fluxflux: requires Hamiltonian dynamics");
    if (t == 0.0) return 0.0;
    const HamiltonianSchedule& h = setup.schedule();
    const Mat& piA = setup.piA.mat();
    const Mat& piB = setup.piB.mat();
    const Mat& rhoA = setup.rhoA.mat();

    auto integral_at = [&](int panels) {
        const double dt = t / panels;
        Mat u = identity(setup.dim());
        double acc = 0.0;
        int idx = 0;
        auto integrand = [&](const Mat& uu, double tp) {
            const Mat piB_h = uu.adjoint() * piB * uu;
            const Mat h_h = uu.adjoint() * h.at(tp) * uu;
            const Mat dh_h = uu.adjoint() * h.deriv(tp) * uu;
            const Mat jb = commutator(piB_h, h_h) / cxd(0.0, 1.0);
            const Mat ja = commutator(piA, h_h) / cxd(0.0, 1.0);
            const Mat c1 = commutator(h_h, rhoA);
            const cxd t1 = -2.0 * (jb * ja * rhoA).trace();
            const cxd t2 = -(jb * commutator(c1, piA)).trace() / cxd(0.0, 1.0);
            const cxd t3 = (jb * piA * c1 * piA).trace() / cxd(0.0, 1.0);
            const cxd t4 = (rhoA * commutator(piB_h, dh_h)).trace() / cxd(0.0, 1.0);
            return (t1 + t2 + t3 + t4).real();
        };
        // Simpson weights over panels+1 uniform nodes, walking u incrementally.
        double s = 0.0;
        const int sub = std::max(1, setup.steps_for(0.0, t) / panels);
        for (idx = 0; idx <= panels; ++idx) {
            const double tp = idx * dt;
            const double w = (idx == 0 || idx == panels) ? 1.0 : (idx % 2 ? 4.0 : 2.0);
            s += w * integrand(u, tp);
            if (idx < panels) u = propagator(h, tp, tp + dt, sub) * u;
        }
        acc = s * dt / 3.0;
        return acc;
    };

    int panels = std::max(4, quad_steps + (quad_steps % 2));
    double prev = integral_at(panels);
    double last_diff = std::numeric_limits<double>::infinity();
    while (panels < (1 << 14)) {
        panels *= 2;
        const double next = integral_at(panels);
        last_diff = std::abs(next - prev);
        prev = next;
        if (last_diff < 1e-8) return next;
    }
    if (last_diff > 1e-5) throw error("qtr_general_fluxflux: quadrature non-convergence");
    return prev;
}

/// Channel-form QTR. Lindblad: k = tr(rho_A L^dag[Pi_B(t)]). Kraus:
/// k = 2 Re sum_k tr[rho_A dM_k^dag/dt Pi_B M_k].
inline double channel_qtr(const TransitionSetup& setup, double t) {
    if (const auto* l = std::get_if<LindbladGenerator>(&setup.dynamics)) {
        const Mat obs = lindblad_heisenberg_observable(*l, setup.piB.mat(), t);
        const Mat flux = l->adjoint(obs);
        return detail::real_with_residue_check((setup.rhoA.mat() * flux).trace(), "channel_qtr");
    }
    if (const auto* k = std::get_if<KrausFamily>(&setup.dynamics)) {
        const double defect = k->completeness_defect(t);
        if (defect > 1e-8)
            throw error("channel_qtr: Kraus completeness violation " + std::to_string(defect));
        const std::vector<Mat> m = k->at(t);
        const std::vector<Mat> dm = k->deriv(t);
        cxd acc = 0.0;
        for (size_t i = 0; i < m.size(); ++i)
            acc += (setup.rhoA.mat() * dm[i].adjoint() * setup.piB.mat() * m[i]).trace();
        return 2.0 * acc.real();
    }
    throw error("channel_qtr: requires Lindblad or Kraus dynamics");
}

/// Short-time quadratic coefficient of P(B,t|A). Time-independent case:
/// tr[rho_A H Pi_B H]. Driven case: the Eq.-14 double integral divided by
/// T^2, with T the grid end time.
inline double zeno_quadratic_coefficient(const TransitionSetup& setup) {
    if (!setup.hamiltonian_like())
        throw error("zeno_quadratic_coefficient: requires Hamiltonian dynamics");
    const HamiltonianSchedule& h = setup.schedule();
    if (h.constant) {
        const Mat H = h.at(0.0);
        return (setup.rhoA.mat() * H * setup.piB.mat() * H).trace().real();
    }
    const double T = setup.grid.t_end;
    if (!(T > 0.0)) throw error("zeno_quadratic_coefficient: grid end time must be > 0");
    // The double integral factorizes through G = int_0^T H_S(s) ds.
    Mat g = Mat::Zero(setup.dim(), setup.dim());
    const int panels = 256;
    const double dt = T / panels;
    for (int i = 0; i <= panels; ++i) {
        const double w = (i == 0 || i == panels) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        g += w * h.at(i * dt);
    }
    g *= dt / 3.0;
    return (setup.rhoA.mat() * g * setup.piB.mat() * g).trace().real() / (T * T);
}

// ---------------------------------------------------------------------------

struct QtrSample {
    double t = 0.0;
    double p = 0.0;
    double k = 0.0;
    std::vector<double> extras;
};

struct QtrSeries {
    std::string provenance;
    std::vector<std::string> extra_names;
    std::vector<QtrSample> samples;

    void validate() const {
        for (const QtrSample& s : samples) {
            if (s.p < -1e-9 || s.p > 1.0 + 1e-9)
                throw error("QtrSeries: P out of range at t=" + std::to_string(s.t));
            if (s.extras.size() != extra_names.size())
                throw error("QtrSeries: extras width mismatch");
        }
    }

    /// CSV: header `t,P_AB,k_AB[,extras...]`, 17 significant digits, LF.
    void write_csv(std::ostream& os) const {
        validate();
        os << "t,P_AB,k_AB";
        for (const std::string& n : extra_names) os << ',' << n;
        os << '\n';
        char buf[64];
        auto put = [&](double v) {
            std::snprintf(buf, sizeof(buf), "%.17g", v);
            os << buf;
        };
        for (const QtrSample& s : samples) {
            put(s.t);
            os << ',';
            put(s.p);
            os << ',';
            put(s.k);
            for (double e : s.extras) {
                os << ',';
                put(e);
            }
            os << '\n';
        }
    }
};

}  // namespace qtr
