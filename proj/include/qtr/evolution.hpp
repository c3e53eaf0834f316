#pragma once

// Propagators and channels: time-ordered unitaries, Kraus families, Lindblad
// generators, and Zeno measurement schedules, plus Heisenberg-picture
// evolution of observables.

#include <functional>
#include <utility>
#include <vector>

#include "qtr/operator_core.hpp"

namespace qtr {

struct HamiltonianSchedule {
    Eigen::Index dim = 0;
    std::function<Mat(double)> h;
    std::function<Mat(double)> dh;  // optional analytic derivative
    bool constant = false;

    Mat at(double t) const { return h(t); }

    /// dH_S/dt, analytic when provided, else central differences with
    /// step 1e-5 * max(1, |t|).
    Mat deriv(double t) const {
        if (constant) return Mat::Zero(dim, dim);
        if (dh) return dh(t);
        const double step = 1e-5 * std::max(1.0, std::abs(t));
        return (h(t + step) - h(t - step)) / (2.0 * step);
    }

    static HamiltonianSchedule time_independent(const Mat& H) {
        require_hermitian(H, tol::hermitian_loose, "HamiltonianSchedule");
        HamiltonianSchedule s;
        s.dim = H.rows();
        Mat copy = H;
        s.h = [copy](double) { return copy; };
        s.dh = [n = H.rows()](double) { return Mat::Zero(n, n); };
        s.constant = true;
        return s;
    }

    static HamiltonianSchedule time_dependent(Eigen::Index dim, std::function<Mat(double)> h,
                                              std::function<Mat(double)> dh = nullptr) {
        HamiltonianSchedule s;
        s.dim = dim;
        s.h = std::move(h);
        s.dh = std::move(dh);
        s.constant = false;
        return s;
    }
};

/// Time-ordered propagator by midpoint-rule exponential stepping,
/// prod_j exp(-i H_S(t_j + dt/2) dt). Second order in dt.
inline Mat propagator(const HamiltonianSchedule& schedule, double t0, double t1, int steps) {
    if (steps < 1) throw error("propagator: steps must be >= 1");
    if (t1 < t0) throw error("propagator: t1 < t0");
    if (t1 == t0) return identity(schedule.dim);
    if (schedule.constant)
        return hermitian_expm(schedule.at(t0), cxd(0.0, -(t1 - t0)));
    const double dt = (t1 - t0) / steps;
    Mat u = identity(schedule.dim);
    for (int j = 0; j < steps; ++j) {
        const Mat hm = schedule.at(t0 + (j + 0.5) * dt);
        require_hermitian(hm, tol::hermitian_loose, "propagator midpoint");
        u = hermitian_expm(hm, cxd(0.0, -dt)) * u;
    }
    return u;
}

/// Doubles the step count until successive propagators agree below tol.
inline int auto_steps(const HamiltonianSchedule& schedule, double t0, double t1,
                      double tolerance = 1e-8, int start = 64, int cap = 1 << 20) {
    if (schedule.constant || t1 == t0) return 1;
    int n = start;
    Mat prev = propagator(schedule, t0, t1, n);
    while (n < cap) {
        n *= 2;
        Mat next = propagator(schedule, t0, t1, n);
        if (max_abs(next - prev) < tolerance) return n;
        prev = std::move(next);
    }
    throw error("auto_steps: no convergence below tolerance");
}

/// U^dag(t) obs U(t).
inline Mat heisenberg_observable(const HamiltonianSchedule& schedule, const Mat& obs,
                                 double t, int steps) {
    require_same_dim(obs, Mat::Zero(schedule.dim, schedule.dim), "heisenberg_observable");
    const Mat u = propagator(schedule, 0.0, t, steps);
    return u.adjoint() * obs * u;
}

struct ZenoSchedule {
    Projector pi;
    int n = 1;
    double t = 0.0;

    ZenoSchedule(Projector p, int count, double total_time)
        : pi(std::move(p)), n(count), t(total_time) {
        if (n < 1) throw error("ZenoSchedule: n must be >= 1");
    }
};

/// Applies the dynamical map [Pi U(t/n) Pi]^n to rho0 and returns the
/// unnormalized branch together with its trace (survival weight).
inline std::pair<Mat, double> zeno_state(const HamiltonianSchedule& schedule,
                                         const ZenoSchedule& z, const DensityMatrix& rho0,
                                         int steps_per_interval = 32) {
    const double dt = z.t / z.n;
    Mat u_step;
    Mat m = identity(schedule.dim);
    const Mat& pi = z.pi.mat();
    for (int i = 0; i < z.n; ++i) {
        const double a = i * dt;
        const Mat u = schedule.constant && i > 0
                          ? u_step
                          : propagator(schedule, a, a + dt, steps_per_interval);
        if (i == 0) u_step = u;
        m = pi * u * pi * m;
    }
    Mat branch = m * rho0.mat() * m.adjoint();
    const double weight = branch.trace().real();
    return {std::move(branch), weight};
}

/// Zeno-limit effective generator Pi H Pi.
inline Mat zeno_limit_generator(const Mat& h, const Projector& p) {
    require_same_dim(h, p.mat(), "zeno_limit_generator");
    require_hermitian(h, tol::hermitian_loose, "zeno_limit_generator");
    return p.mat() * h * p.mat();
}

struct LindbladGenerator {
    Mat hamiltonian;
    std::vector<Mat> jumps;
    std::vector<double> rates;

    LindbladGenerator(Mat h, std::vector<Mat> ls, std::vector<double> gs)
        : hamiltonian(std::move(h)), jumps(std::move(ls)), rates(std::move(gs)) {
        require_hermitian(hamiltonian, tol::hermitian_loose, "LindbladGenerator");
        if (jumps.size() != rates.size())
            throw error("LindbladGenerator: jumps/rates size mismatch");
        for (size_t i = 0; i < jumps.size(); ++i) {
            require_same_dim(jumps[i], hamiltonian, "LindbladGenerator");
            if (rates[i] < 0.0) throw error("LindbladGenerator: negative rate");
        }
    }

    Eigen::Index dim() const { return hamiltonian.rows(); }

    /// Adjoint generator on an observable:
    /// L^dag[O] = i[H,O] + sum_n gamma_n (L^dag O L - {L^dag L, O}/2).
    Mat adjoint(const Mat& o) const {
        Mat r = cxd(0.0, 1.0) * commutator(hamiltonian, o);
        for (size_t i = 0; i < jumps.size(); ++i) {
            const Mat& l = jumps[i];
            r += rates[i] * (l.adjoint() * o * l - 0.5 * anticommutator(Mat(l.adjoint() * l), o));
        }
        return r;
    }

    /// Schroedinger generator: L[rho] = -i[H,rho] + sum gamma (L rho L^dag - {L^dag L, rho}/2).
    Mat schroedinger(const Mat& rho) const {
        Mat r = cxd(0.0, -1.0) * commutator(hamiltonian, rho);
        for (size_t i = 0; i < jumps.size(); ++i) {
            const Mat& l = jumps[i];
            r += rates[i] * (l * rho * l.adjoint() - 0.5 * anticommutator(Mat(l.adjoint() * l), rho));
        }
        return r;
    }
};

/// One RK4 step of the adjoint (Heisenberg) Lindblad flow dO/dt = L^dag[O].
inline Mat lindblad_heisenberg_step(const LindbladGenerator& gen, const Mat& obs, double dt) {
    if (!(dt > 0.0)) throw error("lindblad_heisenberg_step: dt must be > 0");
    require_same_dim(obs, gen.hamiltonian, "lindblad_heisenberg_step");
    const Mat k1 = gen.adjoint(obs);
    const Mat k2 = gen.adjoint(obs + 0.5 * dt * k1);
    const Mat k3 = gen.adjoint(obs + 0.5 * dt * k2);
    const Mat k4 = gen.adjoint(obs + dt * k3);
    return obs + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Evolves an observable to time t under the adjoint Lindblad flow.
inline Mat lindblad_heisenberg_observable(const LindbladGenerator& gen, Mat obs, double t,
                                          double dt_max = 1e-3) {
    if (t < 0.0) throw error("lindblad_heisenberg_observable: t must be >= 0");
    if (t == 0.0) return obs;
    const int steps = std::max(1, static_cast<int>(std::ceil(t / dt_max)));
    const double dt = t / steps;
    for (int i = 0; i < steps; ++i) obs = lindblad_heisenberg_step(gen, obs, dt);
    return obs;
}

struct KrausFamily {
    Eigen::Index dim = 0;
    int count = 0;
    std::function<std::vector<Mat>(double)> ops;

    std::vector<Mat> at(double t) const { return ops(t); }

    /// max |sum M^dag M - I| at time t.
    double completeness_defect(double t) const {
        Mat s = Mat::Zero(dim, dim);
        for (const Mat& m : at(t)) s += m.adjoint() * m;
        return max_abs(s - identity(dim));
    }

    static KrausFamily make(Eigen::Index dim, int count, std::function<std::vector<Mat>(double)> ops) {
        KrausFamily f;
        f.dim = dim;
        f.count = count;
        f.ops = std::move(ops);
        return f;
    }

    /// Time-derivatives dM_k/dt by central differences with step
    /// 1e-5 * max(1, |t|).
    std::vector<Mat> deriv(double t) const {
        const double step = 1e-5 * std::max(1.0, std::abs(t));
        const std::vector<Mat> plus = at(t + step);
        const std::vector<Mat> minus = at(t - step);
        if (plus.size() != minus.size())
            throw error("KrausFamily: operator count changed between evaluations");
        std::vector<Mat> d(plus.size());
        for (size_t k = 0; k < plus.size(); ++k) d[k] = (plus[k] - minus[k]) / (2.0 * step);
        return d;
    }
};

/// rho_t = sum_k M_k rho M_k^dag.
inline DensityMatrix kraus_apply(const KrausFamily& fam, const DensityMatrix& rho, double t,
                                 double completeness_tol = 1e-8) {
    require_same_dim(rho.mat(), Mat::Zero(fam.dim, fam.dim), "kraus_apply");
    const double defect = fam.completeness_defect(t);
    if (defect > completeness_tol)
        throw error("kraus_apply: completeness violation " + std::to_string(defect));
    Mat out = Mat::Zero(fam.dim, fam.dim);
    for (const Mat& m : fam.at(t)) out += m * rho.mat() * m.adjoint();
    return DensityMatrix(0.5 * (out + Mat(out.adjoint())), 1e-10, 1e-7, 1e-8);
}

}  // namespace qtr
