#pragma once

// Bixon-Jortner model: one isolated level at zero energy uniformly coupled
// to N equidistant quasi-continuum levels at n*Delta. Exposes the discrete
// TransitionSetup, a fast spectral propagation for large N, and the
// continuum closed forms built on the complex exponential integral.

#include <vector>

#include "qtr/qtr_engine.hpp"
#include "qtr/special_functions.hpp"

namespace qtr {

struct BixonJortnerModel {
    double delta = 1.0;   // level spacing
    double w = 1.0;       // flat coupling
    int n_levels = 100;   // N, even; levels at n*Delta for n in {-N/2..N/2-1}
    double e0 = -1.0;     // target window [e0, e1] on the level energies
    double e1 = 0.0;

    BixonJortnerModel(double delta_, double w_, int n, double e0_, double e1_)
        : delta(delta_), w(w_), n_levels(n), e0(e0_), e1(e1_) {
        if (!(delta > 0.0)) throw error("BixonJortnerModel: Delta must be > 0");
        if (n_levels < 2 || n_levels % 2) throw error("BixonJortnerModel: N must be even >= 2");
        if (!(e0 < e1)) throw error("BixonJortnerModel: E0 < E1 required");
    }

    double gamma() const { return M_PI * w * w / delta; }

    /// Level energies: n*Delta for n in {-N/2, ..., N/2 - 1}. The resonant
    /// n = 0 level is kept: removing it leaves a quasi-bound residue that
    /// floors the survival near 1e-3 and breaks the exponential-decay law.
    std::vector<double> level_energies() const {
        std::vector<double> e;
        e.reserve(n_levels);
        for (int n = -n_levels / 2; n < n_levels / 2; ++n) e.push_back(n * delta);
        return e;
    }

    /// Indices (into the (N+1)-dim space, isolated level at 0) of levels
    /// whose energy lies in the closed window [e0, e1].
    std::vector<Eigen::Index> window_indices() const {
        std::vector<Eigen::Index> idx;
        const std::vector<double> e = level_energies();
        for (size_t i = 0; i < e.size(); ++i)
            if (e[i] >= e0 && e[i] <= e1) idx.push_back(static_cast<Eigen::Index>(i + 1));
        if (idx.empty()) throw error("BixonJortnerModel: empty energy window");
        return idx;
    }

    /// (N+1)-dimensional arrowhead Hamiltonian (real symmetric).
    Mat hamiltonian() const {
        const std::vector<double> e = level_energies();
        const Eigen::Index dim = n_levels + 1;
        Mat h = Mat::Zero(dim, dim);
        for (Eigen::Index i = 0; i < n_levels; ++i) {
            h(i + 1, i + 1) = e[static_cast<size_t>(i)];
            h(0, i + 1) = w;
            h(i + 1, 0) = w;
        }
        return h;
    }

    TransitionSetup discrete_setup(const TimeGrid& grid) const {
        const Eigen::Index dim = n_levels + 1;
        Vec iso = Vec::Zero(dim);
        iso(0) = 1.0;
        return TransitionSetup(DensityMatrix::pure(iso), Projector::onto_basis_states(dim, {0}),
                               Projector::onto_basis_states(dim, window_indices()),
                               HamiltonianSchedule::time_independent(hamiltonian()), grid);
    }

    /// One eigendecomposition, then O(N^2) per evaluated amplitude vector.
    struct Spectral {
        RVec evals;
        RMat evecs;     // real symmetric H
        RVec weights;   // V^T e_0
        std::vector<Eigen::Index> window;
        int n_levels = 0;

        Vec amplitudes(double t) const {
            Vec phase(evals.size());
            for (Eigen::Index i = 0; i < evals.size(); ++i)
                phase(i) = std::exp(cxd(0, -evals(i) * t)) * weights(i);
            return evecs.cast<cxd>() * phase;
        }
        double survival(double t) const { return std::norm(amplitudes(t)(0)); }
        double window_probability(double t) const {
            const Vec a = amplitudes(t);
            double p = 0.0;
            for (Eigen::Index i : window) p += std::norm(a(i));
            return p;
        }
    };

    Spectral spectral() const {
        const Mat h = hamiltonian();
        Eigen::SelfAdjointEigenSolver<RMat> es(h.real());
        if (es.info() != Eigen::Success) throw error("BixonJortnerModel: eigensolver failed");
        Spectral s;
        s.evals = es.eigenvalues();
        s.evecs = es.eigenvectors();
        s.weights = s.evecs.row(0).transpose();
        s.window = window_indices();
        s.n_levels = n_levels;
        return s;
    }

    /// Continuum amplitude c_f(t) at window energy E (flat-coupling limit).
    cxd continuum_amplitude(double energy, double t) const {
        const double g = gamma();
        return cxd(0, -w) * (std::exp(cxd(0, -energy * t)) - std::exp(-g * t)) /
               cxd(g, -energy);
    }

    /// Closed-form P(B,t|A) from the Ei representation. The bracket at
    /// argument -gamma t + i E t crosses the Ei branch cut when the window
    /// straddles zero energy; the principal-branch difference then needs a
    /// -2 pi i correction for the antiderivative to stay continuous.
    double closed_p(double t) const {
        if (t == 0.0) return 0.0;
        if (t < 0.0) throw error("bj_closed_P: t must be >= 0");
        if (e0 == 0.0 || e1 == 0.0)
            throw error("bj_closed_P: window endpoint on the Ei branch cut");
        const double g = gamma();
        const double at =
            std::atan(e1 * delta / (M_PI * w * w)) - std::atan(e0 * delta / (M_PI * w * w));
        const double term1 = (1.0 + std::exp(-2.0 * g * t)) / M_PI * at;
        const cxd b1 =
            exp_integral_ei(cxd(g * t, e1 * t)) - exp_integral_ei(cxd(g * t, e0 * t));
        cxd b2 = exp_integral_ei(cxd(-g * t, e1 * t)) - exp_integral_ei(cxd(-g * t, e0 * t));
        if (e0 < 0.0 && e1 > 0.0) b2 -= cxd(0, 2.0 * M_PI);
        const double term2 = -(std::exp(-2.0 * g * t) * b1 - b2).imag() / M_PI;
        return term1 + term2;
    }

    /// Closed-form QTR (time derivative of closed_p).
    double closed_k(double t) const {
        if (t == 0.0) return 0.0;
        if (t < 0.0) throw error("bj_closed_k: t must be >= 0");
        const double g = gamma();
        const double at =
            std::atan(e1 * delta / (M_PI * w * w)) - std::atan(e0 * delta / (M_PI * w * w));
        const cxd b1 =
            exp_integral_ei(cxd(g * t, e1 * t)) - exp_integral_ei(cxd(g * t, e0 * t));
        const double c = 2.0 * w * w / delta;
        return -c * std::exp(-2.0 * g * t) * at + c * (std::exp(-2.0 * g * t) * b1).imag();
    }

    /// Oracle: adaptive-resolution quadrature of |c_f(t)|^2 over the window.
    double quadrature_p(double t, int panels = 0) const {
        if (panels <= 0) {
            // resolve the e^{iEt} oscillation: >= 64 panels per period
            panels = std::max(2048, static_cast<int>(std::ceil((e1 - e0) * std::abs(t) * 16)));
        }
        if (panels % 2) ++panels;
        const double h = (e1 - e0) / panels;
        double s = 0.0;
        for (int i = 0; i <= panels; ++i) {
            const double wgt = (i == 0 || i == panels) ? 1.0 : (i % 2 ? 4.0 : 2.0);
            s += wgt * std::norm(continuum_amplitude(e0 + i * h, t));
        }
        return s * h / 3.0 / delta;
    }

    /// Threshold time t* = Delta/(2 pi W^2) log[(E1-E0)/Delta] below which
    /// the QTR-based QSL is tighter; zero when the window equals one spacing.
    double threshold_time() const {
        if (e1 - e0 < delta * (1.0 - 1e-12))
            throw error("bj_threshold_time: degenerate window (E1 - E0 < Delta)");
        return delta / (2.0 * M_PI * w * w) * std::log((e1 - e0) / delta);
    }

    /// The tightness inequality e^{2 pi W^2 t/Delta} <=
    /// pi (E1-E0)/(Delta [arctan - arctan]) that holds for t < t*.
    bool tightness_inequality(double t) const {
        const double at =
            std::atan(e1 * delta / (M_PI * w * w)) - std::atan(e0 * delta / (M_PI * w * w));
        return std::exp(2.0 * gamma() * t) <= M_PI * (e1 - e0) / (delta * at);
    }
};

}  // namespace qtr
