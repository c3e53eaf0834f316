#pragma once

// Particle in a box [-a, a] with an attractive delta potential at the
// origin: even-sector spectrum (scattering-like roots plus one bound state),
// overlaps with the bare-box even modes, transition probabilities between
// box-mode subsets, and the threshold index n* above which the QTR-based
// QSL is tighter than MT.
//
// Even eigenfunctions must vanish at the walls; with the derivative jump
// psi'(0+) - psi'(0-) = 2 gamma psi(0) they are sin(k_n(a - |x|)) with
// k cot(k a) = |gamma| and norm N_n = a - sin(2 k_n a)/(2 k_n). (The k -> i
// kappa continuation of the same condition gives the bound state
// sinh(kappa(a - |x|)) with kappa coth(kappa a) = |gamma|.) The branch-0
// root is absorbed by the bound state when |gamma| > 1/a.

#include <vector>

#include "qtr/operator_core.hpp"

namespace qtr {

struct DeltaBoxModel {
    double a = 1.0;       // half-width
    double gamma = -2.0;  // delta strength, gamma < 0, |gamma| > 1/a
    int n_even = 64;      // even scattering states kept
    int quad_points = 10000;

    DeltaBoxModel(double a_, double gamma_, int n_even_ = 64, int quad = 10000)
        : a(a_), gamma(gamma_), n_even(n_even_), quad_points(quad) {
        if (!(a > 0.0)) throw error("DeltaBoxModel: a must be > 0");
        if (!(gamma < 0.0)) throw error("DeltaBoxModel: gamma must be < 0");
        if (!(std::abs(gamma) > 1.0 / a))
            throw error("DeltaBoxModel: no bound state (|gamma| <= 1/a)");
        if (n_even < 2) throw error("DeltaBoxModel: need at least two even states");
    }

    /// Box even-mode momentum k~_m = (2m-1) pi / (2a), m >= 1.
    double box_momentum(int m) const { return (2.0 * m - 1.0) * M_PI / (2.0 * a); }

    struct Spectrum {
        std::vector<double> k;       // even-sector roots, ascending
        std::vector<double> norm;    // N_n = a - sin(2 k_n a)/(2 k_n)
        double kappa = 0.0;          // bound-state decay constant
        double e_bound = 0.0;        // -kappa^2/2
        std::vector<double> energy;  // k_n^2/2

        double residual_even(int n, double a_, double gamma_) const {
            const double kk = k[static_cast<size_t>(n)];
            return std::abs(kk * std::cos(kk * a_) - std::abs(gamma_) * std::sin(kk * a_)) /
                   std::max(1.0, kk);
        }
    };

    /// Roots of k cot(k a) = |gamma| (one per branch ka in (n pi, n pi + pi/2),
    /// n >= 1) and kappa coth(kappa a) = |gamma|, bisection then Newton.
    Spectrum spectrum() const {
        Spectrum s;
        const double target = std::abs(gamma);
        {
            double lo = 1e-12, hi = std::max(2.0 * target, 2.0 / a);
            auto f = [&](double x) { return x / std::tanh(x * a) - target; };
            while (f(hi) < 0.0) hi *= 2.0;
            for (int it = 0; it < 200; ++it) {
                const double mid = 0.5 * (lo + hi);
                (f(mid) < 0.0 ? lo : hi) = mid;
            }
            double x = 0.5 * (lo + hi);
            for (int it = 0; it < 50; ++it) {
                const double th = std::tanh(x * a);
                const double fx = x / th - target;
                const double dfx = 1.0 / th - x * a * (1.0 - th * th) / (th * th);
                const double step = fx / dfx;
                x -= step;
                if (std::abs(step) < 1e-15 * std::max(1.0, x)) break;
            }
            s.kappa = x;
            s.e_bound = -0.5 * x * x;
            if (std::abs(x / std::tanh(x * a) - target) > 1e-10)
                throw error("DeltaBoxModel: bound-state root residual too large");
        }
        s.k.reserve(static_cast<size_t>(n_even));
        for (int n = 1; n <= n_even; ++n) {
            // g(k) = k cos(ka) - |gamma| sin(ka): +inf-side at ka -> n pi+,
            // negative at ka = (n + 1/2) pi.
            double lo = (n * M_PI + 1e-11) / a;
            double hi = ((n + 0.5) * M_PI - 1e-11) / a;
            auto f = [&](double kk) {
                return kk * std::cos(kk * a) - target * std::sin(kk * a);
            };
            const double sgn = (n % 2 == 0) ? 1.0 : -1.0;  // sign of cos just past n pi
            auto fs = [&](double kk) { return sgn * f(kk); };
            if (!(fs(lo) > 0.0) || !(fs(hi) < 0.0))
                throw error("DeltaBoxModel: bracket failure on branch " + std::to_string(n));
            for (int it = 0; it < 200; ++it) {
                const double mid = 0.5 * (lo + hi);
                (fs(mid) > 0.0 ? lo : hi) = mid;
            }
            double x = 0.5 * (lo + hi);
            for (int it = 0; it < 50; ++it) {
                const double fx = f(x);
                const double dfx = std::cos(x * a) - x * a * std::sin(x * a) -
                                   target * a * std::cos(x * a);
                const double step = fx / dfx;
                if (!std::isfinite(step)) break;
                const double next = x - step;
                if (next <= n * M_PI / a || next >= (n + 0.5) * M_PI / a) break;
                x = next;
                if (std::abs(step) < 1e-15 * x) break;
            }
            Spectrum probe;
            probe.k = {x};
            if (probe.residual_even(0, a, gamma) > 1e-10)
                throw error("DeltaBoxModel: even root residual too large on branch " +
                            std::to_string(n));
            s.k.push_back(x);
            s.norm.push_back(a - std::sin(2.0 * x * a) / (2.0 * x));
            s.energy.push_back(0.5 * x * x);
        }
        return s;
    }

    // -- eigenfunctions (even sector) ---------------------------------------

    double psi_even(const Spectrum& s, int n, double x) const {
        return std::sin(s.k[static_cast<size_t>(n)] * (a - std::abs(x))) /
               std::sqrt(s.norm[static_cast<size_t>(n)]);
    }
    double psi_bound(const Spectrum& s, double x) const {
        const double norm = 2.0 * s.kappa / (std::sinh(2.0 * s.kappa * a) - 2.0 * s.kappa * a);
        return std::sqrt(norm) * std::sinh(s.kappa * (a - std::abs(x)));
    }
    double psi_box(int m, double x) const {
        return std::cos(box_momentum(m) * x) / std::sqrt(a);
    }

    // -- closed-form overlaps -------------------------------------------------

    /// c_{b,m} = <psi_b | box_m> = sqrt(2 kappa/(a(sinh 2 kappa a - 2 kappa a)))
    ///           * 2 kappa cosh(kappa a)/(kappa^2 + k~_m^2).
    double c_bound(const Spectrum& s, int m) const {
        const double km = box_momentum(m);
        const double norm = 2.0 * s.kappa / (std::sinh(2.0 * s.kappa * a) - 2.0 * s.kappa * a);
        return std::sqrt(norm / a) * 2.0 * s.kappa * std::cosh(s.kappa * a) /
               (s.kappa * s.kappa + km * km);
    }

    /// c_{n,m} = <psi_n^even | box_m> = 2 k_n cos(k_n a) /
    ///           (sqrt(a N_n) (k~_m^2 - k_n^2)).
    double c_even(const Spectrum& s, int n, int m) const {
        const double km = box_momentum(m);
        const double kn = s.k[static_cast<size_t>(n)];
        return 2.0 * kn * std::cos(kn * a) /
               (std::sqrt(a * s.norm[static_cast<size_t>(n)]) * (km * km - kn * kn));
    }

    /// Gram matrix d_{n,n'} of the even eigenstates under the closed form;
    /// identity up to the root residuals (d_{n,n} = 1 by normalization).
    double d_even(const Spectrum& s, int n, int np) const {
        if (n == np) return 1.0;
        const double kn = s.k[static_cast<size_t>(n)], kp = s.k[static_cast<size_t>(np)];
        return 2.0 *
               (kp * std::sin(kn * a) * std::cos(kp * a) -
                kn * std::cos(kn * a) * std::sin(kp * a)) /
               (std::sqrt(s.norm[static_cast<size_t>(n)] * s.norm[static_cast<size_t>(np)]) *
                (kp * kp - kn * kn));
    }

    /// Quadrature oracle for any pair of even-sector functions on [-a, a].
    template <typename F, typename G>
    double overlap_quadrature(F&& f, G&& g) const {
        int n = quad_points;
        if (n % 2) ++n;
        const double h = 2.0 * a / n;
        double acc = 0.0;
        for (int i = 0; i <= n; ++i) {
            const double x = -a + i * h;
            const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
            acc += w * f(x) * g(x);
        }
        return acc * h / 3.0;
    }

    /// Completeness sum_n c_{n,m}^2 + c_{b,m}^2 for box mode m.
    double completeness(const Spectrum& s, int m) const {
        double acc = c_bound(s, m) * c_bound(s, m);
        for (int n = 0; n < static_cast<int>(s.k.size()); ++n)
            acc += c_even(s, n, m) * c_even(s, n, m);
        return acc;
    }

    // -- transition probabilities ---------------------------------------------

    /// Amplitude <box_n | e^{-iHt} | box_m> from the spectral decomposition:
    /// sum_{n'} c_{n',m} e^{-i E_{n'} t} c_{n',n} + c_{b,m} e^{-i E_b t} c_{b,n}.
    cxd amplitude(const Spectrum& s, int n, int m, double t) const {
        cxd acc = c_bound(s, m) * std::exp(cxd(0, -s.e_bound * t)) * c_bound(s, n);
        for (int np = 0; np < static_cast<int>(s.k.size()); ++np)
            acc += c_even(s, np, m) * std::exp(cxd(0, -s.energy[static_cast<size_t>(np)] * t)) *
                   c_even(s, np, n);
        return acc;
    }

    cxd amplitude_dot(const Spectrum& s, int n, int m, double t) const {
        cxd acc = cxd(0, -s.e_bound) * c_bound(s, m) * std::exp(cxd(0, -s.e_bound * t)) *
                  c_bound(s, n);
        for (int np = 0; np < static_cast<int>(s.k.size()); ++np)
            acc += cxd(0, -s.energy[static_cast<size_t>(np)]) * c_even(s, np, m) *
                   std::exp(cxd(0, -s.energy[static_cast<size_t>(np)] * t)) * c_even(s, np, n);
        return acc;
    }

    struct Transition {
        double p = 0.0;  // conditioned (divided by the set size)
        double p_unnormalized = 0.0;
        double k = 0.0;
        double k_unnormalized = 0.0;
    };

    /// P([n1,n2], t | [m1,m2]) and its rate; the conditioned version divides
    /// by the initial set size (uniform mixture over the box modes).
    Transition transition(const Spectrum& s, int m1, int m2, int n1, int n2, double t) const {
        if (m1 < 1 || n1 < 1 || m2 < m1 || n2 < n1)
            throw error("DeltaBoxModel: invalid index sets");
        if (!(m2 < n1 || n2 < m1)) throw error("DeltaBoxModel: index sets overlap");
        Transition tr;
        for (int m = m1; m <= m2; ++m)
            for (int n = n1; n <= n2; ++n) {
                const cxd av = amplitude(s, n, m, t);
                tr.p_unnormalized += std::norm(av);
                tr.k_unnormalized += 2.0 * (amplitude_dot(s, n, m, t) * std::conj(av)).real();
            }
        const double size = m2 - m1 + 1;
        tr.p = tr.p_unnormalized / size;
        tr.k = tr.k_unnormalized / size;
        return tr;
    }

    /// Survival amplitude |<box_m| e^{-iHt} |box_m>| entering the MT side.
    double survival_amplitude(const Spectrum& s, int m, double t) const {
        cxd acc = c_bound(s, m) * c_bound(s, m) * std::exp(cxd(0, -s.e_bound * t));
        for (int np = 0; np < static_cast<int>(s.k.size()); ++np) {
            const double c = c_even(s, np, m);
            acc += c * c * std::exp(cxd(0, -s.energy[static_cast<size_t>(np)] * t));
        }
        return std::abs(acc);
    }

    /// Threshold index n* = ceil[(80 k~_{m2} a/pi^3 + bound-state term) /
    /// |1 - 2 c_{b,m1}^2|] above which the QTR-based QSL is tighter.
    int threshold_n(const Spectrum& s, int m1, int m2) const {
        const double km2 = box_momentum(m2);
        const double km1 = box_momentum(m1);
        const double sinh_fac = std::sinh(2.0 * s.kappa * a) - 2.0 * s.kappa * a;
        const double cosh2 = std::pow(std::cosh(s.kappa * a), 2);
        const double num =
            80.0 * km2 * a / std::pow(M_PI, 3) +
            16.0 * std::pow(s.kappa, 3) * a * a * cosh2 /
                (M_PI * M_PI * sinh_fac * (s.kappa * s.kappa + km1 * km1));
        const double cb1 = c_bound(s, m1);
        const double den = std::abs(1.0 - 2.0 * cb1 * cb1);
        if (den <= 1e-10)
            throw error("deltabox_threshold_n: |1 - 2|c_b|^2| denominator degenerate");
        return static_cast<int>(std::ceil(num / den));
    }

    /// Tightness check at one (n, t): |A_{n,m}(t)| <= |survival amplitude|,
    /// equivalent to tau_QTR >= tau_MT for rank-1 initial and target states.
    bool tightness_holds(const Spectrum& s, int m, int n, double t) const {
        return std::abs(amplitude(s, n, m, t)) <= survival_amplitude(s, m, t) + 1e-12;
    }
};

}  // namespace qtr
