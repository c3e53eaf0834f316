#pragma once

// Two-level system with on-site energies -Delta/+Delta and coupling W,
// initialized in |0>. Closed forms for survival, transition probability and
// the rate, plus the TransitionSetup for the generic engine.

#include "qtr/qtr_engine.hpp"

namespace qtr {

struct TlsModel {
    double delta = 0.0;
    double w = 1.0;

    TlsModel(double delta_, double w_) : delta(delta_), w(w_) {
        if (!std::isfinite(delta) || !std::isfinite(w)) throw error("TlsModel: non-finite");
    }

    double omega() const { return std::sqrt(delta * delta + w * w); }

    Mat hamiltonian() const {
        Mat h(2, 2);
        h << -delta, w, w, delta;
        return h;
    }

    TransitionSetup setup(const TimeGrid& grid) const {
        Vec zero(2);
        zero << 1, 0;
        return TransitionSetup(DensityMatrix::pure(zero), Projector::onto_basis_states(2, {0}),
                               Projector::onto_basis_states(2, {1}),
                               HamiltonianSchedule::time_independent(hamiltonian()), grid);
    }

    struct ClosedForms {
        double p_aa;
        double p_ab;
        double k;
    };

    /// P_AA = cos^2(Omega t) + (Delta/Omega)^2 sin^2, P_AB = (W/Omega)^2
    /// sin^2, k = (W^2/Omega) sin(2 Omega t); Omega -> 0 handled by limits.
    ClosedForms closed_forms(double t) const {
        const double om = omega();
        if (om < 1e-300) return {1.0, 0.0, 0.0};
        const double s = std::sin(om * t);
        const double c = std::cos(om * t);
        const double p_ab = (w / om) * (w / om) * s * s;
        const double p_aa = c * c + (delta / om) * (delta / om) * s * s;
        const double k = (w * w / om) * std::sin(2.0 * om * t);
        return {p_aa, p_ab, k};
    }
};

}  // namespace qtr
