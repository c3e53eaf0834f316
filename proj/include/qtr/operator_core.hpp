#pragma once

// Dense complex operator algebra and the domain types (projectors, density
// matrices, time grids) shared by every other header.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstdio>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace qtr {

using cxd = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace tol {
inline constexpr double hermitian = 1e-12;
inline constexpr double hermitian_loose = 1e-10;
inline constexpr double idempotent = 1e-10;
inline constexpr double trace_rank = 1e-8;
inline constexpr double trace_one = 1e-10;
inline constexpr double psd = 1e-10;
inline constexpr double unitary = 1e-10;
}  // namespace tol

inline double max_abs(const Mat& a) {
    return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff();
}

inline bool all_finite(const Mat& a) {
    for (Eigen::Index j = 0; j < a.cols(); ++j)
        for (Eigen::Index i = 0; i < a.rows(); ++i) {
            const cxd v = a(i, j);
            if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
        }
    return true;
}

inline void require_square(const Mat& a, const char* who) {
    if (a.rows() != a.cols() || a.rows() == 0)
        throw error(std::string(who) + ": operator must be square and nonempty");
    if (!all_finite(a)) throw error(std::string(who) + ": non-finite entries");
}

inline void require_same_dim(const Mat& a, const Mat& b, const char* who) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw error(std::string(who) + ": dimension mismatch (" + std::to_string(a.rows()) +
                    " vs " + std::to_string(b.rows()) + ")");
}

inline double hermiticity_defect(const Mat& a) { return max_abs(a - a.adjoint()); }

inline void require_hermitian(const Mat& a, double tolerance, const char* who) {
    require_square(a, who);
    const double d = hermiticity_defect(a);
    if (d > tolerance)
        throw error(std::string(who) + ": operator not Hermitian (defect " + std::to_string(d) + ")");
}

inline Mat identity(Eigen::Index dim) { return Mat::Identity(dim, dim); }

/// ab - ba.
inline Mat commutator(const Mat& a, const Mat& b) {
    require_same_dim(a, b, "commutator");
    return a * b - b * a;
}

inline Mat anticommutator(const Mat& a, const Mat& b) {
    require_same_dim(a, b, "anticommutator");
    return a * b + b * a;
}

struct EighResult {
    RVec eigenvalues;  // ascending
    Mat eigenvectors;  // columns
};

/// Hermitian eigendecomposition. Numerically real input takes Eigen's real
/// self-adjoint solver, which matters for the larger model instances.
inline EighResult eigh(const Mat& h, double herm_tol = tol::hermitian_loose) {
    require_hermitian(h, herm_tol, "eigh");
    EighResult r;
    if (max_abs(Mat(h.imag().cast<cxd>())) < 1e-14 * std::max(1.0, max_abs(h))) {
        Eigen::SelfAdjointEigenSolver<RMat> es(h.real());
        if (es.info() != Eigen::Success) throw error("eigh: real solver failed");
        r.eigenvalues = es.eigenvalues();
        r.eigenvectors = es.eigenvectors().cast<cxd>();
    } else {
        Eigen::SelfAdjointEigenSolver<Mat> es(h);
        if (es.info() != Eigen::Success) throw error("eigh: solver failed");
        r.eigenvalues = es.eigenvalues();
        r.eigenvectors = es.eigenvectors();
    }
    return r;
}

/// e^{s h} for Hermitian h via the spectral form. Unitary when s is purely
/// imaginary.
inline Mat hermitian_expm(const Mat& h, cxd s, double herm_tol = tol::hermitian_loose) {
    const EighResult e = eigh(h, herm_tol);
    Vec phases(e.eigenvalues.size());
    for (Eigen::Index i = 0; i < phases.size(); ++i)
        phases(i) = std::exp(s * e.eigenvalues(i));
    return e.eigenvectors * phases.asDiagonal() * e.eigenvectors.adjoint();
}

class DensityMatrix {
  public:
    explicit DensityMatrix(Mat rho, double herm_tol = tol::hermitian,
                           double trace_tol = tol::trace_one, double psd_tol = tol::psd)
        : m_(std::move(rho)) {
        require_hermitian(m_, herm_tol, "DensityMatrix");
        const double tr = m_.trace().real();
        if (std::abs(tr - 1.0) > trace_tol)
            throw error("DensityMatrix: trace " + std::to_string(tr) + " != 1");
        Eigen::SelfAdjointEigenSolver<Mat> es(m_, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -psd_tol)
            throw error("DensityMatrix: negative eigenvalue " +
                        std::to_string(es.eigenvalues().minCoeff()));
        m_ = 0.5 * (m_ + Mat(m_.adjoint()));
    }

    const Mat& mat() const { return m_; }
    Eigen::Index dim() const { return m_.rows(); }

    /// Pure-state convenience constructor.
    static DensityMatrix pure(const Vec& psi) {
        const double n = psi.norm();
        if (n <= 0) throw error("DensityMatrix::pure: zero vector");
        Vec u = psi / n;
        return DensityMatrix(u * u.adjoint());
    }

  private:
    Mat m_;
};

class Projector {
  public:
    explicit Projector(Mat p, double herm_tol = tol::hermitian,
                       double idem_tol = tol::idempotent, double rank_tol = tol::trace_rank)
        : m_(std::move(p)) {
        require_hermitian(m_, herm_tol, "Projector");
        const double idem = max_abs(m_ * m_ - m_);
        if (idem > idem_tol)
            throw error("Projector: not idempotent (defect " + std::to_string(idem) + ")");
        const double tr = m_.trace().real();
        rank_ = static_cast<Eigen::Index>(std::llround(tr));
        if (rank_ < 0 || std::abs(tr - static_cast<double>(rank_)) > rank_tol)
            throw error("Projector: trace " + std::to_string(tr) + " is not an integer rank");
        m_ = 0.5 * (m_ + Mat(m_.adjoint()));
    }

    const Mat& mat() const { return m_; }
    Eigen::Index dim() const { return m_.rows(); }
    Eigen::Index rank() const { return rank_; }

    /// Projector onto the span of the given basis states.
    static Projector onto_basis_states(Eigen::Index dim, const std::vector<Eigen::Index>& idx) {
        Mat p = Mat::Zero(dim, dim);
        for (Eigen::Index i : idx) p(i, i) = 1.0;
        return Projector(p);
    }

    /// Projector |psi><psi| onto a single (normalized) state.
    static Projector onto_state(const Vec& psi) {
        const double n = psi.norm();
        if (n <= 0) throw error("Projector::onto_state: zero vector");
        Vec u = psi / n;
        return Projector(u * u.adjoint());
    }

  private:
    Mat m_;
    Eigen::Index rank_ = 0;
};

/// Variance of a Hermitian observable in a state, clamped at zero.
inline double variance(const DensityMatrix& rho, const Mat& o,
                       double herm_tol = 1e-9) {
    require_same_dim(rho.mat(), o, "variance");
    require_hermitian(o, herm_tol, "variance");
    const double mo = (rho.mat() * o).trace().real();
    const double mo2 = (rho.mat() * o * o).trace().real();
    const double var = mo2 - mo * mo;
    if (var < -1e-12 * std::max(1.0, mo2)) {
        // Roundoff should not produce variance this negative.
        throw error("variance: negative beyond tolerance (" + std::to_string(var) + ")");
    }
    return var > 0.0 ? var : 0.0;
}

/// Spectral square root with eigenvalue clamping at zero.
inline Mat psd_sqrt(const Mat& a, double psd_tol = tol::psd) {
    const EighResult e = eigh(a, 1e-9);
    if (e.eigenvalues.minCoeff() < -psd_tol)
        throw error("psd_sqrt: input not PSD (min eig " +
                    std::to_string(e.eigenvalues.minCoeff()) + ")");
    Vec s(e.eigenvalues.size());
    for (Eigen::Index i = 0; i < s.size(); ++i)
        s(i) = std::sqrt(std::max(0.0, e.eigenvalues(i)));
    return e.eigenvectors * s.asDiagonal() * e.eigenvectors.adjoint();
}

/// Uhlmann fidelity F = tr[sqrt(sqrt(rho) sigma sqrt(rho))]^2.
inline double uhlmann_fidelity(const DensityMatrix& rho, const DensityMatrix& sigma) {
    require_same_dim(rho.mat(), sigma.mat(), "uhlmann_fidelity");
    const Mat a = psd_sqrt(rho.mat());
    const Mat m = a * sigma.mat() * a;
    const EighResult e = eigh(0.5 * (m + Mat(m.adjoint())), 1e-8);
    double s = 0.0;
    for (Eigen::Index i = 0; i < e.eigenvalues.size(); ++i)
        s += std::sqrt(std::max(0.0, e.eigenvalues(i)));
    const double f = s * s;
    return f < 0.0 ? 0.0 : (f > 1.0 ? std::min(f, 1.0 + 1e-9) : f);
}

/// M_rho = sqrt(1 - tr rho^2); zero for pure states.
inline double mixedness(const DensityMatrix& rho) {
    const double purity = (rho.mat() * rho.mat()).trace().real();
    return std::sqrt(std::max(0.0, 1.0 - purity));
}

struct TimeGrid {
    double t_start = 0.0;
    double t_end = 0.0;
    int n_steps = 1;

    TimeGrid() = default;
    TimeGrid(double t0, double t1, int n) : t_start(t0), t_end(t1), n_steps(n) {
        if (n < 1) throw error("TimeGrid: n_steps must be >= 1");
        if (!(t1 >= t0)) throw error("TimeGrid: t_end < t_start");
    }

    double dt() const { return (t_end - t_start) / n_steps; }
    int size() const { return n_steps + 1; }
    double sample(int i) const { return t_start + dt() * i; }
    bool contains(double t) const {
        const double eps = 1e-12 * std::max(1.0, std::abs(t_end));
        return t >= t_start - eps && t <= t_end + eps;
    }
    std::vector<double> samples() const {
        std::vector<double> v(static_cast<size_t>(size()));
        for (int i = 0; i < size(); ++i) v[static_cast<size_t>(i)] = sample(i);
        return v;
    }
};

// ---------------------------------------------------------------------------
// Matrix text I/O: header line "dim N", then N*N row-major tokens "re+imj".

inline std::string format_complex(cxd v) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%.17g%+.17gj", v.real(), v.imag());
    return buf;
}

inline cxd parse_complex(const std::string& tok) {
    if (tok.empty() || tok.back() != 'j')
        throw error("matrix parse: token '" + tok + "' does not end in j");
    const std::string body = tok.substr(0, tok.size() - 1);
    // The imaginary part starts at the last +/- that is not an exponent sign.
    size_t split = std::string::npos;
    for (size_t i = body.size(); i-- > 1;) {
        const char c = body[i];
        if ((c == '+' || c == '-') && body[i - 1] != 'e' && body[i - 1] != 'E') {
            split = i;
            break;
        }
    }
    if (split == std::string::npos)
        throw error("matrix parse: token '" + tok + "' lacks an imaginary part");
    size_t used = 0;
    const double re = std::stod(body.substr(0, split), &used);
    if (used != split) throw error("matrix parse: bad real part in '" + tok + "'");
    const std::string ims = body.substr(split);
    const double im = std::stod(ims, &used);
    if (used != ims.size()) throw error("matrix parse: bad imaginary part in '" + tok + "'");
    return {re, im};
}

inline void write_matrix(std::ostream& os, const Mat& a) {
    require_square(a, "write_matrix");
    os << "dim " << a.rows() << "\n";
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            if (j) os << ' ';
            os << format_complex(a(i, j));
        }
        os << "\n";
    }
}

inline Mat read_matrix(std::istream& is) {
    std::string key;
    Eigen::Index n = 0;
    if (!(is >> key >> n) || key != "dim" || n <= 0)
        throw error("read_matrix: expected header 'dim N'");
    Mat a(n, n);
    std::string tok;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            if (!(is >> tok)) throw error("read_matrix: truncated input");
            a(i, j) = parse_complex(tok);
        }
    if (!all_finite(a)) throw error("read_matrix: non-finite entries");
    return a;
}

// Pauli matrices, used throughout the models and tests.
inline Mat pauli_x() { return (Mat(2, 2) << 0, 1, 1, 0).finished(); }
inline Mat pauli_y() { return (Mat(2, 2) << 0, cxd(0, -1), cxd(0, 1), 0).finished(); }
inline Mat pauli_z() { return (Mat(2, 2) << 1, 0, 0, -1).finished(); }

}  // namespace qtr
