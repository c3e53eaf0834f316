#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <sstream>

#include "qtr/qtr_engine.hpp"

using namespace qtr;

namespace {

Mat random_complex(Eigen::Index n, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    Mat a(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < n; ++i) a(i, j) = cxd(g(rng), g(rng));
    return a;
}

Mat random_hermitian(Eigen::Index n, std::mt19937_64& rng) {
    Mat a = random_complex(n, rng);
    return 0.5 * (a + Mat(a.adjoint()));
}

Vec basis_state(Eigen::Index dim, Eigen::Index i) {
    Vec v = Vec::Zero(dim);
    v(i) = 1.0;
    return v;
}

// TLS with H = Delta(|1><1|-|0><0|) + W(|0><1|+|1><0|), rho0 = |0><0|.
TransitionSetup tls_setup(double delta, double w, double t_end) {
    Mat h(2, 2);
    h << -delta, w, w, delta;
    return TransitionSetup(DensityMatrix::pure(basis_state(2, 0)),
                           Projector::onto_basis_states(2, {0}),
                           Projector::onto_basis_states(2, {1}),
                           HamiltonianSchedule::time_independent(h), TimeGrid(0.0, t_end, 100));
}

// Random setup with orthogonal rank-rA/rank-rB projectors and rho0 in A.
TransitionSetup random_unitary_setup(Eigen::Index dim, Eigen::Index rA, Eigen::Index rB,
                                     std::mt19937_64& rng, bool driven, double t_end = 1.5) {
    Eigen::HouseholderQR<Mat> qr(random_complex(dim, rng));
    const Mat q = qr.householderQ();
    Mat pa = Mat::Zero(dim, dim), pb = Mat::Zero(dim, dim);
    for (Eigen::Index i = 0; i < rA; ++i) pa += q.col(i) * q.col(i).adjoint();
    for (Eigen::Index i = rA; i < rA + rB; ++i) pb += q.col(i) * q.col(i).adjoint();
    Mat x = random_complex(dim, rng);
    Mat rho = pa * (x * x.adjoint()) * pa;
    rho /= rho.trace().real();
    rho = 0.5 * (rho + Mat(rho.adjoint()));

    Dynamics dyn = HamiltonianSchedule::time_independent(random_hermitian(dim, rng));
    if (driven) {
        const Mat h0 = random_hermitian(dim, rng);
        const Mat h1 = random_hermitian(dim, rng);
        dyn = HamiltonianSchedule::time_dependent(
            dim, [h0, h1](double t) { return Mat(h0 + t * h1); },
            [h1](double) { return h1; });
    }
    return TransitionSetup(DensityMatrix(rho, 1e-10, 1e-8, 1e-8), Projector(pa), Projector(pb),
                           std::move(dyn), TimeGrid(0.0, t_end, 100));
}

}  // namespace

TEST_CASE("condition_state") {
    const DensityMatrix rho0 = DensityMatrix::pure(basis_state(2, 0));
    const Projector pi0 = Projector::onto_basis_states(2, {0});
    auto [ra, pa] = condition_state(rho0, pi0);
    REQUIRE(pa == Catch::Approx(1.0));
    REQUIRE(max_abs(ra.mat() - rho0.mat()) < 1e-12);

    const DensityMatrix mixed(0.5 * identity(2));
    auto [rb, pb] = condition_state(mixed, pi0);
    REQUIRE(pb == Catch::Approx(0.5));
    REQUIRE(max_abs(rb.mat() - rho0.mat()) < 1e-12);

    const Projector pi1 = Projector::onto_basis_states(2, {1});
    REQUIRE_THROWS_AS(condition_state(rho0, pi1), error);
}

TEST_CASE("transition_probability TLS closed form") {
    auto setup = tls_setup(1.0, 1.0, 10.0);
    REQUIRE(transition_probability(setup, 0.0) == Catch::Approx(0.0).margin(1e-12));
    const double omega = std::sqrt(2.0);
    for (double t : {0.3, 1.0, 2.7, 9.9}) {
        const double want = 0.5 * std::pow(std::sin(omega * t), 2);
        REQUIRE(transition_probability(setup, t) == Catch::Approx(want).margin(1e-12));
    }
}

TEST_CASE("transition_probability zeno suppression") {
    Mat h(2, 2);
    h << 0, 1, 1, 0;
    ZenoDynamics z{HamiltonianSchedule::time_independent(h), Projector::onto_basis_states(2, {1}),
                   1000, 4};
    TransitionSetup setup(DensityMatrix::pure(basis_state(2, 0)),
                          Projector::onto_basis_states(2, {0}),
                          Projector::onto_basis_states(2, {1}), z, TimeGrid(0.0, 1.0, 10));
    REQUIRE(transition_probability(setup, 1.0) <= 1e-3);
}

TEST_CASE("flux_operator") {
    std::mt19937_64 rng(41);
    // [Pi_B, H] = 0 -> zero flux.
    Mat h = Mat::Zero(3, 3);
    h(0, 0) = 1.0;
    h(1, 1) = 2.0;
    h(2, 2) = -1.0;
    TransitionSetup diag(DensityMatrix::pure(basis_state(3, 0)),
                         Projector::onto_basis_states(3, {0}),
                         Projector::onto_basis_states(3, {2}),
                         HamiltonianSchedule::time_independent(h), TimeGrid(0.0, 2.0, 10));
    REQUIRE(max_abs(flux_operator(diag, 0.7)) < 1e-12);

    // TLS at t=0: antisymmetric W-coupling block, and k(0) = 0.
    auto tls = tls_setup(0.0, 1.0, 5.0);
    const Mat j0 = flux_operator(tls, 0.0);
    REQUIRE(hermiticity_defect(j0) < 1e-12);
    REQUIRE(std::abs((tls.rhoA.mat() * j0).trace().real()) < 1e-12);
    REQUIRE(qtr_direct(tls, 0.0) == Catch::Approx(0.0).margin(1e-12));

    // Hermiticity along the evolution.
    auto setup = random_unitary_setup(6, 3, 2, rng, true);
    for (double t : {0.2, 0.8, 1.4}) REQUIRE(hermiticity_defect(flux_operator(setup, t)) < 1e-9);

    // Non-Hamiltonian dynamics rejected.
    LindbladGenerator gen(Mat::Zero(2, 2), {pauli_z()}, {0.1});
    TransitionSetup lind(DensityMatrix::pure(basis_state(2, 0)),
                         Projector::onto_basis_states(2, {0}),
                         Projector::onto_basis_states(2, {1}), gen, TimeGrid(0.0, 1.0, 10));
    REQUIRE_THROWS_AS(flux_operator(lind, 0.5), error);
}

TEST_CASE("1D flux operator matches symmetrized {p, delta}/2 stencil") {
    // Discretized H = p^2/2 + V(x) on a grid; Pi_B = Theta(x > 0) with the
    // step between the two middle sites. On smooth states, [Pi_B, H]/i
    // converges to the symmetrized flux (p delta + delta p)/2.
    const int n = 400;
    const double L = 10.0, hgrid = 2 * L / n;
    auto xof = [&](int j) { return -L + (j + 0.5) * hgrid; };
    Mat H = Mat::Zero(n, n);
    for (int j = 0; j < n; ++j) {
        H(j, j) = 1.0 / (hgrid * hgrid) + 0.5 * xof(j) * xof(j);
        if (j + 1 < n) {
            H(j, j + 1) = -0.5 / (hgrid * hgrid);
            H(j + 1, j) = -0.5 / (hgrid * hgrid);
        }
    }
    Mat theta = Mat::Zero(n, n);
    for (int j = n / 2; j < n; ++j) theta(j, j) = 1.0;
    const Mat J = (theta * H - H * theta) / cxd(0, 1);

    Mat p = Mat::Zero(n, n);
    for (int j = 0; j + 1 < n; ++j) {
        p(j, j + 1) = cxd(0, -1.0) / (2 * hgrid);
        p(j + 1, j) = cxd(0, 1.0) / (2 * hgrid);
    }
    Mat delta = Mat::Zero(n, n);
    delta(n / 2 - 1, n / 2 - 1) = 0.5 / hgrid;  // jump split across the two middle sites
    delta(n / 2, n / 2) = 0.5 / hgrid;
    const Mat S = 0.5 * (p * delta + delta * p);

    // Gaussian wavepacket moving right.
    Vec psi(n);
    for (int j = 0; j < n; ++j)
        psi(j) = std::exp(-0.5 * std::pow(xof(j) + 1.0, 2)) * std::exp(cxd(0, 2.0 * xof(j)));
    psi /= psi.norm();
    const double jc = (psi.adjoint() * J * psi)(0).real();
    const double js = (psi.adjoint() * S * psi)(0).real();
    REQUIRE(jc == Catch::Approx(js).epsilon(5e-3));
    REQUIRE(std::abs(jc) > 0.1);  // flux is genuinely nonzero for this packet
}

TEST_CASE("qtr_direct vs finite difference oracle") {
    auto tls0 = tls_setup(0.0, 1.0, 5.0);
    REQUIRE(qtr_direct(tls0, M_PI / 4) == Catch::Approx(1.0).margin(1e-10));
    REQUIRE(qtr_finite_difference(tls0, M_PI / 4, 1e-4) == Catch::Approx(1.0).margin(1e-7));

    auto tls = tls_setup(1.0, 1.0, 5.0);
    const double fd = qtr_finite_difference(tls, 0.3, 1e-4);
    REQUIRE(qtr_direct(tls, 0.3) == Catch::Approx(fd).margin(1e-6));

    // Constant P -> zero rate.
    Mat h = Mat::Zero(2, 2);
    h(0, 0) = 1.0;
    h(1, 1) = -1.0;
    TransitionSetup frozen(DensityMatrix::pure(basis_state(2, 0)),
                           Projector::onto_basis_states(2, {0}),
                           Projector::onto_basis_states(2, {1}),
                           HamiltonianSchedule::time_independent(h), TimeGrid(0.0, 2.0, 10));
    REQUIRE(qtr_finite_difference(frozen, 1.0, 1e-4) == Catch::Approx(0.0).margin(1e-10));

    // Boundary violation.
    REQUIRE_THROWS_AS(qtr_finite_difference(tls, 0.0, 1e-4), error);
}

TEST_CASE("flux_flux_correlator") {
    // C(0,0) = 0 under the commuting-flag hypothesis ([rho_A, H] = 0; the
    // correlator is then identically zero since rho_A is stationary).
    Mat h = Mat::Zero(2, 2);
    h(0, 0) = 2.0;
    h(1, 1) = -1.0;
    TransitionSetup diag(DensityMatrix::pure(basis_state(2, 0)),
                         Projector::onto_basis_states(2, {0}),
                         Projector::onto_basis_states(2, {1}),
                         HamiltonianSchedule::time_independent(h), TimeGrid(0.0, 2.0, 10));
    REQUIRE(flux_flux_correlator(diag, 0.0, 0.0) == Catch::Approx(0.0).margin(1e-10));
    REQUIRE(std::abs(flux_flux_correlator(diag, 0.7, 1.3)) < 1e-12);

    // TLS rank-1 route: C(t',t') = dk/dt', so C(0,0) = 2 W^2 and the
    // integral over t' reconstructs k(t) = sin(2t).
    auto tls = tls_setup(0.0, 1.0, 5.0);
    REQUIRE(flux_flux_correlator(tls, 0.0, 0.0) == Catch::Approx(2.0).margin(1e-10));
    const double k = qtr_from_flux_flux(tls, 0.4, 200);
    REQUIRE(k == Catch::Approx(std::sin(0.8)).margin(1e-8));

    // Precondition failures are reported with the failing flag. A mixed
    // rho_A in a rank-2 subspace that does not commute with H trips the
    // commutator flag even though the projectors are complementary.
    std::mt19937_64 rng(45);
    Mat h4 = Mat::Zero(4, 4);
    h4(0, 2) = 1.0;
    h4(2, 0) = 1.0;
    h4(1, 3) = 0.5;
    h4(3, 1) = 0.5;
    h4(0, 1) = 0.3;
    h4(1, 0) = 0.3;
    Mat rho4 = Mat::Zero(4, 4);
    rho4(0, 0) = 0.8;
    rho4(1, 1) = 0.2;
    rho4(0, 1) = 0.1;
    rho4(1, 0) = 0.1;
    TransitionSetup mixed(DensityMatrix(rho4), Projector::onto_basis_states(4, {0, 1}),
                          Projector::onto_basis_states(4, {2, 3}),
                          HamiltonianSchedule::time_independent(h4), TimeGrid(0.0, 1.0, 10));
    REQUIRE_THROWS_WITH(flux_flux_correlator(mixed, 0.1, 0.1),
                        Catch::Matchers::ContainsSubstring("[rho_A, H_S(t)]"));

    TransitionSetup nocomp(DensityMatrix::pure(basis_state(3, 0)),
                           Projector::onto_basis_states(3, {0}),
                           Projector::onto_basis_states(3, {1}),
                           HamiltonianSchedule::time_independent(Mat(Mat::Zero(3, 3))),
                           TimeGrid(0.0, 1.0, 10));
    REQUIRE_THROWS_WITH(flux_flux_correlator(nocomp, 0.1, 0.1),
                        Catch::Matchers::ContainsSubstring("Pi_A + Pi_B"));
}

TEST_CASE("qtr_from_flux_flux TLS closed form") {
    auto tls = tls_setup(0.0, 1.0, 5.0);
    REQUIRE(qtr_from_flux_flux(tls, 0.0, 100) == 0.0);
    REQUIRE(qtr_from_flux_flux(tls, 0.4, 200) == Catch::Approx(std::sin(0.8)).margin(1e-8));
    // Agreement with qtr_direct across a few times, including Delta != 0.
    for (double t : {0.2, 0.9, 1.7})
        REQUIRE(qtr_from_flux_flux(tls, t, 400) == Catch::Approx(qtr_direct(tls, t)).margin(1e-6));
    auto tls2 = tls_setup(1.3, 0.8, 5.0);
    for (double t : {0.3, 1.1})
        REQUIRE(qtr_from_flux_flux(tls2, t, 400) ==
                Catch::Approx(qtr_direct(tls2, t)).margin(1e-6));
}

TEST_CASE("qtr_general_fluxflux matches oracle") {
    std::mt19937_64 rng(42);

    // Term collapse: when Eq.-12 preconditions hold the two paths agree.
    auto tls = tls_setup(0.0, 1.0, 5.0);
    REQUIRE(qtr_general_fluxflux(tls, 0.6, 64) ==
            Catch::Approx(qtr_from_flux_flux(tls, 0.6, 512)).margin(1e-8));

    // Driven random setup with non-complementary projectors.
    auto setup = random_unitary_setup(6, 3, 2, rng, true, 0.8);
    const double t = 0.5;
    const double fd = qtr_finite_difference(setup, t, 1e-4);
    REQUIRE(qtr_general_fluxflux(setup, t, 128) == Catch::Approx(fd).margin(1e-5));

    // Case with [rho_A, H] != 0 where the Eq.-12 path errors out.
    auto setup2 = random_unitary_setup(5, 2, 2, rng, false, 0.8);
    REQUIRE_THROWS_AS(qtr_from_flux_flux(setup2, 0.4, 64), error);
    REQUIRE(qtr_general_fluxflux(setup2, 0.4, 128) ==
            Catch::Approx(qtr_finite_difference(setup2, 0.4, 1e-4)).margin(1e-5));
}

TEST_CASE("channel_qtr") {
    // gamma = 0 Lindblad equals the unitary direct path.
    Mat h(2, 2);
    h << -1.0, 1.0, 1.0, 1.0;
    LindbladGenerator free(h, {}, {});
    TransitionSetup lind0(DensityMatrix::pure(basis_state(2, 0)),
                          Projector::onto_basis_states(2, {0}),
                          Projector::onto_basis_states(2, {1}), free, TimeGrid(0.0, 1.0, 10));
    TransitionSetup uni(DensityMatrix::pure(basis_state(2, 0)),
                        Projector::onto_basis_states(2, {0}),
                        Projector::onto_basis_states(2, {1}),
                        HamiltonianSchedule::time_independent(h), TimeGrid(0.0, 1.0, 10));
    REQUIRE(channel_qtr(lind0, 0.5) == Catch::Approx(qtr_direct(uni, 0.5)).margin(1e-7));

    // Single unitary Kraus family equals the direct path.
    auto u_fam = KrausFamily::make(2, 1, [h](double t) {
        return std::vector<Mat>{hermitian_expm(h, cxd(0, -t))};
    });
    TransitionSetup kra(DensityMatrix::pure(basis_state(2, 0)),
                        Projector::onto_basis_states(2, {0}),
                        Projector::onto_basis_states(2, {1}), u_fam, TimeGrid(0.0, 1.0, 10));
    REQUIRE(channel_qtr(kra, 0.5) == Catch::Approx(qtr_direct(uni, 0.5)).margin(1e-6));

    // TLS with dephasing: matches the finite difference of the channel P.
    LindbladGenerator deph(h, {pauli_z()}, {0.2});
    TransitionSetup lind(DensityMatrix::pure(basis_state(2, 0)),
                         Projector::onto_basis_states(2, {0}),
                         Projector::onto_basis_states(2, {1}), deph, TimeGrid(0.0, 1.0, 10));
    const double fd = qtr_finite_difference(lind, 0.5, 1e-4);
    REQUIRE(channel_qtr(lind, 0.5) == Catch::Approx(fd).margin(1e-6));
}

TEST_CASE("zeno_quadratic_coefficient") {
    // Time-independent TLS: coefficient = W^2 and P/t^2 -> coeff as t -> 0.
    auto tls = tls_setup(0.0, 1.0, 5.0);
    REQUIRE(zeno_quadratic_coefficient(tls) == Catch::Approx(1.0).margin(1e-12));
    const double t = 1e-3;
    REQUIRE(transition_probability(tls, t) / (t * t) ==
            Catch::Approx(zeno_quadratic_coefficient(tls)).epsilon(0.01));

    // H Pi_B = 0 and Pi_B rho_A = 0 -> zero coefficient.
    Mat h = Mat::Zero(3, 3);
    h(0, 1) = 1.0;
    h(1, 0) = 1.0;
    TransitionSetup z(DensityMatrix::pure(basis_state(3, 0)),
                      Projector::onto_basis_states(3, {0}),
                      Projector::onto_basis_states(3, {2}),
                      HamiltonianSchedule::time_independent(h), TimeGrid(0.0, 1.0, 10));
    REQUIRE(zeno_quadratic_coefficient(z) == Catch::Approx(0.0).margin(1e-14));

    // Driven TLS double-integral form.
    auto drive = HamiltonianSchedule::time_dependent(
        2, [](double t_) { return Mat((1.0 - t_) * pauli_z() + pauli_x()); });
    TransitionSetup dz(DensityMatrix::pure(basis_state(2, 0)),
                       Projector::onto_basis_states(2, {0}),
                       Projector::onto_basis_states(2, {1}), drive, TimeGrid(0.0, 1e-3, 10));
    const double coeff = zeno_quadratic_coefficient(dz);
    const double p = transition_probability(dz, 1e-3);
    REQUIRE(p / 1e-6 == Catch::Approx(coeff).epsilon(0.01));
}

TEST_CASE("k(0) = 0 for disjoint supports") {
    std::mt19937_64 rng(43);
    for (int i = 0; i < 20; ++i) {
        auto setup = random_unitary_setup(6, 2, 3, rng, i % 2 == 0);
        REQUIRE(std::abs(qtr_direct(setup, 0.0)) < 1e-10);
    }
}

TEST_CASE("complementary partition conserves total probability flow") {
    std::mt19937_64 rng(44);
    for (int i = 0; i < 10; ++i) {
        // Pi_A + Pi_B = I with a full-rank split.
        auto setup = random_unitary_setup(6, 3, 3, rng, false);
        for (double t : {0.3, 1.0}) {
            const double dt = 1e-4;
            const double dpa = (survival_probability(setup, t + dt) -
                                survival_probability(setup, t - dt)) /
                               (2 * dt);
            const double dpb = qtr_finite_difference(setup, t, dt);
            REQUIRE(std::abs(dpa + dpb) < 1e-7);
        }
    }
}

TEST_CASE("QtrSeries CSV") {
    QtrSeries s;
    s.provenance = "direct";
    s.extra_names = {"mt_rhs"};
    s.samples.push_back({0.0, 0.0, 0.0, {1.0}});
    s.samples.push_back({0.5, 0.25, 1.0 / 3.0, {0.5}});
    std::ostringstream os;
    s.write_csv(os);
    const std::string txt = os.str();
    REQUIRE(txt.rfind("t,P_AB,k_AB,mt_rhs\n", 0) == 0);
    REQUIRE(txt.find("0.33333333333333331") != std::string::npos);
    REQUIRE(txt.find('\r') == std::string::npos);

    QtrSeries bad = s;
    bad.samples[0].p = 1.5;
    std::ostringstream os2;
    REQUIRE_THROWS_AS(bad.write_csv(os2), error);
}

TEST_CASE("setup invariant violations") {
    // Non-disjoint projectors rejected.
    REQUIRE_THROWS_AS(TransitionSetup(DensityMatrix::pure(basis_state(2, 0)),
                                      Projector::onto_basis_states(2, {0}),
                                      Projector::onto_basis_states(2, {0}),
                                      HamiltonianSchedule::time_independent(Mat(pauli_x())),
                                      TimeGrid(0.0, 1.0, 10)),
                      error);
    // Empty conditioning rejected.
    REQUIRE_THROWS_AS(TransitionSetup(DensityMatrix::pure(basis_state(2, 1)),
                                      Projector::onto_basis_states(2, {0}),
                                      Projector::onto_basis_states(2, {1}),
                                      HamiltonianSchedule::time_independent(Mat(pauli_x())),
                                      TimeGrid(0.0, 1.0, 10)),
                      error);
}
