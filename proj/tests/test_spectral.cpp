#include "sflr/spectral.hpp"

#include "sflr/simulation.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>

using namespace sflr;

TEST_SUITE_BEGIN("spectral");

namespace {

SparseFTS random_sparse(int T, int n_max, std::uint64_t seed) {
    Rng rng(seed);
    SparseFTS data;
    data.obs.resize(static_cast<std::size_t>(T));
    for (auto& curve : data.obs) {
        const int n = 1 + rng.uniform_int(n_max - 1);
        for (int j = 0; j < n; ++j) curve.push_back({rng.uniform(), rng.normal()});
    }
    return data;
}

}  // namespace

TEST_CASE("zero data gives a zero spectral density") {
    const SpatialGrid grid(15);
    const FrequencyGrid fgrid(32);
    SparseFTS data = random_sparse(30, 5, 3);
    for (auto& curve : data.obs)
        for (auto& o : curve) o.y = 0.0;
    const RawCovariances raw = raw_covariances(data, 4);
    const auto est = estimate_spectral_density(raw, grid, fgrid, 4, 0.4, data.counts());
    for (const auto& F : est.values) CHECK(F.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("conjugate symmetry across +-omega is exact") {
    const SpatialGrid grid(15);
    const FrequencyGrid fgrid(32);
    const SparseFTS data = random_sparse(40, 5, 5);
    const RawCovariances raw = raw_covariances(data, 4);
    const auto est = estimate_spectral_density(raw, grid, fgrid, 4, 0.35, data.counts());
    for (int i = 1; i < fgrid.n_freq / 2; ++i) {
        const CMatrix diff = est.values[static_cast<std::size_t>(fgrid.n_freq - i)] -
                             est.values[static_cast<std::size_t>(i)].conjugate();
        CHECK(diff.cwiseAbs().maxCoeff() == 0.0);  // mirrored by construction
    }
    // Self-paired frequencies are real.
    CHECK(est.values[0].imag().cwiseAbs().maxCoeff() == 0.0);
    CHECK(est.values[static_cast<std::size_t>(fgrid.n_freq / 2)].imag().cwiseAbs().maxCoeff() ==
          doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("Hermitian projection and eigenvalue clipping hold per frequency") {
    const SpatialGrid grid(15);
    const FrequencyGrid fgrid(32);
    const SparseFTS data = random_sparse(50, 5, 11);
    const RawCovariances raw = raw_covariances(data, 4);
    const auto est = estimate_spectral_density(raw, grid, fgrid, 4, 0.35, data.counts());
    for (const auto& F : est.values) {
        CHECK((F - F.adjoint()).cwiseAbs().maxCoeff() == doctest::Approx(0.0).epsilon(1e-18));
        Eigen::SelfAdjointEigenSolver<CMatrix> es(F);
        CHECK(es.eigenvalues().minCoeff() >= -1e-12);
    }
}

TEST_CASE("estimator matches the dense pooled WLS oracle") {
    const SpatialGrid grid(15);
    const FrequencyGrid fgrid(64);
    const int L = 5;
    const SparseFTS data = random_sparse(60, 6, 42);
    const RawCovariances raw = raw_covariances(data, L);
    SpectralOptions opts;
    opts.clip_eigenvalues = false;  // the oracle solves the raw objective
    const auto est = estimate_spectral_density(raw, grid, fgrid, L, 0.35, data.counts(), opts);

    Rng pick(19);
    for (int rep = 0; rep < 20; ++rep) {
        const int fi = pick.uniform_int(fgrid.n_freq - 1);
        const int i = pick.uniform_int(grid.p - 1);
        const int j = pick.uniform_int(grid.p - 1);
        const Complex direct = oracle::spectral_density(data, L, 0.35, fgrid.omegas[fi],
                                                        grid.points[i], grid.points[j]);
        const Complex got = est.values[static_cast<std::size_t>(fi)](i, j);
        CHECK(std::abs(got - direct) <= 1e-8 * std::max(1.0, std::abs(direct)));
    }
}

TEST_CASE("inversion roundtrip recovers the pooled lag-0 intercept") {
    const SpatialGrid grid(15);
    const FrequencyGrid fgrid(64);
    const int L = 5;
    const SparseFTS data = random_sparse(60, 6, 99);
    const RawCovariances raw = raw_covariances(data, L);
    SpectralOptions opts;
    opts.clip_eigenvalues = false;  // clipping breaks the trig-polynomial structure
    const auto est = estimate_spectral_density(raw, grid, fgrid, L, 0.35, data.counts(), opts);
    const AutocovSequence R = invert_to_autocov(est, fgrid);

    for (int i : {0, 4, 9, 14})
        for (int j : {1, 7, 12}) {
            const double direct = oracle::pooled_lag0(data, L, 0.35, grid.points[i],
                                                      grid.points[j]);
            // The estimator is Hermitian-projected, so compare the symmetric part.
            const double directT = oracle::pooled_lag0(data, L, 0.35, grid.points[j],
                                                       grid.points[i]);
            CHECK(R.at(0)(i, j) ==
                  doctest::Approx(0.5 * (direct + directT)).epsilon(1e-8));
        }

    SUBCASE("negative lags are transposes") {
        CHECK(R.eval(-2, 0.3, 0.7, grid) == doctest::Approx(R.eval(2, 0.7, 0.3, grid)));
        CHECK(R.eval(L, 0.3, 0.7, grid) == 0.0);  // beyond the band
    }
}

TEST_CASE("constant spectral density inverts to a single lag") {
    const SpatialGrid grid(9);
    const FrequencyGrid fgrid(32);
    Matrix C(9, 9);
    for (int i = 0; i < 9; ++i)
        for (int j = 0; j < 9; ++j) C(i, j) = 1.0 + 0.5 * grid.points[i] * grid.points[j];
    C = 0.5 * (C + C.transpose()).eval();
    SpectralDensityEstimate est;
    est.L = 3;
    est.values.assign(32, (C / (2.0 * 3.14159265358979323846)).cast<Complex>());
    const AutocovSequence R = invert_to_autocov(est, fgrid);
    CHECK((R.at(0) - C).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(R.at(1).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(R.at(2).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("imaginary residue in the inversion is detected") {
    const SpatialGrid grid(5);
    const FrequencyGrid fgrid(16);
    SpectralDensityEstimate est;
    est.L = 2;
    est.values.assign(16, CMatrix::Zero(5, 5));
    est.values[3](1, 2) = Complex(0.0, 1.0);  // breaks conjugate pairing
    CHECK_THROWS_AS(invert_to_autocov(est, fgrid), NumericError);
}

TEST_CASE("eigendecomposition: rank-1, trace preservation, orthonormality") {
    const SpatialGrid grid(21);
    const auto modes = oracle::orthonormal_modes(grid, 3);

    SpectralDensityEstimate est;
    est.L = 2;
    CMatrix F = CMatrix::Zero(21, 21);
    const double lambda = 1.7;
    F += lambda * modes[0].cast<Complex>() * modes[0].transpose().cast<Complex>();
    est.values.assign(8, F);
    const EigenSystem sys = eigendecompose(est, grid);


    CHECK(sys.eigenvalues[0][0] == doctest::Approx(lambda).epsilon(1e-10));
    CHECK(sys.eigenvalues[0][1] == doctest::Approx(0.0).epsilon(1e-10));
    // Up to phase, the leading eigenvector is the planted mode.
    const CVector phi = sys.eigenvectors[0].col(0);
    double overlap = std::abs((phi.adjoint() * modes[0].cast<Complex>()).value()) *
                     grid.quad_weight();
    CHECK(overlap == doctest::Approx(1.0).epsilon(1e-8));

    SUBCASE("quad-weighted orthonormality") {
        const CMatrix& V = sys.eigenvectors[0];
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b) {
                const double got = std::abs((V.col(a).adjoint() * V.col(b)).value()) *
                                   grid.quad_weight();
                CHECK(got == doctest::Approx(a == b ? 1.0 : 0.0).epsilon(1e-8));
            }
    }

    SUBCASE("trace is preserved") {
        CMatrix mixed = CMatrix::Zero(21, 21);
        mixed += 2.0 * modes[0].cast<Complex>() * modes[0].transpose().cast<Complex>();
        mixed += 0.7 * modes[1].cast<Complex>() * modes[1].transpose().cast<Complex>();
        SpectralDensityEstimate e2;
        e2.L = 2;
        e2.values.assign(8, mixed);
        const EigenSystem s2 = eigendecompose(e2, grid);
        const double quad_trace = mixed.real().trace() / grid.p;
        CHECK(s2.eigenvalues[0].sum() == doctest::Approx(quad_trace).epsilon(1e-8));
    }
}

TEST_CASE("innovation kernel eigenvalues keep the designed ratios and ties") {
    const SpatialGrid grid(51);
    const Matrix K = innovation_kernel(grid);
    SpectralDensityEstimate est;
    est.L = 1;
    est.values.assign(4, K.cast<Complex>());
    const EigenSystem sys = eigendecompose(est, grid);
    const Vector& lam = sys.eigenvalues[0];
    const double expected[6] = {1.0, 0.6, 0.3, 0.1, 0.1, 0.1};
    for (int m = 1; m < 6; ++m)
        CHECK(lam[m] / lam[0] == doctest::Approx(expected[m]).epsilon(0.05));
    // The fourth eigenvalue ties with the fifth and sixth.
    CHECK(lam[3] / lam[5] == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("cross-spectral estimator: zeros, conjugacy, oracle match") {
    const SpatialGrid grid(15);
    const FrequencyGrid fgrid(64);
    const int L = 5;
    const SparseFTS data = random_sparse(60, 6, 7);
    ScalarTS z;
    z.z.resize(60);
    Rng rng(8);
    for (auto& v : z.z) v = rng.normal();

    SUBCASE("zero response gives a zero estimate") {
        ScalarTS zero = z;
        for (auto& v : zero.z) v = 0.0;
        const auto est = estimate_cross_spectral(data, zero, grid, fgrid, L, 0.3);
        for (const auto& f : est.values) CHECK(f.cwiseAbs().maxCoeff() == 0.0);
    }

    const auto est = estimate_cross_spectral(data, z, grid, fgrid, L, 0.3);

    SUBCASE("conjugate symmetry is exact") {
        for (int i = 1; i < fgrid.n_freq / 2; ++i) {
            const CVector diff = est.values[static_cast<std::size_t>(fgrid.n_freq - i)] -
                                 est.values[static_cast<std::size_t>(i)].conjugate();
            CHECK(diff.cwiseAbs().maxCoeff() == 0.0);
        }
        CHECK(est.values[0].imag().cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("matches the brute-force weighted LS oracle") {
        Rng pick(4);
        for (int rep = 0; rep < 20; ++rep) {
            const int fi = pick.uniform_int(fgrid.n_freq - 1);
            const int i = pick.uniform_int(grid.p - 1);
            const Complex direct =
                oracle::cross_spectral(data, z, L, 0.3, fgrid.omegas[fi], grid.points[i]);
            const Complex got = est.values[static_cast<std::size_t>(fi)][i];
            CHECK(std::abs(got - direct) <= 1e-8 * std::max(1.0, std::abs(direct)));
        }
    }

    SUBCASE("missing responses only drop the affected products") {
        ScalarTS holed = z;
        holed.z[10] = std::numeric_limits<double>::quiet_NaN();
        holed.z[31] = std::numeric_limits<double>::quiet_NaN();
        const auto est2 = estimate_cross_spectral(data, holed, grid, fgrid, L, 0.3);
        Rng pick(14);
        for (int rep = 0; rep < 8; ++rep) {
            const int fi = pick.uniform_int(fgrid.n_freq - 1);
            const int i = pick.uniform_int(grid.p - 1);
            const Complex direct =
                oracle::cross_spectral(data, holed, L, 0.3, fgrid.omegas[fi], grid.points[i]);
            const Complex got = est2.values[static_cast<std::size_t>(fi)][i];
            CHECK(std::abs(got - direct) <= 1e-8 * std::max(1.0, std::abs(direct)));
        }
    }
}

TEST_CASE("iid curves give a flat spectral density" * doctest::timeout(600)) {
    // Temporally independent curves: the spectral density is constant in
    // omega, so the trace at every frequency stays near trace(R_0)/2pi.
    const SpatialGrid grid(31);
    const FrequencyGrid fgrid(128);
    const int T = 600, L = 8;
    std::vector<double> medians;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        SimConfig cfg;
        cfg.T = T;
        cfg.N_max = 40;
        cfg.seed = seed;
        Rng rng_proc(derive_seed(seed, stream::kProcess));
        Rng rng_samp(derive_seed(seed, stream::kSampling));
        // iid: draw innovations directly (no dynamics).
        const Matrix K = innovation_kernel(grid);
        Matrix latent(grid.p, T);
        {
            // Column draws via the separable basis.
            SimConfig iid = cfg;
            (void)iid;
            Eigen::SelfAdjointEigenSolver<Matrix> es(K / grid.p);
            Matrix root = es.eigenvectors() *
                          es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
            for (int t = 0; t < T; ++t) {
                Vector xi(grid.p);
                for (int j = 0; j < grid.p; ++j) xi[j] = rng_proc.normal();
                latent.col(t) = root * xi * std::sqrt(static_cast<double>(grid.p));
            }
        }
        const double sigma2 = grid.integrate(K.diagonal()) / 20.0;
        const SparseFTS data = sparse_sample(latent, 1, cfg, grid, sigma2, rng_samp);
        const RawCovariances raw = raw_covariances(data, L);
        const auto est = estimate_spectral_density(raw, grid, fgrid, L, 0.1, data.counts());
        const AutocovSequence R = invert_to_autocov(est, fgrid);
        const double ref = R.at(0).trace() / grid.p / (2.0 * 3.14159265358979323846);
        std::vector<double> devs;
        for (const auto& F : est.values) {
            const double tr = F.real().trace() / grid.p;
            devs.push_back(std::abs(tr - ref) / ref);
        }
        std::nth_element(devs.begin(), devs.begin() + devs.size() / 2, devs.end());
        medians.push_back(devs[devs.size() / 2]);
    }
    std::nth_element(medians.begin(), medians.begin() + medians.size() / 2, medians.end());
    CHECK(medians[medians.size() / 2] <= 0.25);
}

TEST_SUITE_END();
