#include "sflr/regression.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>

using namespace sflr;

TEST_SUITE_BEGIN("regression");

namespace {

constexpr double kPi = 3.14159265358979323846;

// Synthetic frequency-domain setup: constant eigenvalues, real orthonormal
// modes, true filters supported on the first `rank` modes.
struct Synthetic {
    SpatialGrid grid{21};
    FrequencyGrid fgrid{64};
    EigenSystem eig;
    CrossSpectralEstimate fzx;
    std::vector<CVector> b_true;  // per frequency
    FilterSet filters;

    Synthetic(const Vector& lambdas, const std::vector<Vector>& filter_coefs) {
        const auto modes = oracle::orthonormal_modes(grid, grid.p);
        const int rank = static_cast<int>(lambdas.size());
        const int n = fgrid.n_freq;

        // Full eigensystem: planted eigenvalues then zeros.
        Vector lam = Vector::Zero(grid.p);
        CMatrix vecs(grid.p, grid.p);
        for (int j = 0; j < grid.p; ++j) {
            if (j < rank) lam[j] = lambdas[j];
            vecs.col(j) = modes[static_cast<std::size_t>(j)].cast<Complex>();
        }
        eig.eigenvalues.assign(static_cast<std::size_t>(n), lam);
        eig.eigenvectors.assign(static_cast<std::size_t>(n), vecs);

        // True filters b_k = sum_m coef[k][m] * mode_m for k = 0..K-1.
        const int K = static_cast<int>(filter_coefs.size());
        filters = FilterSet::zeros(K - 1, grid.p);
        for (int k = 0; k < K; ++k) {
            Vector bk = Vector::Zero(grid.p);
            for (int m = 0; m < rank; ++m)
                bk += filter_coefs[static_cast<std::size_t>(k)][m] *
                      modes[static_cast<std::size_t>(m)];
            filters.at(k) = bk;
        }

        // Population cross-spectral density: f = conj(F) b_omega / p with
        // real modes, so f = sum_m lambda_m c_m(omega) mode_m.
        fzx.L = 1;
        fzx.values.assign(static_cast<std::size_t>(n), CVector::Zero(grid.p));
        b_true.assign(static_cast<std::size_t>(n), CVector::Zero(grid.p));
        for (int i = 0; i < n; ++i) {
            const double omega = fgrid.omegas[i];
            CVector b = CVector::Zero(grid.p);
            for (int k = 0; k < K; ++k)
                b += Complex(std::cos(k * omega), -std::sin(k * omega)) *
                     filters.at(k).cast<Complex>();
            b_true[static_cast<std::size_t>(i)] = b;
            CVector f = CVector::Zero(grid.p);
            for (int m = 0; m < rank; ++m) {
                const Complex cm = (modes[static_cast<std::size_t>(m)].cast<Complex>()
                                        .transpose() * b).value() *
                                   grid.quad_weight();
                f += lambdas[m] * cm * modes[static_cast<std::size_t>(m)].cast<Complex>();
            }
            fzx.values[static_cast<std::size_t>(i)] = f;
        }
    }
};

double sup_error(const std::vector<CVector>& got, const std::vector<CVector>& want,
                 const SpatialGrid& grid) {
    double worst = 0.0;
    for (std::size_t i = 0; i < got.size(); ++i) {
        const double err =
            std::sqrt((got[i] - want[i]).squaredNorm() * grid.quad_weight());
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace

TEST_CASE("threshold rank counts eigenvalues above the cut") {
    EigenSystem eig;
    Vector lam(3);
    lam << 2.0, 0.5, 0.1;
    eig.eigenvalues.assign(4, lam);
    eig.eigenvectors.assign(4, CMatrix::Identity(3, 3));
    CHECK(threshold_rank(eig, 1.0) == std::vector<int>{1, 1, 1, 1});
    CHECK(threshold_rank(eig, 0.05) == std::vector<int>{3, 3, 3, 3});
    CHECK(threshold_rank(eig, 3.0) == std::vector<int>{0, 0, 0, 0});
}

TEST_CASE("rank-1 truncation inverts exactly on the span") {
    const SpatialGrid grid(21);
    const FrequencyGrid fgrid(16);
    const auto modes = oracle::orthonormal_modes(grid, 2);
    const double lambda = 2.5;
    const Complex c(0.7, 0.0);

    EigenSystem eig;
    Vector lam = Vector::Zero(grid.p);
    lam[0] = lambda;
    CMatrix vecs = CMatrix::Zero(grid.p, grid.p);
    vecs.col(0) = modes[0].cast<Complex>();
    for (int j = 1; j < grid.p; ++j)
        vecs.col(j) = oracle::orthonormal_modes(grid, grid.p)[static_cast<std::size_t>(j)]
                          .cast<Complex>();
    eig.eigenvalues.assign(16, lam);
    eig.eigenvectors.assign(16, vecs);

    CrossSpectralEstimate fzx;
    fzx.L = 1;
    fzx.values.assign(16, CVector(lambda * c * modes[0].cast<Complex>().conjugate()));

    const TransferEstimate est = truncation_transfer(fzx, eig, grid, 1.0);
    for (const auto& b : est.b) {
        const CVector want = c * modes[0].cast<Complex>();
        CHECK((b - want).cwiseAbs().maxCoeff() < 1e-10);
    }

    SUBCASE("threshold above the top eigenvalue yields the zero functional") {
        const TransferEstimate zero = truncation_transfer(fzx, eig, grid, 3.0);
        for (const auto& b : zero.b) CHECK(b.cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("rank-1 Tikhonov shrinks by lambda/(lambda+rho)") {
    const SpatialGrid grid(15);
    const auto modes = oracle::orthonormal_modes(grid, 1);
    const double lambda = 2.0;
    const Complex c(0.4, 0.0);

    EigenSystem eig;
    Vector lam = Vector::Zero(grid.p);
    lam[0] = lambda;
    CMatrix vecs = CMatrix::Zero(grid.p, grid.p);
    const auto full = oracle::orthonormal_modes(grid, grid.p);
    for (int j = 0; j < grid.p; ++j) vecs.col(j) = full[static_cast<std::size_t>(j)].cast<Complex>();
    eig.eigenvalues.assign(8, lam);
    eig.eigenvectors.assign(8, vecs);

    CrossSpectralEstimate fzx;
    fzx.L = 1;
    fzx.values.assign(8, CVector(lambda * c * modes[0].cast<Complex>()));

    const TransferEstimate est = tikhonov_transfer(fzx, eig, grid, 2.0);
    const CVector want = (c * lambda / (lambda + 2.0)) * modes[0].cast<Complex>();
    CHECK((est.b[0] - want).cwiseAbs().maxCoeff() < 1e-10);

    SUBCASE("norm decreases monotonically in rho") {
        double prev = std::numeric_limits<double>::infinity();
        for (double rho : {0.1, 0.5, 2.0, 10.0, 100.0}) {
            const TransferEstimate e = tikhonov_transfer(fzx, eig, grid, rho);
            const double nrm = std::sqrt(e.b[0].squaredNorm() * grid.quad_weight());
            CHECK(nrm <= prev + 1e-12);
            prev = nrm;
        }
    }
}

TEST_CASE("three-mode synthetic matches the direct summation oracle") {
    Vector lambdas(3);
    lambdas << 4.0, 2.0, 1.0;
    std::vector<Vector> coefs(2, Vector::Zero(3));
    coefs[0] << 0.3, -0.2, 0.25;
    coefs[1] << 0.1, 0.35, -0.15;
    const Synthetic syn(lambdas, coefs);

    const TransferEstimate est = truncation_transfer(syn.fzx, syn.eig, syn.grid, 0.5);
    // Direct summation with explicit loops.
    for (int i : {0, 5, 20, 32, 63}) {
        const CVector& f = syn.fzx.values[static_cast<std::size_t>(i)];
        CVector want = CVector::Zero(syn.grid.p);
        for (int m = 0; m < 3; ++m) {
            const CVector phi = syn.eig.eigenvectors[static_cast<std::size_t>(i)].col(m);
            Complex score(0, 0);
            for (int a = 0; a < syn.grid.p; ++a) score += f[a] * phi[a];
            score *= syn.grid.quad_weight();
            want += (score / lambdas[m]) * phi.conjugate();
        }
        CHECK((est.b[static_cast<std::size_t>(i)] - want).cwiseAbs().maxCoeff() < 1e-10);
    }
    // And the truncation recovers the planted transfer exactly.
    CHECK(sup_error(est.b, syn.b_true, syn.grid) < 1e-10);
}

TEST_CASE("Tikhonov error decreases monotonically on exact operators") {
    Vector lambdas(3);
    lambdas << 4.0, 2.0, 1.0;
    std::vector<Vector> coefs(2, Vector::Zero(3));
    coefs[0] << 0.3, -0.2, 0.25;
    coefs[1] << 0.1, 0.35, -0.15;
    const Synthetic syn(lambdas, coefs);

    double prev = std::numeric_limits<double>::infinity();
    double last = 0.0;
    for (double rho : {1e-1, 1e-2, 1e-3}) {
        const TransferEstimate est = tikhonov_transfer(syn.fzx, syn.eig, syn.grid, rho);
        last = sup_error(est.b, syn.b_true, syn.grid);
        CHECK(last < prev);
        prev = last;
    }
    CHECK(last <= 1e-3);
}

TEST_CASE("truncation and Tikhonov agree in the small-regularization limit") {
    // Exactly representable finite-rank input: delta-basis eigenfunctions are
    // quad-orthonormal without rounding, so off-span scores vanish exactly.
    const SpatialGrid grid(15);
    const int n = 16;
    const double sqrt_p = std::sqrt(static_cast<double>(grid.p));
    EigenSystem eig;
    Vector lam = Vector::Zero(grid.p);
    lam[0] = 4.0;
    lam[1] = 2.0;
    lam[2] = 1.0;
    eig.eigenvalues.assign(n, lam);
    eig.eigenvectors.assign(n, CMatrix(sqrt_p * CMatrix::Identity(grid.p, grid.p)));

    CrossSpectralEstimate fzx;
    fzx.L = 1;
    fzx.values.assign(n, CVector::Zero(grid.p));
    for (int i = 0; i < n; ++i) {
        fzx.values[static_cast<std::size_t>(i)][0] = Complex(4.0 * 0.3, 0.0) * sqrt_p;
        fzx.values[static_cast<std::size_t>(i)][1] = Complex(2.0 * -0.2, 0.0) * sqrt_p;
        fzx.values[static_cast<std::size_t>(i)][2] = Complex(1.0 * 0.25, 0.0) * sqrt_p;
    }

    const TransferEstimate trunc = truncation_transfer(fzx, eig, grid, 1e-12);
    const TransferEstimate tikh = tikhonov_transfer(fzx, eig, grid, 1e-12);
    CHECK(sup_error(trunc.b, tikh.b, grid) < 1e-8);
}

TEST_CASE("filter recovery from elementary transfers") {
    const SpatialGrid grid(15);
    const FrequencyGrid fgrid(64);
    Vector beta(grid.p);
    for (int j = 0; j < grid.p; ++j) beta[j] = std::sin(2.0 * kPi * grid.points[j]);

    TransferEstimate constant;
    constant.b.assign(64, beta.cast<Complex>());
    FilterSet f = filters_from_transfer(constant, fgrid, 4);
    CHECK((f.at(0) - beta).cwiseAbs().maxCoeff() < 1e-12);
    for (int k = 1; k <= 4; ++k) {
        CHECK(f.at(k).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(f.at(-k).cwiseAbs().maxCoeff() < 1e-12);
    }

    TransferEstimate lag1;
    lag1.b.resize(64);
    for (int i = 0; i < 64; ++i)
        lag1.b[static_cast<std::size_t>(i)] =
            Complex(std::cos(fgrid.omegas[i]), -std::sin(fgrid.omegas[i])) *
            beta.cast<Complex>();
    f = filters_from_transfer(lag1, fgrid, 4);
    CHECK((f.at(1) - beta).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(f.at(0).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(f.at(-1).cwiseAbs().maxCoeff() < 1e-12);

    // b(omega) = beta (1 + e^{-3 i omega}): lags 0 and 3.
    TransferEstimate two_lags;
    two_lags.b.resize(64);
    for (int i = 0; i < 64; ++i) {
        const double w = fgrid.omegas[i];
        two_lags.b[static_cast<std::size_t>(i)] =
            (Complex(1.0, 0.0) + Complex(std::cos(3 * w), -std::sin(3 * w))) *
            beta.cast<Complex>();
    }
    f = filters_from_transfer(two_lags, fgrid, 5);
    CHECK((f.at(0) - beta).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((f.at(3) - beta).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(f.at(1).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(f.at(2).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("imaginary residue in filter recovery is detected") {
    const SpatialGrid grid(5);
    const FrequencyGrid fgrid(16);
    TransferEstimate broken;
    broken.b.assign(16, CVector::Zero(5));
    broken.b[3][2] = Complex(0.0, 1.0);  // no conjugate partner
    CHECK_THROWS_AS(filters_from_transfer(broken, fgrid, 2), NumericError);
}

TEST_CASE("lag span selection by the one-percent rule") {
    const SpatialGrid grid(15);
    Vector beta(grid.p);
    for (int j = 0; j < grid.p; ++j) beta[j] = std::sin(2.0 * kPi * grid.points[j]);

    FilterSet two = FilterSet::zeros(25, grid.p);
    two.at(0) = beta;
    two.at(1) = 0.5 * beta;
    CHECK(choose_M(two, grid) == 1);

    CHECK(choose_M(FilterSet::zeros(25, grid.p), grid) == 1);

    FilterSet decay = FilterSet::zeros(25, grid.p);
    const double decays[6] = {1.0, 0.9, 0.7, 0.5, 0.3, 0.1};
    for (int k = 0; k <= 5; ++k) decay.at(k) = decays[k] * beta;
    CHECK(choose_M(decay, grid) == 5);
}

TEST_CASE("Plancherel identity between filters and transfer") {
    Vector lambdas(3);
    lambdas << 4.0, 2.0, 1.0;
    std::vector<Vector> coefs(3, Vector::Zero(3));
    coefs[0] << 0.3, -0.2, 0.25;
    coefs[1] << 0.1, 0.35, -0.15;
    coefs[2] << -0.2, 0.1, 0.3;
    const Synthetic syn(lambdas, coefs);

    const int K = kDefaultTrialLags;
    TransferEstimate transfer;
    transfer.b = syn.b_true;
    const FilterSet filters = filters_from_transfer(transfer, syn.fgrid, K);

    double sum_filters = 0.0;
    for (int k = -K; k <= K; ++k) sum_filters += syn.grid.norm2(filters.at(k));
    double integral = 0.0;
    for (int i = 0; i < syn.fgrid.n_freq; ++i)
        integral += syn.b_true[static_cast<std::size_t>(i)].squaredNorm() *
                    syn.grid.quad_weight() * syn.fgrid.step();
    integral /= 2.0 * kPi;
    CHECK(sum_filters == doctest::Approx(integral).epsilon(1e-6));
}

TEST_SUITE_END();
