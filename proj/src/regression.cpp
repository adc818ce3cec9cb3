#include "sflr/regression.hpp"

#include <algorithm>
#include <mutex>

namespace sflr {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Shared reconstruction b(omega) = sum_j weight_j * <fzx, phi_j> * conj(phi_j)
// with the bilinear quad-weighted pairing. weight_fn(j) -> multiplier of the
// j-th mode, NaN-free.
template <typename WeightFn>
std::vector<CVector> reconstruct(const CrossSpectralEstimate& fzx, const EigenSystem& eig,
                                 const SpatialGrid& grid, WeightFn&& weight_fn) {
    const int n_freq = static_cast<int>(fzx.values.size());
    if (eig.n_freq() != n_freq)
        throw ConfigError("cross-spectral estimate and eigensystem disagree on the grid");
    const int p = grid.p;
    const double qw = grid.quad_weight();

    std::vector<CVector> out(static_cast<std::size_t>(n_freq));
    const int half = n_freq / 2;
    parallel_for(static_cast<std::size_t>(half + 1), [&](std::size_t fi) {
        const CVector& f = fzx.values[fi];
        const Vector& lam = eig.eigenvalues[fi];
        const CMatrix& phi = eig.eigenvectors[fi];
        CVector b = CVector::Zero(p);
        for (int j = 0; j < p; ++j) {
            const double w = weight_fn(lam[j]);
            if (w == 0.0) continue;
            const Complex score = (phi.col(j).transpose() * f).value() * qw;
            b += (w * score) * phi.col(j).conjugate();
        }
        out[fi] = std::move(b);
    });
    for (int i = 1; i < half; ++i)
        out[static_cast<std::size_t>(n_freq - i)] = out[static_cast<std::size_t>(i)].conjugate();
    return out;
}

}  // namespace

std::vector<int> threshold_rank(const EigenSystem& eig, double upsilon) {
    if (upsilon <= 0.0) throw ConfigError("eigenvalue threshold must be positive");
    std::vector<int> ranks(static_cast<std::size_t>(eig.n_freq()), 0);
    for (int i = 0; i < eig.n_freq(); ++i) {
        const Vector& lam = eig.eigenvalues[static_cast<std::size_t>(i)];
        int k = 0;
        while (k < lam.size() && lam[k] > upsilon) ++k;
        ranks[static_cast<std::size_t>(i)] = k;
    }
    return ranks;
}

TransferEstimate truncation_transfer(const CrossSpectralEstimate& fzx, const EigenSystem& eig,
                                     const SpatialGrid& grid, double upsilon) {
    if (upsilon <= 0.0) throw ConfigError("eigenvalue threshold must be positive");
    TransferEstimate est;
    est.method = Regularization::truncation;
    est.param = upsilon;
    est.b = reconstruct(fzx, eig, grid,
                        [upsilon](double lam) { return lam > upsilon ? 1.0 / lam : 0.0; });
    return est;
}

TransferEstimate tikhonov_transfer(const CrossSpectralEstimate& fzx, const EigenSystem& eig,
                                   const SpatialGrid& grid, double rho) {
    if (rho <= 0.0) throw ConfigError("Tikhonov parameter must be positive");
    TransferEstimate est;
    est.method = Regularization::tikhonov;
    est.param = rho;
    est.b = reconstruct(fzx, eig, grid, [rho](double lam) { return 1.0 / (lam + rho); });
    return est;
}

FilterSet filters_from_transfer(const TransferEstimate& transfer, const FrequencyGrid& fgrid,
                                int M) {
    if (M < 0) throw ConfigError("filter recovery needs M >= 0");
    if (fgrid.n_freq <= 2 * M)
        throw ConfigError("frequency grid too coarse for the requested lags: need n_freq > 2M");
    if (static_cast<int>(transfer.b.size()) != fgrid.n_freq)
        throw ConfigError("transfer estimate does not match the frequency grid");
    const int p = static_cast<int>(transfer.b[0].size());

    FilterSet filters;
    filters.M = M;
    filters.b.assign(static_cast<std::size_t>(2 * M + 1), Vector::Zero(p));
    double max_imag = 0.0;
    std::mutex imag_mutex;
    parallel_for(static_cast<std::size_t>(2 * M + 1), [&](std::size_t slot) {
        const int k = static_cast<int>(slot) - M;
        CVector acc = CVector::Zero(p);
        for (int i = 0; i < fgrid.n_freq; ++i) {
            const double omega = fgrid.omegas[i];
            const Complex tw(std::cos(k * omega), std::sin(k * omega));
            acc += tw * transfer.b[static_cast<std::size_t>(i)];
        }
        acc /= static_cast<double>(fgrid.n_freq);  // (1/2pi) * Riemann step
        const double im = acc.imag().cwiseAbs().maxCoeff();
        {
            std::lock_guard<std::mutex> lock(imag_mutex);
            max_imag = std::max(max_imag, im);
        }
        filters.b[slot] = acc.real();
    });
    if (!(max_imag <= 1e-6))
        throw NumericError("filter recovery left an imaginary residue of " +
                           std::to_string(max_imag) + "; +-omega conjugacy broken");
    return filters;
}

int choose_M(const FilterSet& trial, const SpatialGrid& grid) {
    const int K = trial.M;
    std::vector<double> norm(static_cast<std::size_t>(K + 1), 0.0);
    double peak = 0.0;
    for (int k = -K; k <= K; ++k) {
        const double n = std::sqrt(grid.norm2(trial.at(k)));
        const int a = k < 0 ? -k : k;
        norm[static_cast<std::size_t>(a)] = std::max(norm[static_cast<std::size_t>(a)], n);
        peak = std::max(peak, n);
    }
    if (peak == 0.0) return 1;
    const double cutoff = 0.01 * peak;
    // Largest |k| whose norm still exceeds the cutoff.
    int m = 1;
    for (int a = 1; a <= K; ++a)
        if (norm[static_cast<std::size_t>(a)] > cutoff) m = a;
    return m;
}

}  // namespace sflr
