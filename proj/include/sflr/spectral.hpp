#ifndef SFLR_SPECTRAL_HPP
#define SFLR_SPECTRAL_HPP

#include "sflr/core.hpp"
#include "sflr/smoothing.hpp"

namespace sflr {

// Spectral density kernel estimate on the frequency grid. Hermitian per
// frequency, conjugate-symmetric across +-omega; when clip_eigenvalues was
// requested each values[i] is also positive semi-definite.
struct SpectralDensityEstimate {
    std::vector<CMatrix> values;  // n_freq matrices, p x p
    int L = 0;
    double B_R = 0.0;
    bool clipped = false;
};

struct CrossSpectralEstimate {
    std::vector<CVector> values;  // n_freq vectors, length p
    int L = 0;
    double B_C = 0.0;
};

// Autocovariance kernels R_h for h = 0..H-1; R_{-h} = R_h^T.
struct AutocovSequence {
    std::vector<Matrix> R;

    int max_lag() const { return static_cast<int>(R.size()); }  // first lag set to zero
    const Matrix& at(int h) const { return R[static_cast<std::size_t>(h)]; }
    // Kernel value R_h(a, b) with off-grid arguments bilinearly interpolated;
    // zero beyond the stored band.
    double eval(int h, double a, double b, const SpatialGrid& grid) const {
        const int ah = h < 0 ? -h : h;
        if (ah >= max_lag()) return 0.0;
        return h >= 0 ? grid.interp2(R[ah], a, b) : grid.interp2(R[ah], b, a);
    }
};

// Per-frequency quad-weighted eigendecomposition: eigenvalues descending and
// clipped at zero; eigenvectors orthonormal in the L2 inner product.
struct EigenSystem {
    std::vector<Vector> eigenvalues;   // n_freq x p
    std::vector<CMatrix> eigenvectors; // n_freq matrices, columns are eigenfunctions

    int n_freq() const { return static_cast<int>(eigenvalues.size()); }
    double sup_lambda1() const {
        double m = 0.0;
        for (const auto& ev : eigenvalues) m = std::max(m, ev.size() ? ev[0] : 0.0);
        return m;
    }
};

struct SpectralOptions {
    bool clip_eigenvalues = true;
};

// Bartlett-weighted pooled local-linear estimator of the spectral density
// kernel. The 3x3 normal matrix and the per-lag moment vectors are assembled
// once per grid cell; each frequency then costs one small complex solve.
SpectralDensityEstimate estimate_spectral_density(const RawCovariances& raw,
                                                  const SpatialGrid& grid,
                                                  const FrequencyGrid& fgrid, int L, double B_R,
                                                  const std::vector<int>& counts,
                                                  const SpectralOptions& opts = {});

// Closed-form local-linear estimator of the cross-spectral density between a
// scalar response and the sparsely observed regressor. Missing responses drop
// the affected raw cross-products. Degenerate windows are widened x1.5 up to
// three times, after which the cell is NaN.
CrossSpectralEstimate estimate_cross_spectral(const SparseFTS& data_x, const ScalarTS& data_z,
                                              const SpatialGrid& grid,
                                              const FrequencyGrid& fgrid, int L, double B_C);

// Riemann inversion of the spectral density back to autocovariance kernels
// R_h for h = 0..n_lags-1 (n_lags = 0 gives the Bartlett band |h| < L).
// Exact for the degree-<L trigonometric structure of the unclipped
// estimator; for the clipped one the coefficients beyond the band are the
// Fejer-decayed tail that keeps the full sequence positive semi-definite.
AutocovSequence invert_to_autocov(const SpectralDensityEstimate& f,
                                  const FrequencyGrid& fgrid, int n_lags = 0);

EigenSystem eigendecompose(const SpectralDensityEstimate& f, const SpatialGrid& grid);

}  // namespace sflr

#endif
