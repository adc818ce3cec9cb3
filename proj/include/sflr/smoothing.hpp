#ifndef SFLR_SMOOTHING_HPP
#define SFLR_SMOOTHING_HPP

#include "sflr/core.hpp"

namespace sflr {

// Raw covariance products at one lag h >= 0: entry i is the ordered pair
// (t+h, t) with u the location on curve t+h, v the location on curve t and
// g the product of the two measurements. Arrays are sorted by u; by_v holds
// the permutation sorted by v (used to ingest the swapped orientation, which
// realises lag -h). Lag 0 stores each unordered j<k pair once; estimators
// ingest both orientations.
struct LagPairs {
    std::vector<double> u, v, g;
    std::vector<int> t;       // base time index (0-based) of the pair
    std::vector<int> by_v;

    std::size_t size() const { return u.size(); }
};

struct RawCovariances {
    int L = 0;                    // pairs stored for h = 0..L
    int T = 0;
    std::vector<LagPairs> lags;   // index = h
    std::vector<int> empty_lags;  // lags with no pairs (treated as missing)
};

RawCovariances raw_covariances(const SparseFTS& data, int L);

// Subset of one lag's pairs by index, preserving sort order. Used by
// cross-validation folds.
LagPairs subset_pairs(const LagPairs& pairs, const std::vector<char>& keep);

struct CovSurfaceEstimate {
    Matrix values;     // p x p, symmetrized
    double bandwidth;
};

// Local-linear surface smoother of the lag-0 raw covariances (off-diagonal
// pairs only). Grid cells with an empty kernel window come back NaN.
CovSurfaceEstimate smooth_lag0_surface(const RawCovariances& raw, const SpatialGrid& grid,
                                       double B_R);

// Local-quadratic smoother along the direction perpendicular to the diagonal;
// returns the de-noised diagonal of the lag-0 covariance.
Vector smooth_diagonal_perpendicular(const RawCovariances& raw, const SpatialGrid& grid,
                                     double B_R);

// Signed distance of (u,v) from the diagonal of [0,1]^2.
double diagonal_signed_distance(double u, double v);

// Local-linear line smoother of the squared observations: estimates the
// noise-contaminated diagonal R_0(x,x) + sigma^2.
Vector smooth_noisy_diagonal(const SparseFTS& data, const SpatialGrid& grid, double B_V);

// Local-linear smoother of the raw observations themselves (mean function of
// a sparsely observed series).
Vector estimate_mean_sparse(const SparseFTS& data, const SpatialGrid& grid, double bandwidth);

NoiseEstimate estimate_sigma2(const Vector& noisy_diag, const Vector& denoised_diag,
                              const SpatialGrid& grid);

// Generic 1-D local-linear fit of (x, y) points evaluated on the grid, with
// constant fallback on degenerate windows and NaN on empty ones.
Vector local_linear_1d(const std::vector<double>& xs, const std::vector<double>& ys,
                       const SpatialGrid& grid, double bandwidth);

}  // namespace sflr

#endif
