#ifndef SFLR_REGRESSION_HPP
#define SFLR_REGRESSION_HPP

#include "sflr/spectral.hpp"

namespace sflr {

enum class Regularization { truncation, tikhonov };

// Riesz representers of the frequency response functional, one complex grid
// vector per frequency.
struct TransferEstimate {
    std::vector<CVector> b;
    Regularization method = Regularization::tikhonov;
    double param = 0.0;
};

// Real filter coefficient functions b_k for |k| <= M.
struct FilterSet {
    int M = 0;
    std::vector<Vector> b;  // index k + M

    const Vector& at(int k) const { return b[static_cast<std::size_t>(k + M)]; }
    Vector& at(int k) { return b[static_cast<std::size_t>(k + M)]; }
    static FilterSet zeros(int M, int p) {
        FilterSet f;
        f.M = M;
        f.b.assign(static_cast<std::size_t>(2 * M + 1), Vector::Zero(p));
        return f;
    }
};

// Number of eigenvalues strictly above the threshold, per frequency.
std::vector<int> threshold_rank(const EigenSystem& eig, double upsilon);

TransferEstimate truncation_transfer(const CrossSpectralEstimate& fzx, const EigenSystem& eig,
                                     const SpatialGrid& grid, double upsilon);

TransferEstimate tikhonov_transfer(const CrossSpectralEstimate& fzx, const EigenSystem& eig,
                                   const SpatialGrid& grid, double rho);

// Inverse Fourier integration of the transfer function; keeps the real part
// after checking the imaginary residue.
FilterSet filters_from_transfer(const TransferEstimate& transfer, const FrequencyGrid& fgrid,
                                int M);

// Smallest M >= 1 such that every filter norm beyond M is at most 1% of the
// peak norm.
int choose_M(const FilterSet& trial, const SpatialGrid& grid);

inline constexpr int kDefaultTrialLags = 25;

}  // namespace sflr

#endif
