#ifndef SFLR_EXTENSIONS_HPP
#define SFLR_EXTENSIONS_HPP

#include "sflr/forecasting.hpp"
#include "sflr/regression.hpp"

namespace sflr {

// ---------------------------------------------------------------------------
// Functional response: the transfer function and filters become operators.

struct OperatorCrossSpectral {
    std::vector<CMatrix> values;  // per frequency, rows = response coordinate
    int L = 0;
    double B = 0.0;
};

struct OperatorTransferEstimate {
    std::vector<CMatrix> B;
    Regularization method = Regularization::tikhonov;
    double param = 0.0;
};

struct OperatorFilterSet {
    int M = 0;
    std::vector<Matrix> B;  // index k + M

    const Matrix& at(int k) const { return B[static_cast<std::size_t>(k + M)]; }
    Matrix& at(int k) { return B[static_cast<std::size_t>(k + M)]; }
};

// Surface-smoothed cross-spectral density between two sparsely observed
// series; entry (i, j) pairs the response coordinate i with the regressor
// coordinate j. No lag-0 exclusion: the two noise ensembles are independent.
OperatorCrossSpectral est_cross_spectral_functional(const SparseFTS& data_x,
                                                    const SparseFTS& data_z,
                                                    const SpatialGrid& grid,
                                                    const FrequencyGrid& fgrid, int L,
                                                    double B_R);

OperatorTransferEstimate operator_transfer(const OperatorCrossSpectral& cross,
                                           const EigenSystem& eig, const SpatialGrid& grid,
                                           Regularization method, double param);

OperatorFilterSet operator_filters_from_transfer(const OperatorTransferEstimate& transfer,
                                                 const FrequencyGrid& fgrid, int M);

int choose_M(const OperatorFilterSet& trial, const SpatialGrid& grid);

// Curve-valued forecasts: zhat_s = sum_k B_k applied to the predicted curve.
Matrix forecast_functional_response(const Matrix& curves, int t_first,
                                    const OperatorFilterSet& filters, const SpatialGrid& grid,
                                    int s_lo, int s_hi);

// ---------------------------------------------------------------------------
// Two regressors: one sparse, one fully observed.

struct DenseSpectra {
    std::vector<CMatrix> F22;   // spectral density of the dense regressor
    std::vector<CVector> Fz2;   // cross-spectral density with the response
    Vector mean2;               // pointwise sample mean of the dense curves
    double z_bar = 0.0;         // sample mean of the observed responses
};

// Functional Bartlett estimator over empirical (cross-)covariances of the
// fully observed regressor. F22 is Hermitian-projected and eigenvalue-clipped.
DenseSpectra dense_bartlett(const DenseFTS& data2, const ScalarTS& data_z,
                            const SpatialGrid& grid, const FrequencyGrid& fgrid, int L);

// Cross-spectral density between the sparse and the dense regressor, smoothed
// only in the sparse coordinate.
std::vector<CMatrix> est_cross_sparse_dense(const SparseFTS& data1, const DenseFTS& data2,
                                            const Vector& mean1, const Vector& mean2,
                                            const SpatialGrid& grid, const FrequencyGrid& fgrid,
                                            int L, double B_R);

struct JointSpectralEstimate {
    EigenSystem eig1;             // eigensystem of F11 (sparse regressor)
    EigenSystem eig2;             // eigensystem of F22 (dense regressor)
    std::vector<CMatrix> F11;
    std::vector<CMatrix> F22;
    std::vector<CMatrix> F12;     // F21 = F12 adjoint
    CrossSpectralEstimate Fz1;
    CrossSpectralEstimate Fz2;
};

struct JointTransfer {
    std::vector<CVector> b1;
    std::vector<CVector> b2;
};

// Joint truncation recovery through the inverse of the (K1+K2) x (K1+K2)
// reduced-basis matrix; a singular matrix sheds its smallest included
// eigenvalue and retries, down to (0, 0).
JointTransfer joint_truncation_transfer(const JointSpectralEstimate& joint,
                                        const std::vector<int>& K1, const std::vector<int>& K2,
                                        const SpatialGrid& grid);

// Joint Tikhonov recovery: one 2p x 2p block solve per frequency with two
// regularization levels.
JointTransfer joint_tikhonov_transfer(const JointSpectralEstimate& joint, double rho1,
                                      double rho2, const SpatialGrid& grid);

// Forecast with two regressors; the dense series is mean-padded outside its
// observed range.
std::vector<double> joint_forecast(const Matrix& curves1, int t_first1, const FilterSet& f1,
                                   const Vector& mean1, const DenseFTS& data2,
                                   const FilterSet& f2, const Vector& mean2, double z_bar,
                                   const SpatialGrid& grid, int s_lo, int s_hi);

}  // namespace sflr

#endif
