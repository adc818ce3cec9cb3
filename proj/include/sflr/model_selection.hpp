#ifndef SFLR_MODEL_SELECTION_HPP
#define SFLR_MODEL_SELECTION_HPP

#include "sflr/forecasting.hpp"
#include "sflr/regression.hpp"

namespace sflr {

struct CVPlan {
    int folds = 5;
    std::vector<double> bandwidth_grid;     // candidates for B_R, B_V, B_C
    double holdout_fraction = 0.2;
    std::vector<double> reg_fractions;      // candidate upsilon/rho as fractions
                                            // of sup_omega lambda_1
    std::uint64_t seed = 1;

    static CVPlan defaults();
    void validate() const;
};

struct CVScore {
    std::string what;   // "B_R", "B_V", "B_C", "upsilon", "rho"
    double candidate;
    double score;       // total CV / holdout score (inf means degenerate)
};

using CVTrace = std::vector<CVScore>;

struct BandwidthChoice {
    double B_R;
    double B_V;
};

// K-fold cross-validation over raw covariance pairs for the surface bandwidth
// and over diagonal squared observations for the line bandwidth. Fold
// assignment is seeded and pair-level.
BandwidthChoice cv_bandwidths(const SparseFTS& data, const SpatialGrid& grid, const CVPlan& plan,
                              CVTrace* trace = nullptr);

// Same scheme on the lag-0 raw cross products Z_t * Y_tj.
double cv_cross_bandwidth(const SparseFTS& data_x, const ScalarTS& data_z,
                          const SpatialGrid& grid, const CVPlan& plan, CVTrace* trace = nullptr);

// Everything the holdout search needs that is independent of the candidate
// regularization parameter; built once by prepare_holdout.
struct HoldoutState {
    EigenSystem eig;
    CrossSpectralEstimate fzx;       // estimated from the training part of Z
    Matrix curves;                   // predicted latent curves
    int t_first = 0;
    int S = 0;                       // last training time
    int T = 0;
    int K_max = kDefaultTrialLags;
    std::vector<double> z_test;      // observed responses on the holdout (NaN = missing)
};

struct HoldoutInputs {
    const SparseFTS& x;
    const ScalarTS& z;
    const SpatialGrid& grid;
    const FrequencyGrid& fgrid;
    int L;
    double B_R;
    double B_V;
    double B_C;
    int window;                      // BLUP conditioning half-width
    int K_max = kDefaultTrialLags;
};

HoldoutState prepare_holdout(const HoldoutInputs& in);

// Holdout cross-validation of the regularization parameter: fit the transfer
// on the first 80% of the response, score the mean square forecast error on
// the rest, return the minimiser (ties toward the stronger regularization).
double holdout_regularization(const HoldoutState& state, Regularization method,
                              const SpatialGrid& grid, const FrequencyGrid& fgrid,
                              const CVPlan& plan, CVTrace* trace = nullptr);

// Convenience wrapper that builds the state and runs the search.
double holdout_regularization(const HoldoutInputs& in, Regularization method, const CVPlan& plan,
                              CVTrace* trace = nullptr);

}  // namespace sflr

#endif
