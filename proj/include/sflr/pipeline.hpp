#ifndef SFLR_PIPELINE_HPP
#define SFLR_PIPELINE_HPP

#include "sflr/extensions.hpp"
#include "sflr/forecasting.hpp"
#include "sflr/io.hpp"
#include "sflr/model_selection.hpp"
#include "sflr/simulation.hpp"

#include <filesystem>
#include <optional>

namespace sflr {

struct RunConfig {
    std::string command;
    std::filesystem::path sparse_path;
    std::filesystem::path scalar_path;
    std::filesystem::path regressor2_path;   // activates the joint model
    std::string regressor2_kind = "dense";   // "dense" or "sparse"
    std::filesystem::path outdir = "out";

    int p = 51;
    int n_freq = 512;
    int L = 0;                    // 0 = default rule floor(2 T^{1/3})
    double B_R = 0.0;             // 0 = cross-validate
    double B_V = 0.0;
    double B_C = 0.0;
    std::string method = "tikhonov";   // "tikhonov" or "truncation"
    double reg_param = 0.0;       // 0 = holdout cross-validation
    double reg_param2 = 0.0;      // second regressor (joint model); 0 = same as reg_param
    int M = 0;                    // 0 = auto via the 1% rule
    int window = -2;              // -2 = default (L), -1 = full solve
    std::uint64_t seed = 1;
    int threads = 0;

    // simulate / reproduce settings
    std::string process = "far1";
    std::string scheme = "reg1";
    std::string shape = "b";
    int T = 300;
    int N_max = 40;
    bool reduced = false;
    int replications = 3;

    void validate() const;
    Regularization regularization() const;
    SimConfig sim_config() const;
};

// Everything the scalar pipeline estimates before forecasting.
struct EstimationResult {
    int L = 0;
    double B_R = 0.0, B_V = 0.0, B_C = 0.0;
    double sigma2 = 0.0;
    double reg_param = 0.0;
    int M = 0;
    SpectralDensityEstimate fx;
    CrossSpectralEstimate fzx;
    EigenSystem eig;
    AutocovSequence R;
    FilterSet filters;
    CVTrace cv_trace;
};

// Steps 1-2 of the forecasting algorithm (plus parameter selection where
// requested) on in-memory data.
EstimationResult estimate_scalar_model(const SparseFTS& x, const ScalarTS& z,
                                       const RunConfig& cfg, const SpatialGrid& grid,
                                       const FrequencyGrid& fgrid);

// One reproduce-grid replication: filter error and forecast error of both
// regularizers plus the oracle, on an independent copy.
struct ReplicationRow {
    std::string process, scheme, shape;
    int T, N_max;
    std::string method;
    double delta_B;
    double delta_pred;
    double delta_pred_oracle;
    std::uint64_t seed;
};

std::vector<ReplicationRow> run_replication(const SimConfig& sim, const SpatialGrid& grid,
                                            const FrequencyGrid& fgrid, int window);

int run_command(const RunConfig& cfg);

}  // namespace sflr

#endif
