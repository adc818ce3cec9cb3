#ifndef SFLR_SIMULATION_HPP
#define SFLR_SIMULATION_HPP

#include "sflr/forecasting.hpp"

namespace sflr {

enum class Process { far1, fma4 };
enum class Scheme { reg1, reg2, reg3 };
enum class Shape { A, B };

struct SimConfig {
    Process process = Process::far1;
    int T = 300;
    int N_max = 40;
    Scheme scheme = Scheme::reg1;
    Shape shape = Shape::B;
    double snr = 20.0;
    double tau2 = 1e-3;
    std::uint64_t seed = 1;
    int basis_dim = 21;  // retained for configuration compatibility; curves
                         // are generated directly on the grid

    void validate() const {
        if (T < 50) throw ConfigError("simulation needs T >= 50");
        if (N_max < 0) throw ConfigError("simulation needs N_max >= 0");
        if (!(snr > 0.0)) throw ConfigError("simulation needs snr > 0");
    }
};

// True second-order structure and filters behind a simulated dataset.
struct GroundTruth {
    AutocovSequence R;    // lags 0..H_true
    double sigma2 = 0.0;  // measurement-error variance implied by the SNR
    FilterSet filters;
    Matrix latent;        // p x (margin + T) curves, column c is time c+1-margin
    int t_first = 0;      // time index of the first latent column
    double var_z = 0.0;   // model variance of Z_t including tau^2
};

struct SimulatedDataset {
    SparseFTS x;
    ScalarTS z;
    GroundTruth truth;
};

// The 10-term separable innovation covariance kernel evaluated on the grid.
Matrix innovation_kernel(const SpatialGrid& grid);

// Autoregression kernel kappa*sin(x-y) with kappa scaled so the operator norm
// is 0.7.
Matrix far1_operator(const SpatialGrid& grid);

// Moving-average kernels M_1..M_4 scaled to operator norms 0.8, 0.6, 0.4, 0.2.
std::vector<Matrix> fma4_operators(const SpatialGrid& grid);

// Stationary covariance of the FAR(1) iteration: fixed point of
// R = A R A* + K, iterated to 1e-11.
Matrix far1_lag0_covariance(const Matrix& A, const Matrix& K, const SpatialGrid& grid);

// True autocovariance sequence of either process, lags 0..H.
AutocovSequence true_autocov(Process process, const SpatialGrid& grid, int H);

// Latent curves for times t_first..T (t_first <= 1 gives the presample
// margin needed by the response filters).
Matrix simulate_latent(const SimConfig& cfg, const SpatialGrid& grid, int t_first, Rng& rng);

SparseFTS sparse_sample(const Matrix& latent, int t_first, const SimConfig& cfg,
                        const SpatialGrid& grid, double sigma2, Rng& rng);

FilterSet true_filters(const SimConfig& cfg, const SpatialGrid& grid);

ScalarTS build_response(const Matrix& latent, int t_first, const FilterSet& filters,
                        const SimConfig& cfg, const SpatialGrid& grid, Rng& rng);

// Model variance of Z_t from the true dynamics and filters.
double response_variance(const AutocovSequence& R, const FilterSet& filters, double tau2,
                         const SpatialGrid& grid);

// Full dataset from one seed; use_copy_stream = true draws the independent
// copy used for forecast evaluation.
SimulatedDataset simulate_dataset(const SimConfig& cfg, const SpatialGrid& grid,
                                  bool use_copy_stream = false);

// Filter mean-square estimation error: sum of squared L2 distances over lags.
double metric_delta_B(const FilterSet& est, const FilterSet& truth, const SpatialGrid& grid);

// Variance-normalised forecast error averaged over the evaluated times.
double metric_delta_pred(const std::vector<double>& zhat, const std::vector<double>& z_true,
                         double var_z);

}  // namespace sflr

#endif
