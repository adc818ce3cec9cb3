#ifndef SFLR_FORECASTING_HPP
#define SFLR_FORECASTING_HPP

#include "sflr/regression.hpp"
#include "sflr/spectral.hpp"

namespace sflr {

// Second-order structure used by the latent-curve predictor. window is the
// conditioning half-width in time units; negative means condition on all
// observations (the exact stacked solve).
struct StackedModel {
    AutocovSequence R;
    double sigma2 = 0.0;
    int window = -1;
};

// Number of autocovariance lags a conditioning window can touch: Gram
// entries reach |s - s'| <= 2 window, cross entries |t - s| <= window plus
// the padding margin; the full solve reaches T + 2 margin.
inline int lags_for_window(int window, int T, int margin) {
    return window >= 0 ? 2 * window + margin + 2 : T + 2 * margin + 1;
}

// Model assembly from a spectral estimate: inverts enough lags that the
// predictor never silently zero-truncates the (clipped, hence PSD) spectral
// measure inside its window.
StackedModel make_stacked_model(const SpectralDensityEstimate& f, const FrequencyGrid& fgrid,
                                double sigma2, int window, int T, int margin);

struct ForecastResult {
    Matrix curves;               // p x n_targets, predicted latent curves
    int t_first = 0;             // time index (1-based) of the first column
    std::vector<double> zhat;    // predicted responses
    int s_first = 0;             // time index of zhat[0]

    const auto curve(int t) const { return curves.col(t - t_first); }
};

// Best linear unbiased prediction of the latent curves at times t_lo..t_hi
// (1-based; values outside [1, T] give the padding curves). Each target
// conditions on the observations within the model window.
Matrix blup_latent(const SparseFTS& data, const StackedModel& model, const SpatialGrid& grid,
                   int t_lo, int t_hi);

// Response forecasts by pairing the filters with predicted curves:
// zhat_s = sum_k <b_k, curve_{s-k}>.
std::vector<double> forecast_response(const Matrix& curves, int t_first, const FilterSet& filters,
                                      const SpatialGrid& grid, int s_lo, int s_hi);

// Full steps 3-4 of the forecasting algorithm for a given model and filter
// set; with true dynamics and filters this is the oracle predictor.
ForecastResult forecast_pipeline(const SparseFTS& data, const StackedModel& model,
                                 const FilterSet& filters, const SpatialGrid& grid, int s_lo,
                                 int s_hi);

}  // namespace sflr

#endif
