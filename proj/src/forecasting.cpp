#include "sflr/forecasting.hpp"

#include <algorithm>

namespace sflr {

namespace {

struct FlatObs {
    int t;  // 0-based time
    double x;
    double y;
};

}  // namespace

StackedModel make_stacked_model(const SpectralDensityEstimate& f, const FrequencyGrid& fgrid,
                                double sigma2, int window, int T, int margin) {
    StackedModel model;
    model.sigma2 = sigma2;
    model.window = window;
    model.R = invert_to_autocov(f, fgrid, lags_for_window(window, T, margin));
    return model;
}

Matrix blup_latent(const SparseFTS& data, const StackedModel& model, const SpatialGrid& grid,
                   int t_lo, int t_hi) {
    if (t_hi < t_lo) throw ConfigError("blup_latent: empty target range");
    if (!(model.sigma2 > 0.0)) throw ConfigError("blup_latent needs sigma2 > 0");
    const int T = data.T();
    const int p = grid.p;
    const int n_targets = t_hi - t_lo + 1;

    Matrix curves = Matrix::Zero(p, n_targets);

    parallel_for(static_cast<std::size_t>(n_targets), [&](std::size_t ti) {
        const int target = t_lo + static_cast<int>(ti);  // 1-based
        int s_lo = 1, s_hi = T;
        if (model.window >= 0) {
            s_lo = std::max(1, target - model.window);
            s_hi = std::min(T, target + model.window);
        }
        std::vector<FlatObs> obs;
        for (int s = s_lo; s <= s_hi; ++s)
            for (const auto& o : data.obs[static_cast<std::size_t>(s - 1)])
                obs.push_back({s - 1, o.x, o.y});
        const int n = static_cast<int>(obs.size());
        if (n == 0) return;  // prior mean

        Matrix G(n, n);
        Vector y(n);
        for (int a = 0; a < n; ++a) {
            y[a] = obs[static_cast<std::size_t>(a)].y;
            for (int b = 0; b <= a; ++b) {
                const double v = model.R.eval(obs[static_cast<std::size_t>(a)].t -
                                                  obs[static_cast<std::size_t>(b)].t,
                                              obs[static_cast<std::size_t>(a)].x,
                                              obs[static_cast<std::size_t>(b)].x, grid);
                G(a, b) = v;
                G(b, a) = v;
            }
            G(a, a) += model.sigma2;
        }

        const double mean_diag = G.diagonal().mean();
        Vector alpha;
        bool solved = false;
        for (double jitter : {0.0, 1e-10, 1e-8, 1e-6}) {
            Matrix Gj = G;
            if (jitter > 0.0) Gj.diagonal().array() += jitter * mean_diag;
            Eigen::LLT<Matrix> llt(Gj);
            if (llt.info() != Eigen::Success) continue;
            alpha = llt.solve(y);
            const double rel = (Gj * alpha - y).norm() / std::max(1e-300, y.norm());
            if (rel <= 1e-8) {
                solved = true;
                break;
            }
        }
        if (!solved)
            throw NumericError("latent-curve predictor: Gram solve failed at time " +
                               std::to_string(target) + " even after jitter escalation");

        // Cross covariances between the target curve on the grid and the
        // conditioning observations.
        Vector curve = Vector::Zero(p);
        const int band = model.R.max_lag();
        for (int a = 0; a < n; ++a) {
            const int h = (target - 1) - obs[static_cast<std::size_t>(a)].t;
            if (h >= band || h <= -band) continue;
            const Matrix& Rh = model.R.at(h < 0 ? -h : h);
            const double xs = obs[static_cast<std::size_t>(a)].x;
            // Interpolate in the observation coordinate only.
            Vector cross =
                h >= 0 ? grid.interp_cols(Rh, xs) : Vector(grid.interp_cols(Rh.transpose(), xs));
            curve += alpha[a] * cross;
        }
        curves.col(static_cast<int>(ti)) = curve;
    });

    return curves;
}

std::vector<double> forecast_response(const Matrix& curves, int t_first, const FilterSet& filters,
                                      const SpatialGrid& grid, int s_lo, int s_hi) {
    if (s_hi < s_lo) throw ConfigError("forecast_response: empty target range");
    const int n_curves = static_cast<int>(curves.cols());
    const double qw = grid.quad_weight();
    std::vector<double> zhat;
    zhat.reserve(static_cast<std::size_t>(s_hi - s_lo + 1));
    for (int s = s_lo; s <= s_hi; ++s) {
        double sum = 0.0;
        for (int k = -filters.M; k <= filters.M; ++k) {
            const int idx = (s - k) - t_first;
            if (idx < 0 || idx >= n_curves)
                throw NumericError("forecast_response: missing predicted curve at time " +
                                   std::to_string(s - k));
            sum += filters.at(k).dot(curves.col(idx)) * qw;
        }
        zhat.push_back(sum);
    }
    return zhat;
}

ForecastResult forecast_pipeline(const SparseFTS& data, const StackedModel& model,
                                 const FilterSet& filters, const SpatialGrid& grid, int s_lo,
                                 int s_hi) {
    ForecastResult result;
    result.t_first = s_lo - filters.M;
    result.curves = blup_latent(data, model, grid, s_lo - filters.M, s_hi + filters.M);
    result.s_first = s_lo;
    result.zhat = forecast_response(result.curves, result.t_first, filters, grid, s_lo, s_hi);
    return result;
}

}  // namespace sflr
