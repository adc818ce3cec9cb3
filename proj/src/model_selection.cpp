#include "sflr/model_selection.hpp"

#include "sflr/smoothing.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace sflr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<double> log_spaced(double lo, double hi, int n) {
    std::vector<double> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        out[static_cast<std::size_t>(i)] =
            std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * i / (n - 1));
    return out;
}

// Seeded round-robin fold labels after a Fisher-Yates shuffle.
std::vector<int> fold_labels(std::size_t n, int folds, Rng& rng) {
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = rng.next_u64() % i;
        std::swap(idx[i - 1], idx[j]);
    }
    std::vector<int> label(n);
    for (std::size_t r = 0; r < n; ++r)
        label[static_cast<std::size_t>(idx[r])] = static_cast<int>(r % static_cast<std::size_t>(folds));
    return label;
}

// CV score of a 1-D local-linear smoother over (x, y) points.
double cv_line_smoother(const std::vector<double>& xs, const std::vector<double>& ys,
                        const SpatialGrid& grid, double bandwidth,
                        const std::vector<int>& label, int folds) {
    double total = 0.0;
    for (int f = 0; f < folds; ++f) {
        std::vector<double> tx, ty;
        for (std::size_t i = 0; i < xs.size(); ++i)
            if (label[i] != f) {
                tx.push_back(xs[i]);
                ty.push_back(ys[i]);
            }
        if (tx.empty()) return kInf;
        const Vector fit = local_linear_1d(tx, ty, grid, bandwidth);
        for (std::size_t i = 0; i < xs.size(); ++i) {
            if (label[i] != f) continue;
            const double pred = grid.interp1(fit, xs[i]);
            if (!std::isfinite(pred)) return kInf;
            const double d = pred - ys[i];
            total += d * d;
        }
    }
    return total;
}

// Score minimiser; ties go to the later (more regularized / smoother)
// candidate, so candidates must be passed in ascending order.
template <typename ScoreFn>
double argmin_candidate(const std::vector<double>& candidates, const std::string& what,
                        ScoreFn&& score_fn, CVTrace* trace) {
    double best = kInf;
    double chosen = std::numeric_limits<double>::quiet_NaN();
    for (double c : candidates) {
        const double s = score_fn(c);
        if (trace) trace->push_back({what, c, s});
        if (std::isfinite(s) && s <= best) {
            best = s;
            chosen = c;
        }
    }
    if (!std::isfinite(chosen))
        throw NumericError("cross-validation of " + what + ": every candidate degenerated");
    return chosen;
}

}  // namespace

CVPlan CVPlan::defaults() {
    CVPlan plan;
    plan.folds = 5;
    plan.bandwidth_grid = log_spaced(0.05, 0.6, 8);
    plan.holdout_fraction = 0.2;
    plan.reg_fractions = log_spaced(1e-4, 0.5, 12);
    plan.seed = 1;
    return plan;
}

void CVPlan::validate() const {
    if (folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
    if (bandwidth_grid.empty() || reg_fractions.empty())
        throw ConfigError("cross-validation needs non-empty candidate grids");
    for (double b : bandwidth_grid)
        if (!(b > 0.0)) throw ConfigError("bandwidth candidates must be positive");
    for (double r : reg_fractions)
        if (!(r > 0.0)) throw ConfigError("regularization candidates must be positive");
    if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0))
        throw ConfigError("holdout fraction must lie in (0,1)");
}

BandwidthChoice cv_bandwidths(const SparseFTS& data, const SpatialGrid& grid, const CVPlan& plan,
                              CVTrace* trace) {
    plan.validate();
    const RawCovariances raw = raw_covariances(data, std::min(1, data.T() - 1));
    if (raw.lags[0].size() == 0)
        throw DataError("bandwidth CV needs lag-0 pairs (curves with >= 2 observations)");
    const LagPairs& lag0 = raw.lags[0];

    Rng rng(derive_seed(plan.seed, stream::kFolds));
    const std::vector<int> pair_label = fold_labels(lag0.size(), plan.folds, rng);

    const double B_R = argmin_candidate(
        plan.bandwidth_grid, "B_R",
        [&](double b) {
            double total = 0.0;
            for (int f = 0; f < plan.folds; ++f) {
                std::vector<char> keep(lag0.size());
                for (std::size_t i = 0; i < lag0.size(); ++i) keep[i] = pair_label[i] != f;
                RawCovariances sub;
                sub.L = 0;
                sub.T = raw.T;
                sub.lags.push_back(subset_pairs(lag0, keep));
                if (sub.lags[0].size() == 0) return kInf;
                const CovSurfaceEstimate fit = smooth_lag0_surface(sub, grid, b);
                for (std::size_t i = 0; i < lag0.size(); ++i) {
                    if (pair_label[i] != f) continue;
                    const double pred = grid.interp2(fit.values, lag0.u[i], lag0.v[i]);
                    if (!std::isfinite(pred)) return kInf;
                    const double d = pred - lag0.g[i];
                    total += d * d;
                }
            }
            return total;
        },
        trace);

    // Line-smoother bandwidth: squared observations against location.
    std::vector<double> xs, ys;
    for (const auto& curve : data.obs)
        for (const auto& o : curve) {
            xs.push_back(o.x);
            ys.push_back(o.y * o.y);
        }
    const std::vector<int> point_label = fold_labels(xs.size(), plan.folds, rng);
    const double B_V = argmin_candidate(
        plan.bandwidth_grid, "B_V",
        [&](double b) { return cv_line_smoother(xs, ys, grid, b, point_label, plan.folds); },
        trace);

    return {B_R, B_V};
}

double cv_cross_bandwidth(const SparseFTS& data_x, const ScalarTS& data_z,
                          const SpatialGrid& grid, const CVPlan& plan, CVTrace* trace) {
    plan.validate();
    if (data_x.T() != data_z.T())
        throw DataError("cross-bandwidth CV: series disagree in length");
    std::vector<double> xs, ys;
    for (int t = 0; t < data_x.T(); ++t) {
        const double z = data_z.z[static_cast<std::size_t>(t)];
        if (ScalarTS::missing(z)) continue;
        for (const auto& o : data_x.obs[static_cast<std::size_t>(t)]) {
            xs.push_back(o.x);
            ys.push_back(z * o.y);
        }
    }
    if (xs.empty()) throw DataError("cross-bandwidth CV: no raw cross products");
    Rng rng(derive_seed(plan.seed, stream::kFolds) ^ 0x5bd1e995ULL);
    const std::vector<int> label = fold_labels(xs.size(), plan.folds, rng);
    return argmin_candidate(
        plan.bandwidth_grid, "B_C",
        [&](double b) { return cv_line_smoother(xs, ys, grid, b, label, plan.folds); }, trace);
}

HoldoutState prepare_holdout(const HoldoutInputs& in) {
    const int T = in.x.T();
    if (T < 25) throw DataError("holdout CV needs T >= 25");
    if (in.z.T() != T) throw DataError("holdout CV: series disagree in length");

    HoldoutState state;
    state.T = T;
    state.S = static_cast<int>(std::floor(0.8 * T));
    state.K_max = in.K_max;

    // Dynamics from all regressor data.
    const RawCovariances raw = raw_covariances(in.x, in.L);
    const SpectralDensityEstimate fx =
        estimate_spectral_density(raw, in.grid, in.fgrid, in.L, in.B_R, in.x.counts());
    state.eig = eigendecompose(fx, in.grid);

    const Vector noisy = smooth_noisy_diagonal(in.x, in.grid, in.B_V);
    const Vector denoised = smooth_diagonal_perpendicular(raw, in.grid, in.B_R);
    const double sigma2 = estimate_sigma2(noisy, denoised, in.grid).sigma2;

    // Cross-spectral density from the training part of the response only.
    ScalarTS z_train = in.z;
    for (int t = state.S; t < T; ++t)
        z_train.z[static_cast<std::size_t>(t)] = std::numeric_limits<double>::quiet_NaN();
    state.fzx = estimate_cross_spectral(in.x, z_train, in.grid, in.fgrid, in.L, in.B_C);

    // Latent curves once; every candidate filter set reuses them.
    const StackedModel model =
        make_stacked_model(fx, in.fgrid, sigma2, in.window, T, in.K_max);
    state.t_first = state.S + 1 - in.K_max;
    state.curves = blup_latent(in.x, model, in.grid, state.t_first, T + in.K_max);

    state.z_test.assign(in.z.z.begin() + state.S, in.z.z.end());
    return state;
}

double holdout_regularization(const HoldoutState& state, Regularization method,
                              const SpatialGrid& grid, const FrequencyGrid& fgrid,
                              const CVPlan& plan, CVTrace* trace) {
    plan.validate();
    const double lam_top = state.eig.sup_lambda1();
    if (!(lam_top > 0.0))
        throw NumericError("holdout CV: estimated spectral density has no positive eigenvalues");

    std::vector<double> candidates;
    candidates.reserve(plan.reg_fractions.size());
    for (double f : plan.reg_fractions) candidates.push_back(f * lam_top);
    std::sort(candidates.begin(), candidates.end());

    const std::string what = method == Regularization::truncation ? "upsilon" : "rho";
    return argmin_candidate(
        candidates, what,
        [&](double param) {
            const TransferEstimate transfer =
                method == Regularization::truncation
                    ? truncation_transfer(state.fzx, state.eig, grid, param)
                    : tikhonov_transfer(state.fzx, state.eig, grid, param);
            FilterSet trial;
            try {
                trial = filters_from_transfer(transfer, fgrid, state.K_max);
            } catch (const NumericError&) {
                return kInf;
            }
            const int M = choose_M(trial, grid);
            FilterSet filters = FilterSet::zeros(M, grid.p);
            for (int k = -M; k <= M; ++k) filters.at(k) = trial.at(k);

            double mse = 0.0;
            int n = 0;
            for (int s = state.S + 1; s <= state.T; ++s) {
                const double z_obs = state.z_test[static_cast<std::size_t>(s - state.S - 1)];
                if (ScalarTS::missing(z_obs)) continue;
                double zhat = 0.0;
                for (int k = -M; k <= M; ++k) {
                    const int idx = (s - k) - state.t_first;
                    if (idx < 0 || idx >= state.curves.cols()) return kInf;
                    zhat += filters.at(k).dot(state.curves.col(idx)) * grid.quad_weight();
                }
                if (!std::isfinite(zhat)) return kInf;
                const double d = zhat - z_obs;
                mse += d * d;
                ++n;
            }
            return n > 0 ? mse / n : kInf;
        },
        trace);
}

double holdout_regularization(const HoldoutInputs& in, Regularization method, const CVPlan& plan,
                              CVTrace* trace) {
    const HoldoutState state = prepare_holdout(in);
    return holdout_regularization(state, method, in.grid, in.fgrid, plan, trace);
}

}  // namespace sflr
