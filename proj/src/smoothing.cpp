#include "sflr/smoothing.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace sflr {

namespace {

void sort_pairs(LagPairs& pairs) {
    const std::size_t n = pairs.size();
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return pairs.u[a] < pairs.u[b]; });
    LagPairs sorted;
    sorted.u.reserve(n);
    sorted.v.reserve(n);
    sorted.g.reserve(n);
    sorted.t.reserve(n);
    for (int idx : order) {
        sorted.u.push_back(pairs.u[idx]);
        sorted.v.push_back(pairs.v[idx]);
        sorted.g.push_back(pairs.g[idx]);
        sorted.t.push_back(pairs.t[idx]);
    }
    sorted.by_v.resize(n);
    std::iota(sorted.by_v.begin(), sorted.by_v.end(), 0);
    std::stable_sort(sorted.by_v.begin(), sorted.by_v.end(),
                     [&](int a, int b) { return sorted.v[a] < sorted.v[b]; });
    pairs = std::move(sorted);
}

// Index range [lo, hi) of entries with value in [x-B, x+B] in a sorted array.
std::pair<std::size_t, std::size_t> window_range(const std::vector<double>& sorted_vals,
                                                 double x, double B) {
    const auto lo = std::lower_bound(sorted_vals.begin(), sorted_vals.end(), x - B);
    const auto hi = std::upper_bound(sorted_vals.begin(), sorted_vals.end(), x + B);
    return {static_cast<std::size_t>(lo - sorted_vals.begin()),
            static_cast<std::size_t>(hi - sorted_vals.begin())};
}

struct Accum3 {
    // Upper triangle of the 3x3 normal matrix and the right-hand side.
    double a00 = 0, a01 = 0, a02 = 0, a11 = 0, a12 = 0, a22 = 0;
    double b0 = 0, b1 = 0, b2 = 0;

    void add(double w, double d1, double d2, double g) {
        a00 += w;
        a01 += w * d1;
        a02 += w * d2;
        a11 += w * d1 * d1;
        a12 += w * d1 * d2;
        a22 += w * d2 * d2;
        b0 += w * g;
        b1 += w * d1 * g;
        b2 += w * d2 * g;
    }

    // Intercept of the weighted least-squares fit; falls back to the local
    // constant when the normal matrix is rank deficient, NaN when empty.
    double intercept() const {
        if (a00 <= 0.0) return std::numeric_limits<double>::quiet_NaN();
        Eigen::Matrix3d A;
        A << a00, a01, a02, a01, a11, a12, a02, a12, a22;
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(A);
        const double lmax = es.eigenvalues().maxCoeff();
        if (lmax <= 0.0 || es.eigenvalues().minCoeff() <= 1e-12 * lmax) return b0 / a00;
        const Eigen::Vector3d c = A.ldlt().solve(Eigen::Vector3d(b0, b1, b2));
        return c[0];
    }
};

}  // namespace

RawCovariances raw_covariances(const SparseFTS& data, int L) {
    const int T = data.T();
    if (L >= T) throw ConfigError("raw_covariances needs L < T");
    if (L < 0) throw ConfigError("raw_covariances needs L >= 0");
    RawCovariances raw;
    raw.L = L;
    raw.T = T;
    raw.lags.resize(L + 1);

    LagPairs& lag0 = raw.lags[0];
    for (int t = 0; t < T; ++t) {
        const auto& o = data.obs[t];
        const int n = static_cast<int>(o.size());
        for (int j = 0; j < n; ++j)
            for (int k = j + 1; k < n; ++k) {
                lag0.u.push_back(o[j].x);
                lag0.v.push_back(o[k].x);
                lag0.g.push_back(o[j].y * o[k].y);
                lag0.t.push_back(t);
            }
    }
    for (int h = 1; h <= L; ++h) {
        LagPairs& lag = raw.lags[h];
        for (int t = 0; t + h < T; ++t) {
            const auto& lead = data.obs[t + h];
            const auto& base = data.obs[t];
            for (const auto& a : lead)
                for (const auto& b : base) {
                    lag.u.push_back(a.x);
                    lag.v.push_back(b.x);
                    lag.g.push_back(a.y * b.y);
                    lag.t.push_back(t);
                }
        }
    }
    for (int h = 0; h <= L; ++h) {
        if (raw.lags[h].size() == 0)
            raw.empty_lags.push_back(h);
        else
            sort_pairs(raw.lags[h]);
    }
    return raw;
}

LagPairs subset_pairs(const LagPairs& pairs, const std::vector<char>& keep) {
    LagPairs out;
    const std::size_t n = pairs.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (!keep[i]) continue;
        out.u.push_back(pairs.u[i]);
        out.v.push_back(pairs.v[i]);
        out.g.push_back(pairs.g[i]);
        out.t.push_back(pairs.t[i]);
    }
    out.by_v.resize(out.size());
    std::iota(out.by_v.begin(), out.by_v.end(), 0);
    std::stable_sort(out.by_v.begin(), out.by_v.end(),
                     [&](int a, int b) { return out.v[a] < out.v[b]; });
    return out;
}

CovSurfaceEstimate smooth_lag0_surface(const RawCovariances& raw, const SpatialGrid& grid,
                                       double B_R) {
    if (B_R <= 0.0) throw ConfigError("surface smoother needs a positive bandwidth");
    if (raw.lags.empty() || raw.lags[0].size() == 0)
        throw DataError("no lag-0 covariance pairs (need curves with >= 2 observations)");
    const LagPairs& lag0 = raw.lags[0];
    const int p = grid.p;
    Matrix values(p, p);

    parallel_for(static_cast<std::size_t>(p), [&](std::size_t col) {
        const double x = grid.points[static_cast<int>(col)];
        std::vector<Accum3> acc(p);
        // Forward orientation (u, v), then swapped (v, u): together they make
        // up the full j != k double sum of the objective.
        auto ingest = [&](double uu, double vv, double gg) {
            const double ku = epanechnikov((uu - x) / B_R);
            if (ku == 0.0) return;
            for (int j = 0; j < p; ++j) {
                const double y = grid.points[j];
                const double kv = epanechnikov((vv - y) / B_R);
                if (kv == 0.0) continue;
                acc[j].add(ku * kv, (x - uu) / B_R, (y - vv) / B_R, gg);
            }
        };
        auto [lo, hi] = window_range(lag0.u, x, B_R);
        for (std::size_t i = lo; i < hi; ++i) ingest(lag0.u[i], lag0.v[i], lag0.g[i]);
        // Swapped orientation: iterate entries whose v falls in the window.
        const auto lov = std::lower_bound(lag0.by_v.begin(), lag0.by_v.end(), x - B_R,
                                          [&](int idx, double val) { return lag0.v[idx] < val; });
        const auto hiv = std::upper_bound(lag0.by_v.begin(), lag0.by_v.end(), x + B_R,
                                          [&](double val, int idx) { return val < lag0.v[idx]; });
        for (auto it = lov; it != hiv; ++it) ingest(lag0.v[*it], lag0.u[*it], lag0.g[*it]);

        for (int j = 0; j < p; ++j) values(static_cast<int>(col), j) = acc[j].intercept();
    });

    CovSurfaceEstimate est;
    est.values = 0.5 * (values + values.transpose());
    est.bandwidth = B_R;
    return est;
}

double diagonal_signed_distance(double u, double v) {
    const double proj = 0.5 * (u + v);
    const double dist = std::sqrt((proj - u) * (proj - u) + (proj - v) * (proj - v));
    const double s = v > u ? 1.0 : (v < u ? -1.0 : 0.0);
    return s * dist;
}

Vector smooth_diagonal_perpendicular(const RawCovariances& raw, const SpatialGrid& grid,
                                     double B_R) {
    if (B_R <= 0.0) throw ConfigError("diagonal smoother needs a positive bandwidth");
    if (raw.lags.empty() || raw.lags[0].size() == 0)
        throw DataError("no lag-0 covariance pairs (need curves with >= 2 observations)");
    const LagPairs& lag0 = raw.lags[0];
    const int p = grid.p;
    Vector out(p);

    parallel_for(static_cast<std::size_t>(p), [&](std::size_t gi) {
        const double x = grid.points[static_cast<int>(gi)];
        // Design [1, delta, delta^2]; both orientations of every pair are in
        // the same window, with delta flipping sign.
        double s0 = 0, s1 = 0, s2 = 0, s3 = 0, s4 = 0, q0 = 0, q1 = 0, q2 = 0;
        auto [lo, hi] = window_range(lag0.u, x, B_R);
        for (std::size_t i = lo; i < hi; ++i) {
            const double kv = epanechnikov((lag0.v[i] - x) / B_R);
            if (kv == 0.0) continue;
            const double w = epanechnikov((lag0.u[i] - x) / B_R) * kv;
            if (w == 0.0) continue;
            const double d = diagonal_signed_distance(lag0.u[i], lag0.v[i]) / B_R;
            const double d2 = d * d;
            const double g = lag0.g[i];
            // (u,v) with +d and (v,u) with -d.
            s0 += 2 * w;
            s2 += 2 * w * d2;
            s4 += 2 * w * d2 * d2;
            q0 += 2 * w * g;
            q2 += 2 * w * d2 * g;
            // Odd moments cancel between the two orientations.
        }
        double value = std::numeric_limits<double>::quiet_NaN();
        if (s0 > 0.0) {
            Eigen::Matrix3d A;
            A << s0, s1, s2, s1, s2, s3, s2, s3, s4;
            Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(A);
            const double lmax = es.eigenvalues().maxCoeff();
            if (lmax > 0.0 && es.eigenvalues().minCoeff() > 1e-12 * lmax) {
                value = A.ldlt().solve(Eigen::Vector3d(q0, q1, q2))[0];
            } else {
                // Local-linear fallback, then local constant.
                const double det = s0 * s2 - s1 * s1;
                if (det > 1e-12 * std::max(s0 * s2, s1 * s1) && det > 0.0)
                    value = (q0 * s2 - q1 * s1) / det;
                else
                    value = q0 / s0;
            }
        }
        out[static_cast<int>(gi)] = value;
    });
    return out;
}

Vector local_linear_1d(const std::vector<double>& xs, const std::vector<double>& ys,
                       const SpatialGrid& grid, double bandwidth) {
    if (bandwidth <= 0.0) throw ConfigError("line smoother needs a positive bandwidth");
    if (xs.size() != ys.size()) throw ConfigError("point arrays disagree in length");
    std::vector<int> order(xs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return xs[a] < xs[b]; });
    std::vector<double> sx(xs.size()), sy(xs.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        sx[i] = xs[order[i]];
        sy[i] = ys[order[i]];
    }

    const int p = grid.p;
    Vector out(p);
    parallel_for(static_cast<std::size_t>(p), [&](std::size_t gi) {
        const double x = grid.points[static_cast<int>(gi)];
        double s0 = 0, s1 = 0, s2 = 0, q0 = 0, q1 = 0;
        auto [lo, hi] = window_range(sx, x, bandwidth);
        for (std::size_t i = lo; i < hi; ++i) {
            const double z = (sx[i] - x) / bandwidth;
            const double w = epanechnikov(z);
            if (w == 0.0) continue;
            s0 += w;
            s1 += w * z;
            s2 += w * z * z;
            q0 += w * sy[i];
            q1 += w * z * sy[i];
        }
        double value = std::numeric_limits<double>::quiet_NaN();
        if (s0 > 0.0) {
            const double det = s0 * s2 - s1 * s1;
            if (det > 1e-12 * std::max(s0 * s2, s1 * s1))
                value = (q0 * s2 - q1 * s1) / det;
            else
                value = q0 / s0;
        }
        out[static_cast<int>(gi)] = value;
    });
    return out;
}

Vector smooth_noisy_diagonal(const SparseFTS& data, const SpatialGrid& grid, double B_V) {
    std::vector<double> xs, ys;
    xs.reserve(data.n_total());
    ys.reserve(data.n_total());
    for (const auto& curve : data.obs)
        for (const auto& o : curve) {
            xs.push_back(o.x);
            ys.push_back(o.y * o.y);
        }
    if (xs.empty()) throw DataError("no observations for the diagonal smoother");
    return local_linear_1d(xs, ys, grid, B_V);
}

Vector estimate_mean_sparse(const SparseFTS& data, const SpatialGrid& grid, double bandwidth) {
    std::vector<double> xs, ys;
    xs.reserve(data.n_total());
    ys.reserve(data.n_total());
    for (const auto& curve : data.obs)
        for (const auto& o : curve) {
            xs.push_back(o.x);
            ys.push_back(o.y);
        }
    if (xs.empty()) throw DataError("no observations for the mean smoother");
    return local_linear_1d(xs, ys, grid, bandwidth);
}

NoiseEstimate estimate_sigma2(const Vector& noisy_diag, const Vector& denoised_diag,
                              const SpatialGrid& grid) {
    if (noisy_diag.size() != grid.p || denoised_diag.size() != grid.p)
        throw ConfigError("diagonal estimates must live on the spatial grid");
    if (!noisy_diag.allFinite() || !denoised_diag.allFinite())
        throw NumericError("diagonal estimates contain non-finite values");
    double s2 = grid.integrate(noisy_diag - denoised_diag);
    if (s2 <= 0.0) s2 = 1e-6 * std::max(1.0, grid.integrate(noisy_diag));
    return NoiseEstimate{s2};
}

}  // namespace sflr
