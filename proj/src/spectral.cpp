#include "sflr/spectral.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <mutex>

namespace sflr {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Per-cell frequency-independent pieces of the pooled normal equations.
struct CellMoments {
    double a00 = 0, a01 = 0, a02 = 0, a11 = 0, a12 = 0, a22 = 0;
    // m[(h + H) * 3 + r]: per-lag real moment vectors, h = -H..H.
    std::vector<double> m;
};

enum class CellRank { full, constant, empty };

void mirror_conjugate(std::vector<CMatrix>& values, const FrequencyGrid& fgrid) {
    for (int i = 1; i < fgrid.n_freq / 2; ++i)
        values[static_cast<std::size_t>(fgrid.n_freq - i)] =
            values[static_cast<std::size_t>(i)].conjugate();
}

void mirror_conjugate(std::vector<CVector>& values, const FrequencyGrid& fgrid) {
    for (int i = 1; i < fgrid.n_freq / 2; ++i)
        values[static_cast<std::size_t>(fgrid.n_freq - i)] =
            values[static_cast<std::size_t>(i)].conjugate();
}

}  // namespace

SpectralDensityEstimate estimate_spectral_density(const RawCovariances& raw,
                                                  const SpatialGrid& grid,
                                                  const FrequencyGrid& fgrid, int L, double B_R,
                                                  const std::vector<int>& counts,
                                                  const SpectralOptions& opts) {
    if (L < 1) throw ConfigError("spectral estimator needs L >= 1");
    if (raw.L < L) throw ConfigError("raw covariances hold fewer lags than requested");
    if (fgrid.n_freq <= 2 * L) throw ConfigError("frequency grid too coarse: need n_freq > 2L");
    if (B_R <= 0.0) throw ConfigError("spectral estimator needs a positive bandwidth");

    const int T = static_cast<int>(counts.size());
    double nbar = 0.0, n2bar = 0.0;
    for (int c : counts) {
        nbar += c;
        n2bar += static_cast<double>(c) * c;
    }
    nbar /= T;
    n2bar /= T;
    const double norm0 = T * (n2bar - nbar);  // count of lag-0 ordered pairs
    if (norm0 <= 0.0)
        throw DataError("no lag-0 pairs: every curve has fewer than two observations");

    const int p = grid.p;
    const int H = L - 1;  // Bartlett weight vanishes at |h| = L
    const int n_lags = 2 * H + 1;
    const BartlettWeights W(L);

    std::vector<std::vector<CellMoments>> cells(static_cast<std::size_t>(p));
    std::vector<std::vector<CellRank>> ranks(static_cast<std::size_t>(p));
    std::vector<std::vector<Eigen::Matrix3d>> inverses(static_cast<std::size_t>(p));

    // Phase 1: accumulate the normal matrix and per-lag moments, one grid
    // column per task.
    parallel_for(static_cast<std::size_t>(p), [&](std::size_t col) {
        const double x = grid.points[static_cast<int>(col)];
        auto& cc = cells[col];
        cc.assign(static_cast<std::size_t>(p), CellMoments{});
        for (auto& c : cc) c.m.assign(static_cast<std::size_t>(n_lags) * 3, 0.0);

        const double inv_b2 = 1.0 / (B_R * B_R);
        for (int h = 0; h <= H; ++h) {
            const LagPairs& lag = raw.lags[static_cast<std::size_t>(h)];
            if (lag.size() == 0) continue;
            const double norm_h = h == 0 ? norm0 : (T - h) * nbar * nbar;
            const double pref = W(h) / norm_h * inv_b2;

            auto ingest = [&](double uu, double vv, double gg, int lag_slot) {
                const double ku = epanechnikov((uu - x) / B_R);
                if (ku == 0.0) return;
                const double kw = ku * pref;
                const double d1 = (uu - x) / B_R;
                for (int j = 0; j < p; ++j) {
                    const double y = grid.points[j];
                    const double kv = epanechnikov((vv - y) / B_R);
                    if (kv == 0.0) continue;
                    const double w = kw * kv;
                    const double d2 = (vv - y) / B_R;
                    CellMoments& c = cc[static_cast<std::size_t>(j)];
                    c.a00 += w;
                    c.a01 += w * d1;
                    c.a02 += w * d2;
                    c.a11 += w * d1 * d1;
                    c.a12 += w * d1 * d2;
                    c.a22 += w * d2 * d2;
                    double* mm = &c.m[static_cast<std::size_t>(lag_slot) * 3];
                    mm[0] += w * gg;
                    mm[1] += w * d1 * gg;
                    mm[2] += w * d2 * gg;
                }
            };

            // Forward orientation realises lag +h, the swapped one lag -h;
            // at h = 0 both land in the centre slot (full j != k sum).
            const auto lo = std::lower_bound(lag.u.begin(), lag.u.end(), x - B_R);
            const auto hi = std::upper_bound(lag.u.begin(), lag.u.end(), x + B_R);
            for (auto it = lo; it != hi; ++it) {
                const std::size_t i = static_cast<std::size_t>(it - lag.u.begin());
                ingest(lag.u[i], lag.v[i], lag.g[i], h + H);
            }
            const auto lov = std::lower_bound(lag.by_v.begin(), lag.by_v.end(), x - B_R,
                                              [&](int idx, double val) { return lag.v[idx] < val; });
            const auto hiv = std::upper_bound(lag.by_v.begin(), lag.by_v.end(), x + B_R,
                                              [&](double val, int idx) { return val < lag.v[idx]; });
            for (auto it = lov; it != hiv; ++it) {
                const std::size_t i = static_cast<std::size_t>(*it);
                ingest(lag.v[i], lag.u[i], lag.g[i], H - h);
            }
        }

        auto& rk = ranks[col];
        auto& inv = inverses[col];
        rk.assign(static_cast<std::size_t>(p), CellRank::empty);
        inv.assign(static_cast<std::size_t>(p), Eigen::Matrix3d::Zero());
        for (int j = 0; j < p; ++j) {
            const CellMoments& c = cc[static_cast<std::size_t>(j)];
            if (c.a00 <= 0.0) continue;
            Eigen::Matrix3d A;
            A << c.a00, c.a01, c.a02, c.a01, c.a11, c.a12, c.a02, c.a12, c.a22;
            Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(A);
            const double lmax = es.eigenvalues().maxCoeff();
            if (lmax > 0.0 && es.eigenvalues().minCoeff() > 1e-12 * lmax) {
                rk[static_cast<std::size_t>(j)] = CellRank::full;
                inv[static_cast<std::size_t>(j)] = A.inverse();
            } else {
                rk[static_cast<std::size_t>(j)] = CellRank::constant;
            }
        }
    });

    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j)
            if (ranks[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] == CellRank::empty)
                throw NumericError("spectral estimator: no raw pairs within bandwidth of grid "
                                   "point (" +
                                   std::to_string(i) + "," + std::to_string(j) +
                                   "); increase B_R");

    SpectralDensityEstimate est;
    est.L = L;
    est.B_R = B_R;
    est.clipped = opts.clip_eigenvalues;
    est.values.assign(static_cast<std::size_t>(fgrid.n_freq), CMatrix());

    const double scale = L / (2.0 * kPi);
    const int half = fgrid.n_freq / 2;

    // Phase 2: per-frequency assembly and solve, frequencies 0..n/2 only; the
    // positive half mirrors by conjugation.
    parallel_for(static_cast<std::size_t>(half + 1), [&](std::size_t fi) {
        const double omega = fgrid.omegas[static_cast<int>(fi)];
        std::vector<Complex> twiddle(static_cast<std::size_t>(n_lags));
        for (int h = -H; h <= H; ++h)
            twiddle[static_cast<std::size_t>(h + H)] =
                Complex(std::cos(h * omega), -std::sin(h * omega));

        CMatrix F(p, p);
        for (int i = 0; i < p; ++i) {
            for (int j = 0; j < p; ++j) {
                const CellMoments& c = cells[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
                Complex b0(0, 0), b1(0, 0), b2(0, 0);
                const double* mm = c.m.data();
                for (int s = 0; s < n_lags; ++s) {
                    const Complex tw = twiddle[static_cast<std::size_t>(s)];
                    b0 += tw * mm[3 * s];
                    b1 += tw * mm[3 * s + 1];
                    b2 += tw * mm[3 * s + 2];
                }
                Complex c0;
                if (ranks[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] ==
                    CellRank::full) {
                    const Eigen::Matrix3d& Ai = inverses[static_cast<std::size_t>(i)]
                                                        [static_cast<std::size_t>(j)];
                    c0 = Ai(0, 0) * b0 + Ai(0, 1) * b1 + Ai(0, 2) * b2;
                } else {
                    c0 = b0 / c.a00;
                }
                F(i, j) = scale * c0;
            }
        }
        // The raw estimator is Hermitian only up to floating-point noise.
        F = 0.5 * (F + F.adjoint()).eval();
        if (fi == 0) F = F.real().cast<Complex>();  // omega = -pi is self-paired
        if (opts.clip_eigenvalues) {
            Eigen::SelfAdjointEigenSolver<CMatrix> es(F);
            Vector lam = es.eigenvalues().cwiseMax(0.0);
            F = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().adjoint();
            F = 0.5 * (F + F.adjoint()).eval();
        }
        est.values[fi] = std::move(F);
    });

    mirror_conjugate(est.values, fgrid);
    return est;
}

CrossSpectralEstimate estimate_cross_spectral(const SparseFTS& data_x, const ScalarTS& data_z,
                                              const SpatialGrid& grid,
                                              const FrequencyGrid& fgrid, int L, double B_C) {
    if (L < 1) throw ConfigError("cross-spectral estimator needs L >= 1");
    if (fgrid.n_freq <= 2 * L) throw ConfigError("frequency grid too coarse: need n_freq > 2L");
    if (B_C <= 0.0) throw ConfigError("cross-spectral estimator needs a positive bandwidth");
    const int T = data_x.T();
    if (data_z.T() != T) throw DataError("regressor and response series disagree in length");
    if (L >= T) throw ConfigError("cross-spectral estimator needs L < T");

    const int p = grid.p;
    const int H = L - 1;
    const int n_lags = 2 * H + 1;
    const BartlettWeights W(L);

    // q[(h+H)*2 + r] per grid point; s_r pooled over lags.
    std::vector<std::vector<double>> qmoments(static_cast<std::size_t>(p));
    std::vector<std::array<double, 3>> smoments(static_cast<std::size_t>(p));

    parallel_for(static_cast<std::size_t>(p), [&](std::size_t gi) {
        const double x = grid.points[static_cast<int>(gi)];

        auto build = [&](double bw, std::array<double, 3>& s, std::vector<double>& q) -> bool {
            s = {0.0, 0.0, 0.0};
            q.assign(static_cast<std::size_t>(n_lags) * 2, 0.0);
            // Kernel moments per time index; the lag pooling then only needs
            // the response values.
            std::vector<double> a0(static_cast<std::size_t>(T), 0.0);
            std::vector<double> a1(static_cast<std::size_t>(T), 0.0);
            std::vector<double> a2(static_cast<std::size_t>(T), 0.0);
            std::vector<double> b0(static_cast<std::size_t>(T), 0.0);
            std::vector<double> b1(static_cast<std::size_t>(T), 0.0);
            for (int t = 0; t < T; ++t) {
                for (const auto& o : data_x.obs[static_cast<std::size_t>(t)]) {
                    const double z = (o.x - x) / bw;
                    const double w = epanechnikov(z) / bw;
                    if (w == 0.0) continue;
                    a0[static_cast<std::size_t>(t)] += w;
                    a1[static_cast<std::size_t>(t)] += w * z;
                    a2[static_cast<std::size_t>(t)] += w * z * z;
                    b0[static_cast<std::size_t>(t)] += w * o.y;
                    b1[static_cast<std::size_t>(t)] += w * z * o.y;
                }
            }
            // Normalisations of the explicit solution: S_r carries 1/(LT),
            // Q_r carries 1/T; the estimate is then (1/2pi) of the ratio.
            for (int h = -H; h <= H; ++h) {
                const double wh = W(h);
                const int t_lo = std::max(0, -h);
                const int t_hi = std::min(T, T - h);
                double s0 = 0, s1 = 0, s2 = 0, q0 = 0, q1 = 0;
                for (int t = t_lo; t < t_hi; ++t) {
                    const double zval = data_z.z[static_cast<std::size_t>(t + h)];
                    if (ScalarTS::missing(zval)) continue;  // drop the raw products
                    s0 += a0[static_cast<std::size_t>(t)];
                    s1 += a1[static_cast<std::size_t>(t)];
                    s2 += a2[static_cast<std::size_t>(t)];
                    q0 += zval * b0[static_cast<std::size_t>(t)];
                    q1 += zval * b1[static_cast<std::size_t>(t)];
                }
                const double sw = wh / (static_cast<double>(L) * T);
                const double qw = wh / static_cast<double>(T);
                s[0] += sw * s0;
                s[1] += sw * s1;
                s[2] += sw * s2;
                q[static_cast<std::size_t>(h + H) * 2] = qw * q0;
                q[static_cast<std::size_t>(h + H) * 2 + 1] = qw * q1;
            }
            return s[0] * s[2] - s[1] * s[1] > 1e-12;
        };

        double bw = B_C;
        bool ok = false;
        for (int attempt = 0; attempt <= 3 && !ok; ++attempt) {
            if (attempt > 0) bw *= 1.5;
            ok = build(bw, smoments[gi], qmoments[gi]);
        }
        if (!ok) {
            // Degenerate even after widening: NaN propagates downstream.
            smoments[gi] = {0.0, 0.0, 0.0};
            qmoments[gi].assign(static_cast<std::size_t>(n_lags) * 2,
                                std::numeric_limits<double>::quiet_NaN());
        }
    });

    CrossSpectralEstimate est;
    est.L = L;
    est.B_C = B_C;
    est.values.assign(static_cast<std::size_t>(fgrid.n_freq), CVector());

    const double scale = 1.0 / (2.0 * kPi);
    const int half = fgrid.n_freq / 2;
    parallel_for(static_cast<std::size_t>(half + 1), [&](std::size_t fi) {
        const double omega = fgrid.omegas[static_cast<int>(fi)];
        std::vector<Complex> twiddle(static_cast<std::size_t>(n_lags));
        for (int h = -H; h <= H; ++h)
            twiddle[static_cast<std::size_t>(h + H)] =
                Complex(std::cos(h * omega), -std::sin(h * omega));
        CVector f(p);
        for (int gi = 0; gi < p; ++gi) {
            const auto& s = smoments[static_cast<std::size_t>(gi)];
            const auto& q = qmoments[static_cast<std::size_t>(gi)];
            const double det = s[0] * s[2] - s[1] * s[1];
            if (!(det > 1e-12)) {
                f[gi] = Complex(std::numeric_limits<double>::quiet_NaN(), 0.0);
                continue;
            }
            Complex q0(0, 0), q1(0, 0);
            for (int sIdx = 0; sIdx < n_lags; ++sIdx) {
                const Complex tw = twiddle[static_cast<std::size_t>(sIdx)];
                q0 += tw * q[static_cast<std::size_t>(sIdx) * 2];
                q1 += tw * q[static_cast<std::size_t>(sIdx) * 2 + 1];
            }
            f[gi] = scale * (q0 * s[2] - q1 * s[1]) / det;
        }
        if (fi == 0) f = f.real().cast<Complex>();
        est.values[fi] = std::move(f);
    });

    mirror_conjugate(est.values, fgrid);
    return est;
}

AutocovSequence invert_to_autocov(const SpectralDensityEstimate& f, const FrequencyGrid& fgrid,
                                  int n_lags) {
    if (f.values.empty() || static_cast<int>(f.values.size()) != fgrid.n_freq)
        throw ConfigError("spectral estimate does not match the frequency grid");
    if (n_lags <= 0) n_lags = f.L;
    const int p = static_cast<int>(f.values[0].rows());
    const double dw = fgrid.step();

    AutocovSequence seq;
    seq.R.assign(static_cast<std::size_t>(n_lags), Matrix::Zero(p, p));
    double max_imag = 0.0;
    std::mutex imag_mutex;
    parallel_for(static_cast<std::size_t>(n_lags), [&](std::size_t h) {
        CMatrix acc = CMatrix::Zero(p, p);
        for (int i = 0; i < fgrid.n_freq; ++i) {
            const double omega = fgrid.omegas[i];
            const Complex tw(std::cos(h * omega), std::sin(h * omega));
            acc += tw * f.values[static_cast<std::size_t>(i)];
        }
        acc *= dw;
        const double im = acc.imag().cwiseAbs().maxCoeff();
        {
            std::lock_guard<std::mutex> lock(imag_mutex);
            max_imag = std::max(max_imag, im);
        }
        seq.R[h] = acc.real();
    });
    if (max_imag > 1e-6)
        throw NumericError("autocovariance inversion left an imaginary residue of " +
                           std::to_string(max_imag) + "; Hermitian invariant broken");
    return seq;
}

EigenSystem eigendecompose(const SpectralDensityEstimate& f, const SpatialGrid& grid) {
    const int n_freq = static_cast<int>(f.values.size());
    const int p = grid.p;
    const double sqrt_p = std::sqrt(static_cast<double>(p));

    EigenSystem sys;
    sys.eigenvalues.assign(static_cast<std::size_t>(n_freq), Vector());
    sys.eigenvectors.assign(static_cast<std::size_t>(n_freq), CMatrix());

    const int half = n_freq / 2;
    parallel_for(static_cast<std::size_t>(half + 1), [&](std::size_t fi) {
        Eigen::SelfAdjointEigenSolver<CMatrix> es(f.values[fi]);
        if (es.info() != Eigen::Success)
            throw NumericError("eigendecomposition failed at frequency index " +
                               std::to_string(fi));
        // Ascending from Eigen; store descending, operator-scaled, clipped.
        Vector lam(p);
        CMatrix vec(p, p);
        for (int j = 0; j < p; ++j) {
            lam[j] = std::max(0.0, es.eigenvalues()[p - 1 - j] / p);
            vec.col(j) = es.eigenvectors().col(p - 1 - j) * sqrt_p;
        }
        sys.eigenvalues[fi] = std::move(lam);
        sys.eigenvectors[fi] = std::move(vec);
    });
    for (int i = 1; i < half; ++i) {
        sys.eigenvalues[static_cast<std::size_t>(n_freq - i)] =
            sys.eigenvalues[static_cast<std::size_t>(i)];
        sys.eigenvectors[static_cast<std::size_t>(n_freq - i)] =
            sys.eigenvectors[static_cast<std::size_t>(i)].conjugate();
    }
    return sys;
}

}  // namespace sflr
