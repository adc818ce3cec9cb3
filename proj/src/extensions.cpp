#include "sflr/extensions.hpp"

#include <algorithm>
#include <limits>
#include <mutex>

namespace sflr {

namespace {

constexpr double kPi = 3.14159265358979323846;

void mirror_conjugate(std::vector<CMatrix>& values, int n_freq) {
    for (int i = 1; i < n_freq / 2; ++i)
        values[static_cast<std::size_t>(n_freq - i)] =
            values[static_cast<std::size_t>(i)].conjugate();
}

void mirror_conjugate(std::vector<CVector>& values, int n_freq) {
    for (int i = 1; i < n_freq / 2; ++i)
        values[static_cast<std::size_t>(n_freq - i)] =
            values[static_cast<std::size_t>(i)].conjugate();
}

struct CrossPair {
    double u;  // response-side location
    double v;  // regressor-side location
    double g;
};

}  // namespace

OperatorCrossSpectral est_cross_spectral_functional(const SparseFTS& data_x,
                                                    const SparseFTS& data_z,
                                                    const SpatialGrid& grid,
                                                    const FrequencyGrid& fgrid, int L,
                                                    double B_R) {
    if (L < 1) throw ConfigError("cross-spectral estimator needs L >= 1");
    if (fgrid.n_freq <= 2 * L) throw ConfigError("frequency grid too coarse: need n_freq > 2L");
    if (B_R <= 0.0) throw ConfigError("cross-spectral estimator needs a positive bandwidth");
    const int T = data_x.T();
    if (data_z.T() != T) throw DataError("the two sparse series disagree in length");
    if (L >= T) throw ConfigError("cross-spectral estimator needs L < T");

    const int p = grid.p;
    const int H = L - 1;
    const int n_lags = 2 * H + 1;
    const BartlettWeights W(L);

    // Raw cross pairs per lag, sorted by the response-side location.
    std::vector<std::vector<CrossPair>> lags(static_cast<std::size_t>(n_lags));
    for (int h = -H; h <= H; ++h) {
        auto& list = lags[static_cast<std::size_t>(h + H)];
        const int t_lo = std::max(0, -h);
        const int t_hi = std::min(T, T - h);
        for (int t = t_lo; t < t_hi; ++t) {
            const auto& zrow = data_z.obs[static_cast<std::size_t>(t + h)];
            const auto& xrow = data_x.obs[static_cast<std::size_t>(t)];
            for (const auto& zo : zrow)
                for (const auto& xo : xrow) list.push_back({zo.x, xo.x, zo.y * xo.y});
        }
        std::stable_sort(list.begin(), list.end(),
                         [](const CrossPair& a, const CrossPair& b) { return a.u < b.u; });
    }

    struct Cell {
        double a00 = 0, a01 = 0, a02 = 0, a11 = 0, a12 = 0, a22 = 0;
        std::vector<double> m;
    };

    std::vector<std::vector<Cell>> cells(static_cast<std::size_t>(p));
    std::vector<std::vector<int>> ranks(static_cast<std::size_t>(p));  // 2=full,1=const,0=empty
    std::vector<std::vector<Eigen::Matrix3d>> inverses(static_cast<std::size_t>(p));

    parallel_for(static_cast<std::size_t>(p), [&](std::size_t row) {
        const double x = grid.points[static_cast<int>(row)];
        auto& cc = cells[row];
        cc.assign(static_cast<std::size_t>(p), Cell{});
        for (auto& c : cc) c.m.assign(static_cast<std::size_t>(n_lags) * 3, 0.0);
        const double inv_b2 = 1.0 / (B_R * B_R);

        for (int h = -H; h <= H; ++h) {
            const auto& list = lags[static_cast<std::size_t>(h + H)];
            const double pref = W(h) * inv_b2;
            auto lo = std::lower_bound(list.begin(), list.end(), x - B_R,
                                       [](const CrossPair& cp, double val) { return cp.u < val; });
            auto hi = std::upper_bound(list.begin(), list.end(), x + B_R,
                                       [](double val, const CrossPair& cp) { return val < cp.u; });
            for (auto it = lo; it != hi; ++it) {
                const double ku = epanechnikov((it->u - x) / B_R);
                if (ku == 0.0) continue;
                const double kw = ku * pref;
                const double d1 = (it->u - x) / B_R;
                for (int j = 0; j < p; ++j) {
                    const double y = grid.points[j];
                    const double kv = epanechnikov((it->v - y) / B_R);
                    if (kv == 0.0) continue;
                    const double w = kw * kv;
                    const double d2 = (it->v - y) / B_R;
                    Cell& c = cc[static_cast<std::size_t>(j)];
                    c.a00 += w;
                    c.a01 += w * d1;
                    c.a02 += w * d2;
                    c.a11 += w * d1 * d1;
                    c.a12 += w * d1 * d2;
                    c.a22 += w * d2 * d2;
                    double* mm = &c.m[static_cast<std::size_t>(h + H) * 3];
                    mm[0] += w * it->g;
                    mm[1] += w * d1 * it->g;
                    mm[2] += w * d2 * it->g;
                }
            }
        }

        auto& rk = ranks[row];
        auto& inv = inverses[row];
        rk.assign(static_cast<std::size_t>(p), 0);
        inv.assign(static_cast<std::size_t>(p), Eigen::Matrix3d::Zero());
        for (int j = 0; j < p; ++j) {
            const Cell& c = cc[static_cast<std::size_t>(j)];
            if (c.a00 <= 0.0) continue;
            Eigen::Matrix3d A;
            A << c.a00, c.a01, c.a02, c.a01, c.a11, c.a12, c.a02, c.a12, c.a22;
            Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(A);
            const double lmax = es.eigenvalues().maxCoeff();
            if (lmax > 0.0 && es.eigenvalues().minCoeff() > 1e-12 * lmax) {
                rk[static_cast<std::size_t>(j)] = 2;
                inv[static_cast<std::size_t>(j)] = A.inverse();
            } else {
                rk[static_cast<std::size_t>(j)] = 1;
            }
        }
    });

    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j)
            if (ranks[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] == 0)
                throw NumericError(
                    "cross-spectral surface estimator: no raw pairs within bandwidth of grid "
                    "point (" +
                    std::to_string(i) + "," + std::to_string(j) + "); increase the bandwidth");

    OperatorCrossSpectral est;
    est.L = L;
    est.B = B_R;
    est.values.assign(static_cast<std::size_t>(fgrid.n_freq), CMatrix());
    const double scale = L / (2.0 * kPi);
    const int half = fgrid.n_freq / 2;
    parallel_for(static_cast<std::size_t>(half + 1), [&](std::size_t fi) {
        const double omega = fgrid.omegas[static_cast<int>(fi)];
        std::vector<Complex> twiddle(static_cast<std::size_t>(n_lags));
        for (int h = -H; h <= H; ++h)
            twiddle[static_cast<std::size_t>(h + H)] =
                Complex(std::cos(h * omega), -std::sin(h * omega));
        CMatrix F(p, p);
        for (int i = 0; i < p; ++i)
            for (int j = 0; j < p; ++j) {
                const Cell& c = cells[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
                Complex b0(0, 0), b1(0, 0), b2(0, 0);
                for (int s = 0; s < n_lags; ++s) {
                    const Complex tw = twiddle[static_cast<std::size_t>(s)];
                    b0 += tw * c.m[static_cast<std::size_t>(3 * s)];
                    b1 += tw * c.m[static_cast<std::size_t>(3 * s + 1)];
                    b2 += tw * c.m[static_cast<std::size_t>(3 * s + 2)];
                }
                if (ranks[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] == 2) {
                    const Eigen::Matrix3d& Ai =
                        inverses[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
                    F(i, j) = scale * (Ai(0, 0) * b0 + Ai(0, 1) * b1 + Ai(0, 2) * b2);
                } else {
                    F(i, j) = scale * b0 / c.a00;
                }
            }
        if (fi == 0) F = F.real().cast<Complex>();
        est.values[fi] = std::move(F);
    });
    mirror_conjugate(est.values, fgrid.n_freq);
    return est;
}

OperatorTransferEstimate operator_transfer(const OperatorCrossSpectral& cross,
                                           const EigenSystem& eig, const SpatialGrid& grid,
                                           Regularization method, double param) {
    if (param <= 0.0) throw ConfigError("regularization parameter must be positive");
    const int n_freq = static_cast<int>(cross.values.size());
    if (eig.n_freq() != n_freq)
        throw ConfigError("cross-spectral estimate and eigensystem disagree on the grid");
    const int p = grid.p;
    const double qw = grid.quad_weight();

    OperatorTransferEstimate est;
    est.method = method;
    est.param = param;
    est.B.assign(static_cast<std::size_t>(n_freq), CMatrix());
    const int half = n_freq / 2;
    parallel_for(static_cast<std::size_t>(half + 1), [&](std::size_t fi) {
        const CMatrix& C = cross.values[fi];
        const Vector& lam = eig.eigenvalues[fi];
        const CMatrix& phi = eig.eigenvectors[fi];
        CMatrix B = CMatrix::Zero(p, p);
        for (int j = 0; j < p; ++j) {
            double w;
            if (method == Regularization::truncation)
                w = lam[j] > param ? 1.0 / lam[j] : 0.0;
            else
                w = 1.0 / (lam[j] + param);
            if (w == 0.0) continue;
            const CVector img = qw * (C * phi.col(j));  // operator applied to phi_j
            // One quadrature weight in total: the kernel of the rank-one
            // update (img tensor phi_j) carries 1/p through img already.
            B += w * img * phi.col(j).adjoint();
        }
        est.B[fi] = std::move(B);
    });
    for (int i = 1; i < half; ++i)
        est.B[static_cast<std::size_t>(n_freq - i)] =
            est.B[static_cast<std::size_t>(i)].conjugate();
    return est;
}

OperatorFilterSet operator_filters_from_transfer(const OperatorTransferEstimate& transfer,
                                                 const FrequencyGrid& fgrid, int M) {
    if (M < 0) throw ConfigError("filter recovery needs M >= 0");
    if (fgrid.n_freq <= 2 * M)
        throw ConfigError("frequency grid too coarse for the requested lags: need n_freq > 2M");
    const int p = static_cast<int>(transfer.B[0].rows());
    OperatorFilterSet filters;
    filters.M = M;
    filters.B.assign(static_cast<std::size_t>(2 * M + 1), Matrix::Zero(p, p));
    double max_imag = 0.0;
    std::mutex imag_mutex;
    parallel_for(static_cast<std::size_t>(2 * M + 1), [&](std::size_t slot) {
        const int k = static_cast<int>(slot) - M;
        CMatrix acc = CMatrix::Zero(p, p);
        for (int i = 0; i < fgrid.n_freq; ++i) {
            const double omega = fgrid.omegas[i];
            acc += Complex(std::cos(k * omega), std::sin(k * omega)) *
                   transfer.B[static_cast<std::size_t>(i)];
        }
        acc /= static_cast<double>(fgrid.n_freq);
        const double im = acc.imag().cwiseAbs().maxCoeff();
        {
            std::lock_guard<std::mutex> lock(imag_mutex);
            max_imag = std::max(max_imag, im);
        }
        filters.B[slot] = acc.real();
    });
    if (!(max_imag <= 1e-6))
        throw NumericError("operator filter recovery left an imaginary residue of " +
                           std::to_string(max_imag));
    return filters;
}

int choose_M(const OperatorFilterSet& trial, const SpatialGrid& grid) {
    const int K = trial.M;
    const double qw = grid.quad_weight();
    std::vector<double> norm(static_cast<std::size_t>(K + 1), 0.0);
    double peak = 0.0;
    for (int k = -K; k <= K; ++k) {
        // Hilbert-Schmidt norm with quadrature weights on both coordinates.
        const double n = trial.at(k).norm() * qw;
        const int a = k < 0 ? -k : k;
        norm[static_cast<std::size_t>(a)] = std::max(norm[static_cast<std::size_t>(a)], n);
        peak = std::max(peak, n);
    }
    if (peak == 0.0) return 1;
    const double cutoff = 0.01 * peak;
    int m = 1;
    for (int a = 1; a <= K; ++a)
        if (norm[static_cast<std::size_t>(a)] > cutoff) m = a;
    return m;
}

Matrix forecast_functional_response(const Matrix& curves, int t_first,
                                    const OperatorFilterSet& filters, const SpatialGrid& grid,
                                    int s_lo, int s_hi) {
    if (s_hi < s_lo) throw ConfigError("forecast range is empty");
    const int p = grid.p;
    const double qw = grid.quad_weight();
    Matrix out = Matrix::Zero(p, s_hi - s_lo + 1);
    for (int s = s_lo; s <= s_hi; ++s) {
        Vector acc = Vector::Zero(p);
        for (int k = -filters.M; k <= filters.M; ++k) {
            const int idx = (s - k) - t_first;
            if (idx < 0 || idx >= curves.cols())
                throw NumericError("functional forecast: missing predicted curve at time " +
                                   std::to_string(s - k));
            acc += qw * (filters.at(k) * curves.col(idx));
        }
        out.col(s - s_lo) = acc;
    }
    return out;
}

DenseSpectra dense_bartlett(const DenseFTS& data2, const ScalarTS& data_z,
                            const SpatialGrid& grid, const FrequencyGrid& fgrid, int L) {
    if (L < 1) throw ConfigError("Bartlett estimator needs L >= 1");
    if (fgrid.n_freq <= 2 * L) throw ConfigError("frequency grid too coarse: need n_freq > 2L");
    const int T = data2.T();
    if (data_z.T() != T) throw DataError("dense regressor and response disagree in length");
    if (L >= T) throw ConfigError("Bartlett estimator needs L < T");
    data2.validate(grid.p);

    const int p = grid.p;
    DenseSpectra out;
    out.mean2 = data2.curves.colwise().mean().transpose();
    double zsum = 0.0;
    int zn = 0;
    for (double z : data_z.z)
        if (!ScalarTS::missing(z)) {
            zsum += z;
            ++zn;
        }
    if (zn < 2) throw DataError("Bartlett estimator needs at least 2 observed responses");
    out.z_bar = zsum / zn;

    Matrix centered = data2.curves.rowwise() - out.mean2.transpose();

    // Empirical lag-h covariances, biased 1/T normalisation.
    std::vector<Matrix> R2(static_cast<std::size_t>(L), Matrix::Zero(p, p));
    for (int h = 0; h < L; ++h) {
        Matrix acc = Matrix::Zero(p, p);
        for (int t = 0; t + h < T; ++t)
            acc += centered.row(t + h).transpose() * centered.row(t);
        R2[static_cast<std::size_t>(h)] = acc / static_cast<double>(T);
    }
    std::vector<Vector> Rz2_pos(static_cast<std::size_t>(L), Vector::Zero(p));
    std::vector<Vector> Rz2_neg(static_cast<std::size_t>(L), Vector::Zero(p));
    for (int h = 0; h < L; ++h) {
        Vector accp = Vector::Zero(p), accn = Vector::Zero(p);
        for (int t = 0; t + h < T; ++t) {
            const double zlead = data_z.z[static_cast<std::size_t>(t + h)];
            if (!ScalarTS::missing(zlead))
                accp += (zlead - out.z_bar) * centered.row(t).transpose();
            const double zbase = data_z.z[static_cast<std::size_t>(t)];
            if (!ScalarTS::missing(zbase))
                accn += (zbase - out.z_bar) * centered.row(t + h).transpose();
        }
        Rz2_pos[static_cast<std::size_t>(h)] = accp / static_cast<double>(T);
        Rz2_neg[static_cast<std::size_t>(h)] = accn / static_cast<double>(T);
    }

    const BartlettWeights W(L);
    out.F22.assign(static_cast<std::size_t>(fgrid.n_freq), CMatrix());
    out.Fz2.assign(static_cast<std::size_t>(fgrid.n_freq), CVector());
    const int half = fgrid.n_freq / 2;
    parallel_for(static_cast<std::size_t>(half + 1), [&](std::size_t fi) {
        const double omega = fgrid.omegas[static_cast<int>(fi)];
        CMatrix F = CMatrix::Zero(p, p);
        CVector fz = CVector::Zero(p);
        for (int h = -(L - 1); h < L; ++h) {
            const Complex tw(std::cos(h * omega), -std::sin(h * omega));
            const double wh = W(h);
            const int a = h < 0 ? -h : h;
            const Matrix& Rh = R2[static_cast<std::size_t>(a)];
            if (h >= 0)
                F += (wh * tw) * Rh.cast<Complex>();
            else
                F += (wh * tw) * Rh.transpose().cast<Complex>();
            const Vector& rz =
                h >= 0 ? Rz2_pos[static_cast<std::size_t>(a)] : Rz2_neg[static_cast<std::size_t>(a)];
            fz += (wh * tw) * rz.cast<Complex>();
        }
        F /= 2.0 * kPi;
        fz /= 2.0 * kPi;
        F = 0.5 * (F + F.adjoint()).eval();
        if (fi == 0) {
            F = F.real().cast<Complex>();
            fz = fz.real().cast<Complex>();
        }
        Eigen::SelfAdjointEigenSolver<CMatrix> es(F);
        Vector lam = es.eigenvalues().cwiseMax(0.0);
        F = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().adjoint();
        F = 0.5 * (F + F.adjoint()).eval();
        out.F22[fi] = std::move(F);
        out.Fz2[fi] = std::move(fz);
    });
    mirror_conjugate(out.F22, fgrid.n_freq);
    mirror_conjugate(out.Fz2, fgrid.n_freq);
    return out;
}

std::vector<CMatrix> est_cross_sparse_dense(const SparseFTS& data1, const DenseFTS& data2,
                                            const Vector& mean1, const Vector& mean2,
                                            const SpatialGrid& grid, const FrequencyGrid& fgrid,
                                            int L, double B_R) {
    if (L < 1) throw ConfigError("cross estimator needs L >= 1");
    if (fgrid.n_freq <= 2 * L) throw ConfigError("frequency grid too coarse: need n_freq > 2L");
    if (B_R <= 0.0) throw ConfigError("cross estimator needs a positive bandwidth");
    const int T = data1.T();
    if (data2.T() != T) throw DataError("sparse and dense regressors disagree in length");
    if (L >= T) throw ConfigError("cross estimator needs L < T");
    data2.validate(grid.p);

    const int p = grid.p;
    const int H = L - 1;
    const int n_lags = 2 * H + 1;
    const BartlettWeights W(L);
    const Matrix centered2 = data2.curves.rowwise() - mean2.transpose();

    // Per (grid x, lag): s-moments and q-moment vectors over the dense grid.
    std::vector<CMatrix> values(static_cast<std::size_t>(fgrid.n_freq));

    struct ColumnData {
        std::array<std::vector<double>, 3> s;  // s[r][h+H]
        std::vector<Matrix> q;                 // q[r] is (n_lags x p)
    };
    std::vector<ColumnData> cols(static_cast<std::size_t>(p));

    parallel_for(static_cast<std::size_t>(p), [&](std::size_t gi) {
        const double x = grid.points[static_cast<int>(gi)];
        ColumnData& cd = cols[gi];
        for (auto& s : cd.s) s.assign(static_cast<std::size_t>(n_lags), 0.0);
        cd.q.assign(2, Matrix::Zero(n_lags, p));

        // Kernel moments of the sparse observations per time index.
        std::vector<std::array<double, 3>> c(static_cast<std::size_t>(T), {0.0, 0.0, 0.0});
        std::vector<std::array<double, 2>> d(static_cast<std::size_t>(T), {0.0, 0.0});
        for (int t = 0; t < T; ++t)
            for (const auto& o : data1.obs[static_cast<std::size_t>(t)]) {
                const double z = (o.x - x) / B_R;
                const double w = epanechnikov(z) / B_R;
                if (w == 0.0) continue;
                const double resid = o.y - grid.interp1(mean1, o.x);
                c[static_cast<std::size_t>(t)][0] += w;
                c[static_cast<std::size_t>(t)][1] += w * z;
                c[static_cast<std::size_t>(t)][2] += w * z * z;
                d[static_cast<std::size_t>(t)][0] += w * resid;
                d[static_cast<std::size_t>(t)][1] += w * z * resid;
            }
        for (int h = -H; h <= H; ++h) {
            const double wh = W(h);
            const int t_lo = std::max(0, -h);
            const int t_hi = std::min(T, T - h);
            const std::size_t slot = static_cast<std::size_t>(h + H);
            for (int t = t_lo; t < t_hi; ++t) {
                const auto& cm = c[static_cast<std::size_t>(t + h)];
                const auto& dm = d[static_cast<std::size_t>(t + h)];
                cd.s[0][slot] += wh * cm[0];
                cd.s[1][slot] += wh * cm[1];
                cd.s[2][slot] += wh * cm[2];
                if (dm[0] != 0.0 || dm[1] != 0.0) {
                    cd.q[0].row(static_cast<int>(slot)) +=
                        (wh * dm[0]) * centered2.row(t);
                    cd.q[1].row(static_cast<int>(slot)) +=
                        (wh * dm[1]) * centered2.row(t);
                }
            }
        }
    });

    const double scale = L / (2.0 * kPi);
    const int half = fgrid.n_freq / 2;
    parallel_for(static_cast<std::size_t>(half + 1), [&](std::size_t fi) {
        const double omega = fgrid.omegas[static_cast<int>(fi)];
        std::vector<Complex> twiddle(static_cast<std::size_t>(n_lags));
        for (int h = -H; h <= H; ++h)
            twiddle[static_cast<std::size_t>(h + H)] =
                Complex(std::cos(h * omega), -std::sin(h * omega));
        CMatrix F(p, p);
        for (int gi = 0; gi < p; ++gi) {
            const ColumnData& cd = cols[static_cast<std::size_t>(gi)];
            double s0 = 0, s1 = 0, s2 = 0;
            for (int s = 0; s < n_lags; ++s) {
                s0 += cd.s[0][static_cast<std::size_t>(s)];
                s1 += cd.s[1][static_cast<std::size_t>(s)];
                s2 += cd.s[2][static_cast<std::size_t>(s)];
            }
            CVector q0 = CVector::Zero(p), q1 = CVector::Zero(p);
            for (int s = 0; s < n_lags; ++s) {
                const Complex tw = twiddle[static_cast<std::size_t>(s)];
                q0 += tw * cd.q[0].row(s).transpose().cast<Complex>();
                q1 += tw * cd.q[1].row(s).transpose().cast<Complex>();
            }
            const double det = s0 * s2 - s1 * s1;
            if (det > 1e-12 * std::max(s0 * s2, s1 * s1) && det > 0.0) {
                F.row(gi) = (scale / det) * (s2 * q0 - s1 * q1).transpose();
            } else if (s0 > 0.0) {
                F.row(gi) = (scale / s0) * q0.transpose();
            } else {
                F.row(gi).setConstant(Complex(std::numeric_limits<double>::quiet_NaN(), 0.0));
            }
        }
        if (fi == 0) F = F.real().cast<Complex>();
        values[fi] = std::move(F);
    });
    mirror_conjugate(values, fgrid.n_freq);
    return values;
}

JointTransfer joint_truncation_transfer(const JointSpectralEstimate& joint,
                                        const std::vector<int>& K1, const std::vector<int>& K2,
                                        const SpatialGrid& grid) {
    const int n_freq = static_cast<int>(joint.F12.size());
    if (static_cast<int>(K1.size()) != n_freq || static_cast<int>(K2.size()) != n_freq)
        throw ConfigError("per-frequency truncation levels do not match the grid");
    const int p = grid.p;
    const double qw = grid.quad_weight();

    JointTransfer out;
    out.b1.assign(static_cast<std::size_t>(n_freq), CVector::Zero(p));
    out.b2.assign(static_cast<std::size_t>(n_freq), CVector::Zero(p));

    const int half = n_freq / 2;
    parallel_for(static_cast<std::size_t>(half + 1), [&](std::size_t fi) {
        int k1 = K1[fi];
        int k2 = K2[fi];
        const Vector& lam = joint.eig1.eigenvalues[fi];
        const Vector& eta = joint.eig2.eigenvalues[fi];
        const CMatrix& phi = joint.eig1.eigenvectors[fi];
        const CMatrix& psi = joint.eig2.eigenvectors[fi];
        const CMatrix& F12 = joint.F12[fi];
        const CVector& fz1 = joint.Fz1.values[fi];
        const CVector& fz2 = joint.Fz2.values[fi];

        for (;;) {
            if (k1 == 0 && k2 == 0) break;
            const int n = k1 + k2;
            CMatrix G = CMatrix::Zero(n, n);
            for (int i = 0; i < k1; ++i) G(i, i) = lam[i];
            for (int i = 0; i < k2; ++i) G(k1 + i, k1 + i) = eta[i];
            for (int i = 0; i < k1; ++i)
                for (int j = 0; j < k2; ++j) {
                    const Complex gamma =
                        (phi.col(i).adjoint() * F12 * psi.col(j)).value() * qw * qw;
                    G(i, k1 + j) = gamma;
                    G(k1 + j, i) = std::conj(gamma);
                }
            Eigen::JacobiSVD<CMatrix> svd(G, Eigen::ComputeFullU | Eigen::ComputeFullV);
            const double smax = svd.singularValues()[0];
            if (smax <= 0.0 || svd.singularValues()[n - 1] <= 1e-12 * smax) {
                // Shed the smallest included eigenvalue and retry.
                const double tail1 = k1 > 0 ? lam[k1 - 1] : std::numeric_limits<double>::infinity();
                const double tail2 = k2 > 0 ? eta[k2 - 1] : std::numeric_limits<double>::infinity();
                if (tail1 <= tail2)
                    --k1;
                else
                    --k2;
                continue;
            }
            const CMatrix M = G.inverse();
            CVector s1(k1), s2(k2);
            for (int i = 0; i < k1; ++i) s1[i] = (phi.col(i).transpose() * fz1).value() * qw;
            for (int i = 0; i < k2; ++i) s2[i] = (psi.col(i).transpose() * fz2).value() * qw;

            CVector b1 = CVector::Zero(p), b2 = CVector::Zero(p);
            for (int j = 0; j < k1; ++j) {
                Complex coef(0, 0);
                for (int i = 0; i < k1; ++i) coef += M(i, j) * s1[i];
                for (int i = 0; i < k2; ++i) coef += M(k1 + i, j) * s2[i];
                b1 += coef * phi.col(j).conjugate();
            }
            for (int j = 0; j < k2; ++j) {
                Complex coef(0, 0);
                for (int i = 0; i < k1; ++i) coef += M(i, k1 + j) * s1[i];
                for (int i = 0; i < k2; ++i) coef += M(k1 + i, k1 + j) * s2[i];
                b2 += coef * psi.col(j).conjugate();
            }
            out.b1[fi] = std::move(b1);
            out.b2[fi] = std::move(b2);
            break;
        }
    });
    for (int i = 1; i < half; ++i) {
        out.b1[static_cast<std::size_t>(n_freq - i)] =
            out.b1[static_cast<std::size_t>(i)].conjugate();
        out.b2[static_cast<std::size_t>(n_freq - i)] =
            out.b2[static_cast<std::size_t>(i)].conjugate();
    }
    return out;
}

JointTransfer joint_tikhonov_transfer(const JointSpectralEstimate& joint, double rho1,
                                      double rho2, const SpatialGrid& grid) {
    if (rho1 <= 0.0 || rho2 <= 0.0) throw ConfigError("Tikhonov parameters must be positive");
    const int n_freq = static_cast<int>(joint.F12.size());
    const int p = grid.p;

    JointTransfer out;
    out.b1.assign(static_cast<std::size_t>(n_freq), CVector::Zero(p));
    out.b2.assign(static_cast<std::size_t>(n_freq), CVector::Zero(p));

    const int half = n_freq / 2;
    parallel_for(static_cast<std::size_t>(half + 1), [&](std::size_t fi) {
        CMatrix A(2 * p, 2 * p);
        A.topLeftCorner(p, p) = joint.F11[fi];
        A.topLeftCorner(p, p).diagonal().array() += rho1 * p;
        A.topRightCorner(p, p) = joint.F12[fi];
        A.bottomLeftCorner(p, p) = joint.F12[fi].adjoint();
        A.bottomRightCorner(p, p) = joint.F22[fi];
        A.bottomRightCorner(p, p).diagonal().array() += rho2 * p;

        CVector rhs(2 * p);
        rhs.head(p) = static_cast<double>(p) * joint.Fz1.values[fi].conjugate();
        rhs.tail(p) = static_cast<double>(p) * joint.Fz2.values[fi].conjugate();

        const double mean_diag = A.diagonal().cwiseAbs().mean();
        bool solved = false;
        CVector sol;
        for (double jitter : {0.0, 1e-10, 1e-8, 1e-6}) {
            CMatrix Aj = A;
            if (jitter > 0.0) Aj.diagonal().array() += jitter * mean_diag;
            Eigen::PartialPivLU<CMatrix> lu(Aj);
            sol = lu.solve(rhs);
            const double rel = (Aj * sol - rhs).norm() / std::max(1e-300, rhs.norm());
            if (rel <= 1e-8) {
                solved = true;
                break;
            }
        }
        if (!solved)
            throw NumericError("joint Tikhonov solve failed at frequency index " +
                               std::to_string(fi));
        out.b1[fi] = sol.head(p).conjugate();
        out.b2[fi] = sol.tail(p).conjugate();
    });
    for (int i = 1; i < half; ++i) {
        out.b1[static_cast<std::size_t>(n_freq - i)] =
            out.b1[static_cast<std::size_t>(i)].conjugate();
        out.b2[static_cast<std::size_t>(n_freq - i)] =
            out.b2[static_cast<std::size_t>(i)].conjugate();
    }
    return out;
}

std::vector<double> joint_forecast(const Matrix& curves1, int t_first1, const FilterSet& f1,
                                   const Vector& mean1, const DenseFTS& data2,
                                   const FilterSet& f2, const Vector& mean2, double z_bar,
                                   const SpatialGrid& grid, int s_lo, int s_hi) {
    if (s_hi < s_lo) throw ConfigError("forecast range is empty");
    const double qw = grid.quad_weight();
    const int T2 = data2.T();
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(s_hi - s_lo + 1));
    for (int s = s_lo; s <= s_hi; ++s) {
        double acc = z_bar;
        for (int k = -f1.M; k <= f1.M; ++k) {
            const int idx = (s - k) - t_first1;
            if (idx < 0 || idx >= curves1.cols())
                throw NumericError("joint forecast: missing predicted curve at time " +
                                   std::to_string(s - k));
            acc += f1.at(k).dot(curves1.col(idx) - mean1) * qw;
        }
        for (int k = -f2.M; k <= f2.M; ++k) {
            const int t = s - k;
            if (t < 1 || t > T2) continue;  // mean padding
            acc += f2.at(k).dot(data2.curves.row(t - 1).transpose() - mean2) * qw;
        }
        out.push_back(acc);
    }
    return out;
}

}  // namespace sflr
