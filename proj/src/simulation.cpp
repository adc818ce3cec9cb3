#include "sflr/simulation.hpp"

#include <algorithm>

namespace sflr {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr int kFarBurnIn = 100;
constexpr int kFarTrueLags = 30;

// Basis functions and coefficients of the innovation kernel.
struct InnovationBasis {
    Matrix funcs;  // 10 x p rows of basis evaluations
    Vector coefs;  // 10 coefficients

    explicit InnovationBasis(const SpatialGrid& grid) {
        const int p = grid.p;
        funcs.resize(10, p);
        coefs.resize(10);
        const double c[10] = {1.0, 0.6, 0.3, 0.1, 0.1, 0.1, 0.05, 0.05, 0.05, 0.05};
        for (int m = 0; m < 10; ++m) coefs[m] = c[m];
        for (int j = 0; j < p; ++j) {
            const double x = grid.points[j];
            for (int m = 0; m < 5; ++m) {
                const double freq = 2.0 * kPi * (m + 1);
                funcs(2 * m, j) = std::sin(freq * x);
                funcs(2 * m + 1, j) = std::cos(freq * x);
            }
        }
    }

    Vector draw(Rng& rng) const {
        Vector curve = Vector::Zero(funcs.cols());
        for (int m = 0; m < 10; ++m) curve += std::sqrt(coefs[m]) * rng.normal() * funcs.row(m).transpose();
        return curve;
    }
};

double operator_norm(const Matrix& kernel, const SpatialGrid& grid) {
    Eigen::JacobiSVD<Matrix> svd(kernel);
    return svd.singularValues()[0] * grid.quad_weight();
}

Matrix scaled_kernel(const SpatialGrid& grid, double target_norm,
                     const std::function<double(double, double)>& k) {
    const int p = grid.p;
    Matrix m(p, p);
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j) m(i, j) = k(grid.points[i], grid.points[j]);
    const double nrm = operator_norm(m, grid);
    if (nrm <= 0.0) throw NumericError("degenerate process kernel");
    return m * (target_norm / nrm);
}

}  // namespace

Matrix innovation_kernel(const SpatialGrid& grid) {
    const InnovationBasis basis(grid);
    const int p = grid.p;
    Matrix K(p, p);
    // Element-wise accumulation keeps K(x,y) == K(y,x) bitwise.
    for (int i = 0; i < p; ++i)
        for (int j = 0; j <= i; ++j) {
            double acc = 0.0;
            for (int m = 0; m < 10; ++m)
                acc += basis.coefs[m] * (basis.funcs(m, i) * basis.funcs(m, j));
            K(i, j) = acc;
            K(j, i) = acc;
        }
    return K;
}

Matrix far1_operator(const SpatialGrid& grid) {
    return scaled_kernel(grid, 0.7, [](double x, double y) { return std::sin(x - y); });
}

std::vector<Matrix> fma4_operators(const SpatialGrid& grid) {
    std::vector<Matrix> ops;
    ops.push_back(scaled_kernel(grid, 0.8, [](double x, double y) { return std::sin(x + y); }));
    ops.push_back(
        scaled_kernel(grid, 0.6, [](double x, double y) { return std::sin(1.0 - x + y); }));
    ops.push_back(
        scaled_kernel(grid, 0.4, [](double x, double y) { return std::sin(1.0 + x - y); }));
    ops.push_back(
        scaled_kernel(grid, 0.2, [](double x, double y) { return std::sin(2.0 - x - y); }));
    return ops;
}

Matrix far1_lag0_covariance(const Matrix& A, const Matrix& K, const SpatialGrid& grid) {
    const double qw = grid.quad_weight();
    Matrix R = K;
    for (int it = 0; it < 10000; ++it) {
        Matrix next = qw * qw * (A * R * A.transpose()) + K;
        const double delta = (next - R).norm();
        R = std::move(next);
        if (delta <= 1e-11 * std::max(1.0, R.norm())) return R;
    }
    throw NumericError("FAR(1) stationary covariance iteration did not converge");
}

AutocovSequence true_autocov(Process process, const SpatialGrid& grid, int H) {
    const double qw = grid.quad_weight();
    const Matrix K = innovation_kernel(grid);
    AutocovSequence seq;
    if (process == Process::far1) {
        const Matrix A = far1_operator(grid);
        Matrix R = far1_lag0_covariance(A, K, grid);
        seq.R.push_back(R);
        for (int h = 1; h <= H; ++h) {
            R = qw * (A * R);
            seq.R.push_back(R);
        }
    } else {
        const std::vector<Matrix> M = fma4_operators(grid);
        // R_h = sum_j O_{h+j} K O_j^T with O_0 the identity operator.
        auto apply_left = [&](int i, const Matrix& m) {
            return i == 0 ? m : Matrix(qw * (M[static_cast<std::size_t>(i - 1)] * m));
        };
        auto apply_right = [&](const Matrix& m, int j) {
            return j == 0 ? m : Matrix(qw * (m * M[static_cast<std::size_t>(j - 1)].transpose()));
        };
        for (int h = 0; h <= H; ++h) {
            Matrix R = Matrix::Zero(grid.p, grid.p);
            for (int j = 0; j + h <= 4; ++j) R += apply_left(h + j, apply_right(K, j));
            seq.R.push_back(R);
        }
    }
    return seq;
}

Matrix simulate_latent(const SimConfig& cfg, const SpatialGrid& grid, int t_first, Rng& rng) {
    cfg.validate();
    const InnovationBasis basis(grid);
    const int p = grid.p;
    const int n_times = cfg.T - t_first + 1;
    Matrix latent(p, n_times);
    const double qw = grid.quad_weight();

    if (cfg.process == Process::far1) {
        const Matrix A = far1_operator(grid);
        Vector x = Vector::Zero(p);
        for (int it = 0; it < kFarBurnIn; ++it) x = qw * (A * x) + basis.draw(rng);
        for (int c = 0; c < n_times; ++c) {
            latent.col(c) = x;
            x = qw * (A * x) + basis.draw(rng);
        }
    } else {
        const std::vector<Matrix> M = fma4_operators(grid);
        std::vector<Vector> innov(4);
        for (auto& e : innov) e = basis.draw(rng);  // presample E_{t-4}..E_{t-1}
        for (int c = 0; c < n_times; ++c) {
            const Vector e = basis.draw(rng);
            Vector x = e;
            for (int i = 1; i <= 4; ++i)
                x += qw * (M[static_cast<std::size_t>(i - 1)] *
                           innov[static_cast<std::size_t>(4 - i)]);
            latent.col(c) = x;
            innov.erase(innov.begin());
            innov.push_back(e);
        }
    }
    return latent;
}

SparseFTS sparse_sample(const Matrix& latent, int t_first, const SimConfig& cfg,
                        const SpatialGrid& grid, double sigma2, Rng& rng) {
    SparseFTS data;
    data.obs.resize(static_cast<std::size_t>(cfg.T));
    const double noise_sd = std::sqrt(sigma2);
    for (int t = 1; t <= cfg.T; ++t) {
        const int n = rng.uniform_int(cfg.N_max);
        auto& row = data.obs[static_cast<std::size_t>(t - 1)];
        row.reserve(static_cast<std::size_t>(n));
        const Vector curve = latent.col(t - t_first);
        for (int j = 0; j < n; ++j) {
            const double x = rng.uniform();
            const double y = grid.interp1(curve, x) + noise_sd * rng.normal();
            row.push_back({x, y});
        }
    }
    return data;
}

FilterSet true_filters(const SimConfig& cfg, const SpatialGrid& grid) {
    Vector beta(grid.p);
    for (int j = 0; j < grid.p; ++j) {
        const double x = grid.points[j];
        beta[j] = cfg.shape == Shape::A ? std::cos(4.0 * kPi * x) : std::sin(2.0 * kPi * x);
    }
    FilterSet f;
    switch (cfg.scheme) {
        case Scheme::reg1:
            f = FilterSet::zeros(1, grid.p);
            f.at(0) = beta;
            f.at(1) = beta;
            break;
        case Scheme::reg2:
            f = FilterSet::zeros(3, grid.p);
            f.at(0) = beta;
            f.at(3) = beta;
            break;
        case Scheme::reg3: {
            const double decay[6] = {1.0, 0.9, 0.7, 0.5, 0.3, 0.1};
            f = FilterSet::zeros(5, grid.p);
            for (int k = 0; k <= 5; ++k) f.at(k) = decay[k] * beta;
            break;
        }
    }
    return f;
}

ScalarTS build_response(const Matrix& latent, int t_first, const FilterSet& filters,
                        const SimConfig& cfg, const SpatialGrid& grid, Rng& rng) {
    if (t_first > 1 - filters.M)
        throw ConfigError("build_response: latent margin too short for the filter span");
    ScalarTS z;
    z.z.resize(static_cast<std::size_t>(cfg.T));
    const double qw = grid.quad_weight();
    const double tau = std::sqrt(cfg.tau2);
    for (int t = 1; t <= cfg.T; ++t) {
        double sum = 0.0;
        for (int k = -filters.M; k <= filters.M; ++k) {
            const int c = (t - k) - t_first;
            if (c < 0 || c >= latent.cols()) continue;  // filters are causal here
            sum += filters.at(k).dot(latent.col(c)) * qw;
        }
        z.z[static_cast<std::size_t>(t - 1)] = sum + tau * rng.normal();
    }
    return z;
}

double response_variance(const AutocovSequence& R, const FilterSet& filters, double tau2,
                         const SpatialGrid& grid) {
    const double qw = grid.quad_weight();
    double v = tau2;
    for (int k = -filters.M; k <= filters.M; ++k)
        for (int l = -filters.M; l <= filters.M; ++l) {
            const int h = l - k;
            const int ah = h < 0 ? -h : h;
            if (ah >= R.max_lag()) continue;
            const Matrix& Rh = R.at(ah);
            const double quad = h >= 0 ? filters.at(k).dot(Rh * filters.at(l))
                                       : filters.at(k).dot(Rh.transpose() * filters.at(l));
            v += qw * qw * quad;
        }
    return v;
}

SimulatedDataset simulate_dataset(const SimConfig& cfg, const SpatialGrid& grid,
                                  bool use_copy_stream) {
    cfg.validate();
    const std::uint64_t base =
        use_copy_stream ? derive_seed(cfg.seed, stream::kCopy) : cfg.seed;
    Rng rng_process(derive_seed(base, stream::kProcess));
    Rng rng_sampling(derive_seed(base, stream::kSampling));
    Rng rng_response(derive_seed(base, stream::kResponse));

    SimulatedDataset out;
    const int H_true = cfg.process == Process::far1 ? kFarTrueLags : 4;
    out.truth.R = true_autocov(cfg.process, grid, H_true);
    out.truth.sigma2 = grid.integrate(out.truth.R.at(0).diagonal()) / cfg.snr;
    out.truth.filters = true_filters(cfg, grid);
    out.truth.t_first = 1 - out.truth.filters.M;
    out.truth.latent = simulate_latent(cfg, grid, out.truth.t_first, rng_process);
    out.truth.var_z = response_variance(out.truth.R, out.truth.filters, cfg.tau2, grid);

    out.x = sparse_sample(out.truth.latent, out.truth.t_first, cfg, grid, out.truth.sigma2,
                          rng_sampling);
    out.z = build_response(out.truth.latent, out.truth.t_first, out.truth.filters, cfg, grid,
                           rng_response);
    return out;
}

double metric_delta_B(const FilterSet& est, const FilterSet& truth, const SpatialGrid& grid) {
    const int K = std::max(est.M, truth.M);
    const Vector zero = Vector::Zero(grid.p);
    double sum = 0.0;
    for (int k = -K; k <= K; ++k) {
        const Vector& e = k >= -est.M && k <= est.M ? est.at(k) : zero;
        const Vector& t = k >= -truth.M && k <= truth.M ? truth.at(k) : zero;
        sum += grid.norm2(e - t);
    }
    return sum;
}

double metric_delta_pred(const std::vector<double>& zhat, const std::vector<double>& z_true,
                         double var_z) {
    if (zhat.size() != z_true.size() || zhat.empty())
        throw ConfigError("metric_delta_pred needs matching non-empty forecast arrays");
    if (!(var_z > 0.0)) throw ConfigError("metric_delta_pred needs var(Z) > 0");
    double sum = 0.0;
    for (std::size_t i = 0; i < zhat.size(); ++i) {
        const double d = zhat[i] - z_true[i];
        sum += d * d;
    }
    return sum / (var_z * static_cast<double>(zhat.size()));
}

}  // namespace sflr
