#ifndef SFLR_CORE_HPP
#define SFLR_CORE_HPP

#include "sflr/common.hpp"

namespace sflr {

// One measurement of a latent curve: location in [0,1] and observed value.
struct Obs {
    double x;
    double y;
};

// Sparsely observed functional time series. obs[t] holds the measurements of
// the latent curve at time t+1 (ragged, possibly empty).
struct SparseFTS {
    std::vector<std::vector<Obs>> obs;

    int T() const { return static_cast<int>(obs.size()); }
    std::size_t n_total() const {
        std::size_t n = 0;
        for (const auto& o : obs) n += o.size();
        return n;
    }
    std::vector<int> counts() const {
        std::vector<int> c(obs.size());
        for (std::size_t t = 0; t < obs.size(); ++t) c[t] = static_cast<int>(obs[t].size());
        return c;
    }
    void validate() const;
};

// Scalar response series; missing values encoded as NaN.
struct ScalarTS {
    std::vector<double> z;

    int T() const { return static_cast<int>(z.size()); }
    static bool missing(double v) { return std::isnan(v); }
    int n_observed() const {
        int n = 0;
        for (double v : z)
            if (!missing(v)) ++n;
        return n;
    }
    void validate() const;
};

// Fully observed functional time series: each row of curves is one curve
// evaluated on the spatial grid.
struct DenseFTS {
    Matrix curves;  // T x p

    int T() const { return static_cast<int>(curves.rows()); }
    void validate(int p) const;
};

// Equispaced grid on [0,1] with flat Riemann quadrature weight 1/p.
struct SpatialGrid {
    int p;
    Vector points;

    explicit SpatialGrid(int p_points = 51);

    double quad_weight() const { return 1.0 / static_cast<double>(p); }
    double integrate(const Vector& f) const { return f.sum() * quad_weight(); }
    double inner(const Vector& f, const Vector& g) const { return f.dot(g) * quad_weight(); }
    double norm2(const Vector& f) const { return f.squaredNorm() * quad_weight(); }

    // Evaluation of grid functions off the nodes.
    double interp1(const Vector& f, double x) const;
    double interp2(const Matrix& k, double x, double y) const;
    // Column vector k(:, y) with y interpolated; rows stay on the grid.
    Vector interp_cols(const Matrix& k, double y) const;
};

// Equispaced half-open grid on [-pi, pi); Riemann sums over it integrate
// trigonometric polynomials of degree < n_freq/2 exactly.
struct FrequencyGrid {
    int n_freq;
    Vector omegas;

    explicit FrequencyGrid(int n = 512);

    double step() const { return 2.0 * 3.14159265358979323846 / n_freq; }
    // Index of -omega[i] on the grid (i = 0 and i = n/2 are self-paired).
    int negation_index(int i) const { return (n_freq - i) % n_freq; }
};

double epanechnikov(double v);

// L = floor(2 T^{1/3}), at least 1.
int bartlett_span_default(int T);

double bartlett_weight(int L, int h);

struct BartlettWeights {
    int L;
    std::vector<double> w;  // w[h] for h = 0..L

    explicit BartlettWeights(int span);
    double operator()(int h) const {
        const int a = h < 0 ? -h : h;
        return a >= L ? 0.0 : w[a];
    }
};

struct NoiseEstimate {
    double sigma2;
};

}  // namespace sflr

#endif
