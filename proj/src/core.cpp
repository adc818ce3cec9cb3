#include "sflr/core.hpp"

namespace sflr {

void SparseFTS::validate() const {
    if (obs.empty()) throw DataError("sparse series is empty (T = 0)");
    std::size_t n = 0;
    for (std::size_t t = 0; t < obs.size(); ++t) {
        for (const auto& o : obs[t]) {
            if (o.x < 0.0 || o.x > 1.0)
                throw DataError("observation location outside [0,1] at t = " +
                                std::to_string(t + 1));
            if (!std::isfinite(o.y))
                throw DataError("non-finite measurement at t = " + std::to_string(t + 1));
            ++n;
        }
    }
    if (n == 0) throw DataError("sparse series has no observations");
}

void ScalarTS::validate() const {
    if (n_observed() < 2) throw DataError("scalar series needs at least 2 observed values");
    for (double v : z)
        if (!missing(v) && !std::isfinite(v)) throw DataError("non-finite response value");
}

void DenseFTS::validate(int p) const {
    if (curves.rows() < 1) throw DataError("dense series is empty");
    if (curves.cols() != p)
        throw DataError("dense series column count does not match the spatial grid");
    if (!curves.allFinite()) throw DataError("dense series contains non-finite values");
}

SpatialGrid::SpatialGrid(int p_points) : p(p_points) {
    if (p < 2) throw ConfigError("spatial grid needs p >= 2");
    points = Vector::LinSpaced(p, 0.0, 1.0);
}

double SpatialGrid::interp1(const Vector& f, double x) const {
    const double s = x * (p - 1);
    int i = static_cast<int>(std::floor(s));
    if (i < 0) i = 0;
    if (i > p - 2) i = p - 2;
    const double a = s - i;
    return (1.0 - a) * f[i] + a * f[i + 1];
}

double SpatialGrid::interp2(const Matrix& k, double x, double y) const {
    const double sx = x * (p - 1), sy = y * (p - 1);
    int i = static_cast<int>(std::floor(sx));
    int j = static_cast<int>(std::floor(sy));
    if (i < 0) i = 0;
    if (i > p - 2) i = p - 2;
    if (j < 0) j = 0;
    if (j > p - 2) j = p - 2;
    const double a = sx - i, b = sy - j;
    return (1.0 - a) * (1.0 - b) * k(i, j) + a * (1.0 - b) * k(i + 1, j) +
           (1.0 - a) * b * k(i, j + 1) + a * b * k(i + 1, j + 1);
}

Vector SpatialGrid::interp_cols(const Matrix& k, double y) const {
    const double sy = y * (p - 1);
    int j = static_cast<int>(std::floor(sy));
    if (j < 0) j = 0;
    if (j > p - 2) j = p - 2;
    const double b = sy - j;
    return (1.0 - b) * k.col(j) + b * k.col(j + 1);
}

FrequencyGrid::FrequencyGrid(int n) : n_freq(n) {
    if (n < 4 || n % 2 != 0) throw ConfigError("frequency grid needs an even n_freq >= 4");
    const double pi = 3.14159265358979323846;
    omegas.resize(n);
    for (int i = 0; i < n; ++i) omegas[i] = -pi + 2.0 * pi * i / n;
}

double epanechnikov(double v) {
    const double a = std::abs(v);
    return a <= 1.0 ? 0.75 * (1.0 - v * v) : 0.0;
}

int bartlett_span_default(int T) {
    if (T < 1) throw ConfigError("bartlett_span_default needs T >= 1");
    // Nudge before flooring so exact cubes (e.g. T = 1000) are not lost to
    // cbrt rounding.
    const int L = static_cast<int>(std::floor(2.0 * std::cbrt(static_cast<double>(T)) + 1e-9));
    return L < 1 ? 1 : L;
}

double bartlett_weight(int L, int h) {
    if (L < 1) throw ConfigError("bartlett_weight needs L >= 1");
    const int a = h < 0 ? -h : h;
    return a >= L ? 0.0 : 1.0 - static_cast<double>(a) / L;
}

BartlettWeights::BartlettWeights(int span) : L(span) {
    if (L < 1) throw ConfigError("Bartlett span must be >= 1");
    w.resize(L + 1);
    for (int h = 0; h <= L; ++h) w[h] = bartlett_weight(L, h);
}

}  // namespace sflr
