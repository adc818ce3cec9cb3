#ifndef SFLR_COMMON_HPP
#define SFLR_COMMON_HPP

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace sflr {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Complex = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;

// Error taxonomy, mapped onto CLI exit codes 2/3/4.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// ---------------------------------------------------------------------------
// Deterministic RNG. All randomness in the project flows from one master seed
// through per-subsystem stream ids, so partial reruns stay stable.

namespace stream {
inline constexpr std::uint64_t kProcess = 1;
inline constexpr std::uint64_t kSampling = 2;
inline constexpr std::uint64_t kResponse = 3;
inline constexpr std::uint64_t kCopy = 4;
inline constexpr std::uint64_t kFolds = 5;
inline constexpr std::uint64_t kHoldout = 6;
inline constexpr std::uint64_t kRegressor2 = 7;
}  // namespace stream

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream_id) {
    return splitmix64(master ^ splitmix64(stream_id * 0xd6e8feb86659fd93ULL));
}

// xoshiro-style generator kept local so draws are bit-identical across
// platforms and standard-library versions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t s = seed;
        for (auto& w : state_) {
            s = splitmix64(s);
            w = s;
        }
        has_spare_ = false;
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform on [0,1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform on {0,...,n} inclusive.
    int uniform_int(int n) {
        return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n + 1));
    }

    // Box-Muller; spare value cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::uint64_t state_[4];
    bool has_spare_;
    double spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// Thread cap shared by every parallel loop. 0 means hardware concurrency.

void set_max_threads(int n);
int max_threads();

// Static partition of [0,n) over worker threads. Each task must write to
// disjoint slots only; results are then independent of scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace sflr

#endif
