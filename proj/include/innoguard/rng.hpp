#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace innoguard {

/**
 * @brief Deterministic counter-based random stream (SplitMix64 core).
 *
 * Output depends only on (seed, counter), so identical seeds replay
 * bit-identical draw sequences on every platform. Streams are cheap value
 * types; derive independent substreams with derive() instead of sharing
 * one stream across tasks.
 */
class RngStream {
  public:
    explicit RngStream(std::uint64_t seed) : seed_(seed) {}

    /// Independent stream keyed by (seed, tag). Used to separate plant
    /// noise from attack seeds while keeping one top-level seed.
    static RngStream derive(std::uint64_t seed, std::uint64_t tag) {
        return RngStream(mix(seed ^ mix(tag + 0x7F4A7C15ULL)));
    }

    std::uint64_t next_u64() {
        counter_ += 0x9E3779B97F4A7C15ULL;
        return mix(seed_ ^ counter_);
    }

    /// Uniform draw in (0, 1]; never returns 0 so log() is safe.
    double next_uniform() {
        return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller; the second value of each pair is cached.
    double next_gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = next_uniform();
        const double u2 = next_uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    /// Vector of i.i.d. standard normals.
    Eigen::VectorXd next_gaussian_vector(Eigen::Index dim) {
        Eigen::VectorXd g(dim);
        for (Eigen::Index i = 0; i < dim; ++i) g(i) = next_gaussian();
        return g;
    }

    std::uint64_t seed() const { return seed_; }

  private:
    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ULL;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBULL;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Draw from N(0, F F^T) given a lower-triangular factor F.
inline Eigen::VectorXd sample_mvn(const Eigen::MatrixXd& cov_chol, RngStream& rng) {
    return cov_chol * rng.next_gaussian_vector(cov_chol.cols());
}

}  // namespace innoguard
