#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace aodret {

// Inverse standard normal CDF (Acklam's rational approximation refined by one
// Halley step against erfc; ~1e-15 absolute over (0,1)).
double normal_quantile(double p);
double normal_cdf(double x);

// Substream seed derivation (splitmix64 mixing), shared by chains, patches
// and replicate generators so streams never collide regardless of scheduling.
std::uint64_t derive_stream_seed(std::uint64_t seed, std::uint64_t idx);

// Deterministic random stream. Substreams are derived from the base seed by a
// fixed splitmix64 rule so that chains, patches and replicates never share
// state regardless of scheduling.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    // Substream `idx` of the stream that was seeded with `seed`.
    static Rng stream(std::uint64_t seed, std::uint64_t idx);

    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(gen_); }
    double uniform(double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(gen_);
    }
    double normal(double mean, double sd) {
        return std::normal_distribution<double>(mean, sd)(gen_);
    }
    double gamma(double shape, double scale) {
        return std::gamma_distribution<double>(shape, scale)(gen_);
    }
    double chi_squared(double dof) {
        return std::chi_squared_distribution<double>(dof)(gen_);
    }

    // Normal(mean, sd) restricted to [lo, hi], drawn by inverse-CDF so one
    // uniform is consumed per call.
    double truncated_normal(double mean, double sd, double lo, double hi);

    void dirichlet(std::span<const double> alpha, std::span<double> out);
    std::vector<double> dirichlet(std::span<const double> alpha);

    std::mt19937_64& engine() { return gen_; }

private:
    std::mt19937_64 gen_;
};

} // namespace aodret
