#include "aodret/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace aodret {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

} // namespace

std::uint64_t derive_stream_seed(std::uint64_t seed, std::uint64_t idx) {
    return splitmix64(splitmix64(seed) ^ splitmix64(idx + 1));
}

Rng Rng::stream(std::uint64_t seed, std::uint64_t idx) {
    return Rng(derive_stream_seed(seed, idx));
}

double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw std::domain_error("normal_quantile: p outside (0,1)");

    // Acklam's coefficients.
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};

    const double plow = 0.02425;
    double x;
    if (p < plow) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - plow) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }

    // One Halley refinement.
    const double e = normal_cdf(x) - p;
    const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
    x = x - u / (1.0 + 0.5 * x * u);
    return x;
}

double Rng::truncated_normal(double mean, double sd, double lo, double hi) {
    if (!(lo < hi)) throw std::invalid_argument("truncated_normal: empty interval");
    if (!(sd > 0.0)) throw std::invalid_argument("truncated_normal: sd must be positive");
    const double flo = normal_cdf((lo - mean) / sd);
    const double fhi = normal_cdf((hi - mean) / sd);
    if (fhi - flo < 1e-300) {
        // All mass numerically outside; fall back to the nearer endpoint side.
        return uniform(lo, hi);
    }
    double u = flo + (fhi - flo) * uniform();
    if (u <= 0.0) u = std::nextafter(0.0, 1.0);
    if (u >= 1.0) u = std::nextafter(1.0, 0.0);
    const double x = mean + sd * normal_quantile(u);
    return std::min(hi, std::max(lo, x));
}

void Rng::dirichlet(std::span<const double> alpha, std::span<double> out) {
    if (alpha.size() != out.size())
        throw std::invalid_argument("dirichlet: size mismatch");
    double sum = 0.0;
    for (int attempt = 0; attempt < 64 && sum <= 0.0; ++attempt) {
        sum = 0.0;
        for (std::size_t m = 0; m < alpha.size(); ++m) {
            if (!(alpha[m] > 0.0))
                throw std::invalid_argument("dirichlet: alpha must be positive");
            out[m] = gamma(alpha[m], 1.0);
            sum += out[m];
        }
    }
    if (sum <= 0.0) throw std::runtime_error("dirichlet: degenerate draw");
    for (std::size_t m = 0; m < alpha.size(); ++m) out[m] /= sum;
}

std::vector<double> Rng::dirichlet(std::span<const double> alpha) {
    std::vector<double> out(alpha.size());
    dirichlet(alpha, out);
    return out;
}

} // namespace aodret
