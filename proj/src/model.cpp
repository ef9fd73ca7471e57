#include "aodret/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace aodret {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kTwoPi = 6.283185307179586476925286766559;
} // namespace

void AerosolState::validate(double tau_lo, double tau_hi, double tol) const {
    if (components < 1) throw std::domain_error("state: components < 1");
    if (theta.size() != tau.size() * static_cast<std::size_t>(components))
        throw std::domain_error("state: theta size mismatch");
    for (double t : tau)
        if (!(t >= tau_lo && t <= tau_hi))
            throw std::domain_error("state: tau outside support");
    for (int p = 0; p < pixel_count(); ++p) {
        double sum = 0.0;
        for (double v : theta_of(p)) {
            if (!(v >= 0.0) || !std::isfinite(v))
                throw std::domain_error("state: theta component negative or non-finite");
            sum += v;
        }
        if (std::abs(sum - 1.0) > tol)
            throw std::domain_error("state: theta does not sum to 1");
    }
}

void HyperState::validate() const {
    auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
    if (!positive(kappa)) throw std::domain_error("hyper: kappa must be positive");
    if (alpha.empty() || sigma2.empty())
        throw std::domain_error("hyper: empty alpha or sigma2");
    for (double a : alpha)
        if (!positive(a)) throw std::domain_error("hyper: alpha must be positive");
    for (double s : sigma2)
        if (!positive(s)) throw std::domain_error("hyper: sigma2 must be positive");
}

RadianceBlock::RadianceBlock(BlockGrid grid, int channels,
                             std::vector<double> radiances)
    : grid_(std::move(grid)), channels_(channels), radiances_(std::move(radiances)) {
    if (channels_ < 1) throw std::invalid_argument("block: channels < 1");
    const std::size_t expected =
        static_cast<std::size_t>(grid_.clear_count()) * channels_;
    if (radiances_.size() != expected)
        throw std::invalid_argument("block: radiance count != clear pixels * channels");
    for (double v : radiances_)
        if (!(v > 0.0) || !std::isfinite(v))
            throw std::invalid_argument("block: radiances must be positive finite");

    channel_means_.assign(channels_, 0.0);
    const int P = grid_.clear_count();
    if (P > 0) {
        for (int p = 0; p < P; ++p) {
            auto row = pixel(p);
            for (int c = 0; c < channels_; ++c) channel_means_[c] += row[c];
        }
        for (double& m : channel_means_) m /= P;
    }
}

std::vector<double> sigma_init(const RadianceBlock& block) {
    if (block.pixel_count() == 0)
        throw std::invalid_argument("sigma_init: block has no clear pixels");
    std::vector<double> sigma(block.channels());
    for (int c = 0; c < block.channels(); ++c)
        sigma[c] = 0.05 * std::min(0.04, block.channel_means()[c]);
    return sigma;
}

double chi_square_residual(std::span<const double> observed,
                           std::span<const double> simulated,
                           std::span<const double> sigma2) {
    double chi2 = 0.0;
    for (std::size_t c = 0; c < observed.size(); ++c) {
        const double r = observed[c] - simulated[c];
        chi2 += r * r / (2.0 * sigma2[c]);
    }
    return chi2;
}

double chi_square_pixel(std::span<const double> observed, double tau,
                        std::span<const double> theta,
                        std::span<const double> sigma2, const ForwardModel& fm) {
    std::vector<double> simulated(fm.channels());
    fm.eval(tau, theta, simulated);
    return chi_square_residual(observed, simulated, sigma2);
}

double log_likelihood(const RadianceBlock& block, const AerosolState& state,
                      std::span<const double> sigma2, const ForwardModel& fm,
                      bool include_normalizer) {
    const int P = block.pixel_count();
    std::vector<double> simulated(fm.channels());
    double total = 0.0;
    for (int p = 0; p < P; ++p) {
        fm.eval(state.tau[p], state.theta_of(p), simulated);
        total -= chi_square_residual(block.pixel(p), simulated, sigma2);
    }
    if (include_normalizer) {
        double logdet = 0.0;
        for (double s2 : sigma2) logdet += std::log(kTwoPi * s2);
        total -= 0.5 * P * logdet;
    }
    return total;
}

double gmrf_quadratic(std::span<const double> tau, const Adjacency& adj) {
    double q = 0.0;
    for (const auto& [p, r] : adj.edges) {
        const double d = tau[r] - tau[p];
        q += d * d;
    }
    return q;
}

double log_gmrf_prior(std::span<const double> tau, double kappa,
                      const Adjacency& adj) {
    if (!(kappa > 0.0)) throw std::domain_error("gmrf prior: kappa must be positive");
    const double P = static_cast<double>(tau.size());
    return 0.5 * (P - 1.0) * std::log(kappa) - 0.5 * kappa * gmrf_quadratic(tau, adj);
}

double log_dirichlet_pixel(std::span<const double> theta,
                           std::span<const double> alpha) {
    if (theta.size() != alpha.size())
        throw std::invalid_argument("dirichlet: dimension mismatch");
    double alpha_sum = 0.0;
    double value = 0.0;
    for (std::size_t m = 0; m < alpha.size(); ++m) {
        const double a = alpha[m];
        if (!(a > 0.0)) throw std::domain_error("dirichlet: alpha must be positive");
        alpha_sum += a;
        value -= std::lgamma(a);
        if (theta[m] == 0.0) {
            if (a != 1.0) return kNegInf; // boundary sentinel, documented
        } else {
            value += (a - 1.0) * std::log(theta[m]);
        }
    }
    return value + std::lgamma(alpha_sum);
}

double log_dirichlet_prior(std::span<const double> theta_field, int components,
                           std::span<const double> alpha) {
    if (components != static_cast<int>(alpha.size()))
        throw std::invalid_argument("dirichlet: alpha size != components");
    const std::size_t P = theta_field.size() / components;
    double total = 0.0;
    for (std::size_t p = 0; p < P; ++p) {
        total += log_dirichlet_pixel(
            theta_field.subspan(p * components, components), alpha);
        if (total == kNegInf) return kNegInf;
    }
    return total;
}

double log_alpha_hyperprior(std::span<const double> alpha) {
    double v = 0.0;
    for (double a : alpha) {
        if (!(a > 0.0)) throw std::domain_error("alpha hyperprior: alpha must be positive");
        v += 1.0 - a;
    }
    return v;
}

double log_alpha_conditional(std::span<const double> alpha,
                             std::span<const double> t_alpha, int pixel_count) {
    if (alpha.size() != t_alpha.size())
        throw std::invalid_argument("alpha conditional: size mismatch");
    double alpha_sum = 0.0;
    double value = 0.0;
    for (std::size_t m = 0; m < alpha.size(); ++m) {
        const double a = alpha[m];
        if (!(a > 0.0)) throw std::domain_error("alpha conditional: alpha must be positive");
        alpha_sum += a;
        value += (a - 1.0) * t_alpha[m] - pixel_count * std::lgamma(a) + (1.0 - a);
    }
    return value + pixel_count * std::lgamma(alpha_sum);
}

double log_sigma2_conditional(double sigma2_c, double ssr_c, int pixel_count) {
    if (!(sigma2_c > 0.0))
        throw std::domain_error("sigma2 conditional: sigma2 must be positive");
    return -(0.5 * pixel_count + 1.0) * std::log(sigma2_c) -
           ssr_c / (2.0 * sigma2_c);
}

} // namespace aodret
