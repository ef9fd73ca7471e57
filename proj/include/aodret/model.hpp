#pragma once

#include "aodret/forward_model.hpp"
#include "aodret/lattice.hpp"

#include <span>
#include <vector>

namespace aodret {

// Sampled retrieval parameters over the clear pixels of a block: AOD tau and
// the per-pixel mixing vector theta (theta stored pixel-major).
struct AerosolState {
    std::vector<double> tau;   // clear_count
    std::vector<double> theta; // clear_count * components
    int components = 0;

    int pixel_count() const { return static_cast<int>(tau.size()); }
    std::span<double> theta_of(int p) {
        return {theta.data() + static_cast<std::size_t>(p) * components,
                static_cast<std::size_t>(components)};
    }
    std::span<const double> theta_of(int p) const {
        return {theta.data() + static_cast<std::size_t>(p) * components,
                static_cast<std::size_t>(components)};
    }

    // Throws std::domain_error when support or simplex invariants fail.
    void validate(double tau_lo, double tau_hi, double tol = 1e-10) const;
};

struct HyperState {
    double kappa = 0.0;
    std::vector<double> alpha;  // components
    std::vector<double> sigma2; // channels

    void validate() const; // all strictly positive and finite
};

// Observed radiances for the clear pixels of a grid, pixel-major and
// channel-minor, plus per-channel means over clear pixels.
class RadianceBlock {
public:
    RadianceBlock(BlockGrid grid, int channels, std::vector<double> radiances);

    const BlockGrid& grid() const { return grid_; }
    int channels() const { return channels_; }
    int pixel_count() const { return grid_.clear_count(); }

    std::span<const double> pixel(int p) const {
        return {radiances_.data() + static_cast<std::size_t>(p) * channels_,
                static_cast<std::size_t>(channels_)};
    }
    std::span<const double> radiances() const { return radiances_; }
    std::span<const double> channel_means() const { return channel_means_; }

private:
    BlockGrid grid_;
    int channels_;
    std::vector<double> radiances_;
    std::vector<double> channel_means_;
};

// Operational measurement-error rule: sigma_c = 0.05 * min(0.04, mean_c).
// Returns standard deviations.
std::vector<double> sigma_init(const RadianceBlock& block);

// Weighted least squares misfit of one pixel:
//   chi2_p = sum_c (L_cp - L_c^RT(tau, theta))^2 / (2 sigma_c^2).
double chi_square_pixel(std::span<const double> observed, double tau,
                        std::span<const double> theta,
                        std::span<const double> sigma2, const ForwardModel& fm);

// Misfit of a pixel given already-evaluated model radiances.
double chi_square_residual(std::span<const double> observed,
                           std::span<const double> simulated,
                           std::span<const double> sigma2);

// Log of the operational likelihood: -sum_p chi2_p, plus the Gaussian
// normalizer -(P/2) sum_c log(2 pi sigma_c^2) when include_normalizer is set.
// Callers sampling sigma2 must include the normalizer; pure (tau, theta)
// Metropolis ratios may drop it since it cancels.
double log_likelihood(const RadianceBlock& block, const AerosolState& state,
                      std::span<const double> sigma2, const ForwardModel& fm,
                      bool include_normalizer);

// Intrinsic first-order GMRF log prior:
//   (P-1)/2 log(kappa) - kappa/2 sum_{edges}(tau_p' - tau_p)^2,
// each unordered edge counted once.
double log_gmrf_prior(std::span<const double> tau, double kappa,
                      const Adjacency& adj);

// Sum over edges of squared neighbor differences (the kappa statistic).
double gmrf_quadratic(std::span<const double> tau, const Adjacency& adj);

// Dirichlet(alpha) log density of one simplex point; -inf sentinel for zero
// components whose alpha is not 1 (never thrown).
double log_dirichlet_pixel(std::span<const double> theta,
                           std::span<const double> alpha);

// Field version: sum of log_dirichlet_pixel over pixels.
double log_dirichlet_prior(std::span<const double> theta_field, int components,
                           std::span<const double> alpha);

// log p(alpha) = sum_m (1 - alpha_m), the conjugate exponential hyperprior.
double log_alpha_hyperprior(std::span<const double> alpha);

// Log conditional posterior of alpha given the sufficient statistics
// T_alpha_m = sum_p log theta_pm over P pixels (Dirichlet likelihood plus the
// exponential hyperprior, constants dropped).
double log_alpha_conditional(std::span<const double> alpha,
                             std::span<const double> t_alpha, int pixel_count);

// Log conditional posterior kernel of one channel noise variance:
//   -(P/2 + 1) log(sigma2) - ssr/(2 sigma2).
double log_sigma2_conditional(double sigma2_c, double ssr_c, int pixel_count);

} // namespace aodret
