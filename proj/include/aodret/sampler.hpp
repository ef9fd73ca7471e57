#pragma once

#include "aodret/forward_model.hpp"
#include "aodret/lattice.hpp"
#include "aodret/model.hpp"
#include "aodret/rng.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace aodret {

enum class SigmaUpdateMode {
    Conjugate, // exact scaled inverse-chi-square draw
    Metropolis // log-scale random walk against the same conditional
};

struct ChainConfig {
    int iterations = 3000;
    int burn_in = 1000;
    int thinning = 1;
    std::uint64_t seed = 1234567;

    bool adapt_acceptance = true;
    double accept_lo = 0.25;
    double accept_hi = 0.50;
    double alpha_step = 0.2; // log-scale random-walk step for alpha updates

    SigmaUpdateMode sigma_update = SigmaUpdateMode::Conjugate;
    double sigma_step = 0.4;    // log step for the Metropolis sigma variant
    double sigma2_floor = 1e-12;

    // Kernel switches; fixing a parameter block freezes it at its init value.
    bool update_tau = true;
    bool update_theta = true;
    bool update_sigma2 = true;
    bool update_kappa = true;
    bool update_alpha = true;

    bool record_fields = true;

    // Hyper-hyperparameters, zero by construction of the model; kept as
    // override hooks for robustness experiments.
    double nu0 = 0.0;    // sigma2 prior degrees of freedom
    double alpha0 = 0.0; // kappa Gamma prior shape
    double beta0 = 0.0;  // kappa Gamma prior rate

    void validate() const;
};

struct KernelCounters {
    long long tau_attempts = 0, tau_accepts = 0;
    long long theta_attempts = 0, theta_accepts = 0;
    long long alpha_attempts = 0, alpha_accepts = 0;
    long long sigma_attempts = 0, sigma_accepts = 0;
};

struct ChainRecord {
    int pixel_count = 0;
    int components = 0;
    int channels = 0;
    int iterations = 0;
    int burn_in = 0;
    int thinning = 1;
    std::uint64_t seed = 0;
    bool has_fields = true;

    // Joint log posterior; entry 0 is the init state, then one entry per
    // trace_stride iterations (1 for global chains, the round length for the
    // patch-parallel engine).
    int trace_stride = 1;
    std::vector<double> log_posterior;

    std::vector<double> kappa_samples;
    std::vector<std::vector<double>> alpha_samples;  // samples x components
    std::vector<std::vector<double>> sigma2_samples; // samples x channels
    std::vector<std::vector<double>> tau_samples;    // samples x pixels
    std::vector<std::vector<double>> theta_samples;  // samples x pixels*components

    KernelCounters counters;           // all iterations
    KernelCounters post_burn_counters; // iterations after burn-in only

    int sample_count() const { return static_cast<int>(kappa_samples.size()); }
};

// Whole-block sufficient statistics exchanged by the patch-parallel engine:
//   t_kappa  = sum over neighbor pairs of (tau_p - tau_q)^2
//   t_sigma_c = sum_p (L_cp - L_c^RT(tau_p, theta_p))^2
//   t_alpha_m = sum_p log theta_pm
struct SummaryStats {
    double t_kappa = 0.0;
    std::vector<double> t_sigma;
    std::vector<double> t_alpha;
};

// Metropolis accept/reject decision for a log acceptance ratio.
bool mh_accept(double log_ratio, Rng& rng);

// GMRF full-conditional proposal for one pixel, truncated to [lo, hi]:
// Normal(mean of clear neighbors, 1/(n_p kappa)). Isolated pixels fall back
// to a uniform draw on the support (flat conditional under the intrinsic
// prior).
double propose_tau(int p, std::span<const double> tau, double kappa,
                   const Adjacency& adj, double lo, double hi, Rng& rng);

// Exact draw kappa ~ Gamma((P-1)/2 + alpha0, rate T/2 + beta0) from the field.
// Throws std::domain_error when the quadratic statistic is zero.
double gibbs_update_kappa(std::span<const double> tau, const Adjacency& adj,
                          Rng& rng, double alpha0 = 0.0, double beta0 = 0.0);
double gibbs_update_kappa_from_stat(double t_kappa, int pixel_count, Rng& rng,
                                    double alpha0 = 0.0, double beta0 = 0.0);

// Exact scaled inverse-chi-square draw sigma2 = ssr / chi2(P + nu0), floored
// at sigma2_floor (which also covers ssr = 0).
double gibbs_update_sigma2(double ssr, int pixel_count, Rng& rng,
                           double sigma2_floor = 1e-12, double nu0 = 0.0);

// Default initialization: tau at a fraction of the support (0.5 = midpoint),
// uniform theta, kappa = 100, alpha = 1, sigma2 from the operational rule.
AerosolState default_init_state(int pixel_count, int components, double tau_lo,
                                double tau_hi, double tau_fraction = 0.5);
HyperState default_init_hyper(const RadianceBlock& block, int components);

// One Metropolis-within-Gibbs chain over a block. A sweep updates all tau
// (column by column, top to bottom), all theta, all sigma2 channels, kappa,
// then all alpha components. Strictly sequential; one instance per thread.
class MwgSampler {
public:
    MwgSampler(const RadianceBlock& block, const ForwardModel& fm,
               const Adjacency& adj, ChainConfig config, AerosolState init_state,
               HyperState init_hyper);

    // Switches the sigma2/kappa/alpha conditionals to the given whole-block
    // statistics (patch-parallel mode). pixel_count is the whole block's.
    void set_frozen_calibration(SummaryStats stats, int pixel_count);

    // Replaces the current state (e.g. with a merged one) and rebuilds caches.
    void reset_state(AerosolState state);

    // Runs `n` full sweeps; adaptation active only when `adapt` is set.
    void iterate(int n, bool adapt);

    // Full protocol: burn-in with optional adaptation, then thinned recording.
    ChainRecord run();

    const AerosolState& state() const { return state_; }
    AerosolState& state() { return state_; }
    // Model radiances of the current state, pixel-major (see RadianceBlock).
    std::span<const double> model_radiance_cache() const { return cache_; }
    const HyperState& hyper() const { return hyper_; }
    const KernelCounters& counters() const { return counters_; }
    const KernelCounters& post_burn_counters() const { return post_burn_; }
    double log_posterior() const; // joint log posterior of the current state

    bool update_tau_pixel(int p);
    bool update_theta_pixel(int p);
    void update_sigma2_channel(int c);
    void update_kappa();
    bool update_alpha_component(int m);

private:
    void refresh_cache();
    void compute_ssr(std::vector<double>& out) const;
    void compute_t_alpha(std::vector<double>& out) const;
    void sweep(bool adapt, bool post_burn);
    void adapt_steps();

    const RadianceBlock& block_;
    const ForwardModel& fm_;
    const Adjacency& adj_;
    ChainConfig cfg_;
    AerosolState state_;
    HyperState hyper_;
    Rng rng_;

    std::vector<int> sweep_order_;
    std::vector<double> cache_;      // pixel-major model radiances of state_
    std::vector<double> ssr_;        // per channel, refreshed each sweep
    std::vector<double> t_alpha_;    // per component, refreshed each sweep
    std::vector<double> scratch_;    // proposal radiances
    std::vector<double> theta_prop_;
    std::vector<double> alpha_steps_; // per-component adapted log steps
    double sigma_step_ = 0.4;
    int sweeps_since_adapt_ = 0;

    std::optional<SummaryStats> frozen_;
    int frozen_pixels_ = 0;

    KernelCounters counters_;
    KernelCounters post_burn_;
    KernelCounters window_; // adaptation window tallies
};

// Runs a single global chain and records it.
ChainRecord run_chain(const RadianceBlock& block, const ForwardModel& fm,
                      const Adjacency& adj, const ChainConfig& config,
                      const AerosolState& init_state, const HyperState& init_hyper);

// Convenience: default initialization with tau at a support fraction.
ChainRecord run_chain(const RadianceBlock& block, const ForwardModel& fm,
                      const Adjacency& adj, const ChainConfig& config,
                      double tau_init_fraction = 0.5);

} // namespace aodret
