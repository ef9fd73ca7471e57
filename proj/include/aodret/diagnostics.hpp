#pragma once

#include "aodret/sampler.hpp"

#include <optional>
#include <string>
#include <vector>

namespace aodret {

// Potential scale reduction over >= 2 equal-length scalar chains:
//   R = sqrt(((n-1)/n * W + B/n) / W)
// with W the mean within-chain variance and B/n the variance of chain means.
// Degenerate rules: W = 0 with B > 0 -> +inf; W = B = 0 -> 1.
double compute_rhat(const std::vector<std::vector<double>>& chains);

struct AcceptanceRate {
    std::optional<double> rate;    // absent when no attempts were made
    bool flagged = false;          // outside the target band
};

struct AcceptanceReport {
    AcceptanceRate tau, theta, alpha, sigma;
};

AcceptanceReport acceptance_report(const KernelCounters& counters,
                                   double lo = 0.25, double hi = 0.50);

// Biased sample ACF normalized to lag 0; absent entries (NaN) for constant
// series beyond lag 0.
std::vector<double> autocorrelation(const std::vector<double>& series, int max_lag);

struct ScalarSummary {
    double mean = 0.0;
    double sd = 0.0;
    double p5 = 0.0, p25 = 0.0, p50 = 0.0, p75 = 0.0, p95 = 0.0;
};

// Moments and nearest-rank percentiles of a sample set.
ScalarSummary summarize_scalar(std::vector<double> samples);

struct PosteriorSummary {
    int pixel_count = 0;
    int components = 0;
    int channels = 0;
    std::vector<ScalarSummary> tau;        // per pixel (requires fields)
    std::vector<double> theta_mean;        // pixel-major, components
    std::vector<double> theta_sd;
    ScalarSummary kappa;
    std::vector<ScalarSummary> alpha;      // per component
    std::vector<ScalarSummary> sigma2;     // per channel
    int sample_count = 0;
};

PosteriorSummary summarize(const ChainRecord& record);

struct DiagnosticsReport {
    std::optional<double> rhat_log_posterior; // needs >= 2 chains
    double rhat_threshold = 1.1;
    bool converged = true;
    AcceptanceReport acceptance;
    std::vector<double> acf_log_posterior; // lags 0..max_lag of chain 0
};

// Multi-chain report: R-hat of the log posterior (the convergence benchmark),
// pooled post-burn-in acceptance rates, and the ACF of the first chain's
// post-burn-in log posterior.
DiagnosticsReport diagnose(const std::vector<ChainRecord>& chains,
                           double rhat_threshold = 1.1, int max_lag = 50);

std::string render_diagnostics(const DiagnosticsReport& report);

} // namespace aodret
