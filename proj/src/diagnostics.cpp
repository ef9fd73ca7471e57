#include "aodret/diagnostics.hpp"

#include "aodret/textio.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace aodret {

double compute_rhat(const std::vector<std::vector<double>>& chains) {
    const std::size_t m = chains.size();
    if (m < 2) throw std::invalid_argument("rhat: need at least 2 chains");
    const std::size_t n = chains[0].size();
    if (n < 2) throw std::invalid_argument("rhat: need chains of length >= 2");
    for (const auto& c : chains)
        if (c.size() != n) throw std::invalid_argument("rhat: unequal chain lengths");

    std::vector<double> means(m);
    double w = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        double mean = 0.0;
        for (double v : chains[j]) mean += v;
        mean /= n;
        means[j] = mean;
        double ss = 0.0;
        for (double v : chains[j]) ss += (v - mean) * (v - mean);
        w += ss / (n - 1);
    }
    w /= m;

    double grand = 0.0;
    for (double v : means) grand += v;
    grand /= m;
    double b = 0.0;
    for (double v : means) b += (v - grand) * (v - grand);
    b *= static_cast<double>(n) / (m - 1); // B = n * var(chain means)

    if (w == 0.0)
        return b == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
    const double vhat = (n - 1.0) / n * w + b / n;
    return std::sqrt(vhat / w);
}

AcceptanceReport acceptance_report(const KernelCounters& c, double lo, double hi) {
    auto rate = [&](long long accepts, long long attempts) {
        AcceptanceRate r;
        if (attempts > 0) {
            r.rate = static_cast<double>(accepts) / static_cast<double>(attempts);
            r.flagged = *r.rate < lo || *r.rate > hi;
        }
        return r;
    };
    AcceptanceReport rep;
    rep.tau = rate(c.tau_accepts, c.tau_attempts);
    rep.theta = rate(c.theta_accepts, c.theta_attempts);
    rep.alpha = rate(c.alpha_accepts, c.alpha_attempts);
    rep.sigma = rate(c.sigma_accepts, c.sigma_attempts);
    return rep;
}

std::vector<double> autocorrelation(const std::vector<double>& series, int max_lag) {
    const int n = static_cast<int>(series.size());
    if (max_lag < 0) throw std::invalid_argument("acf: negative max_lag");
    if (n <= max_lag)
        throw std::invalid_argument("acf: series no longer than max_lag");
    double mean = 0.0;
    for (double v : series) mean += v;
    mean /= n;
    double denom = 0.0;
    for (double v : series) denom += (v - mean) * (v - mean);

    std::vector<double> acf(max_lag + 1);
    acf[0] = 1.0;
    for (int k = 1; k <= max_lag; ++k) {
        if (denom == 0.0) {
            acf[k] = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        double num = 0.0;
        for (int t = 0; t + k < n; ++t)
            num += (series[t] - mean) * (series[t + k] - mean);
        acf[k] = num / denom;
    }
    return acf;
}

ScalarSummary summarize_scalar(std::vector<double> samples) {
    if (samples.empty())
        throw std::invalid_argument("summarize: empty sample set");
    const std::size_t n = samples.size();
    double mean = 0.0;
    for (double v : samples) mean += v;
    mean /= n;
    double ss = 0.0;
    for (double v : samples) ss += (v - mean) * (v - mean);
    const double sd = n > 1 ? std::sqrt(ss / (n - 1)) : 0.0;

    std::sort(samples.begin(), samples.end());
    // Nearest-rank percentile: value at rank ceil(p * n), 1-based.
    auto pct = [&](double p) {
        std::size_t rank = static_cast<std::size_t>(std::ceil(p * n));
        if (rank < 1) rank = 1;
        if (rank > n) rank = n;
        return samples[rank - 1];
    };
    ScalarSummary s;
    s.mean = mean;
    s.sd = sd;
    s.p5 = pct(0.05);
    s.p25 = pct(0.25);
    s.p50 = pct(0.50);
    s.p75 = pct(0.75);
    s.p95 = pct(0.95);
    return s;
}

PosteriorSummary summarize(const ChainRecord& record) {
    if (record.sample_count() == 0)
        throw std::invalid_argument("summarize: record has no retained samples");

    PosteriorSummary out;
    // Per-pixel statistics exist only when field samples were recorded.
    out.pixel_count =
        record.has_fields && !record.tau_samples.empty() ? record.pixel_count : 0;
    out.components = record.components;
    out.channels = record.channels;
    out.sample_count = record.sample_count();
    const int S = record.sample_count();

    out.kappa = summarize_scalar(record.kappa_samples);
    for (int m = 0; m < record.components; ++m) {
        std::vector<double> v(S);
        for (int s = 0; s < S; ++s) v[s] = record.alpha_samples[s][m];
        out.alpha.push_back(summarize_scalar(std::move(v)));
    }
    for (int c = 0; c < record.channels; ++c) {
        std::vector<double> v(S);
        for (int s = 0; s < S; ++s) v[s] = record.sigma2_samples[s][c];
        out.sigma2.push_back(summarize_scalar(std::move(v)));
    }

    if (out.pixel_count > 0) {
        const int P = record.pixel_count;
        const int M = record.components;
        out.tau.resize(P);
        std::vector<double> v(S);
        for (int p = 0; p < P; ++p) {
            for (int s = 0; s < S; ++s) v[s] = record.tau_samples[s][p];
            out.tau[p] = summarize_scalar(v);
        }
        out.theta_mean.assign(static_cast<std::size_t>(P) * M, 0.0);
        out.theta_sd.assign(static_cast<std::size_t>(P) * M, 0.0);
        for (std::size_t i = 0; i < out.theta_mean.size(); ++i) {
            double mean = 0.0;
            for (int s = 0; s < S; ++s) mean += record.theta_samples[s][i];
            mean /= S;
            double ss = 0.0;
            for (int s = 0; s < S; ++s) {
                const double d = record.theta_samples[s][i] - mean;
                ss += d * d;
            }
            out.theta_mean[i] = mean;
            out.theta_sd[i] = S > 1 ? std::sqrt(ss / (S - 1)) : 0.0;
        }
    }
    return out;
}

DiagnosticsReport diagnose(const std::vector<ChainRecord>& chains,
                           double rhat_threshold, int max_lag) {
    if (chains.empty()) throw std::invalid_argument("diagnose: no chains");
    DiagnosticsReport rep;
    rep.rhat_threshold = rhat_threshold;

    // Post-burn-in log posterior per chain, truncated to the common length.
    std::vector<std::vector<double>> series;
    std::size_t common = std::numeric_limits<std::size_t>::max();
    for (const auto& rec : chains) {
        const int stride = std::max(1, rec.trace_stride);
        const std::size_t skip = std::min<std::size_t>(
            rec.burn_in / stride + 1, rec.log_posterior.size());
        series.emplace_back(rec.log_posterior.begin() + skip,
                            rec.log_posterior.end());
        common = std::min(common, series.back().size());
    }
    for (auto& s : series) s.resize(common);

    if (chains.size() >= 2 && common >= 2) {
        rep.rhat_log_posterior = compute_rhat(series);
        rep.converged = *rep.rhat_log_posterior < rhat_threshold;
    }

    KernelCounters pooled;
    for (const auto& rec : chains) {
        const KernelCounters& c =
            rec.post_burn_counters.tau_attempts > 0 ? rec.post_burn_counters
                                                    : rec.counters;
        pooled.tau_attempts += c.tau_attempts;
        pooled.tau_accepts += c.tau_accepts;
        pooled.theta_attempts += c.theta_attempts;
        pooled.theta_accepts += c.theta_accepts;
        pooled.alpha_attempts += c.alpha_attempts;
        pooled.alpha_accepts += c.alpha_accepts;
        pooled.sigma_attempts += c.sigma_attempts;
        pooled.sigma_accepts += c.sigma_accepts;
    }
    rep.acceptance = acceptance_report(pooled);

    if (!series.empty() && static_cast<int>(series[0].size()) > max_lag && max_lag > 0)
        rep.acf_log_posterior = autocorrelation(series[0], max_lag);
    return rep;
}

std::string render_diagnostics(const DiagnosticsReport& rep) {
    std::ostringstream os;
    os << "aodret-diagnostics v1\n";
    os << "rhat_threshold " << format_double(rep.rhat_threshold) << "\n";
    if (rep.rhat_log_posterior)
        os << "rhat_log_posterior " << format_double(*rep.rhat_log_posterior) << "\n";
    else
        os << "rhat_log_posterior absent\n";
    os << "converged " << (rep.converged ? 1 : 0) << "\n";
    auto line = [&](const char* name, const AcceptanceRate& r) {
        os << "accept_" << name << " ";
        if (r.rate)
            os << format_double(*r.rate) << " flagged " << (r.flagged ? 1 : 0);
        else
            os << "absent";
        os << "\n";
    };
    line("tau", rep.acceptance.tau);
    line("theta", rep.acceptance.theta);
    line("alpha", rep.acceptance.alpha);
    line("sigma", rep.acceptance.sigma);
    os << "acf " << rep.acf_log_posterior.size() << "\n";
    for (std::size_t k = 0; k < rep.acf_log_posterior.size(); ++k)
        os << "lag " << k << " " << format_double(rep.acf_log_posterior[k]) << "\n";
    return os.str();
}

} // namespace aodret
