#include "aodret/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace aodret {

namespace {
constexpr int kAdaptWindow = 25; // sweeps per burn-in adaptation window
} // namespace

void ChainConfig::validate() const {
    if (iterations < 0 || burn_in < 0)
        throw std::invalid_argument("chain config: negative iteration counts");
    if (!(burn_in < iterations || (iterations == 0 && burn_in == 0)))
        throw std::invalid_argument("chain config: burn_in < iterations violated");
    if (thinning < 1)
        throw std::invalid_argument("chain config: thinning must be >= 1");
    if (!(accept_lo > 0.0 && accept_lo < accept_hi && accept_hi < 1.0))
        throw std::invalid_argument("chain config: acceptance band must be within (0,1)");
    if (!(alpha_step > 0.0) || !(sigma_step > 0.0))
        throw std::invalid_argument("chain config: proposal steps must be positive");
    if (!(sigma2_floor > 0.0))
        throw std::invalid_argument("chain config: sigma2 floor must be positive");
}

bool mh_accept(double log_ratio, Rng& rng) {
    if (log_ratio >= 0.0) {
        rng.uniform(); // keep the stream advance uniform across branches
        return true;
    }
    return std::log(rng.uniform()) < log_ratio;
}

double propose_tau(int p, std::span<const double> tau, double kappa,
                   const Adjacency& adj, double lo, double hi, Rng& rng) {
    const int n = adj.degree(p);
    if (n == 0) return rng.uniform(lo, hi);
    double mean = 0.0;
    for (int q : adj.neighbors_of(p)) mean += tau[q];
    mean /= n;
    const double sd = 1.0 / std::sqrt(n * kappa);
    return rng.truncated_normal(mean, sd, lo, hi);
}

double gibbs_update_kappa_from_stat(double t_kappa, int pixel_count, Rng& rng,
                                    double alpha0, double beta0) {
    if (pixel_count < 2)
        throw std::domain_error("kappa update: need at least 2 pixels");
    if (!(t_kappa > 0.0))
        throw std::domain_error("kappa update: degenerate constant field (T = 0)");
    const double shape = alpha0 + 0.5 * (pixel_count - 1);
    const double rate = beta0 + 0.5 * t_kappa;
    return rng.gamma(shape, 1.0 / rate);
}

double gibbs_update_kappa(std::span<const double> tau, const Adjacency& adj,
                          Rng& rng, double alpha0, double beta0) {
    return gibbs_update_kappa_from_stat(gmrf_quadratic(tau, adj),
                                        static_cast<int>(tau.size()), rng,
                                        alpha0, beta0);
}

double gibbs_update_sigma2(double ssr, int pixel_count, Rng& rng,
                           double sigma2_floor, double nu0) {
    if (pixel_count < 1)
        throw std::domain_error("sigma2 update: need at least 1 pixel");
    if (!(ssr >= 0.0)) throw std::domain_error("sigma2 update: negative ssr");
    if (ssr == 0.0) return sigma2_floor;
    const double x = rng.chi_squared(pixel_count + nu0);
    if (!(x > 0.0)) return sigma2_floor;
    return std::max(ssr / x, sigma2_floor);
}

AerosolState default_init_state(int pixel_count, int components, double tau_lo,
                                double tau_hi, double tau_fraction) {
    AerosolState s;
    s.components = components;
    s.tau.assign(pixel_count, tau_lo + tau_fraction * (tau_hi - tau_lo));
    // Seeded jitter around the level: an exactly constant field starts the
    // kappa chain from a near-degenerate statistic and measurably delays
    // convergence of far initializations.
    Rng jitter(0xA0D1417u ^ static_cast<std::uint64_t>(pixel_count));
    const double margin = 0.025 * (tau_hi - tau_lo);
    for (double& t : s.tau) {
        t += jitter.uniform(-margin, margin);
        t = std::min(tau_hi, std::max(tau_lo, t));
    }
    s.theta.assign(static_cast<std::size_t>(pixel_count) * components,
                   1.0 / components);
    return s;
}

HyperState default_init_hyper(const RadianceBlock& block, int components) {
    HyperState h;
    h.kappa = 100.0;
    h.alpha.assign(components, 1.0);
    h.sigma2 = sigma_init(block);
    for (double& s : h.sigma2) s = s * s;
    return h;
}

MwgSampler::MwgSampler(const RadianceBlock& block, const ForwardModel& fm,
                       const Adjacency& adj, ChainConfig config,
                       AerosolState init_state, HyperState init_hyper)
    : block_(block), fm_(fm), adj_(adj), cfg_(config),
      state_(std::move(init_state)), hyper_(std::move(init_hyper)),
      rng_(cfg_.seed) {
    cfg_.validate();
    if (state_.pixel_count() != block_.pixel_count())
        throw std::invalid_argument("sampler: state/block pixel mismatch");
    if (state_.components != fm_.components())
        throw std::invalid_argument("sampler: state/model component mismatch");
    if (block_.channels() != fm_.channels())
        throw std::invalid_argument("sampler: block/model channel mismatch");
    if (adj_.pixel_count() != block_.pixel_count())
        throw std::invalid_argument("sampler: adjacency/block mismatch");
    state_.validate(fm_.tau_min(), fm_.tau_max());
    hyper_.validate();
    if (hyper_.alpha.size() != static_cast<std::size_t>(fm_.components()) ||
        hyper_.sigma2.size() != static_cast<std::size_t>(fm_.channels()))
        throw std::invalid_argument("sampler: hyper dimensions mismatch");

    sweep_order_ = block_.grid().column_major_clear_order();
    scratch_.resize(fm_.channels());
    theta_prop_.resize(fm_.components());
    ssr_.resize(fm_.channels());
    t_alpha_.resize(fm_.components());
    alpha_steps_.assign(fm_.components(), cfg_.alpha_step);
    sigma_step_ = cfg_.sigma_step;
    refresh_cache();
    compute_ssr(ssr_);
    compute_t_alpha(t_alpha_);
}

void MwgSampler::set_frozen_calibration(SummaryStats stats, int pixel_count) {
    if (stats.t_sigma.size() != static_cast<std::size_t>(fm_.channels()) ||
        stats.t_alpha.size() != static_cast<std::size_t>(fm_.components()))
        throw std::invalid_argument("sampler: frozen stats dimension mismatch");
    frozen_ = std::move(stats);
    frozen_pixels_ = pixel_count;
}

void MwgSampler::reset_state(AerosolState state) {
    if (state.pixel_count() != block_.pixel_count() ||
        state.components != fm_.components())
        throw std::invalid_argument("sampler: reset state dimension mismatch");
    state.validate(fm_.tau_min(), fm_.tau_max());

    // Only pixels whose state actually changed (overlap pixels after a merge)
    // need their cached radiances re-evaluated.
    const int P = block_.pixel_count();
    const int M = fm_.components();
    const int C = fm_.channels();
    if (static_cast<int>(state_.tau.size()) == P && !cache_.empty()) {
        for (int p = 0; p < P; ++p) {
            bool same = state_.tau[p] == state.tau[p];
            for (int m = 0; same && m < M; ++m)
                same = state_.theta[static_cast<std::size_t>(p) * M + m] ==
                       state.theta[static_cast<std::size_t>(p) * M + m];
            if (!same)
                fm_.eval(state.tau[p],
                         std::span<const double>(
                             state.theta.data() + static_cast<std::size_t>(p) * M,
                             static_cast<std::size_t>(M)),
                         std::span<double>(cache_.data() +
                                               static_cast<std::size_t>(p) * C,
                                           static_cast<std::size_t>(C)));
        }
        state_ = std::move(state);
    } else {
        state_ = std::move(state);
        refresh_cache();
    }
    if (!frozen_) {
        compute_ssr(ssr_);
        compute_t_alpha(t_alpha_);
    }
}

void MwgSampler::refresh_cache() {
    const int P = block_.pixel_count();
    cache_.resize(static_cast<std::size_t>(P) * fm_.channels());
    for (int p = 0; p < P; ++p)
        fm_.eval(state_.tau[p], state_.theta_of(p),
                 std::span<double>(cache_.data() +
                                       static_cast<std::size_t>(p) * fm_.channels(),
                                   fm_.channels()));
}

void MwgSampler::compute_ssr(std::vector<double>& out) const {
    const int C = fm_.channels();
    out.assign(C, 0.0);
    for (int p = 0; p < block_.pixel_count(); ++p) {
        const double* obs = block_.pixel(p).data();
        const double* sim = cache_.data() + static_cast<std::size_t>(p) * C;
        for (int c = 0; c < C; ++c) {
            const double r = obs[c] - sim[c];
            out[c] += r * r;
        }
    }
}

void MwgSampler::compute_t_alpha(std::vector<double>& out) const {
    const int M = fm_.components();
    out.assign(M, 0.0);
    for (int p = 0; p < block_.pixel_count(); ++p) {
        auto th = state_.theta_of(p);
        for (int m = 0; m < M; ++m) out[m] += std::log(th[m]);
    }
}

bool MwgSampler::update_tau_pixel(int p) {
    const double prop = propose_tau(p, state_.tau, hyper_.kappa, adj_,
                                    fm_.tau_min(), fm_.tau_max(), rng_);
    ++counters_.tau_attempts;
    ++window_.tau_attempts;
    bool ok = true;
    try {
        fm_.eval(prop, state_.theta_of(p), scratch_);
    } catch (const std::domain_error&) {
        ok = false; // auto-reject proposals the forward model cannot evaluate
    }
    if (ok) {
        auto obs = block_.pixel(p);
        std::span<double> cached(cache_.data() +
                                     static_cast<std::size_t>(p) * fm_.channels(),
                                 fm_.channels());
        // Proposal equals the truncated GMRF full conditional, so prior and
        // proposal densities cancel and only the pixel likelihood remains.
        const double log_ratio = chi_square_residual(obs, cached, hyper_.sigma2) -
                                 chi_square_residual(obs, scratch_, hyper_.sigma2);
        if (mh_accept(log_ratio, rng_)) {
            state_.tau[p] = prop;
            std::copy(scratch_.begin(), scratch_.end(), cached.begin());
            ++counters_.tau_accepts;
            ++window_.tau_accepts;
            return true;
        }
    }
    return false;
}

bool MwgSampler::update_theta_pixel(int p) {
    rng_.dirichlet(hyper_.alpha, theta_prop_);
    ++counters_.theta_attempts;
    ++window_.theta_attempts;
    bool ok = true;
    try {
        fm_.eval(state_.tau[p], theta_prop_, scratch_);
    } catch (const std::domain_error&) {
        ok = false;
    }
    if (ok) {
        auto obs = block_.pixel(p);
        std::span<double> cached(cache_.data() +
                                     static_cast<std::size_t>(p) * fm_.channels(),
                                 fm_.channels());
        // Independence proposal from the Dirichlet prior: the prior cancels
        // against the proposal density, leaving the pixel likelihood ratio.
        const double log_ratio = chi_square_residual(obs, cached, hyper_.sigma2) -
                                 chi_square_residual(obs, scratch_, hyper_.sigma2);
        if (mh_accept(log_ratio, rng_)) {
            auto th = state_.theta_of(p);
            std::copy(theta_prop_.begin(), theta_prop_.end(), th.begin());
            std::copy(scratch_.begin(), scratch_.end(), cached.begin());
            ++counters_.theta_accepts;
            ++window_.theta_accepts;
            return true;
        }
    }
    return false;
}

void MwgSampler::update_sigma2_channel(int c) {
    const double ssr = frozen_ ? frozen_->t_sigma[c] : ssr_[c];
    const int P = frozen_ ? frozen_pixels_ : block_.pixel_count();
    if (cfg_.sigma_update == SigmaUpdateMode::Conjugate) {
        hyper_.sigma2[c] =
            gibbs_update_sigma2(ssr, P, rng_, cfg_.sigma2_floor, cfg_.nu0);
        return;
    }
    // Metropolis variant against the same conditional (fidelity experiments).
    ++counters_.sigma_attempts;
    ++window_.sigma_attempts;
    const double cur = hyper_.sigma2[c];
    const double prop = cur * std::exp(sigma_step_ * rng_.normal(0.0, 1.0));
    if (prop < cfg_.sigma2_floor) {
        rng_.uniform();
        return;
    }
    const double log_ratio = log_sigma2_conditional(prop, ssr, P) -
                             log_sigma2_conditional(cur, ssr, P) +
                             std::log(prop / cur);
    if (mh_accept(log_ratio, rng_)) {
        hyper_.sigma2[c] = prop;
        ++counters_.sigma_accepts;
        ++window_.sigma_accepts;
    }
}

void MwgSampler::update_kappa() {
    if (frozen_) {
        // A constant-field exchange (T = 0, e.g. from a flat initialization)
        // carries no information; keep the current kappa until the next one.
        if (frozen_->t_kappa <= 0.0) return;
        hyper_.kappa = gibbs_update_kappa_from_stat(frozen_->t_kappa, frozen_pixels_,
                                                    rng_, cfg_.alpha0, cfg_.beta0);
    } else {
        hyper_.kappa = gibbs_update_kappa(state_.tau, adj_, rng_, cfg_.alpha0,
                                          cfg_.beta0);
    }
}

bool MwgSampler::update_alpha_component(int m) {
    ++counters_.alpha_attempts;
    ++window_.alpha_attempts;
    const std::span<const double> t_alpha =
        frozen_ ? std::span<const double>(frozen_->t_alpha) : std::span<const double>(t_alpha_);
    const int P = frozen_ ? frozen_pixels_ : block_.pixel_count();

    const double cur = hyper_.alpha[m];
    const double prop = cur * std::exp(alpha_steps_[m] * rng_.normal(0.0, 1.0));
    std::vector<double> alpha_prop(hyper_.alpha);
    alpha_prop[m] = prop;
    const double log_ratio = log_alpha_conditional(alpha_prop, t_alpha, P) -
                             log_alpha_conditional(hyper_.alpha, t_alpha, P) +
                             std::log(prop / cur); // log-normal proposal Jacobian
    if (mh_accept(log_ratio, rng_)) {
        hyper_.alpha[m] = prop;
        ++counters_.alpha_accepts;
        ++window_.alpha_accepts;
        return true;
    }
    return false;
}

void MwgSampler::adapt_steps() {
    auto adjust = [&](double rate, double& step) {
        if (rate < cfg_.accept_lo) step = std::max(step * 0.7, 1e-4);
        else if (rate > cfg_.accept_hi) step = std::min(step * 1.4, 50.0);
    };
    if (window_.alpha_attempts > 0) {
        // Components share one attempt window; adapt all with the pooled rate.
        const double rate = static_cast<double>(window_.alpha_accepts) /
                            static_cast<double>(window_.alpha_attempts);
        for (double& s : alpha_steps_) adjust(rate, s);
    }
    if (window_.sigma_attempts > 0) {
        const double rate = static_cast<double>(window_.sigma_accepts) /
                            static_cast<double>(window_.sigma_attempts);
        adjust(rate, sigma_step_);
    }
    window_ = KernelCounters{};
}

void MwgSampler::sweep(bool adapt, bool post_burn) {
    KernelCounters before = counters_;

    if (cfg_.update_tau)
        for (int p : sweep_order_) update_tau_pixel(p);
    if (cfg_.update_theta)
        for (int p : sweep_order_) update_theta_pixel(p);

    // Frozen-calibration sweeps draw every conditional from the exchanged
    // statistics, so the local ones are not needed (nor is the trace).
    if (!frozen_) {
        compute_ssr(ssr_);
        compute_t_alpha(t_alpha_);
    }

    if (cfg_.update_sigma2)
        for (int c = 0; c < fm_.channels(); ++c) update_sigma2_channel(c);
    if (cfg_.update_kappa) update_kappa();
    if (cfg_.update_alpha)
        for (int m = 0; m < fm_.components(); ++m) update_alpha_component(m);

    if (post_burn) {
        post_burn_.tau_attempts += counters_.tau_attempts - before.tau_attempts;
        post_burn_.tau_accepts += counters_.tau_accepts - before.tau_accepts;
        post_burn_.theta_attempts += counters_.theta_attempts - before.theta_attempts;
        post_burn_.theta_accepts += counters_.theta_accepts - before.theta_accepts;
        post_burn_.alpha_attempts += counters_.alpha_attempts - before.alpha_attempts;
        post_burn_.alpha_accepts += counters_.alpha_accepts - before.alpha_accepts;
        post_burn_.sigma_attempts += counters_.sigma_attempts - before.sigma_attempts;
        post_burn_.sigma_accepts += counters_.sigma_accepts - before.sigma_accepts;
    }
    if (adapt && ++sweeps_since_adapt_ >= kAdaptWindow) {
        adapt_steps();
        sweeps_since_adapt_ = 0;
    }
}

void MwgSampler::iterate(int n, bool adapt) {
    for (int i = 0; i < n; ++i) sweep(adapt && cfg_.adapt_acceptance, false);
}

double MwgSampler::log_posterior() const {
    const int P = block_.pixel_count();
    double value = 0.0;
    // Likelihood with its sigma-dependent normalizer (sigma2 is sampled).
    for (int c = 0; c < fm_.channels(); ++c) {
        value -= ssr_[c] / (2.0 * hyper_.sigma2[c]);
        value -= 0.5 * P * std::log(2.0 * M_PI * hyper_.sigma2[c]);
    }
    value += log_gmrf_prior(state_.tau, hyper_.kappa, adj_);
    // Dirichlet prior over the field, via its sufficient statistics.
    double alpha_sum = 0.0, lg = 0.0, cross = 0.0;
    for (int m = 0; m < fm_.components(); ++m) {
        alpha_sum += hyper_.alpha[m];
        lg += std::lgamma(hyper_.alpha[m]);
        cross += (hyper_.alpha[m] - 1.0) * t_alpha_[m];
    }
    value += cross + P * (std::lgamma(alpha_sum) - lg);
    value += log_alpha_hyperprior(hyper_.alpha);
    value += (cfg_.alpha0 - 1.0) * std::log(hyper_.kappa) - cfg_.beta0 * hyper_.kappa;
    for (double s2 : hyper_.sigma2)
        value -= (0.5 * cfg_.nu0 + 1.0) * std::log(s2);
    return value;
}

ChainRecord MwgSampler::run() {
    ChainRecord rec;
    rec.pixel_count = block_.pixel_count();
    rec.components = fm_.components();
    rec.channels = fm_.channels();
    rec.iterations = cfg_.iterations;
    rec.burn_in = cfg_.burn_in;
    rec.thinning = cfg_.thinning;
    rec.seed = cfg_.seed;
    rec.has_fields = cfg_.record_fields;

    rec.log_posterior.reserve(cfg_.iterations + 1);
    rec.log_posterior.push_back(log_posterior());

    for (int t = 1; t <= cfg_.iterations; ++t) {
        const bool in_burn = t <= cfg_.burn_in;
        sweep(in_burn && cfg_.adapt_acceptance, !in_burn);
        rec.log_posterior.push_back(log_posterior());

        if (!in_burn && (t - cfg_.burn_in) % cfg_.thinning == 0) {
            rec.kappa_samples.push_back(hyper_.kappa);
            rec.alpha_samples.push_back(hyper_.alpha);
            rec.sigma2_samples.push_back(hyper_.sigma2);
            if (cfg_.record_fields) {
                rec.tau_samples.push_back(state_.tau);
                rec.theta_samples.push_back(state_.theta);
            }
        }
    }
    rec.counters = counters_;
    rec.post_burn_counters = post_burn_;
    return rec;
}

ChainRecord run_chain(const RadianceBlock& block, const ForwardModel& fm,
                      const Adjacency& adj, const ChainConfig& config,
                      const AerosolState& init_state, const HyperState& init_hyper) {
    // The 1/kappa hyperprior is proper only past a handful of pixels.
    if (config.update_kappa && block.pixel_count() <= 5)
        throw std::invalid_argument(
            "run_chain: kappa sampling needs more than 5 clear pixels; "
            "fix kappa on smaller blocks");
    MwgSampler sampler(block, fm, adj, config, init_state, init_hyper);
    return sampler.run();
}

ChainRecord run_chain(const RadianceBlock& block, const ForwardModel& fm,
                      const Adjacency& adj, const ChainConfig& config,
                      double tau_init_fraction) {
    return run_chain(block, fm, adj, config,
                     default_init_state(block.pixel_count(), fm.components(),
                                        fm.tau_min(), fm.tau_max(), tau_init_fraction),
                     default_init_hyper(block, fm.components()));
}

} // namespace aodret
