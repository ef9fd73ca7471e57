#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "aodret/sampler.hpp"

#include "oracles/oracles.hpp"

#include <cmath>
#include <numeric>

using namespace aodret;

namespace {

// Forward model that ignores its inputs; every proposal fits identically.
class ConstantModel final : public ForwardModel {
public:
    using ForwardModel::eval;
    ConstantModel(int channels, int components, double value = 0.1)
        : channels_(channels), components_(components), value_(value) {}
    int channels() const override { return channels_; }
    int components() const override { return components_; }
    double tau_min() const override { return 0.0; }
    double tau_max() const override { return 3.0; }
    void eval(double, std::span<const double>, std::span<double> out) const override {
        for (double& v : out) v = value_;
    }

private:
    int channels_;
    int components_;
    double value_;
};

RadianceBlock constant_block(int rows, int cols, int channels, double value) {
    BlockGrid grid(rows, cols);
    std::vector<double> radiances(
        static_cast<std::size_t>(grid.clear_count()) * channels, value);
    return RadianceBlock(std::move(grid), channels, std::move(radiances));
}

HyperState simple_hyper(int components, int channels, double kappa,
                        double sigma2) {
    HyperState h;
    h.kappa = kappa;
    h.alpha.assign(components, 1.0);
    h.sigma2.assign(channels, sigma2);
    return h;
}

} // namespace

TEST_CASE("mh_accept decision rule") {
    Rng rng(1);
    int accepted = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i)
        if (mh_accept(-std::log(2.0), rng)) ++accepted;
    const double rate = static_cast<double>(accepted) / n;
    const double se = std::sqrt(0.25 / n);
    CHECK(std::abs(rate - 0.5) < 3.0 * se);

    for (int i = 0; i < 100; ++i) CHECK(mh_accept(0.0, rng));
    for (int i = 0; i < 100; ++i) CHECK(mh_accept(2.0, rng));
}

TEST_CASE("propose_tau contracts") {
    BlockGrid grid(1, 3);
    Adjacency adj = build_adjacency(grid);
    Rng rng(2);

    // Middle pixel with both neighbors at 0.5 and huge precision.
    std::vector<double> tau{0.5, 1.7, 0.5};
    for (int i = 0; i < 100; ++i) {
        const double prop = propose_tau(1, tau, 1e12, adj, 0.0, 3.0, rng);
        CHECK(prop == doctest::Approx(0.5).epsilon(1e-4));
    }

    // Empirical mean against the truncated closed form.
    std::vector<double> tau2{0.2, 0.0, 0.4};
    const int n = 100000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        const double prop = propose_tau(1, tau2, 100.0, adj, 0.0, 3.0, rng);
        CHECK(prop >= 0.0);
        CHECK(prop <= 3.0);
        sum += prop;
    }
    double ref_mean = 0.0, ref_var = 0.0;
    oracle::truncated_normal_moments(0.3, 1.0 / std::sqrt(2.0 * 100.0), 0.0, 3.0,
                                     ref_mean, ref_var);
    CHECK(std::abs(sum / n - ref_mean) < 3.0 * std::sqrt(ref_var / n));

    // Isolated pixel: flat conditional, uniform on the support.
    BlockGrid lone(1, 1);
    Adjacency lone_adj = build_adjacency(lone);
    std::vector<double> tau3{1.0};
    double mn = 3.0, mx = 0.0, mean = 0.0;
    for (int i = 0; i < 20000; ++i) {
        const double prop = propose_tau(0, tau3, 100.0, lone_adj, 0.0, 3.0, rng);
        mn = std::min(mn, prop);
        mx = std::max(mx, prop);
        mean += prop;
    }
    CHECK(mn < 0.01);
    CHECK(mx > 2.99);
    CHECK(mean / 20000 == doctest::Approx(1.5).epsilon(0.02));
}

TEST_CASE("gibbs kappa draw laws") {
    Rng rng(3);
    // P = 2, single edge with difference 1: Gamma(1/2, rate 1/2), mean 1.
    BlockGrid grid(1, 2);
    Adjacency adj = build_adjacency(grid);
    std::vector<double> tau{0.0, 1.0};
    const int n = 100000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += gibbs_update_kappa(tau, adj, rng);
    CHECK(std::abs(sum / n - 1.0) < 3.0 * std::sqrt(2.0 / n));

    // Mean (P-1)/T on a bigger field, and the rate scaling: doubling all
    // differences quarters the draws in distribution.
    BlockGrid grid2(4, 4);
    Adjacency adj2 = build_adjacency(grid2);
    Rng rng_field(4);
    std::vector<double> base(16);
    for (double& t : base) t = rng_field.uniform(0.0, 1.0);
    std::vector<double> doubled(16);
    for (int i = 0; i < 16; ++i) doubled[i] = 2.0 * base[i];

    const double t_base = gmrf_quadratic(base, adj2);
    double sum_base = 0.0, sum_doubled = 0.0;
    for (int i = 0; i < n; ++i) {
        sum_base += gibbs_update_kappa(base, adj2, rng);
        sum_doubled += gibbs_update_kappa(doubled, adj2, rng);
    }
    const double shape = 7.5; // (16-1)/2
    const double mean_expected = 15.0 / t_base;
    const double se = std::sqrt(mean_expected * mean_expected / shape / n);
    CHECK(std::abs(sum_base / n - mean_expected) < 3.0 * se);
    CHECK(sum_doubled / n == doctest::Approx(sum_base / n / 4.0).epsilon(0.05));

    // Constant field is degenerate.
    std::vector<double> flat{1.0, 1.0};
    CHECK_THROWS_AS(gibbs_update_kappa(flat, adj, rng), std::domain_error);
}

TEST_CASE("gibbs sigma2 draw laws") {
    Rng rng(5);
    const double ssr = 0.84;
    const int P = 10;
    const int n = 100000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += gibbs_update_sigma2(ssr, P, rng);
    // Inverse-chi-square mean ssr/(P-2); sd of the mean from its variance
    // 2 ssr^2 / ((P-2)^2 (P-4)).
    const double mean_expected = ssr / (P - 2);
    const double var = 2.0 * ssr * ssr / ((P - 2.0) * (P - 2.0) * (P - 4.0));
    CHECK(std::abs(sum / n - mean_expected) < 3.0 * std::sqrt(var / n));

    // Consistency: large P concentrates at ssr/P.
    const int big = 100000;
    double draw_sum = 0.0;
    for (int i = 0; i < 200; ++i)
        draw_sum += gibbs_update_sigma2(0.02 * big, big, rng);
    CHECK(draw_sum / 200 == doctest::Approx(0.02).epsilon(0.01));

    // ssr = 0 lands on the floor.
    CHECK(gibbs_update_sigma2(0.0, P, rng, 1e-12) == 1e-12);
}

TEST_CASE("flat likelihood accepts every tau and theta proposal") {
    ConstantModel fm(2, 2);
    RadianceBlock block = constant_block(3, 3, 2, 0.1);
    Adjacency adj = build_adjacency(block.grid());

    ChainConfig cfg;
    cfg.iterations = 50;
    cfg.burn_in = 0;
    cfg.seed = 9;
    cfg.update_sigma2 = false;
    cfg.update_kappa = false;
    cfg.update_alpha = false;
    MwgSampler sampler(block, fm, adj, cfg,
                       default_init_state(9, 2, 0.0, 3.0),
                       simple_hyper(2, 2, 50.0, 1e-4));
    sampler.iterate(50, false);
    const KernelCounters& c = sampler.counters();
    CHECK(c.tau_attempts == 50 * 9);
    CHECK(c.tau_accepts == c.tau_attempts);
    CHECK(c.theta_accepts == c.theta_attempts);
}

TEST_CASE("huge kappa couples neighboring tau samples") {
    // Two pixels, one channel, weak likelihood: the GMRF conditional proposal
    // keeps the pair nearly equal, so their chains correlate strongly.
    SurrogateParams params;
    params.channels = 1;
    params.components = 2;
    params.extinction = {0.9, 1.1};
    params.saturation = {0.2, 0.21};
    params.surface = {0.02};
    SurrogateModel fm(params);

    BlockGrid grid(1, 2);
    std::vector<double> radiances{0.1, 0.1};
    RadianceBlock block(std::move(grid), 1, std::move(radiances));
    Adjacency adj = build_adjacency(block.grid());

    ChainConfig cfg;
    cfg.iterations = 4000;
    cfg.burn_in = 500;
    cfg.seed = 10;
    cfg.update_theta = false;
    cfg.update_sigma2 = false;
    cfg.update_kappa = false;
    cfg.update_alpha = false;
    ChainRecord rec = run_chain(block, fm, adj, cfg,
                                default_init_state(2, 2, 0.0, 3.0),
                                simple_hyper(2, 1, 1e5, 1e-2));

    double m0 = 0.0, m1 = 0.0;
    for (const auto& s : rec.tau_samples) {
        m0 += s[0];
        m1 += s[1];
    }
    m0 /= rec.sample_count();
    m1 /= rec.sample_count();
    double s00 = 0.0, s11 = 0.0, s01 = 0.0;
    for (const auto& s : rec.tau_samples) {
        s00 += (s[0] - m0) * (s[0] - m0);
        s11 += (s[1] - m1) * (s[1] - m1);
        s01 += (s[0] - m0) * (s[1] - m1);
    }
    CHECK(s01 / std::sqrt(s00 * s11) > 0.9);
}

TEST_CASE("theta posterior concentrates on the fitting component") {
    // One channel, two components mixed linearly by a table model: component
    // 1 reproduces the observation, component 2 is off by 5 sigma.
    const double sigma = 0.004;
    const double obs = 0.10;
    RadianceTable table({0.0, 3.0}, 1, 2,
                        {obs, obs + 5.0 * sigma, obs, obs + 5.0 * sigma});
    TableModel fm(table);

    RadianceBlock block = constant_block(1, 1, 1, obs);
    Adjacency adj = build_adjacency(block.grid());

    ChainConfig cfg;
    cfg.iterations = 60000;
    cfg.burn_in = 2000;
    cfg.seed = 12;
    cfg.update_tau = false;
    cfg.update_sigma2 = false;
    cfg.update_kappa = false;
    cfg.update_alpha = false;
    AerosolState init = default_init_state(1, 2, 0.0, 3.0);
    ChainRecord rec = run_chain(block, fm, adj, cfg, init,
                                simple_hyper(2, 1, 100.0, sigma * sigma));

    double mean_theta1 = 0.0;
    for (const auto& s : rec.theta_samples) mean_theta1 += s[0];
    mean_theta1 /= rec.sample_count();
    CHECK(mean_theta1 > 0.8);

    // Brute-force posterior on the 2-simplex: the radiance is linear in
    // theta_2, so chi2 = 25 theta_2^2 / 2 under a flat Dirichlet prior.
    const int nq = 200000;
    double num = 0.0, den = 0.0;
    for (int i = 0; i < nq; ++i) {
        const double t2 = (i + 0.5) / nq;
        const double w = std::exp(-12.5 * t2 * t2);
        num += (1.0 - t2) * w;
        den += w;
    }
    CHECK(mean_theta1 == doctest::Approx(num / den).epsilon(0.01));
}

TEST_CASE("alpha sampler recovers the generating Dirichlet parameter") {
    // Synthetic theta field: stationary alpha draws given theta should sit
    // near the generator.
    const std::vector<double> alpha_true{0.8, 0.4, 0.2, 0.2};
    const int P = 1024;
    Rng gen(13);
    ConstantModel fm(1, 4);
    RadianceBlock block = constant_block(32, 32, 1, 0.1);
    Adjacency adj = build_adjacency(block.grid());

    AerosolState init;
    init.components = 4;
    init.tau.assign(P, 1.0);
    init.theta.resize(P * 4);
    for (int p = 0; p < P; ++p)
        gen.dirichlet(alpha_true, init.theta_of(p));

    ChainConfig cfg;
    cfg.iterations = 4000;
    cfg.burn_in = 1000;
    cfg.seed = 14;
    cfg.update_tau = false;
    cfg.update_theta = false;
    cfg.update_sigma2 = false;
    cfg.update_kappa = false;
    cfg.record_fields = false;
    ChainRecord rec = run_chain(block, fm, adj, cfg, init,
                                simple_hyper(4, 1, 100.0, 1e-2));

    for (int m = 0; m < 4; ++m) {
        double mean = 0.0;
        for (const auto& s : rec.alpha_samples) mean += s[m];
        mean /= rec.sample_count();
        CHECK(std::abs(mean - alpha_true[m]) / alpha_true[m] < 0.15);
    }
    // Adapted acceptance rate lands in the target band.
    const auto& c = rec.post_burn_counters;
    const double rate =
        static_cast<double>(c.alpha_accepts) / static_cast<double>(c.alpha_attempts);
    CHECK(rate >= 0.25);
    CHECK(rate <= 0.50);
}

TEST_CASE("metropolis sigma2 variant matches the conjugate law") {
    ConstantModel fm(1, 2);
    RadianceBlock block = constant_block(3, 4, 1, 0.1);
    Adjacency adj = build_adjacency(block.grid());

    ChainConfig cfg;
    cfg.iterations = 10;
    cfg.burn_in = 0;
    cfg.seed = 15;
    cfg.sigma_update = SigmaUpdateMode::Metropolis;
    MwgSampler sampler(block, fm, adj, cfg,
                       default_init_state(12, 2, 0.0, 3.0),
                       simple_hyper(2, 1, 50.0, 1e-3));
    SummaryStats stats;
    stats.t_kappa = 1.0;
    stats.t_sigma = {0.84};
    stats.t_alpha = {-1.0, -1.0};
    sampler.set_frozen_calibration(stats, 10);

    const int n = 60000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        sampler.update_sigma2_channel(0);
        sum += sampler.hyper().sigma2[0];
    }
    // Same stationary law as the exact draw: mean ssr/(P-2).
    CHECK(sum / n == doctest::Approx(0.84 / 8.0).epsilon(0.05));
}

TEST_CASE("chain record bookkeeping") {
    ConstantModel fm(2, 2);
    RadianceBlock block = constant_block(2, 3, 2, 0.1);
    Adjacency adj = build_adjacency(block.grid());

    // Zero iterations: empty samples, initial log posterior only.
    ChainConfig cfg0;
    cfg0.iterations = 0;
    cfg0.burn_in = 0;
    cfg0.update_kappa = false;
    ChainRecord rec0 = run_chain(block, fm, adj, cfg0,
                                 default_init_state(6, 2, 0.0, 3.0),
                                 simple_hyper(2, 2, 50.0, 1e-3));
    CHECK(rec0.sample_count() == 0);
    CHECK(rec0.log_posterior.size() == 1);

    // Thinning: floor((iterations - burn_in)/thinning) samples.
    ChainConfig cfg;
    cfg.iterations = 25;
    cfg.burn_in = 10;
    cfg.thinning = 4;
    cfg.update_kappa = false;
    ChainRecord rec = run_chain(block, fm, adj, cfg,
                                default_init_state(6, 2, 0.0, 3.0),
                                simple_hyper(2, 2, 50.0, 1e-3));
    CHECK(rec.sample_count() == 3);
    CHECK(rec.log_posterior.size() == 26);

    // Config validation.
    ChainConfig bad;
    bad.iterations = 0;
    bad.burn_in = 1000;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    ChainConfig bad2;
    bad2.iterations = 100;
    bad2.burn_in = 100;
    CHECK_THROWS_AS(bad2.validate(), std::invalid_argument);
    ChainConfig bad3;
    bad3.thinning = 0;
    CHECK_THROWS_AS(bad3.validate(), std::invalid_argument);
}

TEST_CASE("kappa sampling needs more than five pixels") {
    ConstantModel fm(1, 2);
    RadianceBlock block = constant_block(2, 2, 1, 0.1);
    Adjacency adj = build_adjacency(block.grid());
    ChainConfig cfg;
    cfg.iterations = 2;
    cfg.burn_in = 0;
    CHECK_THROWS_AS(run_chain(block, fm, adj, cfg,
                              default_init_state(4, 2, 0.0, 3.0),
                              simple_hyper(2, 1, 50.0, 1e-3)),
                    std::invalid_argument);
}

TEST_CASE("fixed seed reproduces the record bitwise") {
    SurrogateParams params = SurrogateParams::defaults(4, 2);
    SurrogateModel fm(params);
    RadianceBlock block = constant_block(4, 4, 4, 0.1);
    Adjacency adj = build_adjacency(block.grid());

    ChainConfig cfg;
    cfg.iterations = 60;
    cfg.burn_in = 20;
    cfg.seed = 4242;
    auto run = [&] {
        return run_chain(block, fm, adj, cfg, default_init_state(16, 2, 0.0, 3.0),
                         default_init_hyper(block, 2));
    };
    ChainRecord a = run();
    ChainRecord b = run();
    REQUIRE(a.sample_count() == b.sample_count());
    CHECK(a.log_posterior == b.log_posterior);
    CHECK(a.kappa_samples == b.kappa_samples);
    CHECK(a.tau_samples == b.tau_samples);
    CHECK(a.theta_samples == b.theta_samples);
    CHECK(a.sigma2_samples == b.sigma2_samples);
    CHECK(a.counters.tau_accepts == b.counters.tau_accepts);
}

TEST_CASE("state invariants hold after every recorded sweep") {
    SurrogateParams params = SurrogateParams::defaults(4, 3);
    SurrogateModel fm(params);
    RadianceBlock block = constant_block(3, 4, 4, 0.12);
    Adjacency adj = build_adjacency(block.grid());

    ChainConfig cfg;
    cfg.iterations = 100;
    cfg.burn_in = 0;
    cfg.seed = 77;
    ChainRecord rec = run_chain(block, fm, adj, cfg,
                                default_init_state(12, 3, 0.0, 3.0),
                                default_init_hyper(block, 3));
    for (const auto& tau : rec.tau_samples)
        for (double t : tau) {
            CHECK(t >= 0.0);
            CHECK(t <= 3.0);
        }
    for (const auto& theta : rec.theta_samples)
        for (std::size_t p = 0; p < theta.size() / 3; ++p) {
            double sum = 0.0;
            for (int m = 0; m < 3; ++m) {
                CHECK(theta[p * 3 + m] >= 0.0);
                sum += theta[p * 3 + m];
            }
            CHECK(std::abs(sum - 1.0) < 1e-10);
        }
    for (double k : rec.kappa_samples) CHECK(k > 0.0);
}

TEST_CASE("detailed balance of the tau kernel on a frozen toy target") {
    // Single isolated pixel: uniform proposals against a one-channel
    // likelihood. Stationary two-bin transition flows must balance.
    SurrogateParams params;
    params.channels = 1;
    params.components = 1;
    params.extinction = {1.0};
    params.saturation = {0.25};
    params.surface = {0.02};
    SurrogateModel fm(params);

    RadianceBlock block = constant_block(1, 1, 1, 0.12);
    Adjacency adj = build_adjacency(block.grid());

    ChainConfig cfg;
    cfg.iterations = 10;
    cfg.burn_in = 0;
    cfg.seed = 99;
    cfg.update_theta = false;
    cfg.update_sigma2 = false;
    cfg.update_kappa = false;
    cfg.update_alpha = false;
    AerosolState init = default_init_state(1, 1, 0.0, 3.0);
    MwgSampler sampler(block, fm, adj, cfg, init,
                       simple_hyper(1, 1, 100.0, 1.44e-4));

    sampler.iterate(2000, false); // settle in
    const double split = 0.57;    // bin boundary at the posterior bulk
    long flow_ab = 0, flow_ba = 0;
    double prev = sampler.state().tau[0];
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        sampler.iterate(1, false);
        const double cur = sampler.state().tau[0];
        if (prev < split && cur >= split) ++flow_ab;
        if (prev >= split && cur < split) ++flow_ba;
        prev = cur;
    }
    REQUIRE(flow_ab + flow_ba > 100);
    const double diff = static_cast<double>(flow_ab - flow_ba);
    const double scale = std::sqrt(static_cast<double>(flow_ab + flow_ba));
    CHECK(std::abs(diff) < 4.0 * scale);
}

TEST_CASE("detailed balance of the theta kernel on a frozen toy target") {
    // Single pixel, two components mixed by a table model; two-bin flows of
    // the theta chain must balance at stationarity.
    const double sigma = 0.02;
    const double obs = 0.10;
    RadianceTable table({0.0, 3.0}, 1, 2,
                        {obs - 1.5 * sigma, obs + 1.5 * sigma, obs - 1.5 * sigma,
                         obs + 1.5 * sigma});
    TableModel fm(table);
    RadianceBlock block = constant_block(1, 1, 1, obs);
    Adjacency adj = build_adjacency(block.grid());

    ChainConfig cfg;
    cfg.iterations = 10;
    cfg.burn_in = 0;
    cfg.seed = 321;
    cfg.update_tau = false;
    cfg.update_sigma2 = false;
    cfg.update_kappa = false;
    cfg.update_alpha = false;
    MwgSampler sampler(block, fm, adj, cfg, default_init_state(1, 2, 0.0, 3.0),
                       simple_hyper(2, 1, 100.0, sigma * sigma));

    sampler.iterate(500, false);
    long flow_ab = 0, flow_ba = 0;
    double prev = sampler.state().theta_of(0)[0];
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        sampler.iterate(1, false);
        const double cur = sampler.state().theta_of(0)[0];
        if (prev < 0.5 && cur >= 0.5) ++flow_ab;
        if (prev >= 0.5 && cur < 0.5) ++flow_ba;
        prev = cur;
    }
    REQUIRE(flow_ab + flow_ba > 100);
    const double diff = static_cast<double>(flow_ab - flow_ba);
    CHECK(std::abs(diff) < 4.0 * std::sqrt(static_cast<double>(flow_ab + flow_ba)));
}

TEST_CASE("stationary tau distribution matches quadrature on a 2x2 block") {
    // One channel, fixed hyperparameters and theta: the chain must reproduce
    // the grid-integrated posterior.
    SurrogateParams params;
    params.channels = 1;
    params.components = 2;
    params.extinction = {1.0, 1.2};
    params.saturation = {0.22, 0.26};
    params.surface = {0.02};
    SurrogateModel fm(params);

    BlockGrid grid(2, 2);
    std::vector<double> radiances{0.115, 0.128, 0.122, 0.109};
    RadianceBlock block(std::move(grid), 1, std::move(radiances));
    Adjacency adj = build_adjacency(block.grid());

    const double kappa = 25.0;
    const double sigma2 = 2.0e-4; // sd ~0.014, wide enough for the grid oracle
    AerosolState init = default_init_state(4, 2, 0.0, 3.0);

    ChainConfig cfg;
    cfg.iterations = 120000;
    cfg.burn_in = 5000;
    cfg.seed = 101;
    cfg.update_theta = false;
    cfg.update_sigma2 = false;
    cfg.update_kappa = false;
    cfg.update_alpha = false;
    cfg.record_fields = true;
    ChainRecord rec = run_chain(block, fm, adj, cfg, init,
                                simple_hyper(2, 1, kappa, sigma2));

    std::vector<double> sigma2_vec{sigma2};
    auto quad = oracle::posterior_by_quadrature(block, fm, init.theta, sigma2_vec,
                                                kappa, 56);
    for (int p = 0; p < 4; ++p) {
        double mean = 0.0;
        for (const auto& s : rec.tau_samples) mean += s[p];
        mean /= rec.sample_count();
        double ss = 0.0;
        for (const auto& s : rec.tau_samples) ss += (s[p] - mean) * (s[p] - mean);
        const double sd = std::sqrt(ss / (rec.sample_count() - 1));
        CHECK(std::abs(mean - quad.mean[p]) / quad.mean[p] < 0.02);
        CHECK(std::abs(sd - quad.sd[p]) / quad.sd[p] < 0.05);
    }
}
