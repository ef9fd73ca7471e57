#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "aodret/rng.hpp"

#include "oracles/oracles.hpp"

#include <cmath>

using namespace aodret;

TEST_CASE("incomplete gamma against known chi-square values") {
    // chi2 survival at the median of 1 dof, and classic table entries.
    CHECK(oracle::chi_square_sf(0.0, 5) == 1.0);
    CHECK(oracle::chi_square_sf(3.841458820694124, 1) ==
          doctest::Approx(0.05).epsilon(1e-9));
    CHECK(oracle::chi_square_sf(18.307038053275146, 10) ==
          doctest::Approx(0.05).epsilon(1e-9));
    CHECK(oracle::chi_square_sf(2.705543454095404, 1) ==
          doctest::Approx(0.10).epsilon(1e-9));
}

TEST_CASE("gof test accepts its own density and rejects a shifted one") {
    Rng rng(1);
    const int n = 20000;
    std::vector<double> samples(n);
    for (double& v : samples) v = rng.normal(1.0, 0.3);

    auto log_normal_density = [](double mean) {
        return [mean](double x) {
            const double z = (x - mean) / 0.3;
            return -0.5 * z * z;
        };
    };
    auto ok = oracle::gof_test(samples, log_normal_density(1.0), 0.0, 2.0, 40);
    CHECK(ok.p_value > 0.001);
    CHECK(ok.bins_used > 10);

    auto shifted = oracle::gof_test(samples, log_normal_density(1.15), 0.0, 2.0, 40);
    CHECK(shifted.p_value < 0.01);

    // Constant samples against a continuous density: decisively rejected.
    std::vector<double> flat(2000, 1.0);
    auto degenerate = oracle::gof_test(flat, log_normal_density(1.0), 0.0, 2.0, 40);
    CHECK(degenerate.p_value < 1e-6);
}

TEST_CASE("gof calibration: false-rejection rate near the nominal level") {
    // 200 repetitions at the 1% level should reject about twice.
    Rng rng(2);
    int rejections = 0;
    auto log_density = [](double x) { return -0.5 * x * x; };
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<double> s(1500);
        for (double& v : s) v = rng.normal(0.0, 1.0);
        if (oracle::gof_test(s, log_density, -4.0, 4.0, 30).p_value < 0.01)
            ++rejections;
    }
    CHECK(rejections <= 8); // binomial(200, 0.01): P(>8) ~ 2e-5
}

TEST_CASE("quadrature recovers the prior when the likelihood is flat") {
    // Huge sigma: posterior reduces to the GMRF conditional prior, which for
    // a 1x2 lattice centers both pixels and couples them symmetrically.
    aodret::SurrogateParams params;
    params.channels = 1;
    params.components = 1;
    params.extinction = {1.0};
    params.saturation = {0.2};
    params.surface = {0.02};
    aodret::SurrogateModel fm(params);
    aodret::BlockGrid grid(1, 2);
    aodret::RadianceBlock block(grid, 1, {0.1, 0.1});

    std::vector<double> theta{1.0, 1.0};
    std::vector<double> sigma2{1e6};
    auto res = oracle::posterior_by_quadrature(block, fm, theta, sigma2, 2.0, 120);
    // Flat likelihood + pairwise prior on a bounded box: symmetric marginals
    // centered on the midpoint of the support.
    CHECK(res.mean[0] == doctest::Approx(1.5).epsilon(0.01));
    CHECK(res.mean[1] == doctest::Approx(1.5).epsilon(0.01));
    CHECK(res.sd[0] == doctest::Approx(res.sd[1]).epsilon(0.01));

    // Tight sigma on one pixel: the posterior mean inverts the forward model.
    aodret::RadianceBlock single(aodret::BlockGrid(1, 1), 1, {0.12});
    std::vector<double> theta1{1.0};
    std::vector<double> sigma2_tight{1e-6};
    auto inv = oracle::posterior_by_quadrature(single, fm, theta1, sigma2_tight,
                                               2.0, 3000);
    // L = S e^-tau + A (1 - e^-tau) = 0.12 => tau = -log((A-L)/(A-S)).
    const double tau_star = -std::log((0.2 - 0.12) / (0.2 - 0.02));
    CHECK(inv.mean[0] == doctest::Approx(tau_star).epsilon(0.003));

    CHECK_THROWS_AS(oracle::posterior_by_quadrature(single, fm, theta1,
                                                    sigma2_tight, 2.0, 20000000),
                    std::invalid_argument);
}
