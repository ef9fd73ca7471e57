#pragma once

#include "aodret/model.hpp"
#include "aodret/rng.hpp"

#include <cstdint>
#include <vector>

namespace aodret {

struct SimConfig {
    int rows = 32;
    int cols = 128;
    double kappa_true = 100.0;
    std::vector<double> alpha_true = {0.8, 0.4, 0.2, 0.2};
    double noise_fraction = 0.10;
    double tau_center = 1.0;
    std::uint64_t seed = 1234567;
    std::vector<std::uint8_t> clear_mask; // empty = all clear
    bool allow_disconnected = false;

    void validate() const;
};

// Draws from the intrinsic first-order GMRF pinned to zero mean (the flat
// direction is dropped), shifted by `center` and clipped to [lo, hi].
// Full-clear rectangles use the separable cosine eigenbasis of the lattice
// Laplacian; masked grids fall back to a dense eigendecomposition of the
// clear-pixel graph Laplacian (independent N(0, 1/(kappa * lambda_i))
// coefficients on the nonzero eigenvalues).
// Throws std::invalid_argument for disconnected lattices unless
// allow_disconnected is set, in which case each component is sampled and
// centered separately.
std::vector<double> sample_gmrf(const BlockGrid& grid, const Adjacency& adj,
                                double kappa, double center, double lo, double hi,
                                Rng& rng, bool allow_disconnected = false,
                                int* clip_count = nullptr);

// Independent Dirichlet(alpha) mixing vectors for `pixel_count` pixels.
std::vector<double> sample_theta_field(int pixel_count,
                                       std::span<const double> alpha, Rng& rng);

struct SimulatedBlock {
    RadianceBlock block;
    AerosolState truth;
    double kappa_true = 0.0;
    std::vector<double> alpha_true;
    std::vector<double> noise_sd; // per channel
    int clip_count = 0;           // tau values clipped to the model support
    int floor_count = 0;          // radiances floored after redraw attempts
};

// Simulation-study generator: tau from the GMRF prior, theta from the
// Dirichlet prior, radiances through the forward model plus Gaussian noise
// with sd = noise_fraction * (noiseless channel mean); negative radiances are
// re-drawn (at most 100 times, then floored at 1e-6).
SimulatedBlock simulate_block(const SimConfig& config, const ForwardModel& fm,
                              Rng& rng);

} // namespace aodret
