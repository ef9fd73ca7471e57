#pragma once

#include "aodret/sampler.hpp"

#include <vector>

namespace aodret {

struct RoundConfig {
    int iterations_per_round = 50;
    int rounds = 0;
    int workers = 0; // 0 = hardware concurrency, capped at the patch count

    void validate() const;
};

// Whole-block statistics exchanged between rounds (see SummaryStats).
SummaryStats compute_summaries(const RadianceBlock& block,
                               const AerosolState& state, const ForwardModel& fm,
                               const Adjacency& adj);

// One patch's private view of the block: restricted grid, radiances,
// adjacency (edges crossing the patch boundary are dropped), and the map from
// patch-local clear pixels to global clear pixels.
struct PatchContext {
    Patch patch;
    RadianceBlock block;
    Adjacency adj;
    std::vector<int> global_clear;
};

std::vector<PatchContext> build_patch_contexts(const RadianceBlock& block,
                                               const PatchLayout& layout);

// Restriction of a global state to one patch.
AerosolState restrict_state(const AerosolState& global_state,
                            const PatchContext& ctx);

// Merges patch states back onto the block: pixels covered by several patches
// get the arithmetic mean of tau and the componentwise mean of theta
// renormalized to the simplex; pixels with identical copies (and pixels owned
// by one patch) are copied verbatim.
AerosolState average_overlaps(const std::vector<PatchContext>& patches,
                              const std::vector<const AerosolState*>& states,
                              int global_clear_count, int components);

// Patch-parallel Metropolis-within-Gibbs: per round, every patch runs
// iterations_per_round sweeps with sigma2/kappa/alpha drawn from their
// conditionals given the frozen whole-block summaries, overlaps are averaged,
// and summaries are recomputed from the merged state. Records one merged
// state per post-burn-in round (chain_config.thinning counts rounds here).
ChainRecord run_parallel(const RadianceBlock& block, const ForwardModel& fm,
                         const PatchLayout& layout, const RoundConfig& round_config,
                         const ChainConfig& chain_config,
                         const AerosolState& init_state, const HyperState& init_hyper);

ChainRecord run_parallel(const RadianceBlock& block, const ForwardModel& fm,
                         const PatchLayout& layout, const RoundConfig& round_config,
                         const ChainConfig& chain_config,
                         double tau_init_fraction = 0.5);

} // namespace aodret
