#include "aodret/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <string>
#include <thread>

namespace aodret {

void RoundConfig::validate() const {
    if (iterations_per_round < 1)
        throw std::invalid_argument("round config: iterations_per_round must be >= 1");
    if (rounds < 0)
        throw std::invalid_argument("round config: negative round count");
    if (workers < 0)
        throw std::invalid_argument("round config: negative worker count");
}

SummaryStats compute_summaries(const RadianceBlock& block,
                               const AerosolState& state, const ForwardModel& fm,
                               const Adjacency& adj) {
    const int C = fm.channels();
    const int M = fm.components();
    SummaryStats s;
    s.t_kappa = gmrf_quadratic(state.tau, adj);
    s.t_sigma.assign(C, 0.0);
    s.t_alpha.assign(M, 0.0);
    std::vector<double> simulated(C);
    for (int p = 0; p < block.pixel_count(); ++p) {
        fm.eval(state.tau[p], state.theta_of(p), simulated);
        auto obs = block.pixel(p);
        for (int c = 0; c < C; ++c) {
            const double r = obs[c] - simulated[c];
            s.t_sigma[c] += r * r;
        }
        auto th = state.theta_of(p);
        for (int m = 0; m < M; ++m) s.t_alpha[m] += std::log(th[m]);
    }
    return s;
}

std::vector<PatchContext> build_patch_contexts(const RadianceBlock& block,
                                               const PatchLayout& layout) {
    const BlockGrid& grid = block.grid();
    std::vector<PatchContext> out;
    out.reserve(layout.patches.size());
    for (const Patch& patch : layout.patches) {
        std::vector<std::uint8_t> mask;
        mask.reserve(static_cast<std::size_t>(patch.rows()) * patch.cols());
        std::vector<int> global_clear;
        for (int r = patch.row0; r < patch.row1; ++r)
            for (int c = patch.col0; c < patch.col1; ++c) {
                const bool clear = grid.is_clear(r, c);
                mask.push_back(clear ? 1 : 0);
                if (clear)
                    global_clear.push_back(grid.clear_index(grid.cell_index(r, c)));
            }
        BlockGrid subgrid(patch.rows(), patch.cols(), std::move(mask),
                          grid.resolution_km());
        std::vector<double> radiances(
            static_cast<std::size_t>(subgrid.clear_count()) * block.channels());
        for (std::size_t i = 0; i < global_clear.size(); ++i) {
            auto src = block.pixel(global_clear[i]);
            std::copy(src.begin(), src.end(),
                      radiances.begin() + static_cast<std::ptrdiff_t>(i) * block.channels());
        }
        RadianceBlock subblock(subgrid, block.channels(), std::move(radiances));
        Adjacency subadj = build_adjacency(subblock.grid());
        out.push_back(PatchContext{patch, std::move(subblock), std::move(subadj),
                                   std::move(global_clear)});
    }
    return out;
}

AerosolState restrict_state(const AerosolState& global_state,
                            const PatchContext& ctx) {
    AerosolState s;
    s.components = global_state.components;
    s.tau.resize(ctx.global_clear.size());
    s.theta.resize(ctx.global_clear.size() * global_state.components);
    for (std::size_t i = 0; i < ctx.global_clear.size(); ++i) {
        const int g = ctx.global_clear[i];
        s.tau[i] = global_state.tau[g];
        auto src = global_state.theta_of(g);
        std::copy(src.begin(), src.end(),
                  s.theta.begin() + static_cast<std::ptrdiff_t>(i) * s.components);
    }
    return s;
}

AerosolState average_overlaps(const std::vector<PatchContext>& patches,
                              const std::vector<const AerosolState*>& states,
                              int global_clear_count, int components) {
    if (patches.size() != states.size())
        throw std::invalid_argument("average_overlaps: patch/state count mismatch");

    // Gather contributions per global pixel, in patch index order.
    std::vector<int> count(global_clear_count, 0);
    std::vector<double> tau_sum(global_clear_count, 0.0);
    std::vector<double> theta_sum(static_cast<std::size_t>(global_clear_count) * components, 0.0);
    std::vector<double> tau_first(global_clear_count, 0.0);
    std::vector<double> theta_first(theta_sum.size(), 0.0);
    std::vector<std::uint8_t> all_equal(global_clear_count, 1);

    for (std::size_t i = 0; i < patches.size(); ++i) {
        const auto& ctx = patches[i];
        const AerosolState& ps = *states[i];
        if (ps.pixel_count() != static_cast<int>(ctx.global_clear.size()) ||
            ps.components != components)
            throw std::invalid_argument("average_overlaps: patch state dimension mismatch");
        for (std::size_t j = 0; j < ctx.global_clear.size(); ++j) {
            const int g = ctx.global_clear[j];
            auto th = ps.theta_of(static_cast<int>(j));
            if (count[g] == 0) {
                tau_first[g] = ps.tau[j];
                std::copy(th.begin(), th.end(),
                          theta_first.begin() + static_cast<std::ptrdiff_t>(g) * components);
            } else if (all_equal[g]) {
                bool same = ps.tau[j] == tau_first[g];
                for (int m = 0; same && m < components; ++m)
                    same = th[m] == theta_first[static_cast<std::size_t>(g) * components + m];
                if (!same) all_equal[g] = 0;
            }
            ++count[g];
            tau_sum[g] += ps.tau[j];
            for (int m = 0; m < components; ++m)
                theta_sum[static_cast<std::size_t>(g) * components + m] += th[m];
        }
    }

    AerosolState merged;
    merged.components = components;
    merged.tau.resize(global_clear_count);
    merged.theta.resize(theta_sum.size());
    for (int g = 0; g < global_clear_count; ++g) {
        if (count[g] == 0)
            throw std::invalid_argument("average_overlaps: pixel covered by no patch");
        if (all_equal[g]) {
            // Identical copies merge to the identical value (exact).
            merged.tau[g] = tau_first[g];
            std::copy_n(theta_first.begin() + static_cast<std::ptrdiff_t>(g) * components,
                        components,
                        merged.theta.begin() + static_cast<std::ptrdiff_t>(g) * components);
            continue;
        }
        merged.tau[g] = tau_sum[g] / count[g];
        double sum = 0.0;
        for (int m = 0; m < components; ++m)
            sum += theta_sum[static_cast<std::size_t>(g) * components + m];
        for (int m = 0; m < components; ++m)
            merged.theta[static_cast<std::size_t>(g) * components + m] =
                theta_sum[static_cast<std::size_t>(g) * components + m] / sum;
    }
    return merged;
}

ChainRecord run_parallel(const RadianceBlock& block, const ForwardModel& fm,
                         const PatchLayout& layout, const RoundConfig& round_config,
                         const ChainConfig& chain_config,
                         const AerosolState& init_state, const HyperState& init_hyper) {
    round_config.validate();
    chain_config.validate();
    if (chain_config.update_kappa && block.pixel_count() <= 5)
        throw std::invalid_argument(
            "run_parallel: kappa sampling needs more than 5 clear pixels");

    const int ipr = round_config.iterations_per_round;
    const int rounds = round_config.rounds > 0
                           ? round_config.rounds
                           : (chain_config.iterations + ipr - 1) / ipr;
    const int burn_rounds = (chain_config.burn_in + ipr - 1) / ipr;
    if (rounds <= burn_rounds && rounds > 0 && chain_config.burn_in > 0)
        throw std::invalid_argument("run_parallel: all rounds fall inside burn-in");

    const Adjacency global_adj = build_adjacency(block.grid());
    std::vector<PatchContext> contexts = build_patch_contexts(block, layout);
    const int n_patches = static_cast<int>(contexts.size());
    int workers = round_config.workers > 0
                      ? round_config.workers
                      : static_cast<int>(std::thread::hardware_concurrency());
    workers = std::max(1, std::min(workers, n_patches));

    // One sampler per patch with a private substream; patch iteration counts
    // never gate on the round structure, so any worker may run any patch.
    std::vector<MwgSampler> samplers;
    samplers.reserve(contexts.size());
    for (int i = 0; i < n_patches; ++i) {
        ChainConfig patch_cfg = chain_config;
        patch_cfg.seed = derive_stream_seed(chain_config.seed, static_cast<std::uint64_t>(i));
        samplers.emplace_back(contexts[i].block, fm, contexts[i].adj, patch_cfg,
                              restrict_state(init_state, contexts[i]), init_hyper);
    }

    AerosolState global_state = init_state;
    HyperState global_hyper = init_hyper;
    SummaryStats summaries = compute_summaries(block, global_state, fm, global_adj);
    Rng coord_rng = Rng::stream(chain_config.seed, 0x0C00FD1ull);

    ChainRecord rec;
    rec.pixel_count = block.pixel_count();
    rec.components = fm.components();
    rec.channels = fm.channels();
    rec.iterations = rounds * ipr;
    rec.burn_in = burn_rounds * ipr;
    rec.thinning = chain_config.thinning;
    rec.seed = chain_config.seed;
    rec.has_fields = chain_config.record_fields;
    rec.trace_stride = ipr;

    // One owning patch per pixel, for reusing cached radiances in the
    // between-round summary computation.
    std::vector<std::pair<int, int>> owner(block.pixel_count(), {-1, -1});
    for (int i = 0; i < n_patches; ++i)
        for (std::size_t j = 0; j < contexts[i].global_clear.size(); ++j) {
            const int g = contexts[i].global_clear[j];
            if (owner[g].first < 0) owner[g] = {i, static_cast<int>(j)};
        }

    // Summaries of a merged state: pixels whose state matches the owning
    // patch bitwise reuse that patch's cached radiances; averaged overlap
    // pixels are re-evaluated.
    std::vector<double> eval_scratch(fm.channels());
    auto merged_summaries = [&](const AerosolState& merged) {
        const int C = fm.channels();
        const int M = fm.components();
        SummaryStats s;
        s.t_kappa = gmrf_quadratic(merged.tau, global_adj);
        s.t_sigma.assign(C, 0.0);
        s.t_alpha.assign(M, 0.0);
        for (int p = 0; p < block.pixel_count(); ++p) {
            const auto [pi, lp] = owner[p];
            const AerosolState& ps = samplers[pi].state();
            bool same = ps.tau[lp] == merged.tau[p];
            auto merged_theta = merged.theta_of(p);
            auto patch_theta = ps.theta_of(lp);
            for (int m = 0; same && m < M; ++m)
                same = patch_theta[m] == merged_theta[m];
            const double* row;
            if (same) {
                row = samplers[pi].model_radiance_cache().data() +
                      static_cast<std::size_t>(lp) * C;
            } else {
                fm.eval(merged.tau[p], merged_theta, eval_scratch);
                row = eval_scratch.data();
            }
            auto obs = block.pixel(p);
            for (int c = 0; c < C; ++c) {
                const double r = obs[c] - row[c];
                s.t_sigma[c] += r * r;
            }
            for (int m = 0; m < M; ++m) s.t_alpha[m] += std::log(merged_theta[m]);
        }
        return s;
    };

    const Adjacency& adj = global_adj;
    auto joint_log_posterior = [&](const AerosolState& st, const HyperState& hy,
                                   const SummaryStats& ss) {
        const int P = block.pixel_count();
        double v = 0.0;
        for (int c = 0; c < fm.channels(); ++c) {
            v -= ss.t_sigma[c] / (2.0 * hy.sigma2[c]);
            v -= 0.5 * P * std::log(2.0 * M_PI * hy.sigma2[c]);
            v -= (0.5 * chain_config.nu0 + 1.0) * std::log(hy.sigma2[c]);
        }
        v += log_gmrf_prior(st.tau, hy.kappa, adj);
        v += (chain_config.alpha0 - 1.0) * std::log(hy.kappa) -
             chain_config.beta0 * hy.kappa;
        double asum = 0.0, lg = 0.0, cross = 0.0;
        for (int m = 0; m < fm.components(); ++m) {
            asum += hy.alpha[m];
            lg += std::lgamma(hy.alpha[m]);
            cross += (hy.alpha[m] - 1.0) * ss.t_alpha[m];
        }
        v += cross + P * (std::lgamma(asum) - lg);
        v += log_alpha_hyperprior(hy.alpha);
        return v;
    };
    rec.log_posterior.push_back(joint_log_posterior(global_state, global_hyper, summaries));

    KernelCounters burn_snapshot;
    std::vector<const AerosolState*> patch_state_ptrs(n_patches);

    for (int round = 0; round < rounds; ++round) {
        const bool in_burn = round < burn_rounds;

        // Distribute patches among workers; exceptions abort the round.
        std::atomic<int> next{0};
        std::vector<std::exception_ptr> errors(workers);
        auto work = [&](int w) {
            try {
                for (int i = next.fetch_add(1); i < n_patches; i = next.fetch_add(1)) {
                    samplers[i].reset_state(restrict_state(global_state, contexts[i]));
                    samplers[i].set_frozen_calibration(summaries, block.pixel_count());
                    samplers[i].iterate(ipr, in_burn);
                }
            } catch (...) {
                errors[w] = std::current_exception();
            }
        };
        if (workers == 1) {
            work(0);
        } else {
            std::vector<std::thread> pool;
            pool.reserve(workers);
            for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
            for (auto& t : pool) t.join();
        }
        for (int w = 0; w < workers; ++w)
            if (errors[w]) {
                try {
                    std::rethrow_exception(errors[w]);
                } catch (const std::exception& e) {
                    throw std::runtime_error(
                        "run_parallel: round " + std::to_string(round) +
                        " aborted: " + e.what());
                }
            }

        for (int i = 0; i < n_patches; ++i)
            patch_state_ptrs[i] = &samplers[i].state();
        global_state = average_overlaps(contexts, patch_state_ptrs,
                                        block.pixel_count(), fm.components());
        summaries = merged_summaries(global_state);

        // Coordinator refreshes the recorded hyperparameters from the new
        // summaries (exact draws for sigma2/kappa, one M-H sweep for alpha).
        for (int c = 0; c < fm.channels(); ++c)
            if (chain_config.update_sigma2)
                global_hyper.sigma2[c] =
                    gibbs_update_sigma2(summaries.t_sigma[c], block.pixel_count(),
                                        coord_rng, chain_config.sigma2_floor,
                                        chain_config.nu0);
        if (chain_config.update_kappa && summaries.t_kappa > 0.0)
            global_hyper.kappa = gibbs_update_kappa_from_stat(
                summaries.t_kappa, block.pixel_count(), coord_rng,
                chain_config.alpha0, chain_config.beta0);
        if (chain_config.update_alpha) {
            for (int m = 0; m < fm.components(); ++m) {
                const double cur = global_hyper.alpha[m];
                const double prop =
                    cur * std::exp(chain_config.alpha_step * coord_rng.normal(0.0, 1.0));
                std::vector<double> alpha_prop(global_hyper.alpha);
                alpha_prop[m] = prop;
                const double log_ratio =
                    log_alpha_conditional(alpha_prop, summaries.t_alpha,
                                          block.pixel_count()) -
                    log_alpha_conditional(global_hyper.alpha, summaries.t_alpha,
                                          block.pixel_count()) +
                    std::log(prop / cur);
                if (mh_accept(log_ratio, coord_rng)) global_hyper.alpha[m] = prop;
            }
        }

        rec.log_posterior.push_back(
            joint_log_posterior(global_state, global_hyper, summaries));

        if (in_burn && round + 1 == burn_rounds) {
            for (const auto& s : samplers) {
                const KernelCounters& c = s.counters();
                burn_snapshot.tau_attempts += c.tau_attempts;
                burn_snapshot.tau_accepts += c.tau_accepts;
                burn_snapshot.theta_attempts += c.theta_attempts;
                burn_snapshot.theta_accepts += c.theta_accepts;
                burn_snapshot.alpha_attempts += c.alpha_attempts;
                burn_snapshot.alpha_accepts += c.alpha_accepts;
                burn_snapshot.sigma_attempts += c.sigma_attempts;
                burn_snapshot.sigma_accepts += c.sigma_accepts;
            }
        }
        if (!in_burn && (round - burn_rounds) % std::max(1, chain_config.thinning) == 0) {
            rec.kappa_samples.push_back(global_hyper.kappa);
            rec.alpha_samples.push_back(global_hyper.alpha);
            rec.sigma2_samples.push_back(global_hyper.sigma2);
            if (chain_config.record_fields) {
                rec.tau_samples.push_back(global_state.tau);
                rec.theta_samples.push_back(global_state.theta);
            }
        }
    }

    for (const auto& s : samplers) {
        const KernelCounters& c = s.counters();
        rec.counters.tau_attempts += c.tau_attempts;
        rec.counters.tau_accepts += c.tau_accepts;
        rec.counters.theta_attempts += c.theta_attempts;
        rec.counters.theta_accepts += c.theta_accepts;
        rec.counters.alpha_attempts += c.alpha_attempts;
        rec.counters.alpha_accepts += c.alpha_accepts;
        rec.counters.sigma_attempts += c.sigma_attempts;
        rec.counters.sigma_accepts += c.sigma_accepts;
    }
    rec.post_burn_counters.tau_attempts =
        rec.counters.tau_attempts - burn_snapshot.tau_attempts;
    rec.post_burn_counters.tau_accepts =
        rec.counters.tau_accepts - burn_snapshot.tau_accepts;
    rec.post_burn_counters.theta_attempts =
        rec.counters.theta_attempts - burn_snapshot.theta_attempts;
    rec.post_burn_counters.theta_accepts =
        rec.counters.theta_accepts - burn_snapshot.theta_accepts;
    rec.post_burn_counters.alpha_attempts =
        rec.counters.alpha_attempts - burn_snapshot.alpha_attempts;
    rec.post_burn_counters.alpha_accepts =
        rec.counters.alpha_accepts - burn_snapshot.alpha_accepts;
    rec.post_burn_counters.sigma_attempts =
        rec.counters.sigma_attempts - burn_snapshot.sigma_attempts;
    rec.post_burn_counters.sigma_accepts =
        rec.counters.sigma_accepts - burn_snapshot.sigma_accepts;
    return rec;
}

ChainRecord run_parallel(const RadianceBlock& block, const ForwardModel& fm,
                         const PatchLayout& layout, const RoundConfig& round_config,
                         const ChainConfig& chain_config, double tau_init_fraction) {
    return run_parallel(block, fm, layout, round_config, chain_config,
                        default_init_state(block.pixel_count(), fm.components(),
                                           fm.tau_min(), fm.tau_max(), tau_init_fraction),
                        default_init_hyper(block, fm.components()));
}

} // namespace aodret
