#pragma once

#include "aodret/diagnostics.hpp"
#include "aodret/model.hpp"
#include "aodret/sampler.hpp"
#include "aodret/validation.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace aodret {

// Text formats, all line-oriented with a versioned magic line. Numbers are
// written in shortest round-trip decimal form, so write(read(x)) is
// byte-identical to x. The cell mask is run-length encoded ("12c3x..."),
// radiances and fields are row-major, radiance channels minor.

void write_block(const RadianceBlock& block, std::ostream& out);
void write_block(const RadianceBlock& block, const std::string& path);
RadianceBlock read_block(std::istream& in);
RadianceBlock read_block_file(const std::string& path);

struct SimTruth {
    int rows = 0;
    int cols = 0;
    std::vector<std::uint8_t> clear_mask;
    AerosolState state;
    double kappa = 0.0;
    std::vector<double> alpha;
    std::vector<double> noise_sd;
};

void write_truth(const SimTruth& truth, const std::string& path);
SimTruth read_truth(const std::string& path);

// Flat grid for external plotters; invalid cells are written as "nan".
void write_field(const Field& field, const std::string& path);
Field read_field(const std::string& path);

// Per-pixel retrieval status in summary files.
enum class PixelStatus : std::uint8_t {
    Ok = 0,
    Masked = 1, // cloud-masked, never attempted
    Failed = 2  // attempted but flagged non-converged
};

struct SummaryFile {
    int rows = 0;
    int cols = 0;
    std::vector<std::uint8_t> clear_mask;
    PosteriorSummary summary;
    std::vector<PixelStatus> status; // per clear pixel
    bool convergence_warning = false;
    double rhat = 0.0; // 0 when not computed
};

void write_summary(const SummaryFile& file, const std::string& path);
SummaryFile read_summary(const std::string& path);

void write_record(const ChainRecord& record, const std::string& path);
ChainRecord read_record(const std::string& path);

// Posterior-mean tau as a plot-ready Field (masked cells invalid).
Field tau_mean_field(const SummaryFile& file);

std::string encode_mask_rle(std::span<const std::uint8_t> mask);
std::vector<std::uint8_t> decode_mask_rle(const std::string& text, int expected_cells);

} // namespace aodret
