// aodret: fine-resolution Bayesian AOD retrieval toolkit.
//
// Subcommands: simulate, retrieve, diagnose, aggregate, compare, validate,
// make-table. Every run writes a JSON manifest with the resolved settings.
// Exit codes: 0 success, 2 configuration error, 3 I/O or parse error,
// 4 convergence warning.

#include "aodret/block_io.hpp"
#include "aodret/diagnostics.hpp"
#include "aodret/forward_model.hpp"
#include "aodret/parallel.hpp"
#include "aodret/sampler.hpp"
#include "aodret/simgen.hpp"
#include "aodret/textio.hpp"
#include "aodret/validation.hpp"
#include "aodret/version.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitConvergence = 4;

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                             start_)
            .count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

void write_manifest(const std::string& path, const std::string& subcommand,
                    const json& settings, const json& outputs, double seconds) {
    json manifest;
    manifest["tool"] = "aodret";
    manifest["version"] = aodret::kVersion;
    manifest["subcommand"] = subcommand;
    manifest["settings"] = settings;
    manifest["outputs"] = outputs;
    manifest["wall_clock_seconds"] = seconds;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << manifest.dump(2) << "\n";
}

std::vector<double> parse_csv_doubles(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ','))
        out.push_back(aodret::parse_double(tok));
    return out;
}

struct ForwardModelOptions {
    std::string table_path;
    int channels = 36;
    int components = 4;
    double tau_min = 0.0;
    double tau_max = 3.0;

    void attach(CLI::App* cmd) {
        cmd->add_option("--table", table_path,
                        "radiance table file (default: analytic surrogate)");
        cmd->add_option("--channels", channels, "surrogate channel count")
            ->capture_default_str();
        cmd->add_option("--components", components, "surrogate component count")
            ->capture_default_str();
        cmd->add_option("--tau-min", tau_min, "surrogate support lower bound")
            ->capture_default_str();
        cmd->add_option("--tau-max", tau_max, "surrogate support upper bound")
            ->capture_default_str();
    }

    std::unique_ptr<aodret::ForwardModel> build() const {
        if (!table_path.empty())
            return std::make_unique<aodret::TableModel>(
                aodret::read_radiance_table(table_path));
        aodret::SurrogateParams params =
            aodret::SurrogateParams::defaults(channels, components);
        params.tau_lo = tau_min;
        params.tau_hi = tau_max;
        return std::make_unique<aodret::SurrogateModel>(std::move(params));
    }

    json to_json() const {
        return {{"table", table_path},
                {"channels", channels},
                {"components", components},
                {"tau_min", tau_min},
                {"tau_max", tau_max}};
    }
};

// Replaces cells within one pixel of an interior patch edge by their 3x3
// neighborhood mean (valid cells only). Post-processing for the exported mean
// field of patch-parallel runs, where residual seams concentrate.
aodret::Field smooth_patch_edges(const aodret::Field& field,
                                 const aodret::PatchLayout& layout) {
    std::vector<std::uint8_t> near_edge(field.values.size(), 0);
    for (const aodret::Patch& pt : layout.patches)
        for (int r = pt.row0; r < pt.row1; ++r)
            for (int c = pt.col0; c < pt.col1; ++c) {
                const bool on_patch_edge = r == pt.row0 || r == pt.row1 - 1 ||
                                           c == pt.col0 || c == pt.col1 - 1;
                const bool on_block_edge = r == 0 || r == field.rows - 1 ||
                                           c == 0 || c == field.cols - 1;
                if (!on_patch_edge || on_block_edge) continue;
                for (int rr = std::max(0, r - 1);
                     rr <= std::min(field.rows - 1, r + 1); ++rr)
                    for (int cc = std::max(0, c - 1);
                         cc <= std::min(field.cols - 1, c + 1); ++cc)
                        near_edge[static_cast<std::size_t>(rr) * field.cols + cc] = 1;
            }

    aodret::Field out = field;
    for (int r = 0; r < field.rows; ++r)
        for (int c = 0; c < field.cols; ++c) {
            const std::size_t i = static_cast<std::size_t>(r) * field.cols + c;
            if (!near_edge[i] || !field.is_valid(r, c)) continue;
            double sum = 0.0;
            int n = 0;
            for (int rr = std::max(0, r - 1); rr <= std::min(field.rows - 1, r + 1);
                 ++rr)
                for (int cc = std::max(0, c - 1);
                     cc <= std::min(field.cols - 1, c + 1); ++cc)
                    if (field.is_valid(rr, cc)) {
                        sum += field.at(rr, cc);
                        ++n;
                    }
            out.values[i] = sum / n;
        }
    return out;
}

std::vector<std::uint8_t> build_mask(const std::string& spec, int rows, int cols,
                                     std::uint64_t seed) {
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(rows) * cols, 1);
    if (spec.empty() || spec == "none") return {};
    if (spec.rfind("random:", 0) == 0) {
        const double fraction = aodret::parse_double(spec.substr(7));
        if (!(fraction >= 0.0 && fraction < 1.0))
            throw std::invalid_argument("mask random fraction must be in [0,1)");
        aodret::Rng rng = aodret::Rng::stream(seed, 0x3A5Cull);
        for (auto& m : mask)
            if (rng.uniform() < fraction) m = 0;
        return mask;
    }
    if (spec.rfind("rect:", 0) == 0) {
        const auto v = parse_csv_doubles(spec.substr(5));
        if (v.size() != 4)
            throw std::invalid_argument("mask rect needs r0,c0,r1,c1");
        const int r0 = static_cast<int>(v[0]), c0 = static_cast<int>(v[1]);
        const int r1 = static_cast<int>(v[2]), c1 = static_cast<int>(v[3]);
        for (int r = std::max(0, r0); r < std::min(rows, r1); ++r)
            for (int c = std::max(0, c0); c < std::min(cols, c1); ++c)
                mask[static_cast<std::size_t>(r) * cols + c] = 0;
        return mask;
    }
    throw std::invalid_argument("unknown mask spec '" + spec +
                                "' (none | random:<fraction> | rect:r0,c0,r1,c1)");
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
    int rows = 32, cols = 128;
    double kappa = 100.0;
    std::string alpha = "0.8,0.4,0.2,0.2";
    double noise = 0.10;
    double center = 1.0;
    std::uint64_t seed = 1234567;
    std::string mask = "none";
    bool allow_disconnected = false;
    ForwardModelOptions fm;
    std::string out_block = "block.txt";
    std::string out_truth = "truth.txt";
};

int run_simulate(const SimulateArgs& args) {
    Stopwatch watch;
    aodret::SimConfig config;
    config.rows = args.rows;
    config.cols = args.cols;
    config.kappa_true = args.kappa;
    config.alpha_true = parse_csv_doubles(args.alpha);
    config.noise_fraction = args.noise;
    config.tau_center = args.center;
    config.seed = args.seed;
    config.clear_mask = build_mask(args.mask, args.rows, args.cols, args.seed);
    config.allow_disconnected = args.allow_disconnected;

    auto fm = args.fm.build();
    aodret::Rng rng(config.seed);
    aodret::SimulatedBlock sim = aodret::simulate_block(config, *fm, rng);

    const int P = sim.block.pixel_count();
    if (P > 0 && sim.clip_count > P / 100)
        std::cerr << "warning: " << sim.clip_count << " of " << P
                  << " tau values clipped to the model support\n";

    aodret::write_block(sim.block, args.out_block);
    aodret::SimTruth truth{args.rows,
                           args.cols,
                           {sim.block.grid().clear_mask().begin(),
                            sim.block.grid().clear_mask().end()},
                           sim.truth,
                           sim.kappa_true,
                           sim.alpha_true,
                           sim.noise_sd};
    aodret::write_truth(truth, args.out_truth);

    json settings = {{"rows", args.rows},
                     {"cols", args.cols},
                     {"kappa", args.kappa},
                     {"alpha", args.alpha},
                     {"noise", args.noise},
                     {"center", args.center},
                     {"seed", args.seed},
                     {"mask", args.mask},
                     {"allow_disconnected", args.allow_disconnected},
                     {"forward_model", args.fm.to_json()}};
    json outputs = {{"block", args.out_block},
                    {"truth", args.out_truth},
                    {"clip_count", sim.clip_count},
                    {"floor_count", sim.floor_count}};
    write_manifest(args.out_block + ".manifest.json", "simulate", settings, outputs,
                   watch.seconds());
    return kExitOk;
}

// ---------------------------------------------------------------- retrieve

struct RetrieveArgs {
    std::string block_path;
    std::string out_prefix = "retrieval";
    int iterations = 3000;
    int burn_in = 1000;
    int thinning = 1;
    std::uint64_t seed = 1234567;
    int chains = 1;
    bool parallel = false;
    bool smooth_edges = false;
    int workers = 0;
    int iterations_per_round = 50;
    int patch_height = 20;
    int patch_width = 20;
    int min_overlap = 4;
    double rhat_threshold = 1.1;
    bool no_adapt = false;
    bool no_record_fields = false;
    bool per_pixel_rhat = false;
    double tau_init = 0.5;
    int max_lag = 50;
    ForwardModelOptions fm;
};

int run_retrieve(const RetrieveArgs& args) {
    Stopwatch watch;
    aodret::RadianceBlock block = aodret::read_block_file(args.block_path);
    ForwardModelOptions fm_opt = args.fm;
    fm_opt.channels = block.channels(); // surrogate must match the block
    auto fm = fm_opt.build();
    if (fm->channels() != block.channels())
        throw std::invalid_argument("forward model channels != block channels");

    const aodret::Adjacency adj = aodret::build_adjacency(block.grid());

    aodret::ChainConfig config;
    config.iterations = args.iterations;
    config.burn_in = args.burn_in;
    config.thinning = args.thinning;
    config.seed = args.seed;
    config.adapt_acceptance = !args.no_adapt;
    config.record_fields = !args.no_record_fields;
    config.validate();

    if (args.chains < 1) throw std::invalid_argument("--chains must be >= 1");

    std::vector<aodret::ChainRecord> records;
    for (int k = 0; k < args.chains; ++k) {
        aodret::ChainConfig chain_cfg = config;
        chain_cfg.seed = args.chains == 1
                             ? config.seed
                             : aodret::derive_stream_seed(config.seed, k);
        // Over-dispersed initializations at interior support quantiles.
        const double fraction =
            args.chains == 1 ? args.tau_init
                             : static_cast<double>(k + 1) / (args.chains + 1);
        if (args.parallel) {
            const aodret::PatchLayout layout = aodret::build_patch_layout(
                block.grid(), args.patch_height, args.patch_width, args.min_overlap);
            aodret::RoundConfig rounds;
            rounds.iterations_per_round = args.iterations_per_round;
            rounds.workers = args.workers;
            records.push_back(aodret::run_parallel(block, *fm, layout, rounds,
                                                   chain_cfg, fraction));
        } else {
            records.push_back(
                aodret::run_chain(block, *fm, adj, chain_cfg, fraction));
        }
    }

    aodret::DiagnosticsReport diag =
        aodret::diagnose(records, args.rhat_threshold, args.max_lag);

    // Pool post-burn-in samples across chains for the reported posterior.
    aodret::ChainRecord pooled = records[0];
    for (int k = 1; k < args.chains; ++k) {
        const auto& r = records[k];
        pooled.kappa_samples.insert(pooled.kappa_samples.end(),
                                    r.kappa_samples.begin(), r.kappa_samples.end());
        pooled.alpha_samples.insert(pooled.alpha_samples.end(),
                                    r.alpha_samples.begin(), r.alpha_samples.end());
        pooled.sigma2_samples.insert(pooled.sigma2_samples.end(),
                                     r.sigma2_samples.begin(), r.sigma2_samples.end());
        pooled.tau_samples.insert(pooled.tau_samples.end(), r.tau_samples.begin(),
                                  r.tau_samples.end());
        pooled.theta_samples.insert(pooled.theta_samples.end(),
                                    r.theta_samples.begin(), r.theta_samples.end());
    }
    aodret::PosteriorSummary summary = aodret::summarize(pooled);

    const bool warn = !diag.converged;
    aodret::SummaryFile sfile;
    sfile.rows = block.grid().rows();
    sfile.cols = block.grid().cols();
    sfile.clear_mask.assign(block.grid().clear_mask().begin(),
                            block.grid().clear_mask().end());
    sfile.summary = std::move(summary);
    sfile.status.assign(sfile.summary.pixel_count, aodret::PixelStatus::Ok);
    sfile.convergence_warning = warn;
    sfile.rhat = diag.rhat_log_posterior.value_or(0.0);

    // Optional per-pixel convergence check marks stragglers as failed.
    if (args.per_pixel_rhat && args.chains >= 2 && !args.no_record_fields) {
        for (int p = 0; p < block.pixel_count(); ++p) {
            std::vector<std::vector<double>> series;
            std::size_t common = std::numeric_limits<std::size_t>::max();
            for (const auto& r : records) {
                std::vector<double> s(r.sample_count());
                for (int i = 0; i < r.sample_count(); ++i)
                    s[i] = r.tau_samples[i][p];
                common = std::min(common, s.size());
                series.push_back(std::move(s));
            }
            for (auto& s : series) s.resize(common);
            if (common >= 2 &&
                aodret::compute_rhat(series) >= args.rhat_threshold)
                sfile.status[p] = aodret::PixelStatus::Failed;
        }
    }

    const std::string summary_path = args.out_prefix + ".summary.txt";
    const std::string diag_path = args.out_prefix + ".diagnostics.txt";
    const std::string field_path = args.out_prefix + ".tau_mean.field.txt";
    aodret::write_summary(sfile, summary_path);
    {
        std::ofstream out(diag_path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open for writing: " + diag_path);
        out << aodret::render_diagnostics(diag);
    }
    aodret::Field mean_field = aodret::tau_mean_field(sfile);
    if (args.smooth_edges) {
        if (!args.parallel)
            throw std::invalid_argument("--smooth-edges applies to --parallel runs");
        const aodret::PatchLayout layout = aodret::build_patch_layout(
            block.grid(), args.patch_height, args.patch_width, args.min_overlap);
        mean_field = smooth_patch_edges(mean_field, layout);
    }
    aodret::write_field(mean_field, field_path);

    json record_paths = json::array();
    for (int k = 0; k < args.chains; ++k) {
        const std::string path =
            args.out_prefix + ".chain" + std::to_string(k) + ".record.txt";
        aodret::write_record(records[k], path);
        record_paths.push_back(path);
    }

    json settings = {{"block", args.block_path},
                     {"iterations", args.iterations},
                     {"burn_in", args.burn_in},
                     {"thinning", args.thinning},
                     {"seed", args.seed},
                     {"chains", args.chains},
                     {"parallel", args.parallel},
                     {"smooth_edges", args.smooth_edges},
                     {"workers", args.workers},
                     {"iterations_per_round", args.iterations_per_round},
                     {"patch_height", args.patch_height},
                     {"patch_width", args.patch_width},
                     {"min_overlap", args.min_overlap},
                     {"rhat_threshold", args.rhat_threshold},
                     {"adapt", !args.no_adapt},
                     {"record_fields", !args.no_record_fields},
                     {"per_pixel_rhat", args.per_pixel_rhat},
                     {"tau_init", args.tau_init},
                     {"forward_model", fm_opt.to_json()}};
    json outputs = {{"summary", summary_path},
                    {"diagnostics", diag_path},
                    {"tau_mean_field", field_path},
                    {"records", record_paths},
                    {"convergence_warning", warn}};
    write_manifest(args.out_prefix + ".manifest.json", "retrieve", settings,
                   outputs, watch.seconds());

    if (warn) {
        std::cerr << "warning: R-hat "
                  << (diag.rhat_log_posterior ? *diag.rhat_log_posterior : 0.0)
                  << " above threshold " << args.rhat_threshold
                  << "; outputs written with a warning flag\n";
        return kExitConvergence;
    }
    return kExitOk;
}

// ---------------------------------------------------------------- diagnose

struct DiagnoseArgs {
    std::vector<std::string> records;
    std::string out = "diagnostics.txt";
    double rhat_threshold = 1.1;
    int max_lag = 50;
};

int run_diagnose(const DiagnoseArgs& args) {
    Stopwatch watch;
    std::vector<aodret::ChainRecord> records;
    for (const auto& path : args.records)
        records.push_back(aodret::read_record(path));
    aodret::DiagnosticsReport rep =
        aodret::diagnose(records, args.rhat_threshold, args.max_lag);
    {
        std::ofstream out(args.out, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open for writing: " + args.out);
        out << aodret::render_diagnostics(rep);
    }
    std::cout << aodret::render_diagnostics(rep);
    json settings = {{"records", args.records},
                     {"rhat_threshold", args.rhat_threshold},
                     {"max_lag", args.max_lag}};
    write_manifest(args.out + ".manifest.json", "diagnose", settings,
                   {{"report", args.out}}, watch.seconds());
    return rep.converged ? kExitOk : kExitConvergence;
}

// ---------------------------------------------------------------- aggregate

struct AggregateArgs {
    std::string in_path;
    std::string out_path = "aggregated.field.txt";
    int factor = 4;
    double min_clear_fraction = 1.0 / 16.0;
};

int run_aggregate(const AggregateArgs& args) {
    Stopwatch watch;
    const aodret::Field fine = aodret::read_field(args.in_path);
    const aodret::Field coarse =
        aodret::aggregate(fine, args.factor, args.min_clear_fraction);
    aodret::write_field(coarse, args.out_path);
    json settings = {{"input", args.in_path},
                     {"factor", args.factor},
                     {"min_clear_fraction", args.min_clear_fraction}};
    write_manifest(args.out_path + ".manifest.json", "aggregate", settings,
                   {{"field", args.out_path}}, watch.seconds());
    return kExitOk;
}

// ---------------------------------------------------------------- compare

struct CompareArgs {
    std::string a_path;
    std::string b_path;
    std::string out = "comparison.txt";
};

int run_compare(const CompareArgs& args) {
    Stopwatch watch;
    const aodret::Field a = aodret::read_field(args.a_path);
    const aodret::Field b = aodret::read_field(args.b_path);
    const aodret::ComparisonReport rep = aodret::compare_fields(a, b);

    std::ostringstream os;
    os << "aodret-comparison v1\n";
    os << "paired " << rep.paired << "\n";
    os << "missing_a " << rep.missing_a << "\n";
    os << "missing_b " << rep.missing_b << "\n";
    os << "rms " << aodret::format_double(rep.rms) << "\n";
    if (rep.correlation)
        os << "correlation " << aodret::format_double(*rep.correlation) << "\n";
    else
        os << "correlation absent\n";
    {
        std::ofstream out(args.out, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open for writing: " + args.out);
        out << os.str();
    }
    std::cout << os.str();
    json settings = {{"a", args.a_path}, {"b", args.b_path}};
    write_manifest(args.out + ".manifest.json", "compare", settings,
                   {{"report", args.out}}, watch.seconds());
    return kExitOk;
}

// ---------------------------------------------------------------- validate

struct ValidateArgs {
    std::string summary_path;
    std::string stations_path;
    double station_lat = 0.0;
    double station_lon = 0.0;
    std::string georef; // lat0,dlat_drow,dlat_dcol,lon0,dlon_drow,dlon_dcol
    std::string overpass;
    std::int64_t window = 3600;
    double to_nm = 550.0;
    std::string out = "validation.txt";
};

int run_validate(const ValidateArgs& args) {
    Stopwatch watch;
    const aodret::SummaryFile summary = aodret::read_summary(args.summary_path);
    std::vector<aodret::GroundRecord> records =
        aodret::read_ground_records(args.stations_path);
    aodret::sort_records(records);

    const auto georef_values = parse_csv_doubles(args.georef);
    if (georef_values.size() != 6)
        throw std::invalid_argument(
            "--georef needs lat0,dlat_drow,dlat_dcol,lon0,dlon_drow,dlon_dcol");
    aodret::Georegistration georef{georef_values[0], georef_values[1],
                                   georef_values[2], georef_values[3],
                                   georef_values[4], georef_values[5]};
    const auto [row, col] = aodret::locate_pixel(georef, summary.rows, summary.cols,
                                                 args.station_lat, args.station_lon);
    const std::int64_t overpass = aodret::parse_iso8601_utc(args.overpass);
    const aodret::OverpassMatch match =
        aodret::match_overpass(records, overpass, args.window, args.to_nm);

    std::ostringstream os;
    os << "aodret-validation v1\n";
    os << "pixel_row " << row << "\n";
    os << "pixel_col " << col << "\n";
    const int cell = row * summary.cols + col;
    const bool clear = summary.clear_mask[cell] != 0;
    os << "pixel_clear " << (clear ? 1 : 0) << "\n";
    if (clear) {
        int p = 0;
        for (int i = 0; i < cell; ++i)
            if (summary.clear_mask[i]) ++p;
        os << "retrieval_mean " << aodret::format_double(summary.summary.tau[p].mean)
           << "\n";
        os << "retrieval_sd " << aodret::format_double(summary.summary.tau[p].sd)
           << "\n";
        if (match.matched) {
            os << "ground_mean " << aodret::format_double(match.mean_aod) << "\n";
            os << "ground_records " << match.record_count << "\n";
            os << "difference "
               << aodret::format_double(summary.summary.tau[p].mean - match.mean_aod)
               << "\n";
        } else {
            os << "ground_mean absent\n";
            os << "nearest_record_gap_seconds " << match.gap_seconds << "\n";
        }
    }
    {
        std::ofstream out(args.out, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open for writing: " + args.out);
        out << os.str();
    }
    std::cout << os.str();

    json settings = {{"summary", args.summary_path},
                     {"stations", args.stations_path},
                     {"station_lat", args.station_lat},
                     {"station_lon", args.station_lon},
                     {"georef", args.georef},
                     {"overpass", args.overpass},
                     {"window", args.window},
                     {"to_nm", args.to_nm}};
    write_manifest(args.out + ".manifest.json", "validate", settings,
                   {{"report", args.out}}, watch.seconds());
    return kExitOk;
}

// ---------------------------------------------------------------- make-table

struct MakeTableArgs {
    int nodes = 128;
    ForwardModelOptions fm;
    std::string out = "table.txt";
};

int run_make_table(const MakeTableArgs& args) {
    Stopwatch watch;
    if (args.nodes < 2) throw std::invalid_argument("--nodes must be >= 2");
    aodret::SurrogateParams params =
        aodret::SurrogateParams::defaults(args.fm.channels, args.fm.components);
    params.tau_lo = args.fm.tau_min;
    params.tau_hi = args.fm.tau_max;
    std::vector<double> nodes(args.nodes);
    for (int i = 0; i < args.nodes; ++i)
        nodes[i] = params.tau_lo +
                   (params.tau_hi - params.tau_lo) * i / (args.nodes - 1);
    aodret::write_radiance_table(aodret::build_table_from_surrogate(params, nodes),
                                 args.out);
    json settings = {{"nodes", args.nodes}, {"forward_model", args.fm.to_json()}};
    write_manifest(args.out + ".manifest.json", "make-table", settings,
                   {{"table", args.out}}, watch.seconds());
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fine-resolution Bayesian AOD retrieval toolkit"};
    app.set_version_flag("--version", std::string("aodret ") + aodret::kVersion);
    app.set_config("--config", "", "config file with default options")
        ->envname("AODRET_CONFIG");
    app.require_subcommand(1);

    SimulateArgs sim;
    CLI::App* simulate = app.add_subcommand("simulate", "generate a synthetic block");
    simulate->add_option("--rows", sim.rows)->capture_default_str();
    simulate->add_option("--cols", sim.cols)->capture_default_str();
    simulate->add_option("--kappa", sim.kappa, "true GMRF precision")
        ->capture_default_str();
    simulate->add_option("--alpha", sim.alpha, "true Dirichlet parameter (csv)")
        ->capture_default_str();
    simulate->add_option("--noise", sim.noise, "noise sd as fraction of channel mean")
        ->capture_default_str();
    simulate->add_option("--center", sim.center, "target tau level")
        ->capture_default_str();
    simulate->add_option("--seed", sim.seed)->capture_default_str();
    simulate->add_option("--mask", sim.mask,
                         "cloud mask: none | random:<fraction> | rect:r0,c0,r1,c1")
        ->capture_default_str();
    simulate->add_flag("--allow-disconnected", sim.allow_disconnected,
                       "sample disconnected clear components separately");
    simulate->add_option("--out-block", sim.out_block)->capture_default_str();
    simulate->add_option("--out-truth", sim.out_truth)->capture_default_str();
    sim.fm.attach(simulate);

    RetrieveArgs ret;
    CLI::App* retrieve = app.add_subcommand("retrieve", "run the MCMC retrieval");
    retrieve->add_option("--block", ret.block_path, "input block file")->required();
    retrieve->add_option("--out-prefix", ret.out_prefix)->capture_default_str();
    retrieve->add_option("--iterations", ret.iterations)->capture_default_str();
    retrieve->add_option("--burn-in", ret.burn_in)->capture_default_str();
    retrieve->add_option("--thinning", ret.thinning)->capture_default_str();
    retrieve->add_option("--seed", ret.seed)->capture_default_str();
    retrieve->add_option("--chains", ret.chains, "independent chains for R-hat")
        ->capture_default_str();
    retrieve->add_flag("--parallel", ret.parallel, "patch-parallel sampler");
    retrieve->add_flag("--smooth-edges", ret.smooth_edges,
                       "post-smooth the exported mean field at patch seams");
    retrieve->add_option("--workers", ret.workers, "worker threads (0 = hardware)")
        ->capture_default_str();
    retrieve->add_option("--iterations-per-round", ret.iterations_per_round)
        ->capture_default_str();
    retrieve->add_option("--patch-height", ret.patch_height)->capture_default_str();
    retrieve->add_option("--patch-width", ret.patch_width)->capture_default_str();
    retrieve->add_option("--min-overlap", ret.min_overlap)->capture_default_str();
    retrieve->add_option("--rhat-threshold", ret.rhat_threshold)
        ->capture_default_str();
    retrieve->add_flag("--no-adapt", ret.no_adapt, "disable burn-in adaptation");
    retrieve->add_flag("--no-record-fields", ret.no_record_fields,
                       "do not store per-pixel samples in record files");
    retrieve->add_flag("--per-pixel-rhat", ret.per_pixel_rhat,
                       "mark pixels with R-hat above threshold as failed");
    retrieve->add_option("--tau-init", ret.tau_init,
                         "initial tau as a fraction of the support")
        ->capture_default_str();
    retrieve->add_option("--max-lag", ret.max_lag, "ACF lags in diagnostics")
        ->capture_default_str();
    ret.fm.attach(retrieve);

    DiagnoseArgs diag;
    CLI::App* diagnose = app.add_subcommand("diagnose", "multi-chain diagnostics");
    diagnose->add_option("--records", diag.records, "chain record files")
        ->required()
        ->expected(-1);
    diagnose->add_option("--out", diag.out)->capture_default_str();
    diagnose->add_option("--rhat-threshold", diag.rhat_threshold)
        ->capture_default_str();
    diagnose->add_option("--max-lag", diag.max_lag)->capture_default_str();

    AggregateArgs agg;
    CLI::App* aggregate = app.add_subcommand("aggregate", "coarsen a field file");
    aggregate->add_option("--in", agg.in_path)->required();
    aggregate->add_option("--out", agg.out_path)->capture_default_str();
    aggregate->add_option("--factor", agg.factor)->capture_default_str();
    aggregate->add_option("--min-clear-fraction", agg.min_clear_fraction)
        ->capture_default_str();

    CompareArgs cmp;
    CLI::App* compare = app.add_subcommand("compare", "RMS/correlation of two fields");
    compare->add_option("--a", cmp.a_path)->required();
    compare->add_option("--b", cmp.b_path)->required();
    compare->add_option("--out", cmp.out)->capture_default_str();

    ValidateArgs val;
    CLI::App* validate = app.add_subcommand("validate", "match a ground station");
    validate->add_option("--summary", val.summary_path)->required();
    validate->add_option("--stations", val.stations_path)->required();
    validate->add_option("--station-lat", val.station_lat)->required();
    validate->add_option("--station-lon", val.station_lon)->required();
    validate->add_option("--georef", val.georef,
                         "lat0,dlat_drow,dlat_dcol,lon0,dlon_drow,dlon_dcol")
        ->required();
    validate->add_option("--overpass", val.overpass, "ISO-8601 UTC overpass time")
        ->required();
    validate->add_option("--window", val.window, "matching window in seconds")
        ->capture_default_str();
    validate->add_option("--to-nm", val.to_nm, "target wavelength")
        ->capture_default_str();
    validate->add_option("--out", val.out)->capture_default_str();

    MakeTableArgs mt;
    CLI::App* make_table =
        app.add_subcommand("make-table", "tabulate the surrogate model");
    make_table->add_option("--nodes", mt.nodes)->capture_default_str();
    make_table->add_option("--out", mt.out)->capture_default_str();
    mt.fm.attach(make_table);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (simulate->parsed()) return run_simulate(sim);
        if (retrieve->parsed()) return run_retrieve(ret);
        if (diagnose->parsed()) return run_diagnose(diag);
        if (aggregate->parsed()) return run_aggregate(agg);
        if (compare->parsed()) return run_compare(cmp);
        if (validate->parsed()) return run_validate(val);
        if (make_table->parsed()) return run_make_table(mt);
    } catch (const std::invalid_argument& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::domain_error& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }
    return kExitOk;
}
