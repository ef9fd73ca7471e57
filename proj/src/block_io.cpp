#include "aodret/block_io.hpp"

#include "aodret/textio.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace aodret {

namespace {

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream is(line);
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

std::vector<std::string> expect_keyline(std::istream& in, const char* key,
                                        std::size_t min_tokens) {
    const std::string line = expect_line(in, key);
    auto toks = split_ws(line);
    if (toks.empty() || toks[0] != key || toks.size() < min_tokens)
        throw std::runtime_error(std::string("expected '") + key + "' line, got '" +
                                 line + "'");
    return toks;
}

void expect_magic(std::istream& in, const char* magic) {
    const std::string line = expect_line(in, magic);
    if (line != magic)
        throw std::runtime_error(std::string("expected '") + magic + "', got '" +
                                 line + "'");
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    return in;
}

void write_values_line(std::ostream& out, std::span<const double> values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out << ' ';
        out << format_double(values[i]);
    }
    out << '\n';
}

std::vector<double> read_values_line(std::istream& in, std::size_t count,
                                     const char* what) {
    const std::string line = expect_line(in, what);
    auto toks = split_ws(line);
    if (toks.size() != count)
        throw std::runtime_error(std::string(what) + ": expected " +
                                 std::to_string(count) + " values, got " +
                                 std::to_string(toks.size()));
    std::vector<double> out;
    out.reserve(count);
    for (const auto& t : toks) out.push_back(parse_double(t));
    return out;
}

} // namespace

std::string encode_mask_rle(std::span<const std::uint8_t> mask) {
    std::string out;
    std::size_t i = 0;
    while (i < mask.size()) {
        std::size_t j = i;
        while (j < mask.size() && (mask[j] != 0) == (mask[i] != 0)) ++j;
        out += std::to_string(j - i);
        out += mask[i] ? 'c' : 'x';
        i = j;
    }
    if (out.empty()) out = "0c";
    return out;
}

std::vector<std::uint8_t> decode_mask_rle(const std::string& text, int expected_cells) {
    std::vector<std::uint8_t> mask;
    std::size_t i = 0;
    while (i < text.size()) {
        std::size_t j = i;
        while (j < text.size() && text[j] >= '0' && text[j] <= '9') ++j;
        if (j == i || j == text.size())
            throw std::runtime_error("malformed mask RLE: '" + text + "'");
        const long long run = parse_int(text.substr(i, j - i));
        const char sym = text[j];
        if (sym != 'c' && sym != 'x')
            throw std::runtime_error("malformed mask RLE symbol: '" + text + "'");
        if (run < 0 || mask.size() + run > static_cast<std::size_t>(expected_cells))
            throw std::runtime_error("mask RLE overruns the grid: '" + text + "'");
        mask.insert(mask.end(), static_cast<std::size_t>(run), sym == 'c' ? 1 : 0);
        i = j + 1;
    }
    if (static_cast<int>(mask.size()) != expected_cells)
        throw std::runtime_error("mask RLE covers " + std::to_string(mask.size()) +
                                 " cells, expected " + std::to_string(expected_cells));
    return mask;
}

void write_block(const RadianceBlock& block, std::ostream& out) {
    const BlockGrid& grid = block.grid();
    out << "aodret-block v1\n";
    out << "rows " << grid.rows() << "\n";
    out << "cols " << grid.cols() << "\n";
    out << "resolution_km " << format_double(grid.resolution_km()) << "\n";
    out << "channels " << block.channels() << "\n";
    out << "mask " << encode_mask_rle(grid.clear_mask()) << "\n";
    out << "radiances " << block.pixel_count() << "\n";
    for (int p = 0; p < block.pixel_count(); ++p)
        write_values_line(out, block.pixel(p));
    out << "end\n";
}

void write_block(const RadianceBlock& block, const std::string& path) {
    auto out = open_out(path);
    write_block(block, out);
    if (!out) throw std::runtime_error("write failed: " + path);
}

RadianceBlock read_block(std::istream& in) {
    expect_magic(in, "aodret-block v1");
    const int rows = static_cast<int>(parse_int(expect_keyline(in, "rows", 2)[1]));
    const int cols = static_cast<int>(parse_int(expect_keyline(in, "cols", 2)[1]));
    const double res = parse_double(expect_keyline(in, "resolution_km", 2)[1]);
    const int channels = static_cast<int>(parse_int(expect_keyline(in, "channels", 2)[1]));
    auto mask = decode_mask_rle(expect_keyline(in, "mask", 2)[1], rows * cols);
    BlockGrid grid(rows, cols, std::move(mask), res);
    const int pixels =
        static_cast<int>(parse_int(expect_keyline(in, "radiances", 2)[1]));
    if (pixels != grid.clear_count())
        throw std::runtime_error("block: radiance rows != clear pixel count");
    std::vector<double> radiances;
    radiances.reserve(static_cast<std::size_t>(pixels) * channels);
    for (int p = 0; p < pixels; ++p) {
        auto row = read_values_line(in, channels, "radiance row");
        radiances.insert(radiances.end(), row.begin(), row.end());
    }
    expect_magic(in, "end");
    return RadianceBlock(std::move(grid), channels, std::move(radiances));
}

RadianceBlock read_block_file(const std::string& path) {
    auto in = open_in(path);
    return read_block(in);
}

void write_truth(const SimTruth& truth, const std::string& path) {
    auto out = open_out(path);
    out << "aodret-truth v1\n";
    out << "rows " << truth.rows << "\n";
    out << "cols " << truth.cols << "\n";
    out << "components " << truth.state.components << "\n";
    out << "kappa " << format_double(truth.kappa) << "\n";
    out << "alpha";
    for (double a : truth.alpha) out << ' ' << format_double(a);
    out << "\n";
    out << "noise_sd";
    for (double s : truth.noise_sd) out << ' ' << format_double(s);
    out << "\n";
    out << "mask " << encode_mask_rle(truth.clear_mask) << "\n";
    out << "pixels " << truth.state.pixel_count() << "\n";
    for (int p = 0; p < truth.state.pixel_count(); ++p) {
        out << format_double(truth.state.tau[p]);
        for (double t : truth.state.theta_of(p)) out << ' ' << format_double(t);
        out << '\n';
    }
    out << "end\n";
    if (!out) throw std::runtime_error("write failed: " + path);
}

SimTruth read_truth(const std::string& path) {
    auto in = open_in(path);
    expect_magic(in, "aodret-truth v1");
    SimTruth truth;
    truth.rows = static_cast<int>(parse_int(expect_keyline(in, "rows", 2)[1]));
    truth.cols = static_cast<int>(parse_int(expect_keyline(in, "cols", 2)[1]));
    truth.state.components =
        static_cast<int>(parse_int(expect_keyline(in, "components", 2)[1]));
    truth.kappa = parse_double(expect_keyline(in, "kappa", 2)[1]);
    for (auto toks = expect_keyline(in, "alpha", 2); const auto& t :
         std::vector<std::string>(toks.begin() + 1, toks.end()))
        truth.alpha.push_back(parse_double(t));
    for (auto toks = expect_keyline(in, "noise_sd", 1); const auto& t :
         std::vector<std::string>(toks.begin() + 1, toks.end()))
        truth.noise_sd.push_back(parse_double(t));
    truth.clear_mask = decode_mask_rle(expect_keyline(in, "mask", 2)[1],
                                       truth.rows * truth.cols);
    const int pixels = static_cast<int>(parse_int(expect_keyline(in, "pixels", 2)[1]));
    const int M = truth.state.components;
    truth.state.tau.reserve(pixels);
    truth.state.theta.reserve(static_cast<std::size_t>(pixels) * M);
    for (int p = 0; p < pixels; ++p) {
        auto row = read_values_line(in, 1 + M, "truth pixel");
        truth.state.tau.push_back(row[0]);
        truth.state.theta.insert(truth.state.theta.end(), row.begin() + 1, row.end());
    }
    expect_magic(in, "end");
    return truth;
}

void write_field(const Field& field, const std::string& path) {
    auto out = open_out(path);
    out << "aodret-field v1\n";
    out << "rows " << field.rows << "\n";
    out << "cols " << field.cols << "\n";
    for (int r = 0; r < field.rows; ++r) {
        for (int c = 0; c < field.cols; ++c) {
            if (c) out << ' ';
            if (field.is_valid(r, c))
                out << format_double(field.at(r, c));
            else
                out << "nan";
        }
        out << '\n';
    }
    out << "end\n";
    if (!out) throw std::runtime_error("write failed: " + path);
}

Field read_field(const std::string& path) {
    auto in = open_in(path);
    expect_magic(in, "aodret-field v1");
    Field field;
    field.rows = static_cast<int>(parse_int(expect_keyline(in, "rows", 2)[1]));
    field.cols = static_cast<int>(parse_int(expect_keyline(in, "cols", 2)[1]));
    field.values.assign(static_cast<std::size_t>(field.rows) * field.cols,
                        std::numeric_limits<double>::quiet_NaN());
    field.valid.assign(field.values.size(), 0);
    for (int r = 0; r < field.rows; ++r) {
        const std::string line = expect_line(in, "field row");
        auto toks = split_ws(line);
        if (static_cast<int>(toks.size()) != field.cols)
            throw std::runtime_error("field row " + std::to_string(r) +
                                     ": wrong column count");
        for (int c = 0; c < field.cols; ++c) {
            if (toks[c] == "nan") continue;
            field.at(r, c) = parse_double(toks[c]);
            field.valid[static_cast<std::size_t>(r) * field.cols + c] = 1;
        }
    }
    expect_magic(in, "end");
    return field;
}

namespace {

void write_scalar_summary(std::ostream& out, const ScalarSummary& s) {
    out << format_double(s.mean) << ' ' << format_double(s.sd) << ' '
        << format_double(s.p5) << ' ' << format_double(s.p25) << ' '
        << format_double(s.p50) << ' ' << format_double(s.p75) << ' '
        << format_double(s.p95);
}

ScalarSummary parse_scalar_summary(const std::vector<std::string>& toks,
                                   std::size_t offset) {
    ScalarSummary s;
    s.mean = parse_double(toks.at(offset + 0));
    s.sd = parse_double(toks.at(offset + 1));
    s.p5 = parse_double(toks.at(offset + 2));
    s.p25 = parse_double(toks.at(offset + 3));
    s.p50 = parse_double(toks.at(offset + 4));
    s.p75 = parse_double(toks.at(offset + 5));
    s.p95 = parse_double(toks.at(offset + 6));
    return s;
}

const char* status_name(PixelStatus s) {
    switch (s) {
    case PixelStatus::Ok: return "ok";
    case PixelStatus::Masked: return "masked";
    case PixelStatus::Failed: return "failed";
    }
    return "ok";
}

PixelStatus status_from(const std::string& s) {
    if (s == "ok") return PixelStatus::Ok;
    if (s == "masked") return PixelStatus::Masked;
    if (s == "failed") return PixelStatus::Failed;
    throw std::runtime_error("unknown pixel status '" + s + "'");
}

} // namespace

void write_summary(const SummaryFile& file, const std::string& path) {
    auto out = open_out(path);
    const PosteriorSummary& s = file.summary;
    out << "aodret-summary v1\n";
    out << "rows " << file.rows << "\n";
    out << "cols " << file.cols << "\n";
    out << "components " << s.components << "\n";
    out << "channels " << s.channels << "\n";
    out << "samples " << s.sample_count << "\n";
    out << "convergence_warning " << (file.convergence_warning ? 1 : 0) << "\n";
    out << "rhat " << format_double(file.rhat) << "\n";
    out << "mask " << encode_mask_rle(file.clear_mask) << "\n";
    out << "kappa ";
    write_scalar_summary(out, s.kappa);
    out << "\n";
    for (int m = 0; m < s.components; ++m) {
        out << "alpha " << m << ' ';
        write_scalar_summary(out, s.alpha[m]);
        out << "\n";
    }
    for (int c = 0; c < s.channels; ++c) {
        out << "sigma2 " << c << ' ';
        write_scalar_summary(out, s.sigma2[c]);
        out << "\n";
    }
    out << "pixels " << s.pixel_count << "\n";
    for (int p = 0; p < s.pixel_count; ++p) {
        out << status_name(file.status[p]) << ' ';
        write_scalar_summary(out, s.tau[p]);
        for (int m = 0; m < s.components; ++m)
            out << ' ' << format_double(s.theta_mean[static_cast<std::size_t>(p) * s.components + m]);
        for (int m = 0; m < s.components; ++m)
            out << ' ' << format_double(s.theta_sd[static_cast<std::size_t>(p) * s.components + m]);
        out << '\n';
    }
    out << "end\n";
    if (!out) throw std::runtime_error("write failed: " + path);
}

SummaryFile read_summary(const std::string& path) {
    auto in = open_in(path);
    expect_magic(in, "aodret-summary v1");
    SummaryFile file;
    PosteriorSummary& s = file.summary;
    file.rows = static_cast<int>(parse_int(expect_keyline(in, "rows", 2)[1]));
    file.cols = static_cast<int>(parse_int(expect_keyline(in, "cols", 2)[1]));
    s.components = static_cast<int>(parse_int(expect_keyline(in, "components", 2)[1]));
    s.channels = static_cast<int>(parse_int(expect_keyline(in, "channels", 2)[1]));
    s.sample_count = static_cast<int>(parse_int(expect_keyline(in, "samples", 2)[1]));
    file.convergence_warning =
        parse_int(expect_keyline(in, "convergence_warning", 2)[1]) != 0;
    file.rhat = parse_double(expect_keyline(in, "rhat", 2)[1]);
    file.clear_mask = decode_mask_rle(expect_keyline(in, "mask", 2)[1],
                                      file.rows * file.cols);
    s.kappa = parse_scalar_summary(expect_keyline(in, "kappa", 8), 1);
    for (int m = 0; m < s.components; ++m)
        s.alpha.push_back(parse_scalar_summary(expect_keyline(in, "alpha", 9), 2));
    for (int c = 0; c < s.channels; ++c)
        s.sigma2.push_back(parse_scalar_summary(expect_keyline(in, "sigma2", 9), 2));
    s.pixel_count = static_cast<int>(parse_int(expect_keyline(in, "pixels", 2)[1]));
    s.tau.resize(s.pixel_count);
    s.theta_mean.assign(static_cast<std::size_t>(s.pixel_count) * s.components, 0.0);
    s.theta_sd.assign(s.theta_mean.size(), 0.0);
    file.status.resize(s.pixel_count);
    for (int p = 0; p < s.pixel_count; ++p) {
        const std::string line = expect_line(in, "summary pixel");
        auto toks = split_ws(line);
        if (toks.size() != 1 + 7 + 2 * static_cast<std::size_t>(s.components))
            throw std::runtime_error("summary pixel " + std::to_string(p) +
                                     ": wrong token count");
        file.status[p] = status_from(toks[0]);
        s.tau[p] = parse_scalar_summary(toks, 1);
        for (int m = 0; m < s.components; ++m)
            s.theta_mean[static_cast<std::size_t>(p) * s.components + m] =
                parse_double(toks[8 + m]);
        for (int m = 0; m < s.components; ++m)
            s.theta_sd[static_cast<std::size_t>(p) * s.components + m] =
                parse_double(toks[8 + s.components + m]);
    }
    expect_magic(in, "end");
    return file;
}

void write_record(const ChainRecord& rec, const std::string& path) {
    auto out = open_out(path);
    out << "aodret-record v1\n";
    out << "pixels " << rec.pixel_count << "\n";
    out << "components " << rec.components << "\n";
    out << "channels " << rec.channels << "\n";
    out << "iterations " << rec.iterations << "\n";
    out << "burn_in " << rec.burn_in << "\n";
    out << "thinning " << rec.thinning << "\n";
    out << "trace_stride " << rec.trace_stride << "\n";
    out << "seed " << rec.seed << "\n";
    out << "fields " << (rec.has_fields ? 1 : 0) << "\n";
    auto counters = [&](const char* name, const KernelCounters& c) {
        out << name << ' ' << c.tau_accepts << ' ' << c.tau_attempts << ' '
            << c.theta_accepts << ' ' << c.theta_attempts << ' ' << c.alpha_accepts
            << ' ' << c.alpha_attempts << ' ' << c.sigma_accepts << ' '
            << c.sigma_attempts << "\n";
    };
    counters("counters", rec.counters);
    counters("post_burn_counters", rec.post_burn_counters);
    out << "log_posterior " << rec.log_posterior.size() << "\n";
    for (double v : rec.log_posterior) out << format_double(v) << "\n";
    out << "samples " << rec.sample_count() << "\n";
    for (int i = 0; i < rec.sample_count(); ++i) {
        out << format_double(rec.kappa_samples[i]) << "\n";
        write_values_line(out, rec.alpha_samples[i]);
        write_values_line(out, rec.sigma2_samples[i]);
        if (rec.has_fields) {
            write_values_line(out, rec.tau_samples[i]);
            write_values_line(out, rec.theta_samples[i]);
        }
    }
    out << "end\n";
    if (!out) throw std::runtime_error("write failed: " + path);
}

ChainRecord read_record(const std::string& path) {
    auto in = open_in(path);
    expect_magic(in, "aodret-record v1");
    ChainRecord rec;
    rec.pixel_count = static_cast<int>(parse_int(expect_keyline(in, "pixels", 2)[1]));
    rec.components = static_cast<int>(parse_int(expect_keyline(in, "components", 2)[1]));
    rec.channels = static_cast<int>(parse_int(expect_keyline(in, "channels", 2)[1]));
    rec.iterations = static_cast<int>(parse_int(expect_keyline(in, "iterations", 2)[1]));
    rec.burn_in = static_cast<int>(parse_int(expect_keyline(in, "burn_in", 2)[1]));
    rec.thinning = static_cast<int>(parse_int(expect_keyline(in, "thinning", 2)[1]));
    rec.trace_stride =
        static_cast<int>(parse_int(expect_keyline(in, "trace_stride", 2)[1]));
    rec.seed = static_cast<std::uint64_t>(parse_int(expect_keyline(in, "seed", 2)[1]));
    rec.has_fields = parse_int(expect_keyline(in, "fields", 2)[1]) != 0;
    auto counters = [&](const char* name, KernelCounters& c) {
        auto toks = expect_keyline(in, name, 9);
        c.tau_accepts = parse_int(toks[1]);
        c.tau_attempts = parse_int(toks[2]);
        c.theta_accepts = parse_int(toks[3]);
        c.theta_attempts = parse_int(toks[4]);
        c.alpha_accepts = parse_int(toks[5]);
        c.alpha_attempts = parse_int(toks[6]);
        c.sigma_accepts = parse_int(toks[7]);
        c.sigma_attempts = parse_int(toks[8]);
    };
    counters("counters", rec.counters);
    counters("post_burn_counters", rec.post_burn_counters);
    const std::size_t n_logpost =
        static_cast<std::size_t>(parse_int(expect_keyline(in, "log_posterior", 2)[1]));
    rec.log_posterior.reserve(n_logpost);
    for (std::size_t i = 0; i < n_logpost; ++i)
        rec.log_posterior.push_back(parse_double(expect_line(in, "log posterior value")));
    const int samples = static_cast<int>(parse_int(expect_keyline(in, "samples", 2)[1]));
    for (int i = 0; i < samples; ++i) {
        rec.kappa_samples.push_back(parse_double(expect_line(in, "kappa sample")));
        rec.alpha_samples.push_back(read_values_line(in, rec.components, "alpha sample"));
        rec.sigma2_samples.push_back(read_values_line(in, rec.channels, "sigma2 sample"));
        if (rec.has_fields) {
            rec.tau_samples.push_back(
                read_values_line(in, rec.pixel_count, "tau sample"));
            rec.theta_samples.push_back(read_values_line(
                in, static_cast<std::size_t>(rec.pixel_count) * rec.components,
                "theta sample"));
        }
    }
    expect_magic(in, "end");
    return rec;
}

Field tau_mean_field(const SummaryFile& file) {
    Field f;
    f.rows = file.rows;
    f.cols = file.cols;
    f.values.assign(static_cast<std::size_t>(f.rows) * f.cols,
                    std::numeric_limits<double>::quiet_NaN());
    f.valid.assign(f.values.size(), 0);
    if (file.summary.pixel_count == 0) return f; // no per-pixel statistics
    int p = 0;
    for (int cell = 0; cell < f.rows * f.cols; ++cell) {
        if (!file.clear_mask[cell]) continue;
        if (file.status[p] == PixelStatus::Ok) {
            f.values[cell] = file.summary.tau[p].mean;
            f.valid[cell] = 1;
        }
        ++p;
    }
    return f;
}

} // namespace aodret
