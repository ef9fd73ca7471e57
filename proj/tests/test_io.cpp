#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "aodret/block_io.hpp"
#include "aodret/simgen.hpp"

#include <filesystem>
#include <fstream>

using namespace aodret;

namespace {

namespace fs = std::filesystem;

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("aodret_io_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const char* name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    return std::string((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
}

} // namespace

TEST_CASE("mask RLE round trip") {
    std::vector<std::uint8_t> mask{1, 1, 1, 0, 0, 1, 0, 1, 1, 1};
    const std::string rle = encode_mask_rle(mask);
    CHECK(rle == "3c2x1c1x3c");
    CHECK(decode_mask_rle(rle, 10) == mask);
    CHECK_THROWS(decode_mask_rle(rle, 11));
    CHECK_THROWS(decode_mask_rle("3q", 3));
    CHECK_THROWS(decode_mask_rle("99999999999c", 4)); // overrun guard
    CHECK_THROWS(decode_mask_rle("2c9x", 4));
    CHECK(encode_mask_rle(std::vector<std::uint8_t>(4096, 1)) == "4096c");
}

TEST_CASE("block file round trip is byte identical") {
    TempDir dir;
    SurrogateModel fm(SurrogateParams::defaults(9, 4));
    SimConfig config;
    config.rows = 8;
    config.cols = 12;
    config.seed = 33;
    config.clear_mask.assign(96, 1);
    config.clear_mask[17] = 0;
    config.clear_mask[18] = 0;
    Rng rng(config.seed);
    SimulatedBlock sim = simulate_block(config, fm, rng);

    const std::string a = dir.file("block_a.txt");
    const std::string b = dir.file("block_b.txt");
    write_block(sim.block, a);
    RadianceBlock reread = read_block_file(a);
    write_block(reread, b);
    CHECK(slurp(a) == slurp(b));

    CHECK(reread.grid().rows() == 8);
    CHECK(reread.grid().cols() == 12);
    CHECK(reread.pixel_count() == 94);
    for (int p = 0; p < reread.pixel_count(); ++p) {
        auto x = sim.block.pixel(p);
        auto y = reread.pixel(p);
        for (int c = 0; c < 9; ++c) CHECK(x[c] == y[c]); // bitwise
    }
}

TEST_CASE("truth file round trip") {
    TempDir dir;
    SurrogateModel fm(SurrogateParams::defaults(4, 3));
    SimConfig config;
    config.rows = 4;
    config.cols = 5;
    config.alpha_true = {0.8, 0.4, 0.3};
    config.seed = 71;
    Rng rng(config.seed);
    SimulatedBlock sim = simulate_block(config, fm, rng);

    SimTruth truth{4,
                   5,
                   {sim.block.grid().clear_mask().begin(),
                    sim.block.grid().clear_mask().end()},
                   sim.truth,
                   sim.kappa_true,
                   sim.alpha_true,
                   sim.noise_sd};
    const std::string a = dir.file("truth_a.txt");
    const std::string b = dir.file("truth_b.txt");
    write_truth(truth, a);
    SimTruth reread = read_truth(a);
    write_truth(reread, b);
    CHECK(slurp(a) == slurp(b));
    CHECK(reread.kappa == truth.kappa);
    CHECK(reread.state.tau == truth.state.tau);
    CHECK(reread.state.theta == truth.state.theta);
    CHECK(reread.alpha == truth.alpha);
}

TEST_CASE("field file round trip with missing cells") {
    TempDir dir;
    Field f = Field::full(3, 4, 0.0);
    Rng rng(5);
    for (int i = 0; i < 12; ++i) f.values[i] = rng.uniform(0.0, 2.0);
    f.valid[5] = 0;
    f.valid[11] = 0;

    const std::string a = dir.file("field_a.txt");
    const std::string b = dir.file("field_b.txt");
    write_field(f, a);
    Field reread = read_field(a);
    write_field(reread, b);
    CHECK(slurp(a) == slurp(b));
    CHECK(reread.valid == f.valid);
    for (int i = 0; i < 12; ++i)
        if (f.valid[i]) CHECK(reread.values[i] == f.values[i]);
}

TEST_CASE("record and summary files round trip through a real chain") {
    TempDir dir;
    SurrogateModel fm(SurrogateParams::defaults(5, 3));
    SimConfig config;
    config.rows = 4;
    config.cols = 4;
    config.alpha_true = {0.8, 0.5, 0.3};
    config.seed = 13;
    Rng rng(config.seed);
    SimulatedBlock sim = simulate_block(config, fm, rng);
    Adjacency adj = build_adjacency(sim.block.grid());

    ChainConfig cfg;
    cfg.iterations = 40;
    cfg.burn_in = 10;
    cfg.thinning = 3;
    cfg.seed = 1001;
    ChainRecord rec = run_chain(sim.block, fm, adj, cfg);

    const std::string ra = dir.file("rec_a.txt");
    const std::string rb = dir.file("rec_b.txt");
    write_record(rec, ra);
    ChainRecord reread = read_record(ra);
    write_record(reread, rb);
    CHECK(slurp(ra) == slurp(rb));
    CHECK(reread.log_posterior == rec.log_posterior);
    CHECK(reread.tau_samples == rec.tau_samples);
    CHECK(reread.counters.tau_accepts == rec.counters.tau_accepts);
    CHECK(reread.post_burn_counters.theta_attempts ==
          rec.post_burn_counters.theta_attempts);

    SummaryFile sfile;
    sfile.rows = 4;
    sfile.cols = 4;
    sfile.clear_mask.assign(sim.block.grid().clear_mask().begin(),
                            sim.block.grid().clear_mask().end());
    sfile.summary = summarize(rec);
    sfile.status.assign(sfile.summary.pixel_count, PixelStatus::Ok);
    sfile.status[3] = PixelStatus::Failed;
    sfile.rhat = 1.05;

    const std::string sa = dir.file("sum_a.txt");
    const std::string sb = dir.file("sum_b.txt");
    write_summary(sfile, sa);
    SummaryFile sum_reread = read_summary(sa);
    write_summary(sum_reread, sb);
    CHECK(slurp(sa) == slurp(sb));
    CHECK(sum_reread.summary.kappa.mean == sfile.summary.kappa.mean);
    CHECK(sum_reread.status[3] == PixelStatus::Failed);
    CHECK(sum_reread.summary.tau[2].p95 == sfile.summary.tau[2].p95);

    // The tau mean field skips failed and masked pixels.
    Field mean_field = tau_mean_field(sum_reread);
    CHECK(mean_field.rows == 4);
    int valid = 0;
    for (auto v : mean_field.valid) valid += v;
    CHECK(valid == 15); // 16 clear minus the failed one
}

TEST_CASE("parse errors carry context") {
    TempDir dir;
    const std::string path = dir.file("bad.txt");
    {
        std::ofstream out(path);
        out << "aodret-block v1\nrows 2\ncols nonsense\n";
    }
    CHECK_THROWS_WITH_AS(read_block_file(path),
                         doctest::Contains("malformed integer"),
                         std::runtime_error);
    {
        std::ofstream out(path);
        out << "not a block\n";
    }
    CHECK_THROWS_WITH_AS(read_block_file(path), doctest::Contains("aodret-block"),
                         std::runtime_error);
    CHECK_THROWS(read_block_file(dir.file("missing.txt")));
}
