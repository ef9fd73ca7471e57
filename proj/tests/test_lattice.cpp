#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "aodret/lattice.hpp"
#include "aodret/rng.hpp"

#include <numeric>
#include <set>

using namespace aodret;

TEST_CASE("grid invariants") {
    CHECK_THROWS_AS(BlockGrid(0, 4), std::invalid_argument);
    CHECK_THROWS_AS(BlockGrid(4, 0), std::invalid_argument);
    CHECK_THROWS_AS(BlockGrid(2, 2, std::vector<std::uint8_t>{1, 1, 1}),
                    std::invalid_argument);

    BlockGrid grid(32, 128);
    CHECK(grid.cell_count() == 4096);
    CHECK(grid.clear_count() == 4096);
    CHECK(grid.resolution_km() == doctest::Approx(4.4));
}

TEST_CASE("column-major sweep order") {
    // 2x3, cell (1,1) cloudy: clear cells columnwise are
    // (0,0),(1,0),(0,1),(0,2),(1,2).
    BlockGrid grid(2, 3, {1, 1, 1, 1, 0, 1});
    auto order = grid.column_major_clear_order();
    REQUIRE(order.size() == 5);
    std::vector<int> cells;
    for (int p : order) cells.push_back(grid.cell_of_clear(p));
    CHECK(cells == std::vector<int>{0, 3, 1, 2, 5});
}

TEST_CASE("adjacency of trivial grids") {
    // 1x1: single pixel, no neighbors.
    Adjacency a1 = build_adjacency(BlockGrid(1, 1));
    CHECK(a1.degree(0) == 0);
    CHECK(a1.edges.empty());

    // 2x2 all clear: every pixel has exactly 2 neighbors.
    Adjacency a2 = build_adjacency(BlockGrid(2, 2));
    for (int p = 0; p < 4; ++p) CHECK(a2.degree(p) == 2);
    CHECK(a2.edges.size() == 4);
}

TEST_CASE("3x3 with cloudy center") {
    std::vector<std::uint8_t> mask(9, 1);
    mask[4] = 0;
    BlockGrid grid(3, 3, mask);
    Adjacency adj = build_adjacency(grid);
    // Edge midpoints keep only their two corner neighbors.
    for (int cell : {1, 3, 5, 7}) {
        const int p = grid.clear_index(cell);
        CHECK(adj.degree(p) == 2);
    }
    for (int cell : {0, 2, 6, 8}) {
        const int p = grid.clear_index(cell);
        CHECK(adj.degree(p) == 2);
    }
}

TEST_CASE("adjacency symmetry and handshake on random masks") {
    Rng rng(99);
    for (int trial = 0; trial < 25; ++trial) {
        const int rows = 1 + static_cast<int>(rng.uniform(0, 7));
        const int cols = 1 + static_cast<int>(rng.uniform(0, 9));
        std::vector<std::uint8_t> mask(static_cast<std::size_t>(rows) * cols);
        for (auto& m : mask) m = rng.uniform() < 0.7 ? 1 : 0;
        BlockGrid grid(rows, cols, mask);
        Adjacency adj = build_adjacency(grid);

        long degree_sum = 0;
        for (int p = 0; p < grid.clear_count(); ++p) {
            degree_sum += adj.degree(p);
            for (int q : adj.neighbors_of(p)) {
                CHECK(q != p);
                auto back = adj.neighbors_of(q);
                CHECK(std::find(back.begin(), back.end(), p) != back.end());
                // Lattice adjacency: Manhattan distance 1.
                const int cp = grid.cell_of_clear(p);
                const int cq = grid.cell_of_clear(q);
                const int dr = std::abs(cp / cols - cq / cols);
                const int dc = std::abs(cp % cols - cq % cols);
                CHECK(dr + dc == 1);
            }
        }
        CHECK(degree_sum % 2 == 0);
        CHECK(degree_sum == 2 * static_cast<long>(adj.edges.size()));
    }
}

TEST_CASE("patch layout of the default block") {
    BlockGrid grid(32, 128);
    PatchLayout layout = build_patch_layout(grid, 20, 20, 4);
    CHECK(layout.grid_rows == 2);
    CHECK(layout.grid_cols == 8);
    CHECK(layout.patch_count() == 16);

    // Row offsets {0, 12}: overlap 8 rows.
    CHECK(layout.patches[0].row0 == 0);
    CHECK(layout.patches[8].row0 == 12);

    std::set<int> col_offsets;
    for (const auto& p : layout.patches) col_offsets.insert(p.col0);
    REQUIRE(col_offsets.size() == 8);
    // Coverage reaches the last column.
    CHECK(*col_offsets.rbegin() == 108);
    // Adjacent column offsets overlap by at least 4.
    int prev = -1;
    for (int off : col_offsets) {
        if (prev >= 0) CHECK(prev + 20 - off >= 4);
        prev = off;
    }

    // Every cell covered; overlap cells covered at least twice.
    for (int count : layout.owner_count) CHECK(count >= 1);
    CHECK(layout.owner_count[grid.cell_index(13, 0)] >= 2);
}

TEST_CASE("degenerate and derived layouts") {
    // Single patch equals the block.
    PatchLayout single = build_patch_layout(BlockGrid(20, 20), 20, 20, 4);
    REQUIRE(single.patch_count() == 1);
    CHECK(single.patches[0].rows() == 20);
    CHECK(single.patches[0].cols() == 20);

    // 32x36 with 32x20 patches: column offsets {0, 16}, overlap exactly 4.
    PatchLayout two = build_patch_layout(BlockGrid(32, 36), 32, 20, 4);
    REQUIRE(two.patch_count() == 2);
    CHECK(two.patches[0].col0 == 0);
    CHECK(two.patches[1].col0 == 16);
    CHECK(two.patches[0].col1 - two.patches[1].col0 == 4);
}

TEST_CASE("infeasible layout geometry") {
    // Patch no wider than the overlap cannot make progress.
    CHECK_THROWS_AS(build_patch_layout(BlockGrid(8, 64), 8, 4, 4),
                    std::invalid_argument);
}
