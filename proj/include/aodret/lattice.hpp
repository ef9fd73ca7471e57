#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace aodret {

// Pixel grid of a retrieval block. Cells are row-major; only cells with
// clear_mask set take part in the retrieval.
class BlockGrid {
public:
    BlockGrid(int rows, int cols, double resolution_km = 4.4);
    BlockGrid(int rows, int cols, std::vector<std::uint8_t> clear_mask,
              double resolution_km = 4.4);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    double resolution_km() const { return resolution_km_; }
    int cell_count() const { return rows_ * cols_; }
    int clear_count() const { return static_cast<int>(clear_cells_.size()); }

    int cell_index(int r, int c) const { return r * cols_ + c; }
    bool is_clear(int cell) const { return clear_mask_[cell] != 0; }
    bool is_clear(int r, int c) const { return is_clear(cell_index(r, c)); }

    // Clear-pixel index (dense, row-major over cells); -1 for cloudy cells.
    int clear_index(int cell) const { return clear_of_cell_[cell]; }
    int cell_of_clear(int p) const { return clear_cells_[p]; }

    std::span<const std::uint8_t> clear_mask() const { return clear_mask_; }

    // Clear-pixel indices enumerated column by column, top to bottom within a
    // column, left to right across columns (the sampler's sweep order).
    std::vector<int> column_major_clear_order() const;

private:
    int rows_;
    int cols_;
    double resolution_km_;
    std::vector<std::uint8_t> clear_mask_;
    std::vector<int> clear_of_cell_;
    std::vector<int> clear_cells_;
};

// First-order (4-neighborhood) adjacency restricted to clear pixels, stored
// CSR-style over clear-pixel indices plus the unordered edge list.
struct Adjacency {
    std::vector<int> offsets;               // clear_count + 1
    std::vector<int> neighbors;             // concatenated neighbor lists
    std::vector<std::pair<int, int>> edges; // each unordered pair once, p < q

    int degree(int p) const { return offsets[p + 1] - offsets[p]; }
    std::span<const int> neighbors_of(int p) const {
        return {neighbors.data() + offsets[p],
                static_cast<std::size_t>(degree(p))};
    }
    int pixel_count() const { return static_cast<int>(offsets.size()) - 1; }
};

Adjacency build_adjacency(const BlockGrid& grid);

// Half-open pixel ranges of one patch.
struct Patch {
    int row0, row1;
    int col0, col1;
    int rows() const { return row1 - row0; }
    int cols() const { return col1 - col0; }
    bool contains(int r, int c) const {
        return r >= row0 && r < row1 && c >= col0 && c < col1;
    }
};

struct PatchLayout {
    int grid_rows = 0;                 // patch counts along each axis
    int grid_cols = 0;
    std::vector<Patch> patches;        // row-major over the patch grid
    std::vector<int> owner_count;      // per cell, number of covering patches

    int patch_count() const { return static_cast<int>(patches.size()); }
};

// Covers the block with patches of at most patch_height x patch_width pixels
// so that adjacent patches overlap by at least min_overlap rows/columns.
// Patch counts are the smallest feasible; residual overlap is spread as
// evenly as possible with the larger overlaps placed first (left/top).
PatchLayout build_patch_layout(const BlockGrid& grid, int patch_height,
                               int patch_width, int min_overlap);

} // namespace aodret
