#include "aodret/lattice.hpp"

#include <stdexcept>
#include <string>

namespace aodret {

BlockGrid::BlockGrid(int rows, int cols, double resolution_km)
    : BlockGrid(rows, cols,
                std::vector<std::uint8_t>(static_cast<std::size_t>(rows) * cols, 1),
                resolution_km) {}

BlockGrid::BlockGrid(int rows, int cols, std::vector<std::uint8_t> clear_mask,
                     double resolution_km)
    : rows_(rows), cols_(cols), resolution_km_(resolution_km),
      clear_mask_(std::move(clear_mask)) {
    if (rows_ < 1 || cols_ < 1)
        throw std::invalid_argument("BlockGrid: dimensions must be positive");
    if (resolution_km_ <= 0.0)
        throw std::invalid_argument("BlockGrid: resolution must be positive");
    if (clear_mask_.size() != static_cast<std::size_t>(rows_) * cols_)
        throw std::invalid_argument("BlockGrid: mask length != rows*cols");

    clear_of_cell_.assign(clear_mask_.size(), -1);
    for (int cell = 0; cell < cell_count(); ++cell) {
        if (clear_mask_[cell]) {
            clear_of_cell_[cell] = static_cast<int>(clear_cells_.size());
            clear_cells_.push_back(cell);
        }
    }
}

std::vector<int> BlockGrid::column_major_clear_order() const {
    std::vector<int> order;
    order.reserve(clear_cells_.size());
    for (int c = 0; c < cols_; ++c)
        for (int r = 0; r < rows_; ++r)
            if (is_clear(r, c)) order.push_back(clear_index(cell_index(r, c)));
    return order;
}

Adjacency build_adjacency(const BlockGrid& grid) {
    const int P = grid.clear_count();
    Adjacency adj;
    adj.offsets.assign(P + 1, 0);

    auto clear_at = [&](int r, int c) -> int {
        if (r < 0 || r >= grid.rows() || c < 0 || c >= grid.cols()) return -1;
        return grid.clear_index(grid.cell_index(r, c));
    };

    for (int p = 0; p < P; ++p) {
        const int cell = grid.cell_of_clear(p);
        const int r = cell / grid.cols();
        const int c = cell % grid.cols();
        const int cand[4] = {clear_at(r - 1, c), clear_at(r + 1, c),
                             clear_at(r, c - 1), clear_at(r, c + 1)};
        for (int q : cand) {
            if (q < 0) continue;
            adj.neighbors.push_back(q);
            ++adj.offsets[p + 1];
            if (p < q) adj.edges.emplace_back(p, q);
        }
    }
    for (int p = 0; p < P; ++p) adj.offsets[p + 1] += adj.offsets[p];
    return adj;
}

namespace {

// Patch start offsets along one axis: k patches of size `size` over `extent`
// cells, first at 0, last at extent-size, interior starts on the floor of the
// even spacing (which biases the extra overlap toward the low end).
std::vector<int> axis_offsets(int extent, int size, int min_overlap,
                              const char* axis) {
    if (size > extent) size = extent;
    if (size < 1)
        throw std::invalid_argument(std::string("patch layout: patch ") + axis +
                                    " size must be positive");
    if (size >= extent)
        return {0};
    if (size <= min_overlap)
        throw std::invalid_argument(
            std::string("patch layout: infeasible geometry along ") + axis +
            " (patch size " + std::to_string(size) +
            " cannot exceed overlap " + std::to_string(min_overlap) + ")");

    const int span = extent - size;
    const int step = size - min_overlap;
    const int k = 1 + (span + step - 1) / step; // smallest count that covers
    std::vector<int> offsets(k);
    for (int i = 0; i < k; ++i)
        offsets[i] = static_cast<int>(
            (static_cast<long long>(i) * span) / (k - 1));
    return offsets;
}

} // namespace

PatchLayout build_patch_layout(const BlockGrid& grid, int patch_height,
                               int patch_width, int min_overlap) {
    if (min_overlap < 0)
        throw std::invalid_argument("patch layout: negative overlap");

    const std::vector<int> row_off =
        axis_offsets(grid.rows(), patch_height, min_overlap, "rows");
    const std::vector<int> col_off =
        axis_offsets(grid.cols(), patch_width, min_overlap, "cols");
    const int ph = std::min(patch_height, grid.rows());
    const int pw = std::min(patch_width, grid.cols());

    PatchLayout layout;
    layout.grid_rows = static_cast<int>(row_off.size());
    layout.grid_cols = static_cast<int>(col_off.size());
    for (int i : row_off)
        for (int j : col_off)
            layout.patches.push_back({i, i + ph, j, j + pw});

    layout.owner_count.assign(grid.cell_count(), 0);
    for (const Patch& pt : layout.patches)
        for (int r = pt.row0; r < pt.row1; ++r)
            for (int c = pt.col0; c < pt.col1; ++c)
                ++layout.owner_count[grid.cell_index(r, c)];
    return layout;
}

} // namespace aodret
