#pragma once

#include <cstdint>
#include <vector>

namespace rerank {

// CSR weighted adjacency. Canonical form: within each row, column indices
// strictly ascending; zeros are absent, not stored.
struct SparseGraph {
    std::size_t n = 0;
    std::vector<std::size_t> row_offsets; // n + 1
    std::vector<std::int32_t> col_indices;
    std::vector<double> weights;
    bool symmetric = false;

    std::size_t nnz() const { return col_indices.size(); }
    std::size_t row_begin(std::size_t i) const { return row_offsets[i]; }
    std::size_t row_end(std::size_t i) const { return row_offsets[i + 1]; }
};

} // namespace rerank
