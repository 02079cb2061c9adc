#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "aiv/kernels.hpp"

namespace aiv {

struct AssignmentResult {
    std::vector<std::pair<std::size_t, std::size_t>> matches;  // (row, col), ascending by row
    std::vector<std::size_t> unmatched_rows;
    std::vector<std::size_t> unmatched_cols;
    double total_cost = 0.0;
};

/// Optimal bipartite matching restricted to feasible cells: the largest
/// possible number of matches, and among those the minimum total cost.
/// `feasible` is row-major rows*cols (non-zero = allowed); empty means every
/// finite cell is allowed. Ties resolve toward the lowest row, then column.
AssignmentResult solve_assignment(const Matrix& cost, std::span<const std::uint8_t> feasible = {});

}  // namespace aiv
