#include "aiv/assignment.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace aiv {

AssignmentResult solve_assignment(const Matrix& cost, std::span<const std::uint8_t> feasible) {
    if (!feasible.empty() && feasible.size() != cost.rows * cost.cols) {
        throw std::invalid_argument("feasibility mask does not match cost matrix");
    }
    AssignmentResult result;
    const std::size_t rows = cost.rows;
    const std::size_t cols = cost.cols;
    auto allowed = [&](std::size_t r, std::size_t c) {
        return std::isfinite(cost(r, c)) && (feasible.empty() || feasible[r * cols + c] != 0);
    };

    double max_abs = 0.0;
    bool any = false;
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            if (allowed(r, c)) {
                max_abs = std::max(max_abs, std::abs(cost(r, c)));
                any = true;
            }
        }
    }
    if (!any) {
        for (std::size_t r = 0; r < rows; ++r) result.unmatched_rows.push_back(r);
        for (std::size_t c = 0; c < cols; ++c) result.unmatched_cols.push_back(c);
        return result;
    }

    // Square problem padded with a uniform penalty larger than any spread of
    // feasible costs, so minimizing the total first maximizes the number of
    // feasible pairs.
    const std::size_t n = std::max(rows, cols);
    const double penalty = (2.0 * max_abs + 1.0) * static_cast<double>(n + 1);
    auto c_at = [&](std::size_t r, std::size_t c) {
        return (r < rows && c < cols && allowed(r, c)) ? cost(r, c) : penalty;
    };

    // Shortest augmenting path Hungarian method with potentials (1-based).
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> match_col(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        match_col[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = match_col[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = c_at(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match_col[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            match_col[j0] = match_col[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    std::vector<std::size_t> row_to_col(n, n);
    for (std::size_t j = 1; j <= n; ++j) {
        if (match_col[j] != 0) row_to_col[match_col[j] - 1] = j - 1;
    }
    std::vector<char> col_used(cols, 0);
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t c = row_to_col[r];
        if (c < cols && allowed(r, c)) {
            result.matches.emplace_back(r, c);
            result.total_cost += cost(r, c);
            col_used[c] = 1;
        } else {
            result.unmatched_rows.push_back(r);
        }
    }
    for (std::size_t c = 0; c < cols; ++c) {
        if (!col_used[c]) result.unmatched_cols.push_back(c);
    }
    return result;
}

}  // namespace aiv
