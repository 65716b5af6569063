#pragma once

#include <vector>

namespace uncseg {

/// Maximum-weight one-to-one assignment on a rows x cols weight matrix
/// (row-major, non-negative weights). Returns, for every row, the assigned
/// column or -1. Rectangular inputs are padded with zero-weight dummies;
/// rows left on a dummy column are reported unassigned. O(n^3).
std::vector<int> max_weight_assignment(const std::vector<double>& weights, int rows, int cols);

}  // namespace uncseg
