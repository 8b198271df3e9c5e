#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "qsr/tensor.hpp"

namespace qsr::eval {

// Distance correlation (double-centered V-statistic) between row samples
// of x [n,d] and y [n,d']. Degenerate inputs (zero distance variance on
// either side) give 0. Requires n >= 4.
double distance_correlation(const Tensor& x, const Tensor& y);

struct HsicResult {
    double stat = 0.0;    // biased HSIC with RBF kernels, median bandwidth
    double p_value = 1.0; // fraction of permuted statistics >= observed
    int permutations = 0;
};

// Kernel independence permutation test between row samples. Requires
// n >= 10; an all-equal sample (median pairwise distance 0) is rejected.
HsicResult hsic_test(const Tensor& x, const Tensor& y, int permutations = 1000,
                     std::uint64_t seed = 0);

// Neighborhood-smoothed dependence sweep: for each k, every row of x and y
// is replaced by the mean over the k nearest neighbors in x-space (self
// included, ties broken by row index), and the distance correlation of the
// smoothed samples is reported as (k, dcor). Each k must satisfy k < n.
std::vector<std::pair<int, double>> dcor_by_neighborhood(const Tensor& x, const Tensor& y,
                                                         const std::vector<int>& ks);

} // namespace qsr::eval
