#include "qsr/eval/dependence.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "qsr/error.hpp"
#include "qsr/rng.hpp"

namespace qsr::eval {

namespace {

int rows_of(const Tensor& t, const char* what) {
    if (t.shape.size() != 2)
        throw ValidationError(std::string(what) + " expects [n,d] sample matrices");
    return t.shape[0];
}

// pairwise Euclidean distances between rows, as a dense n x n matrix
std::vector<double> pairwise(const Tensor& t) {
    const int n = t.shape[0], d = t.shape[1];
    std::vector<double> m(std::size_t(n) * n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            double sq = 0;
            for (int k = 0; k < d; ++k) {
                const double diff = t.at(i, k) - t.at(j, k);
                sq += diff * diff;
            }
            m[std::size_t(i) * n + j] = m[std::size_t(j) * n + i] = std::sqrt(sq);
        }
    return m;
}

// in-place double centering: a_ij - row_i - col_j + grand
void double_center(std::vector<double>& m, int n) {
    std::vector<double> row(std::size_t(n), 0.0), col(std::size_t(n), 0.0);
    double grand = 0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double v = m[std::size_t(i) * n + j];
            row[std::size_t(i)] += v;
            col[std::size_t(j)] += v;
            grand += v;
        }
    for (double& v : row) v /= n;
    for (double& v : col) v /= n;
    grand /= double(n) * n;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            m[std::size_t(i) * n + j] += grand - row[std::size_t(i)] - col[std::size_t(j)];
}

double mean_product(const std::vector<double>& a, const std::vector<double>& b) {
    double sum = 0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
    return sum / double(a.size());
}

// RBF kernel matrix with the median pairwise distance as bandwidth
std::vector<double> rbf_kernel(const Tensor& t, const char* what) {
    const int n = t.shape[0];
    std::vector<double> dist = pairwise(t);
    std::vector<double> off;
    off.reserve(std::size_t(n) * (n - 1) / 2);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) off.push_back(dist[std::size_t(i) * n + j]);
    std::nth_element(off.begin(), off.begin() + std::ptrdiff_t(off.size() / 2), off.end());
    const double sigma = off[off.size() / 2];
    if (sigma == 0.0)
        throw ValidationError(std::string(what) +
                              ": median pairwise distance is zero (degenerate sample)");
    std::vector<double> k(dist.size());
    for (std::size_t i = 0; i < dist.size(); ++i)
        k[i] = std::exp(-dist[i] * dist[i] / (2 * sigma * sigma));
    return k;
}

} // namespace

double distance_correlation(const Tensor& x, const Tensor& y) {
    const int n = rows_of(x, "distance_correlation");
    if (rows_of(y, "distance_correlation") != n)
        throw ValidationError("distance_correlation needs matching row counts");
    if (n < 4) throw ValidationError("distance_correlation needs n >= 4");

    std::vector<double> a = pairwise(x), b = pairwise(y);
    double_center(a, n);
    double_center(b, n);
    const double dcov2 = mean_product(a, b);
    const double dvarx = mean_product(a, a);
    const double dvary = mean_product(b, b);
    if (dvarx <= 0.0 || dvary <= 0.0) return 0.0;
    const double r2 = dcov2 / std::sqrt(dvarx * dvary);
    return r2 <= 0.0 ? 0.0 : std::sqrt(r2);
}

HsicResult hsic_test(const Tensor& x, const Tensor& y, int permutations, std::uint64_t seed) {
    const int n = rows_of(x, "hsic_test");
    if (rows_of(y, "hsic_test") != n) throw ValidationError("hsic_test needs matching row counts");
    if (n < 10) throw ValidationError("hsic_test needs n >= 10");
    if (permutations < 1) throw ValidationError("hsic_test needs at least one permutation");

    // biased estimator tr(KHLH)/n^2 written as the mean product of the
    // centered kernel matrices; row permutations of y act by index on the
    // centered matrix, so both centerings happen once
    std::vector<double> k = rbf_kernel(x, "hsic_test x");
    std::vector<double> l = rbf_kernel(y, "hsic_test y");
    double_center(k, n);
    double_center(l, n);

    auto stat_for = [&](const std::vector<int>& pi) {
        double sum = 0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                sum += k[std::size_t(i) * n + j] *
                       l[std::size_t(pi[std::size_t(i)]) * n + pi[std::size_t(j)]];
        return sum / (double(n) * n);
    };

    std::vector<int> identity(size_t(n), 0);
    std::iota(identity.begin(), identity.end(), 0);
    HsicResult res;
    res.stat = stat_for(identity);
    res.permutations = permutations;

    SplitMix64 gen(seed);
    int exceed = 0;
    for (int p = 0; p < permutations; ++p) {
        const std::vector<std::size_t> pu = permutation(std::size_t(n), gen);
        std::vector<int> pi(pu.begin(), pu.end());
        if (stat_for(pi) >= res.stat) ++exceed;
    }
    res.p_value = double(exceed) / permutations;
    return res;
}

std::vector<std::pair<int, double>> dcor_by_neighborhood(const Tensor& x, const Tensor& y,
                                                         const std::vector<int>& ks) {
    const int n = rows_of(x, "dcor_by_neighborhood");
    if (rows_of(y, "dcor_by_neighborhood") != n)
        throw ValidationError("dcor_by_neighborhood needs matching row counts");
    const std::vector<double> dist = pairwise(x);

    std::vector<std::pair<int, double>> out;
    out.reserve(ks.size());
    for (int k : ks) {
        if (k < 1 || k >= n)
            throw ValidationError("neighborhood size " + std::to_string(k) +
                                  " must lie in [1, n)");
        Tensor xs({n, x.shape[1]}), ys({n, y.shape[1]});
        std::vector<int> order(size_t(n), 0);
        for (int i = 0; i < n; ++i) {
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
                return dist[std::size_t(i) * n + a] < dist[std::size_t(i) * n + b];
            });
            // self sits first (distance 0, lowest index among ties)
            for (int m = 0; m < k; ++m) {
                const int j = order[std::size_t(m)];
                for (int c = 0; c < x.shape[1]; ++c) xs.at(i, c) += x.at(j, c) / k;
                for (int c = 0; c < y.shape[1]; ++c) ys.at(i, c) += y.at(j, c) / k;
            }
        }
        out.emplace_back(k, distance_correlation(xs, ys));
    }
    return out;
}

} // namespace qsr::eval
