#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "qsr/error.hpp"

namespace qsr {

// Dense row-major f64 array. Carrier of images, feature maps and parameters.
// Indexing helpers cover the ranks used in the network; hot loops index the
// flat data() directly.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> v;

    Tensor() = default;
    explicit Tensor(std::initializer_list<int> s) : shape(s) { v.assign(numel(), 0.0); }
    explicit Tensor(std::vector<int> s) : shape(std::move(s)) { v.assign(numel(), 0.0); }

    size_t numel() const {
        size_t n = 1;
        for (int d : shape) n *= size_t(d);
        return n;
    }
    int dim(int i) const { return shape[size_t(i)]; }
    int rank() const { return int(shape.size()); }

    double* data() { return v.data(); }
    const double* data() const { return v.data(); }

    double& at(int i) { return v[size_t(i)]; }
    double at(int i) const { return v[size_t(i)]; }
    double& at(int i, int j) { return v[size_t(i) * shape[1] + j]; }
    double at(int i, int j) const { return v[size_t(i) * shape[1] + j]; }
    double& at(int i, int j, int k) { return v[(size_t(i) * shape[1] + j) * shape[2] + k]; }
    double at(int i, int j, int k) const { return v[(size_t(i) * shape[1] + j) * shape[2] + k]; }
    double& at(int i, int j, int k, int l) {
        return v[((size_t(i) * shape[1] + j) * shape[2] + k) * shape[3] + l];
    }
    double at(int i, int j, int k, int l) const {
        return v[((size_t(i) * shape[1] + j) * shape[2] + k) * shape[3] + l];
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    void require_shape(const Tensor& o, const char* what) const {
        if (!same_shape(o)) throw ValidationError(std::string(what) + ": shape mismatch");
    }

    void require_shape(std::initializer_list<int> s) const {
        if (shape != std::vector<int>(s)) throw ValidationError("tensor shape mismatch");
    }
};

} // namespace qsr
