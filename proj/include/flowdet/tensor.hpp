#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "flowdet/errors.hpp"

namespace flowdet::ad {

using Shape = std::vector<std::size_t>;

// Dense row-major matrix of 64-bit reals. Shapes are normalized to
// {rows, cols}; a scalar is {1, 1} and a length-n vector is {n, 1}.
struct Tensor {
    Shape shape{1, 1};
    std::vector<double> values{0.0};

    Tensor() = default;

    explicit Tensor(Shape s) {
        normalize(s);
        shape = std::move(s);
        values.assign(numel(), 0.0);
    }

    Tensor(Shape s, std::vector<double> v) {
        normalize(s);
        shape = std::move(s);
        values = std::move(v);
        if (values.size() != numel())
            throw ShapeError("tensor value count does not match shape");
    }

    static Tensor zeros(std::size_t rows, std::size_t cols = 1) { return Tensor(Shape{rows, cols}); }

    static Tensor scalar(double v) { return Tensor(Shape{1, 1}, {v}); }

    static Tensor column(std::vector<double> v) {
        std::size_t n = v.size();
        return Tensor(Shape{n, 1}, std::move(v));
    }

    std::size_t rows() const { return shape[0]; }
    std::size_t cols() const { return shape[1]; }
    std::size_t numel() const { return shape[0] * shape[1]; }

    double& at(std::size_t r, std::size_t c) { return values[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (double v : values)
            if (!std::isfinite(v)) return false;
        return true;
    }

    void fill(double v) {
        for (double& x : values) x = v;
    }

  private:
    static void normalize(Shape& s) {
        if (s.empty()) s = {1, 1};
        if (s.size() == 1) s.push_back(1);
        if (s.size() != 2) throw ShapeError("only rank-2 tensors are supported");
        if (s[0] == 0 || s[1] == 0) throw ShapeError("zero-sized tensor dimension");
    }
};

}  // namespace flowdet::ad
