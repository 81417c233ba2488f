#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace narsal {

/// Dense row-major tensor of 64-bit reals. Plain value type: copy/move behave
/// like std::vector. Rank 1 and 2 are the only shapes the library creates, but
/// the type itself is rank-agnostic.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;
    bool requires_grad = false;

    Tensor() = default;
    Tensor(std::vector<int> shape_in, double fill = 0.0);
    Tensor(std::vector<int> shape_in, std::vector<double> data_in);

    static Tensor scalar(double v);
    static Tensor row_vector(std::vector<double> v);
    static Tensor matrix(int rows, int cols, double fill = 0.0);

    std::size_t size() const { return data.size(); }
    int rank() const { return static_cast<int>(shape.size()); }

    int rows() const;
    int cols() const;

    double& at(int i, int j);
    double at(int i, int j) const;

    double item() const; // single-element tensors only

    bool same_shape(const Tensor& other) const { return shape == other.shape; }
    bool all_finite() const;
};

std::size_t shape_numel(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

/// Throws std::invalid_argument naming both shapes when they differ.
void require_same_shape(const Tensor& a, const Tensor& b, const char* op);

} // namespace narsal
