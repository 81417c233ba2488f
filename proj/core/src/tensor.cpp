#include "narsal/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace narsal {

std::size_t shape_numel(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d <= 0) {
            throw std::invalid_argument("Tensor: non-positive dimension in shape " +
                                        shape_str(shape));
        }
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) os << "x";
        os << shape[i];
    }
    os << ")";
    return os.str();
}

Tensor::Tensor(std::vector<int> shape_in, double fill)
    : shape(std::move(shape_in)), data(shape_numel(shape), fill) {}

Tensor::Tensor(std::vector<int> shape_in, std::vector<double> data_in)
    : shape(std::move(shape_in)), data(std::move(data_in)) {
    if (data.size() != shape_numel(shape)) {
        throw std::invalid_argument("Tensor: data length " + std::to_string(data.size()) +
                                    " does not match shape " + shape_str(shape));
    }
}

Tensor Tensor::scalar(double v) { return Tensor({1}, std::vector<double>{v}); }

Tensor Tensor::row_vector(std::vector<double> v) {
    const int n = static_cast<int>(v.size());
    return Tensor({n}, std::move(v));
}

Tensor Tensor::matrix(int rows, int cols, double fill) { return Tensor({rows, cols}, fill); }

int Tensor::rows() const {
    if (rank() != 2) {
        throw std::invalid_argument("Tensor::rows: rank-2 required, shape is " + shape_str(shape));
    }
    return shape[0];
}

int Tensor::cols() const {
    if (rank() != 2) {
        throw std::invalid_argument("Tensor::cols: rank-2 required, shape is " + shape_str(shape));
    }
    return shape[1];
}

double& Tensor::at(int i, int j) {
    return data[static_cast<std::size_t>(i) * static_cast<std::size_t>(cols()) +
                static_cast<std::size_t>(j)];
}

double Tensor::at(int i, int j) const {
    return data[static_cast<std::size_t>(i) * static_cast<std::size_t>(cols()) +
                static_cast<std::size_t>(j)];
}

double Tensor::item() const {
    if (data.size() != 1) {
        throw std::invalid_argument("Tensor::item: tensor has shape " + shape_str(shape));
    }
    return data[0];
}

bool Tensor::all_finite() const {
    for (double v : data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape) +
                                    " vs " + shape_str(b.shape));
    }
}

} // namespace narsal
