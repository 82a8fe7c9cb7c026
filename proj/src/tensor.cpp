#include "trace/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>

#include "trace/errors.hpp"

namespace trace {

std::size_t shape_size(const Shape& shape) noexcept {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_size(shape_) != data_.size())
        throw PreconditionError("tensor: shape " + shape_string(shape_) + " does not match " +
                                std::to_string(data_.size()) + " values");
}

Tensor Tensor::vector(std::vector<double> values) {
    const std::size_t n = values.size();
    return Tensor({n}, std::move(values));
}

Tensor Tensor::slice(std::size_t index) const {
    if (shape_.empty() || index >= shape_[0]) throw PreconditionError("tensor: slice index out of range");
    Shape inner(shape_.begin() + 1, shape_.end());
    const std::size_t stride = shape_size(inner);
    auto first = data_.begin() + static_cast<std::ptrdiff_t>(index * stride);
    return Tensor(std::move(inner), std::vector<double>(first, first + static_cast<std::ptrdiff_t>(stride)));
}

bool Tensor::all_finite() const noexcept {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

void WeightStore::insert(std::string name, Tensor tensor) { tensors_[std::move(name)] = std::move(tensor); }

bool WeightStore::contains(const std::string& name) const noexcept { return tensors_.count(name) != 0; }

const Tensor& WeightStore::get(const std::string& name) const {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw ConfigError("weights: missing parameter '" + name + "'");
    return it->second;
}

const Tensor& WeightStore::get(const std::string& name, const Shape& expected) const {
    const Tensor& t = get(name);
    if (t.shape() != expected)
        throw ConfigError("weights: parameter '" + name + "' has shape " + shape_string(t.shape()) +
                          ", expected " + shape_string(expected));
    return t;
}

}  // namespace trace
