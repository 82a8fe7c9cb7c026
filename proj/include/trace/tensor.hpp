#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace trace {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape) noexcept;
std::string shape_string(const Shape& shape);

// Dense row-major array of doubles.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor vector(std::vector<double> values);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const noexcept { return data_.size(); }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    const std::vector<double>& values() const noexcept { return data_; }

    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }

    // 3-D accessor for [C x H x W] tensors.
    double at(std::size_t c, std::size_t y, std::size_t x) const noexcept {
        return data_[(c * shape_[1] + y) * shape_[2] + x];
    }

    // Contiguous sub-tensor along the leading axis.
    Tensor slice(std::size_t index) const;

    bool all_finite() const noexcept;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

// Named read-only parameter tables.
class WeightStore {
public:
    WeightStore() = default;

    void insert(std::string name, Tensor tensor);
    bool contains(const std::string& name) const noexcept;
    // Throws ConfigError naming the parameter when it is absent.
    const Tensor& get(const std::string& name) const;
    // As get(), additionally validating the shape.
    const Tensor& get(const std::string& name, const Shape& expected) const;

    const std::map<std::string, Tensor>& entries() const noexcept { return tensors_; }
    std::size_t size() const noexcept { return tensors_.size(); }

    friend bool operator==(const WeightStore&, const WeightStore&) = default;

private:
    std::map<std::string, Tensor> tensors_;
};

}  // namespace trace
