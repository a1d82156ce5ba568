#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "affectlens/error.hpp"

namespace affectlens {

inline std::size_t shape_size(std::span<const std::size_t> shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string shape_to_string(std::span<const std::size_t> shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

/// Dense C-order array with owned storage.
template <typename T>
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> dims, T fill = T{})
      : shape(std::move(dims)), data(shape_size(shape), fill) {}
  Tensor(std::vector<std::size_t> dims, std::vector<T> values)
      : shape(std::move(dims)), data(std::move(values)) {
    if (data.size() != shape_size(shape)) {
      throw Error(ErrorKind::ShapeMismatch,
                  "tensor of shape " + shape_to_string(shape) + " given " +
                      std::to_string(data.size()) + " values");
    }
  }

  std::size_t rank() const noexcept { return shape.size(); }
  std::size_t size() const noexcept { return data.size(); }
  std::size_t dim(std::size_t axis) const { return shape.at(axis); }

  std::span<T> values() noexcept { return data; }
  std::span<const T> values() const noexcept { return data; }

  bool operator==(const Tensor&) const = default;
};

}  // namespace affectlens
