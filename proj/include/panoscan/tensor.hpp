#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace panoscan {

// Dense tensor of 64-bit reals. Rank 0 (scalar), 1 (vector) and 2 (row-major
// matrix) are the only shapes the nets use.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::initializer_list<std::size_t> dims, double fill = 0.0);
  explicit Tensor(std::vector<std::size_t> dims, double fill = 0.0);

  static Tensor scalar(double v);
  static Tensor vector(std::vector<double> v);
  // Row-major matrix from nested initializer rows.
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t numel() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  bool is_scalar() const { return data.size() == 1; }

  std::size_t rows() const;
  std::size_t cols() const;

  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }
  double& at(std::size_t r, std::size_t c);
  double at(std::size_t r, std::size_t c) const;

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool all_finite() const;
  double l2_norm() const;

  void fill(double v);
};

}  // namespace panoscan
