#include "panoscan/tensor.hpp"

#include <cmath>
#include <numeric>

#include "panoscan/errors.hpp"

namespace panoscan {

namespace {
std::size_t product(const std::vector<std::size_t>& dims) {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}
}  // namespace

Tensor::Tensor(std::initializer_list<std::size_t> dims, double fill)
    : shape(dims), data(product(shape), fill) {}

Tensor::Tensor(std::vector<std::size_t> dims, double fill)
    : shape(std::move(dims)), data(product(shape), fill) {}

Tensor Tensor::scalar(double v) {
  Tensor t;
  t.shape = {};
  t.data = {v};
  return t;
}

Tensor Tensor::vector(std::vector<double> v) {
  Tensor t;
  t.shape = {v.size()};
  t.data = std::move(v);
  return t;
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  Tensor t;
  const std::size_t m = rows.size();
  const std::size_t n = m == 0 ? 0 : rows.begin()->size();
  t.shape = {m, n};
  t.data.reserve(m * n);
  for (const auto& row : rows) {
    if (row.size() != n) throw ContractError("Tensor::matrix: ragged rows");
    t.data.insert(t.data.end(), row.begin(), row.end());
  }
  return t;
}

std::size_t Tensor::rows() const {
  if (rank() != 2) throw ContractError("Tensor::rows: not a matrix");
  return shape[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw ContractError("Tensor::cols: not a matrix");
  return shape[1];
}

double& Tensor::at(std::size_t r, std::size_t c) {
  return data[r * cols() + c];
}

double Tensor::at(std::size_t r, std::size_t c) const {
  return data[r * cols() + c];
}

bool Tensor::all_finite() const {
  for (double v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

double Tensor::l2_norm() const {
  double s = 0.0;
  for (double v : data) s += v * v;
  return std::sqrt(s);
}

void Tensor::fill(double v) {
  for (auto& x : data) x = v;
}

}  // namespace panoscan
