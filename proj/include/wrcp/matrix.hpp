#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "wrcp/error.hpp"

namespace wrcp {

/// Dense row-major matrix of doubles. Rows are samples throughout the library.
class Matrix {
public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw DomainError("Matrix: data size does not match shape");
    }
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return rows_ == 0; }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  void append_row(std::span<const double> values) {
    if (rows_ == 0 && cols_ == 0) {
      cols_ = values.size();
    }
    if (values.size() != cols_) {
      throw DomainError("Matrix::append_row: width mismatch");
    }
    data_.insert(data_.end(), values.begin(), values.end());
    ++rows_;
  }

  /// Rows selected by index, in the order given.
  Matrix select_rows(std::span<const std::size_t> indices) const {
    Matrix out(indices.size(), cols_);
    for (std::size_t i = 0; i < indices.size(); ++i) {
      auto src = row(indices[i]);
      auto dst = out.row(i);
      std::copy(src.begin(), src.end(), dst.begin());
    }
    return out;
  }

  bool operator==(const Matrix&) const = default;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

} // namespace wrcp
