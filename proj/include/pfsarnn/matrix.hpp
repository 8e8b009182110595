#pragma once

#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace pfsarnn {

/// Dense row-major matrix over an arbitrary scalar.
template <class S>
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, const S& fill = S{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  S& operator()(std::size_t r, std::size_t c) {
    assert(r < rows_ && c < cols_);
    return data_[r * cols_ + c];
  }
  const S& operator()(std::size_t r, std::size_t c) const {
    assert(r < rows_ && c < cols_);
    return data_[r * cols_ + c];
  }

  std::span<const S> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<const S> data() const { return data_; }

  template <class T, class F>
  Matrix<T> map(F&& f) const {
    Matrix<T> out(rows_, cols_);
    for (std::size_t i = 0; i < data_.size(); ++i) out.data_[i] = f(data_[i]);
    return out;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  template <class>
  friend class Matrix;

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<S> data_;
};

/// y = M x.
template <class S>
std::vector<S> multiply(const Matrix<S>& m, std::span<const S> x) {
  assert(x.size() == m.cols());
  std::vector<S> y(m.rows(), S{0});
  for (std::size_t r = 0; r < m.rows(); ++r) {
    S acc{0};
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (x[c] == S{0}) continue;
      acc += m(r, c) * x[c];
    }
    y[r] = acc;
  }
  return y;
}

}  // namespace pfsarnn
