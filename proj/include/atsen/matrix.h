#ifndef ATSEN_MATRIX_H_
#define ATSEN_MATRIX_H_

#include <cstddef>
#include <span>
#include <vector>

namespace atsen {

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double &operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool operator==(const Matrix &) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Max-subtracted softmax of logits / temperature.
void softmax(std::span<const double> logits, double temperature, std::span<double> out);
std::vector<double> softmax(std::span<const double> logits, double temperature = 1.0);
// log softmax(logits / temperature)
void log_softmax(std::span<const double> logits, double temperature, std::span<double> out);

}  // namespace atsen

#endif  // ATSEN_MATRIX_H_
