#pragma once

#include <cstddef>
#include <vector>

namespace hrt {

// Dense row-major matrix, rows = tickers, cols = trading days.
class Grid {
 public:
  Grid() : rows_(0), cols_(0) {}
  Grid(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& at(int row, int col) { return data_[static_cast<std::size_t>(row) * cols_ + col]; }
  double at(int row, int col) const { return data_[static_cast<std::size_t>(row) * cols_ + col]; }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  bool operator==(const Grid& other) const = default;

 private:
  int rows_;
  int cols_;
  std::vector<double> data_;
};

}  // namespace hrt
