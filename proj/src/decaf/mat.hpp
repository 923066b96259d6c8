#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace decaf {

// Dense row-major matrix of doubles. Value semantics; every matrix in the
// simulator (weights, adapters, mixing matrices) runs through this type.
class Mat {
 public:
  Mat() = default;
  Mat(int rows, int cols);  // zero-initialized
  Mat(int rows, int cols, std::vector<double> data);

  static Mat identity(int n);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
  double operator()(int i, int j) const { return data_[static_cast<std::size_t>(i) * cols_ + j]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  const std::vector<double>& values() const { return data_; }

  bool same_shape(const Mat& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  bool all_finite() const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

Mat matmul(const Mat& a, const Mat& b);
Mat transpose(const Mat& m);
Mat operator+(const Mat& a, const Mat& b);
Mat operator-(const Mat& a, const Mat& b);
Mat operator*(double s, const Mat& m);

// acc += w * x, skipping the multiply when w is exactly zero so that sparse
// mixing rows leave untouched entries bit-identical.
void add_scaled(Mat& acc, double w, const Mat& x);

std::vector<double> matvec(const Mat& m, const std::vector<double>& x);

double frobenius_norm(const Mat& m);
double frobenius_dist(const Mat& a, const Mat& b);
double dot(const Mat& a, const Mat& b);
double max_abs(const Mat& m);

// CSV round-trip used for debug dumps, checkpoints and custom mixing
// matrices. Values are written with enough digits to reproduce bit-exactly.
void write_csv(const std::string& path, const Mat& m);
Mat read_csv(const std::string& path);

}  // namespace decaf
