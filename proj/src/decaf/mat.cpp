#include "decaf/mat.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace decaf {

Mat::Mat(int rows, int cols) : rows_(rows), cols_(cols) {
  if (rows < 0 || cols < 0) throw std::invalid_argument("Mat: negative dimension");
  data_.assign(static_cast<std::size_t>(rows) * cols, 0.0);
}

Mat::Mat(int rows, int cols, std::vector<double> data) : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != static_cast<std::size_t>(rows) * cols)
    throw std::invalid_argument("Mat: data length does not match rows*cols");
}

Mat Mat::identity(int n) {
  Mat m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

bool Mat::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

Mat matmul(const Mat& a, const Mat& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimensions differ");
  Mat c(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i) {
    for (int l = 0; l < a.cols(); ++l) {
      const double ail = a(i, l);
      if (ail == 0.0) continue;
      for (int j = 0; j < b.cols(); ++j) c(i, j) += ail * b(l, j);
    }
  }
  return c;
}

Mat transpose(const Mat& m) {
  Mat t(m.cols(), m.rows());
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
  return t;
}

Mat operator+(const Mat& a, const Mat& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("Mat+: shape mismatch");
  Mat c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] += b.data()[i];
  return c;
}

Mat operator-(const Mat& a, const Mat& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("Mat-: shape mismatch");
  Mat c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] -= b.data()[i];
  return c;
}

Mat operator*(double s, const Mat& m) {
  Mat c = m;
  for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] *= s;
  return c;
}

void add_scaled(Mat& acc, double w, const Mat& x) {
  if (!acc.same_shape(x)) throw std::invalid_argument("add_scaled: shape mismatch");
  if (w == 0.0) return;
  for (std::size_t i = 0; i < acc.size(); ++i) acc.data()[i] += w * x.data()[i];
}

std::vector<double> matvec(const Mat& m, const std::vector<double>& x) {
  if (static_cast<int>(x.size()) != m.cols()) throw std::invalid_argument("matvec: size mismatch");
  std::vector<double> y(m.rows(), 0.0);
  for (int i = 0; i < m.rows(); ++i) {
    double acc = 0.0;
    for (int j = 0; j < m.cols(); ++j) acc += m(i, j) * x[j];
    y[i] = acc;
  }
  return y;
}

double frobenius_norm(const Mat& m) {
  double acc = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) acc += m.data()[i] * m.data()[i];
  return std::sqrt(acc);
}

double frobenius_dist(const Mat& a, const Mat& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("frobenius_dist: shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

double dot(const Mat& a, const Mat& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("dot: shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a.data()[i] * b.data()[i];
  return acc;
}

double max_abs(const Mat& m) {
  double best = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) best = std::max(best, std::fabs(m.data()[i]));
  return best;
}

void write_csv(const std::string& path, const Mat& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_csv: cannot open " + path);
  char buf[40];
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", m(i, j));
      out << buf;
      if (j + 1 < m.cols()) out << ',';
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write_csv: write failed for " + path);
}

Mat read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_csv: cannot open " + path);
  std::vector<double> data;
  int cols = -1;
  int rows = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    int c = 0;
    while (std::getline(ss, cell, ',')) {
      try {
        data.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw std::runtime_error("read_csv: bad value '" + cell + "' in " + path);
      }
      ++c;
    }
    if (cols == -1) cols = c;
    if (c != cols) throw std::runtime_error("read_csv: ragged rows in " + path);
    ++rows;
  }
  if (rows == 0) throw std::runtime_error("read_csv: empty file " + path);
  return Mat(rows, cols, std::move(data));
}

}  // namespace decaf
