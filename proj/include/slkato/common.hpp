#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace slkato {

using cplx = std::complex<double>;
using MatC = Eigen::MatrixXcd;
using VecC = Eigen::VectorXcd;
using MatR = Eigen::MatrixXd;
using VecR = Eigen::VectorXd;

inline constexpr double pi = std::numbers::pi;

// Error hierarchy. Every failure that a caller can act on gets its own type.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct PreconditionError : Error {
  using Error::Error;
};
// z (or a shift) hit the spectrum of the operator being inverted.
struct SpectrumError : Error {
  using Error::Error;
};
// 1 is (numerically) an eigenvalue of K(z); z is outside the admissible set.
struct AdmissibilityError : Error {
  using Error::Error;
};
struct ConvergenceError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};

/// Spectral norm, exact (largest singular value).
template <class Derived>
double norm2(const Eigen::MatrixBase<Derived>& a) {
  if (a.size() == 0) return 0.0;
  Eigen::BDCSVD<Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>> svd(a.eval());
  return svd.singularValues()(0);
}

/// Smallest singular value.
template <class Derived>
double min_singular(const Eigen::MatrixBase<Derived>& a) {
  Eigen::BDCSVD<Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>> svd(a.eval());
  const auto& s = svd.singularValues();
  return s.size() ? s(s.size() - 1) : 0.0;
}

/// Bitwise Hermitian test (no tolerance).
template <class Derived>
bool is_hermitian(const Eigen::MatrixBase<Derived>& a) {
  if (a.rows() != a.cols()) return false;
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = j; i < a.rows(); ++i)
      if (a(i, j) != std::conj(a(j, i))) return false;
  return true;
}

inline MatC hermitian_part(const MatC& a) { return (a + a.adjoint()) * 0.5; }

/// Principal argument with Arg(0) := 0.
inline double principal_arg(cplx z) { return z == cplx(0.0) ? 0.0 : std::arg(z); }

/// Complex cotangent.
inline cplx cot(cplx z) { return std::cos(z) / std::sin(z); }

/// Pairwise (tree) summation with O(log n) live partial sums. Feeding terms in
/// a fixed order gives a bit-reproducible result.
template <class T>
class PairwiseSum {
 public:
  void add(T term) {
    std::size_t level = 0;
    while (level < stack_.size() && occupied_[level]) {
      term = stack_[level] + term;
      occupied_[level] = false;
      ++level;
    }
    if (level == stack_.size()) {
      stack_.push_back(std::move(term));
      occupied_.push_back(true);
    } else {
      stack_[level] = std::move(term);
      occupied_[level] = true;
    }
  }

  /// Sum of everything added; `zero` is returned for an empty sum.
  T result(T zero) const {
    bool have = false;
    T acc = zero;
    for (std::size_t level = 0; level < stack_.size(); ++level) {
      if (!occupied_[level]) continue;
      acc = have ? T(stack_[level] + acc) : stack_[level];
      have = true;
    }
    return acc;
  }

 private:
  std::vector<T> stack_;
  std::vector<bool> occupied_;
};

/// Seeded standard complex Gaussian vector (real and imaginary parts N(0, 1/2)).
inline VecC random_complex_gaussian(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  VecC v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double re = normal(rng);
    const double im = normal(rng);
    v(i) = cplx(re, im);
  }
  return v;
}

/// Least-squares slope of log(y) against log(x). Entries with y <= 0 are skipped.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (std::size_t i = 0; i < x.size() && i < y.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) continue;
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++m;
  }
  if (m < 2) return 0.0;
  const double den = m * sxx - sx * sx;
  return den == 0.0 ? 0.0 : (m * sxy - sx * sy) / den;
}

/// Geometric grid start, start*factor, ..., count points.
inline std::vector<double> geometric_grid(double start, double factor, int count) {
  if (!(start > 0.0) || !(factor > 1.0) || count < 1)
    throw PreconditionError("geometric grid needs start > 0, factor > 1, count >= 1");
  std::vector<double> g(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) g[static_cast<std::size_t>(k)] = start * std::pow(factor, k);
  return g;
}

/// Log-spaced grid from lo to hi (inclusive) with `per_decade` points per decade.
inline std::vector<double> log_grid(double lo, double hi, int per_decade) {
  if (!(lo > 0.0) || !(hi >= lo) || per_decade < 1)
    throw PreconditionError("log grid needs 0 < lo <= hi and per_decade >= 1");
  const double decades = std::log10(hi / lo);
  const int count = static_cast<int>(std::ceil(decades * per_decade - 1e-9)) + 1;
  std::vector<double> g;
  g.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    const double e = std::min(decades, static_cast<double>(k) / per_decade);
    g.push_back(lo * std::pow(10.0, e));
  }
  return g;
}

}  // namespace slkato
