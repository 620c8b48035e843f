#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace nplse {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// One sample per row. Rows are contiguous so `row(t).transpose()` binds to
/// `Eigen::Ref<const Vec>` without a copy.
using Samples = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using VecRef = Eigen::Ref<const Vec>;

/// A Cholesky factorization or iterative solve could not produce a usable answer.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An entropy integral diverges at its lower limit.
class DivergenceError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A construction would exceed the configured element cap.
class CapExceededError : public std::length_error {
 public:
  CapExceededError(const std::string& what, double required, double cap)
      : std::length_error(what), required_(required), cap_(cap) {}
  double required() const { return required_; }
  double cap() const { return cap_; }

 private:
  double required_;
  double cap_;
};

}  // namespace nplse
