#pragma once

#include "nplse/types.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>

namespace nplse {

/// Polymorphic map R^input_dim -> R^output_dim.
class Map {
 public:
  virtual ~Map() = default;
  virtual int input_dim() const = 0;
  virtual int output_dim() const = 0;
  virtual void evaluate(VecRef x, Eigen::Ref<Vec> out) const = 0;
  virtual std::string describe() const = 0;
  /// Exact Lipschitz constant (Euclidean norms) when it is cheap to know.
  virtual std::optional<double> lipschitz() const { return std::nullopt; }
};

/// Cheap-to-copy handle to an immutable Map.
class Function {
 public:
  Function() = default;
  explicit Function(std::shared_ptr<const Map> map) : map_(std::move(map)) {}

  bool valid() const { return static_cast<bool>(map_); }
  int input_dim() const { return map_->input_dim(); }
  int output_dim() const { return map_->output_dim(); }

  Vec operator()(VecRef x) const {
    Vec out(map_->output_dim());
    map_->evaluate(x, out);
    return out;
  }
  void evaluate(VecRef x, Eigen::Ref<Vec> out) const { map_->evaluate(x, out); }
  /// Scalar convenience for 1-D maps.
  double operator()(double x) const;
  /// Row-wise evaluation; one output row per input row.
  Samples evaluate_rows(const Samples& xs) const;

  std::string describe() const { return map_->describe(); }
  std::optional<double> lipschitz() const { return map_->lipschitz(); }

  const Map& map() const { return *map_; }
  template <class T>
  const T* as() const {
    return dynamic_cast<const T*>(map_.get());
  }

 private:
  std::shared_ptr<const Map> map_;
};

enum class Link { Identity, Tanh };

double link_value(Link link, double u);
double link_derivative(Link link, double u);
std::string link_name(Link link);
Link parse_link(const std::string& name);

/// Gaussian kernel exp(-|x - z|^2 / (2 h^2)).
struct GaussianKernel {
  double bandwidth = 1.0;
  double operator()(VecRef x, VecRef z) const;
};

class ConstantMap final : public Map {
 public:
  ConstantMap(int input_dim, Vec value) : input_dim_(input_dim), value_(std::move(value)) {}
  int input_dim() const override { return input_dim_; }
  int output_dim() const override { return static_cast<int>(value_.size()); }
  void evaluate(VecRef, Eigen::Ref<Vec> out) const override { out = value_; }
  std::string describe() const override;
  std::optional<double> lipschitz() const override { return 0.0; }
  const Vec& value() const { return value_; }

 private:
  int input_dim_;
  Vec value_;
};

/// x -> link(A x). Link::Identity gives a linear map.
class GlmMap final : public Map {
 public:
  GlmMap(Mat a, Link link) : a_(std::move(a)), link_(link) {}
  int input_dim() const override { return static_cast<int>(a_.cols()); }
  int output_dim() const override { return static_cast<int>(a_.rows()); }
  void evaluate(VecRef x, Eigen::Ref<Vec> out) const override;
  std::string describe() const override;
  std::optional<double> lipschitz() const override;
  const Mat& matrix() const { return a_; }
  Link link() const { return link_; }

 private:
  Mat a_;
  Link link_;
};

/// x -> sum_i coeffs.row(i) * K(centers.row(i), x).
class KernelExpansion final : public Map {
 public:
  KernelExpansion(Samples centers, Mat coeffs, GaussianKernel kernel);
  int input_dim() const override { return static_cast<int>(centers_.cols()); }
  int output_dim() const override { return static_cast<int>(coeffs_.cols()); }
  void evaluate(VecRef x, Eigen::Ref<Vec> out) const override;
  std::string describe() const override;
  const Samples& centers() const { return centers_; }
  const Mat& coeffs() const { return coeffs_; }
  const GaussianKernel& kernel() const { return kernel_; }
  /// sqrt(sum_j c_j^T K c_j) over output columns.
  double hilbert_norm() const;

 private:
  Samples centers_;
  Mat coeffs_;
  GaussianKernel kernel_;
};

/// Scalar piecewise-linear interpolant through (knots, values) with constant
/// extrapolation beyond the end knots. Knots must be strictly increasing.
class PiecewiseLinear final : public Map {
 public:
  PiecewiseLinear(Vec knots, Vec values);
  int input_dim() const override { return 1; }
  int output_dim() const override { return 1; }
  void evaluate(VecRef x, Eigen::Ref<Vec> out) const override { out[0] = at(x[0]); }
  std::string describe() const override;
  std::optional<double> lipschitz() const override;
  double at(double x) const;
  const Vec& knots() const { return knots_; }
  const Vec& values() const { return values_; }

 private:
  Vec knots_;
  Vec values_;
};

class DifferenceMap final : public Map {
 public:
  DifferenceMap(Function f, Function g);
  int input_dim() const override { return f_.input_dim(); }
  int output_dim() const override { return f_.output_dim(); }
  void evaluate(VecRef x, Eigen::Ref<Vec> out) const override;
  std::string describe() const override;

 private:
  Function f_, g_;
};

class ClosureMap final : public Map {
 public:
  using Body = std::function<void(VecRef, Eigen::Ref<Vec>)>;
  ClosureMap(int input_dim, int output_dim, Body body, std::string name,
             std::optional<double> lipschitz = std::nullopt)
      : input_dim_(input_dim), output_dim_(output_dim), body_(std::move(body)),
        name_(std::move(name)), lipschitz_(lipschitz) {}
  int input_dim() const override { return input_dim_; }
  int output_dim() const override { return output_dim_; }
  void evaluate(VecRef x, Eigen::Ref<Vec> out) const override { body_(x, out); }
  std::string describe() const override { return name_; }
  std::optional<double> lipschitz() const override { return lipschitz_; }

 private:
  int input_dim_, output_dim_;
  Body body_;
  std::string name_;
  std::optional<double> lipschitz_;
};

Function zero_function(int input_dim, int output_dim);
Function constant_function(int input_dim, Vec value);
Function constant_function(double value);
Function linear_function(Mat a);
Function glm_function(Mat a, Link link);
Function kernel_expansion(Samples centers, Mat coeffs, GaussianKernel kernel = {});
Function piecewise_linear(Vec knots, Vec values);
/// Values on the uniform grid lo, lo + h, ..., hi.
Function tabulated(double lo, double hi, Vec values);
Function difference(Function f, Function g);
Function closure(int input_dim, int output_dim, ClosureMap::Body body, std::string name,
                 std::optional<double> lipschitz = std::nullopt);
/// 1-D map x -> scale * x.
Function scalar_linear(double scale);

}  // namespace nplse
