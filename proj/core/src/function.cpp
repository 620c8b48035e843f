#include "nplse/function.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace nplse {

double Function::operator()(double x) const {
  Vec in(1);
  in[0] = x;
  Vec out(map_->output_dim());
  map_->evaluate(in, out);
  return out[0];
}

Samples Function::evaluate_rows(const Samples& xs) const {
  Samples out(xs.rows(), output_dim());
  Vec buf(output_dim());
  for (Eigen::Index i = 0; i < xs.rows(); ++i) {
    map_->evaluate(xs.row(i).transpose(), buf);
    out.row(i) = buf.transpose();
  }
  return out;
}

double link_value(Link link, double u) {
  return link == Link::Tanh ? std::tanh(u) : u;
}

double link_derivative(Link link, double u) {
  if (link == Link::Identity) return 1.0;
  const double t = std::tanh(u);
  return 1.0 - t * t;
}

std::string link_name(Link link) { return link == Link::Tanh ? "tanh" : "identity"; }

Link parse_link(const std::string& name) {
  if (name == "tanh") return Link::Tanh;
  if (name == "identity" || name == "linear") return Link::Identity;
  throw std::invalid_argument("unknown link '" + name + "' (expected tanh or identity)");
}

double GaussianKernel::operator()(VecRef x, VecRef z) const {
  return std::exp(-(x - z).squaredNorm() / (2.0 * bandwidth * bandwidth));
}

std::string ConstantMap::describe() const {
  std::ostringstream os;
  os << "constant(" << value_.transpose() << ")";
  return os.str();
}

void GlmMap::evaluate(VecRef x, Eigen::Ref<Vec> out) const {
  out.noalias() = a_ * x;
  if (link_ == Link::Tanh) out = out.array().tanh().matrix();
}

std::string GlmMap::describe() const {
  std::ostringstream os;
  os << "glm(" << link_name(link_) << ", " << a_.rows() << "x" << a_.cols() << ")";
  return os.str();
}

std::optional<double> GlmMap::lipschitz() const {
  // Both links are 1-Lipschitz with derivative 1 at the origin, so the
  // operator norm is attained.
  if (a_.size() == 0) return 0.0;
  Eigen::JacobiSVD<Mat> svd(a_);
  return svd.singularValues()[0];
}

KernelExpansion::KernelExpansion(Samples centers, Mat coeffs, GaussianKernel kernel)
    : centers_(std::move(centers)), coeffs_(std::move(coeffs)), kernel_(kernel) {
  if (centers_.rows() != coeffs_.rows())
    throw std::invalid_argument("kernel expansion: centers and coefficients disagree in count");
}

void KernelExpansion::evaluate(VecRef x, Eigen::Ref<Vec> out) const {
  const double scale = -0.5 / (kernel_.bandwidth * kernel_.bandwidth);
  out.setZero();
  const Eigen::Index d = centers_.cols();
  for (Eigen::Index i = 0; i < centers_.rows(); ++i) {
    double sq = 0.0;
    const double* c = centers_.row(i).data();
    for (Eigen::Index j = 0; j < d; ++j) {
      const double diff = c[j] - x[j];
      sq += diff * diff;
    }
    out.noalias() += std::exp(scale * sq) * coeffs_.row(i).transpose();
  }
}

std::string KernelExpansion::describe() const {
  std::ostringstream os;
  os << "kernel_expansion(k=" << centers_.rows() << ", d=" << centers_.cols()
     << ", bandwidth=" << kernel_.bandwidth << ")";
  return os.str();
}

double KernelExpansion::hilbert_norm() const {
  const Eigen::Index k = centers_.rows();
  Mat gram(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j <= i; ++j)
      gram(i, j) = gram(j, i) = kernel_(centers_.row(i).transpose(), centers_.row(j).transpose());
  const double sq = (coeffs_.transpose() * gram * coeffs_).trace();
  return std::sqrt(std::max(sq, 0.0));
}

PiecewiseLinear::PiecewiseLinear(Vec knots, Vec values)
    : knots_(std::move(knots)), values_(std::move(values)) {
  if (knots_.size() == 0 || knots_.size() != values_.size())
    throw std::invalid_argument("piecewise linear: need equal, nonzero numbers of knots and values");
  for (Eigen::Index i = 1; i < knots_.size(); ++i)
    if (!(knots_[i] > knots_[i - 1]))
      throw std::invalid_argument("piecewise linear: knots must be strictly increasing");
}

double PiecewiseLinear::at(double x) const {
  const Eigen::Index n = knots_.size();
  if (x <= knots_[0]) return values_[0];
  if (x >= knots_[n - 1]) return values_[n - 1];
  const double* begin = knots_.data();
  const Eigen::Index hi = std::upper_bound(begin, begin + n, x) - begin;
  const Eigen::Index lo = hi - 1;
  const double s = (x - knots_[lo]) / (knots_[hi] - knots_[lo]);
  return values_[lo] + s * (values_[hi] - values_[lo]);
}

std::string PiecewiseLinear::describe() const {
  std::ostringstream os;
  os << "piecewise_linear(" << knots_.size() << " knots on [" << knots_[0] << ", "
     << knots_[knots_.size() - 1] << "])";
  return os.str();
}

std::optional<double> PiecewiseLinear::lipschitz() const {
  double best = 0.0;
  for (Eigen::Index i = 1; i < knots_.size(); ++i)
    best = std::max(best, std::abs(values_[i] - values_[i - 1]) / (knots_[i] - knots_[i - 1]));
  return best;
}

DifferenceMap::DifferenceMap(Function f, Function g) : f_(std::move(f)), g_(std::move(g)) {
  if (f_.input_dim() != g_.input_dim() || f_.output_dim() != g_.output_dim())
    throw std::invalid_argument("difference of maps with mismatched dimensions");
}

void DifferenceMap::evaluate(VecRef x, Eigen::Ref<Vec> out) const {
  Vec tmp(g_.output_dim());
  f_.evaluate(x, out);
  g_.evaluate(x, tmp);
  out -= tmp;
}

std::string DifferenceMap::describe() const {
  return "(" + f_.describe() + ") - (" + g_.describe() + ")";
}

Function zero_function(int input_dim, int output_dim) {
  return Function(std::make_shared<ConstantMap>(input_dim, Vec::Zero(output_dim)));
}

Function constant_function(int input_dim, Vec value) {
  return Function(std::make_shared<ConstantMap>(input_dim, std::move(value)));
}

Function constant_function(double value) { return constant_function(1, Vec::Constant(1, value)); }

Function linear_function(Mat a) { return glm_function(std::move(a), Link::Identity); }

Function glm_function(Mat a, Link link) {
  return Function(std::make_shared<GlmMap>(std::move(a), link));
}

Function kernel_expansion(Samples centers, Mat coeffs, GaussianKernel kernel) {
  return Function(std::make_shared<KernelExpansion>(std::move(centers), std::move(coeffs), kernel));
}

Function piecewise_linear(Vec knots, Vec values) {
  return Function(std::make_shared<PiecewiseLinear>(std::move(knots), std::move(values)));
}

Function tabulated(double lo, double hi, Vec values) {
  const Eigen::Index n = values.size();
  if (n == 1) return piecewise_linear(Vec::Constant(1, lo), std::move(values));
  return piecewise_linear(Vec::LinSpaced(n, lo, hi), std::move(values));
}

Function difference(Function f, Function g) {
  return Function(std::make_shared<DifferenceMap>(std::move(f), std::move(g)));
}

Function closure(int input_dim, int output_dim, ClosureMap::Body body, std::string name,
                 std::optional<double> lipschitz) {
  return Function(std::make_shared<ClosureMap>(input_dim, output_dim, std::move(body),
                                               std::move(name), lipschitz));
}

Function scalar_linear(double scale) {
  Mat a(1, 1);
  a(0, 0) = scale;
  return linear_function(std::move(a));
}

}  // namespace nplse
