#include "glbi/losses.hpp"

#include "glbi/detail/kernels.hpp"
#include "glbi/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace glbi {

using detail::logistic_tail;
using detail::softplus;

VectorXd pack(const Theta& theta) {
  VectorXd flat(theta.alpha.size() + theta.beta.size());
  flat << theta.alpha, theta.beta;
  return flat;
}

Theta unpack(const VectorXd& flat, const ParamShape& shape) {
  if (flat.size() != shape.total()) throw ShapeError("flat parameter length does not match shape");
  return Theta{flat.head(shape.alpha_dim), flat.tail(shape.beta_dim)};
}

VectorXd reproducible_matvec(const MatrixXd& X, const VectorXd& beta, double max_abs_x) {
  const Index n = X.rows();
  VectorXd w = VectorXd::Zero(n);
  const double bound = max_abs_x * beta.cwiseAbs().maxCoeff();
  const auto grid = detail::make_repro_grid(bound, X.cols());
  if (grid.empty) return w;
  VectorXd acc2 = VectorXd::Zero(n);
  for (Index j = 0; j < X.cols(); ++j) {
    if (beta(j) == 0.0) continue;
    detail::repro_axpy(grid, beta(j), X.col(j).data(), w.data(), acc2.data(), n);
  }
  w += acc2;
  return w;
}

Theta LossModel::zero_theta() const {
  return Theta{VectorXd::Zero(shape_.alpha_dim), VectorXd::Zero(shape_.beta_dim)};
}

void LossModel::check(const Theta& theta) const {
  if (theta.alpha.size() != shape_.alpha_dim || theta.beta.size() != shape_.beta_dim) {
    throw ShapeError("theta has shape (" + std::to_string(theta.alpha.size()) + ", " +
                     std::to_string(theta.beta.size()) + "), model expects (" +
                     std::to_string(shape_.alpha_dim) + ", " + std::to_string(shape_.beta_dim) +
                     ")");
  }
  if (!theta.alpha.allFinite() || !theta.beta.allFinite())
    throw DomainError("theta contains non-finite entries");
}

double LossModel::value(const Theta& theta) const {
  check(theta);
  return eval_value(theta);
}

Theta LossModel::gradient(const Theta& theta) const {
  check(theta);
  Theta grad = zero_theta();
  eval_gradient(theta, grad);
  return grad;
}

VectorXd LossModel::init_intercept() const {
  if (data_.n() == 0) throw DomainError("cannot initialize intercept on an empty dataset");
  if (!with_intercept_) return VectorXd(0);
  return eval_init_intercept();
}

double LossModel::curvature_bound(const Theta& theta) const {
  check(theta);
  constexpr int kSteps = 20;
  constexpr double kStep = 1e-6;
  constexpr double kInflation = 1.1;

  const VectorXd base = pack(theta);
  const VectorXd g0 = pack(gradient(theta));
  const Index d = base.size();
  if (d == 0) return 0.0;

  VectorXd v(d);
  for (Index i = 0; i < d; ++i) v(i) = 1.0 + 0.25 * std::sin(static_cast<double>(i + 1));
  v.normalize();

  double estimate = 0.0;
  for (int step = 0; step < kSteps; ++step) {
    const VectorXd g1 = pack(gradient(unpack(base + kStep * v, shape_)));
    const VectorXd hv = (g1 - g0) / kStep;
    const double norm = hv.norm();
    estimate = std::max(estimate, norm);
    if (!(norm > 0.0)) break;
    v = hv / norm;
  }
  return kInflation * estimate;
}

namespace {

double ratio_log(double plus, double minus) {
  double ratio = minus > 0.0 ? plus / minus : kRatioClamp;
  ratio = std::clamp(ratio, 1.0 / kRatioClamp, kRatioClamp);
  return std::log(ratio);
}

ParamShape regression_shape(const Dataset& data, bool with_intercept) {
  return ParamShape{with_intercept ? 1 : 0, data.p(), 1};
}

ParamShape ising_shape(const Dataset& data, bool with_intercept) {
  return ParamShape{with_intercept ? data.p() : 0, pair_count(data.p()), 1};
}

// ||y - alpha - X beta||^2 / (2n)
class LinearLoss final : public LossModel {
 public:
  LinearLoss(Dataset data, bool with_intercept, ParamShape shape)
      : LossModel(LossKind::Linear, std::move(data), with_intercept, shape) {}

 protected:
  VectorXd residual(const Theta& theta) const {
    VectorXd r = *data().y - data().X * theta.beta;
    if (with_intercept()) r.array() -= theta.alpha(0);
    return r;
  }

  double eval_value(const Theta& theta) const override {
    return residual(theta).squaredNorm() / (2.0 * static_cast<double>(data().n()));
  }

  void eval_gradient(const Theta& theta, Theta& grad) const override {
    const double n = static_cast<double>(data().n());
    const VectorXd r = residual(theta);
    grad.beta = -(data().X.transpose() * r) / n;
    if (with_intercept()) grad.alpha(0) = -r.sum() / n;
  }

  VectorXd eval_init_intercept() const override {
    return VectorXd::Constant(1, data().y->mean());
  }
};

// (1/n) sum_i log(1 + exp(-(alpha + x_i' beta) y_i))
class LogisticLoss final : public LossModel {
 public:
  LogisticLoss(Dataset data, bool with_intercept, ParamShape shape)
      : LossModel(LossKind::Logistic, std::move(data), with_intercept, shape),
        max_abs_x_(this->data().X.size() ? this->data().X.cwiseAbs().maxCoeff() : 0.0) {}

 protected:
  double intercept(const Theta& theta) const { return with_intercept() ? theta.alpha(0) : 0.0; }

  double eval_value(const Theta& theta) const override {
    const VectorXd w = reproducible_matvec(data().X, theta.beta, max_abs_x_);
    const double a = intercept(theta);
    const VectorXd& y = *data().y;
    double sum = 0.0;
    for (Index i = 0; i < data().n(); ++i) sum += softplus(-(a + w(i)) * y(i));
    return sum / static_cast<double>(data().n());
  }

  // g_i = -(1/n) y_i / (1 + exp((alpha + w_i) y_i)); grad_alpha = sum g, grad_beta = X'g.
  void eval_gradient(const Theta& theta, Theta& grad) const override {
    const Index n = data().n();
    const VectorXd w = reproducible_matvec(data().X, theta.beta, max_abs_x_);
    const double a = intercept(theta);
    const VectorXd& y = *data().y;
    const double inv_n = 1.0 / static_cast<double>(n);
    VectorXd g(n);
    double f = 0.0;
    for (Index i = 0; i < n; ++i) {
      g(i) = detail::logistic_weight(a, w(i), y(i), inv_n);
      f += g(i);
    }
    for (Index j = 0; j < data().p(); ++j)
      grad.beta(j) = detail::column_dot(data().X.col(j).data(), g.data(), n);
    if (with_intercept()) grad.alpha(0) = f;
  }

  VectorXd eval_init_intercept() const override {
    const VectorXd& y = *data().y;
    const double plus = static_cast<double>((y.array() > 0).count());
    return VectorXd::Constant(1, ratio_log(plus, static_cast<double>(data().n()) - plus));
  }

 private:
  double max_abs_x_;
};

// Node-wise conditional losses of the +/-1 Ising model. For sample i and
// node j the margin is u_ij = (alpha_j + sum_k beta_jk x_ik) x_ij; the
// composite loss sums log(1 + exp(-u)), the MPF loss sums exp(-u/2).
class IsingLoss final : public LossModel {
 public:
  IsingLoss(LossKind kind, Dataset data, bool with_intercept, ParamShape shape)
      : LossModel(kind, std::move(data), with_intercept, shape) {}

  int states() const override { return 2; }

 protected:
  MatrixXd margins(const Theta& theta) const {
    const MatrixXd& X = data().X;
    const MatrixXd B = couplings_to_matrix(theta.beta, X.cols());
    MatrixXd field = X * B;
    if (with_intercept()) field.rowwise() += theta.alpha.transpose();
    return field.cwiseProduct(X);
  }

  double eval_value(const Theta& theta) const override {
    const MatrixXd u = margins(theta);
    double sum = 0.0;
    if (kind() == LossKind::IsingComposite) {
      for (Index j = 0; j < u.cols(); ++j)
        for (Index i = 0; i < u.rows(); ++i) sum += softplus(-u(i, j));
    } else {
      for (Index j = 0; j < u.cols(); ++j)
        for (Index i = 0; i < u.rows(); ++i) sum += std::exp(-0.5 * u(i, j));
    }
    return sum / static_cast<double>(data().n());
  }

  void eval_gradient(const Theta& theta, Theta& grad) const override {
    const MatrixXd& X = data().X;
    const MatrixXd u = margins(theta);
    const double inv_n = 1.0 / static_cast<double>(data().n());
    // G_ij = d loss / d field_ij
    MatrixXd G(u.rows(), u.cols());
    if (kind() == LossKind::IsingComposite) {
      for (Index j = 0; j < u.cols(); ++j)
        for (Index i = 0; i < u.rows(); ++i)
          G(i, j) = -inv_n * X(i, j) * logistic_tail(u(i, j));
    } else {
      for (Index j = 0; j < u.cols(); ++j)
        for (Index i = 0; i < u.rows(); ++i)
          G(i, j) = -0.5 * inv_n * X(i, j) * std::exp(-0.5 * u(i, j));
    }
    if (with_intercept()) grad.alpha = G.colwise().sum().transpose();
    // XtG(k, j): node j's field derivative against neighbour k.
    const MatrixXd XtG = X.transpose() * G;
    const Index p = X.cols();
    Index idx = 0;
    for (Index j = 0; j < p; ++j)
      for (Index k = j + 1; k < p; ++k) grad.beta(idx++) = XtG(k, j) + XtG(j, k);
  }

  VectorXd eval_init_intercept() const override {
    const MatrixXd& X = data().X;
    VectorXd alpha(X.cols());
    const double n = static_cast<double>(X.rows());
    for (Index j = 0; j < X.cols(); ++j) {
      const double plus = static_cast<double>((X.col(j).array() > 0).count());
      alpha(j) = ratio_log(plus, n - plus);
    }
    return alpha;
  }
};

// Negative composite conditional log-likelihood of a q-state discrete MRF,
// with one-hot design Xh (n x qp) and scores M = 1 alpha' + Xh B.
class GroupMrfLoss final : public LossModel {
 public:
  GroupMrfLoss(Dataset data, bool with_intercept, ParamShape shape, int q)
      : LossModel(LossKind::GroupMRF, std::move(data), with_intercept, shape), q_(q) {
    const MatrixXd& X = this->data().X;
    onehot_ = MatrixXd::Zero(X.rows(), q_ * X.cols());
    for (Index j = 0; j < X.cols(); ++j)
      for (Index i = 0; i < X.rows(); ++i)
        onehot_(i, j * q_ + static_cast<Index>(X(i, j)) - 1) = 1.0;
  }

  int states() const override { return q_; }

 protected:
  MatrixXd full_couplings(const VectorXd& beta) const {
    const Index p = data().p();
    const Index q = q_;
    MatrixXd B = MatrixXd::Zero(q * p, q * p);
    Index idx = 0;
    for (Index j = 0; j < p; ++j)
      for (Index k = j + 1; k < p; ++k, ++idx) {
        const Index off = idx * q * q;
        for (Index l = 0; l < q; ++l)
          for (Index m = 0; m < q; ++m) {
            const double b = beta(off + l * q + m);
            B(j * q + l, k * q + m) = b;
            B(k * q + m, j * q + l) = b;
          }
      }
    return B;
  }

  MatrixXd scores(const Theta& theta) const {
    MatrixXd M = onehot_ * full_couplings(theta.beta);
    if (with_intercept()) M.rowwise() += theta.alpha.transpose();
    return M;
  }

  double eval_value(const Theta& theta) const override {
    const MatrixXd M = scores(theta);
    const Index q = q_;
    double sum = 0.0;
    for (Index i = 0; i < M.rows(); ++i)
      for (Index j = 0; j < data().p(); ++j) {
        const auto block = M.row(i).segment(j * q, q);
        const double top = block.maxCoeff();
        const double lse = top + std::log((block.array() - top).exp().sum());
        const Index obs = static_cast<Index>(data().X(i, j)) - 1;
        sum += lse - block(obs);
      }
    return sum / static_cast<double>(data().n());
  }

  void eval_gradient(const Theta& theta, Theta& grad) const override {
    const MatrixXd M = scores(theta);
    const Index q = q_;
    const Index p = data().p();
    const double inv_n = 1.0 / static_cast<double>(data().n());
    MatrixXd R(M.rows(), M.cols());
    for (Index i = 0; i < M.rows(); ++i)
      for (Index j = 0; j < p; ++j) {
        const auto block = M.row(i).segment(j * q, q);
        const double top = block.maxCoeff();
        const Eigen::ArrayXd e = (block.array() - top).exp();
        R.row(i).segment(j * q, q) = (e / e.sum()).matrix().transpose();
      }
    R = (R - onehot_) * inv_n;
    if (with_intercept()) grad.alpha = R.colwise().sum().transpose();
    const MatrixXd G = onehot_.transpose() * R;
    Index idx = 0;
    for (Index j = 0; j < p; ++j)
      for (Index k = j + 1; k < p; ++k, ++idx) {
        const Index off = idx * q * q;
        for (Index l = 0; l < q; ++l)
          for (Index m = 0; m < q; ++m)
            grad.beta(off + l * q + m) = G(k * q + m, j * q + l) + G(j * q + l, k * q + m);
      }
  }

  VectorXd eval_init_intercept() const override {
    const double n = static_cast<double>(data().n());
    VectorXd counts = onehot_.colwise().sum().transpose();
    VectorXd alpha(counts.size());
    for (Index c = 0; c < counts.size(); ++c)
      alpha(c) = std::log(std::clamp(counts(c) / n, 1.0 / kRatioClamp, 1.0));
    return alpha;
  }

 private:
  int q_;
  MatrixXd onehot_;
};

}  // namespace

std::unique_ptr<LossModel> make_loss(LossKind kind, Dataset data, bool with_intercept,
                                     int states) {
  switch (kind) {
    case LossKind::Linear:
    {
      validate_linear(data);
      const auto shape = regression_shape(data, with_intercept);
      return std::make_unique<LinearLoss>(std::move(data), with_intercept, shape);
    }
    case LossKind::Logistic:
    {
      validate_logistic(data);
      const auto shape = regression_shape(data, with_intercept);
      return std::make_unique<LogisticLoss>(std::move(data), with_intercept, shape);
    }
    case LossKind::IsingComposite:
    case LossKind::IsingMPF:
    {
      if (data.y) throw ValidationError("Ising data must not carry a label column");
      validate_spins(data.X);
      const auto shape = ising_shape(data, with_intercept);
      return std::make_unique<IsingLoss>(kind, std::move(data), with_intercept, shape);
    }
    case LossKind::GroupMRF:
    {
      if (data.y) throw ValidationError("MRF data must not carry a label column");
      validate_states(data.X, states);
      const Index q = states;
      const ParamShape shape{with_intercept ? q * data.p() : 0, pair_count(data.p()) * q * q, q * q};
      return std::make_unique<GroupMrfLoss>(std::move(data), with_intercept, shape, states);
    }
  }
  throw ValidationError("unknown loss kind");
}

}  // namespace glbi
