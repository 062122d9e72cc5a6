#pragma once

#include "glbi/types.hpp"

#include <memory>

namespace glbi {

/// Sizes of the two parameter blocks of a loss.
struct ParamShape {
  Index alpha_dim = 0;
  Index beta_dim = 0;
  // Penalty group width: q*q for discrete MRF blocks, 1 otherwise.
  Index group_size = 1;

  Index groups() const { return beta_dim / group_size; }
  Index total() const { return alpha_dim + beta_dim; }
};

/// Flattens theta as [alpha; beta].
VectorXd pack(const Theta& theta);
Theta unpack(const VectorXd& flat, const ParamShape& shape);

/// A differentiable empirical loss over a fixed dataset.
///
/// Every concrete loss is normalized by 1/n. Operations are const and
/// touch no shared mutable state, so one model may be evaluated from many
/// threads at once.
class LossModel {
 public:
  virtual ~LossModel() = default;

  LossKind kind() const { return kind_; }
  const Dataset& data() const { return data_; }
  bool with_intercept() const { return with_intercept_; }
  const ParamShape& shape() const { return shape_; }
  // Number of node states: q for GroupMRF, 2 for Ising losses, 0 otherwise.
  virtual int states() const { return 0; }
  // Ising/MRF node count, or feature count for regression losses.
  Index nodes() const { return data_.p(); }

  Theta zero_theta() const;

  double value(const Theta& theta) const;
  Theta gradient(const Theta& theta) const;

  /// Minimizer of the loss over the intercept block with beta = 0.
  VectorXd init_intercept() const;

  /// Upper estimate of the largest Hessian eigenvalue at theta, from 20
  /// power-iteration steps on forward-difference Hessian-vector products
  /// (step 1e-6), inflated by 10%.
  double curvature_bound(const Theta& theta) const;

  /// Throws ShapeError / DomainError if theta does not fit this model.
  void check(const Theta& theta) const;

 protected:
  LossModel(LossKind kind, Dataset data, bool with_intercept, ParamShape shape)
      : kind_(kind), data_(std::move(data)), with_intercept_(with_intercept), shape_(shape) {}

  virtual double eval_value(const Theta& theta) const = 0;
  virtual void eval_gradient(const Theta& theta, Theta& grad) const = 0;
  virtual VectorXd eval_init_intercept() const = 0;

 private:
  LossKind kind_;
  Dataset data_;
  bool with_intercept_;
  ParamShape shape_;
};

/// Builds a loss over `data`, validating that the data fits the kind.
/// `states` is the number of node states q and is required for GroupMRF.
std::unique_ptr<LossModel> make_loss(LossKind kind, Dataset data, bool with_intercept = true,
                                     int states = 0);

/// Clamp applied to count ratios inside closed-form intercepts.
inline constexpr double kRatioClamp = 1e8;

/// X.beta accumulated with the order-independent grid summation used by
/// the logistic loss. `max_abs_x` must be max |X_ij| over the whole matrix.
VectorXd reproducible_matvec(const MatrixXd& X, const VectorXd& beta, double max_abs_x);

}  // namespace glbi
