#pragma once

#include "glbi/errors.hpp"
#include "glbi/losses.hpp"
#include "glbi/types.hpp"

#include <Eigen/SparseCore>

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

namespace glbi {

using SparseVec = Eigen::SparseVector<double>;

/// Entry iteration of a coordinate that never became nonzero.
inline constexpr long kNeverEntered = std::numeric_limits<long>::max();

/// Parameters of a GLBI run.
///
/// Empty optionals mean "auto": delta resolves to 1 / (kappa * curvature
/// bound at the starting point), max_iters to multiple * k0 where k0 is the
/// last iteration with beta identically zero, and checkpoint_stride to 1
/// for at most 500 penalty units, else ceil(max_iters / 2000).
struct SolverConfig {
  double kappa = 10.0;
  std::optional<double> delta;
  std::optional<long> max_iters;
  long multiple = 1000;
  std::optional<long> checkpoint_stride;
  // Block soft-thresholding over penalty groups (discrete MRF blocks).
  bool group_mode = false;
  // Oracle dynamics: only these penalty units may move.
  std::optional<std::vector<Index>> support;
  long hard_cap = 10'000'000;

  void validate() const;
};

/// Iterate (k, alpha_k, z_k, beta_k). beta = kappa * S(z, 1) after every step.
struct SolverState {
  long k = 0;
  VectorXd alpha;
  VectorXd z;
  VectorXd beta;

  Theta theta() const { return Theta{alpha, beta}; }
};

struct Checkpoint {
  long k = 0;
  double t = 0.0;
  VectorXd alpha;
  SparseVec beta;

  Theta theta() const { return Theta{alpha, VectorXd(beta)}; }
};

/// A recorded regularization path together with the resolved settings that
/// produced it.
struct Path {
  LossKind kind = LossKind::Linear;
  ParamShape shape;
  Index nodes = 0;
  int states = 0;
  bool with_intercept = true;

  double kappa = 0.0;
  double delta = 0.0;
  bool delta_auto = false;
  double curvature = 0.0;  // curvature bound used for auto delta, else 0
  long k0 = -1;            // -1 when beta never left zero
  long max_iters = 0;
  long multiple = 0;
  long stride = 1;
  bool group_mode = false;
  std::optional<std::vector<Index>> support;

  std::vector<Checkpoint> checkpoints;
  // First iteration at which each penalty unit was nonzero.
  std::vector<long> entry_iteration;

  Index units() const { return static_cast<Index>(entry_iteration.size()); }
  Index unit_size() const { return group_mode ? shape.group_size : 1; }
  /// Latest checkpoint at or before continuous time t = k * delta.
  const Checkpoint& at_time(double t) const;
  const Checkpoint& final() const { return checkpoints.back(); }
};

/// Raised when iterates become non-finite; carries the last finite iterate.
class PathDivergence : public DivergenceError {
 public:
  PathDivergence(const std::string& what, Checkpoint last_valid)
      : DivergenceError(what), last_valid_(std::move(last_valid)) {}
  const Checkpoint& last_valid() const noexcept { return last_valid_; }

 private:
  Checkpoint last_valid_;
};

/// Elementwise sign(z) * max(|z| - threshold, 0).
VectorXd shrink(const VectorXd& z, double threshold);

/// kappa * (1 - 1/||z||_F)_+ * z, the proximal map of kappa*||.||_F at kappa*z.
MatrixXd group_shrink(const MatrixXd& z_block, double kappa);

/// delta = 1 / (kappa * lambda_hat), so kappa * delta * lambda_hat = 1 < 2.
double resolve_delta(double kappa, double lambda_hat);

/// z0 = beta0 = 0, alpha0 = the loss's intercept minimizer.
SolverState initial_state(const LossModel& model);

/// One iteration:
///   alpha <- alpha - kappa * delta * grad_alpha
///   z     <- z - delta * grad_beta
///   beta  <- kappa * S(z, 1)        (block shrinkage in group mode)
/// With a support restriction only the listed units of z and beta move.
/// `config.delta` must be resolved.
SolverState glbi_step(const SolverState& state, const LossModel& model,
                      const SolverConfig& config);

/// Runs GLBI from initial_state and records the path. Deterministic.
Path run_path(const LossModel& model, const SolverConfig& config);

/// Minimizer of the loss over {beta outside `support` = 0} by damped
/// Newton, stopping at gradient sup-norm 1e-10 or 200 iterations.
/// `support` lists penalty units of width `unit_size`.
Theta fit_oracle(const LossModel& model, const std::vector<Index>& support, Index unit_size = 1);

/// Lyapunov function of a support-restricted run:
///   P(beta_o) - <beta_o, rho> + d^2 / (2 kappa),
/// with rho = z - S(z, 1) (block version for unit_size > 1), P the l1 or
/// group norm, and d the Euclidean distance of (alpha, beta_S) to the oracle.
double potential(const SolverState& state, const Theta& oracle, double kappa,
                 const std::vector<Index>& support, Index unit_size = 1);

/// Bitwise digest of a path: checkpoints, entry iterations and step size.
std::uint64_t path_fingerprint(const Path& path);

namespace detail {

/// Shared bookkeeping for serial and sharded runs: entry iterations, k0 and
/// the auto iteration budget, checkpoint stride and recording.
class PathRecorder {
 public:
  PathRecorder(Path meta, const SolverConfig& config);

  void start(const VectorXd& alpha0);
  /// Records iterate k; returns true once the run has reached its budget.
  bool observe(long k, const VectorXd& alpha, const VectorXd& beta);
  bool budget_known() const { return max_iters_.has_value(); }
  long last_k() const { return last_k_; }
  Path finish() &&;

 private:
  void resolve_budget(long k_max);
  void record(long k, const VectorXd& alpha, const VectorXd& beta);

  Path path_;
  SolverConfig config_;
  std::optional<long> max_iters_;
  std::optional<long> stride_;
  std::vector<VectorXd> pending_alpha_;  // alphas before the stride is known
  long last_k_ = 0;
  bool any_entry_ = false;
};

Path make_path_meta(const LossModel& model, const SolverConfig& config, double delta,
                    double curvature);

}  // namespace detail

}  // namespace glbi
