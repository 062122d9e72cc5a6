#pragma once

#include "glbi/simulate.hpp"
#include "glbi/solver.hpp"
#include "glbi/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace glbi {

/// Support-recovery AUC of a path. Units are ranked by entry iteration
/// (earlier ranks higher, never-entered units tie at the bottom) and the
/// result is the Mann-Whitney probability that a support unit outranks a
/// non-support unit, counting ties as 1/2.
double path_auc(const std::vector<long>& entry_iteration, const std::vector<Index>& true_support);
double path_auc(const Path& path, const std::vector<Index>& true_support);

/// Units whose truth block is nonzero, in the path's penalty-unit layout.
std::vector<Index> support_of(const VectorXd& beta, Index unit_size = 1);

/// Fold id in [0, K) for every sample: a seeded Fisher-Yates permutation
/// (Philox stream 0) dealt round-robin, so fold sizes differ by at most one.
std::vector<int> fold_assignment(Index n, int K, std::uint64_t seed);

struct CVOptions {
  int folds = 5;
  int grid_size = 50;
  std::uint64_t seed = 1;
};

/// Cross-validated score curve over a path grid.
///
/// The grid is continuous time t = k * delta, log-spaced in k between
/// max(k0, 1) and the iteration budget of the full-data path. Each fold
/// path is read at the same t values, so folds with different auto step
/// sizes line up.
struct CVReport {
  std::string metric;            // "misclassification" or "mdc"
  bool maximize = false;
  int folds = 0;
  std::vector<double> grid;      // t values
  std::vector<long> grid_k;      // matching iterations on the full-data path
  std::vector<double> score_curve;
  std::vector<std::vector<double>> fold_scores;  // [fold][position]; NaN for skipped folds
  std::vector<int> skipped_folds;
  std::vector<std::string> warnings;
  std::size_t selected_index = 0;
  double selected_t = 0.0;
  long selected_k = 0;
  Theta selected;                // full-data estimate at the selected position
  Path full_path;

  double selected_score() const { return score_curve.at(selected_index); }
};

/// Misclassification rate of the rule "predict +1 iff alpha + x'beta >= 0".
double misclassification(const Dataset& data, const Theta& theta);

CVReport kfold_cv_logistic(const Dataset& data, const SolverConfig& config, const CVOptions& options);

/// 2p x 2p matrix of pairwise joint frequencies. Block (j1, j2) holds
/// [[P(+,+), P(+,-)], [P(-,+), P(-,-)]] for (x_j1, x_j2).
MatrixXd d2(const MatrixXd& X);

/// Pearson correlation of vec(d2(X1)) and vec(d2(X2)).
double mdc(const MatrixXd& X1, const MatrixXd& X2);

struct MdcOptions {
  long burn_in = 100;
  long thin = 10;
};

/// K-fold CV of an Ising path by 2nd-order marginal correlation. For fold f
/// and grid position g, one synthetic sample of the held-out size is drawn
/// from the fold's estimate with Philox stream ((f + 1) << 32) | g.
CVReport kfold_cv_ising_mdc(const Dataset& data, LossKind kind, const SolverConfig& config,
                            const CVOptions& options, const MdcOptions& sampler = {});

/// ||Sigma_{Sc,S} Sigma_{S,S}^{-1}||_inf (max absolute row sum).
double irr_constant(const MatrixXd& sigma, const std::vector<Index>& support);

struct SignScan {
  std::optional<long> first_match_k;  // first checkpoint with sign(beta) == sign(truth)
  long clean_through_k = 0;           // last iteration with no unit outside the truth support
};

SignScan sign_consistency_scan(const Path& path, const VectorXd& truth_beta);

}  // namespace glbi
