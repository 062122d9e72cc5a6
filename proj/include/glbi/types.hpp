#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <string_view>

namespace glbi {

using Index = Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class LossKind { Linear, Logistic, IsingComposite, IsingMPF, GroupMRF };

std::string_view to_string(LossKind kind);
// Accepts the CLI spellings: linear, logistic, ising-composite, ising-mpf, group-mrf.
LossKind parse_loss_kind(std::string_view name);

inline bool is_ising(LossKind kind) {
  return kind == LossKind::IsingComposite || kind == LossKind::IsingMPF;
}
inline bool is_pairwise(LossKind kind) {
  return is_ising(kind) || kind == LossKind::GroupMRF;
}

/// Observations for one fit.
///
/// Regression data carries a real design matrix and a response `y`
/// (real for Linear, +1/-1 for Logistic). Ising data is a spin matrix with
/// entries in {+1,-1} and no response. Discrete MRF data stores states
/// 1..q as doubles.
struct Dataset {
  MatrixXd X;
  std::optional<VectorXd> y;

  Index n() const { return X.rows(); }
  Index p() const { return X.cols(); }
};

void validate_logistic(const Dataset& data);
void validate_linear(const Dataset& data);
void validate_spins(const MatrixXd& X);
void validate_states(const MatrixXd& X, int q);

/// Model parameters split into the unpenalized intercept block and the
/// penalized coefficient block.
///
/// `beta` is always a flat vector. For Ising models it holds the free
/// entries j < j' of the symmetric coupling matrix in row-major upper
/// triangular order (see pair_index); for discrete MRFs it holds one q*q
/// block per pair in the same order, each block row-major in (l, l').
/// The intercept block is empty for models fit without intercept.
struct Theta {
  VectorXd alpha;
  VectorXd beta;
};

/// Number of free pairs j < j' among p nodes.
inline Index pair_count(Index p) { return p * (p - 1) / 2; }

/// Position of pair (j, k), j != k, in the upper-triangular ordering
/// (0,1), (0,2), ..., (0,p-1), (1,2), ...
inline Index pair_index(Index j, Index k, Index p) {
  if (j > k) std::swap(j, k);
  return j * (2 * p - j - 1) / 2 + (k - j - 1);
}

/// Inverse of pair_index.
std::pair<Index, Index> pair_nodes(Index idx, Index p);

/// Expands upper-triangular couplings to a symmetric zero-diagonal matrix.
MatrixXd couplings_to_matrix(const VectorXd& beta, Index p);
/// Reads the strict upper triangle of `B` into the flat layout.
VectorXd matrix_to_couplings(const MatrixXd& B);

/// Recovers p from a pair count, or throws ShapeError if not triangular.
Index nodes_from_pair_count(Index pairs);

}  // namespace glbi
