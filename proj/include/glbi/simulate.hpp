#pragma once

#include "glbi/types.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace glbi {

/// Sparse logistic regression with Toeplitz-correlated Gaussian design.
/// Support is the first s coordinates; alpha and the nonzero betas are
/// uniform on [-2M, -M] u [M, 2M].
struct LogisticSpec {
  Index p = 80;
  Index s = 20;
  Index n = 800;
  double M = 1.0;
  double r = 0.25;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Ising model on an N x N grid with 4-nearest-neighbour, non-periodic
/// edges. Fields and edge couplings are uniform on [-2/T, -1/T] u [1/T, 2/T].
struct IsingSpec {
  Index N = 6;
  double T = 1.5;
  Index n = 500;
  long burn_in = 100;
  long thin = 10;
  std::uint64_t seed = 1;

  Index p() const { return N * N; }
  void validate() const;
};

struct Simulated {
  Dataset data;
  Theta truth;
};

/// Sigma_jk = r^|j-k|.
MatrixXd toeplitz_covariance(Index p, double r);

/// RNG streams: 0 draws the truth, 1 the design, 2 the labels.
Simulated gen_logistic(const LogisticSpec& spec);

/// Grid edges (j, k) with j < k; node index = row * N + col.
std::vector<std::pair<Index, Index>> grid_edges(Index N);

/// Random grid Ising parameters (stream 0 of spec.seed).
Theta grid_ising_params(const IsingSpec& spec);

struct GibbsOptions {
  Index n = 0;
  long burn_in = 100;
  long thin = 10;
  std::uint64_t seed = 1;
  std::uint64_t stream = 1;
};

/// Systematic-scan single-site Gibbs sampler for
///   P(x) ~ exp(1/2 sum_j alpha_j x_j + 1/2 sum_{j<k} beta_jk x_j x_k),
/// whose node conditionals are P(x_j | rest) = 1 / (1 + exp(-(alpha_j +
/// sum_k beta_jk x_k) x_j)). Sites are visited 0..p-1 each sweep; burn_in
/// sweeps are discarded, then one sample is kept every `thin` sweeps.
/// An empty alpha means zero fields.
MatrixXd gibbs_spins(const Theta& truth, Index p, const GibbsOptions& options);

/// gibbs_spins with the sample size, schedule and seed of `spec` (stream 1).
Dataset gibbs_sample(const Theta& truth, const IsingSpec& spec);

/// Largest p accepted by exact_ising_distribution.
inline constexpr Index kMaxExactNodes = 12;

/// Probabilities of all 2^p spin states by enumeration. Bit j of the state
/// index is set when x_j = +1. Refuses p > 12.
VectorXd exact_ising_distribution(const Theta& truth, Index p);

/// Spin vector for an enumeration index (bit j set -> +1).
VectorXd spins_of_state(std::uint64_t state, Index p);

}  // namespace glbi
