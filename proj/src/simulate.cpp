#include "glbi/simulate.hpp"

#include "glbi/errors.hpp"
#include "glbi/rng.hpp"

#include <cmath>
#include <string>

namespace glbi {

void LogisticSpec::validate() const {
  if (p < 1 || s < 0 || n < 1) throw ValidationError("logistic spec needs p, n >= 1 and s >= 0");
  if (s > p) throw ValidationError("logistic spec needs s <= p");
  if (!(M >= 0.0) || !std::isfinite(M)) throw ValidationError("signal magnitude M must be >= 0");
  if (!(r >= 0.0 && r < 1.0)) throw ValidationError("Toeplitz correlation r must lie in [0, 1)");
}

void IsingSpec::validate() const {
  if (N < 2) throw ValidationError("grid side N must be at least 2");
  if (!(T > 0.0) || !std::isfinite(T)) throw ValidationError("temperature T must be positive");
  if (n < 1) throw ValidationError("sample count n must be at least 1");
  if (burn_in < 1 || thin < 1) throw ValidationError("burn_in and thin must be at least 1");
}

MatrixXd toeplitz_covariance(Index p, double r) {
  MatrixXd S(p, p);
  for (Index j = 0; j < p; ++j)
    for (Index k = 0; k < p; ++k) S(j, k) = std::pow(r, static_cast<double>(std::abs(j - k)));
  return S;
}

namespace {

// Uniform on [-2a, -a] u [a, 2a].
double two_sided_uniform(Philox& rng, double a) {
  const double mag = rng.uniform(a, 2.0 * a);
  return rng.coin() ? mag : -mag;
}

}  // namespace

Simulated gen_logistic(const LogisticSpec& spec) {
  spec.validate();
  Philox truth_rng(spec.seed, 0);
  Theta truth{VectorXd(1), VectorXd::Zero(spec.p)};
  truth.alpha(0) = two_sided_uniform(truth_rng, spec.M);
  for (Index j = 0; j < spec.s; ++j) truth.beta(j) = two_sided_uniform(truth_rng, spec.M);

  const MatrixXd L = toeplitz_covariance(spec.p, spec.r).llt().matrixL();
  Philox design_rng(spec.seed, 1);
  MatrixXd Z(spec.n, spec.p);
  for (Index i = 0; i < spec.n; ++i)
    for (Index j = 0; j < spec.p; ++j) Z(i, j) = design_rng.normal();
  Dataset data;
  data.X = Z * L.transpose();

  Philox label_rng(spec.seed, 2);
  VectorXd y(spec.n);
  const VectorXd eta = (data.X * truth.beta).array() + truth.alpha(0);
  for (Index i = 0; i < spec.n; ++i) {
    const double prob = 1.0 / (1.0 + std::exp(-eta(i)));
    y(i) = label_rng.uniform() < prob ? 1.0 : -1.0;
  }
  data.y = std::move(y);
  return Simulated{std::move(data), std::move(truth)};
}

std::vector<std::pair<Index, Index>> grid_edges(Index N) {
  std::vector<std::pair<Index, Index>> edges;
  for (Index row = 0; row < N; ++row)
    for (Index col = 0; col < N; ++col) {
      const Index j = row * N + col;
      if (col + 1 < N) edges.emplace_back(j, j + 1);
      if (row + 1 < N) edges.emplace_back(j, j + N);
    }
  return edges;
}

Theta grid_ising_params(const IsingSpec& spec) {
  spec.validate();
  const Index p = spec.p();
  Philox rng(spec.seed, 0);
  Theta truth{VectorXd(p), VectorXd::Zero(pair_count(p))};
  const double a = 1.0 / spec.T;
  for (Index j = 0; j < p; ++j) truth.alpha(j) = two_sided_uniform(rng, a);
  for (const auto& [j, k] : grid_edges(spec.N)) truth.beta(pair_index(j, k, p)) = two_sided_uniform(rng, a);
  return truth;
}

MatrixXd gibbs_spins(const Theta& truth, Index p, const GibbsOptions& options) {
  if (truth.beta.size() != pair_count(p)) throw ShapeError("coupling vector does not match p");
  if (truth.alpha.size() != 0 && truth.alpha.size() != p) throw ShapeError("field vector does not match p");
  if (options.n < 1 || options.burn_in < 0 || options.thin < 1)
    throw ValidationError("Gibbs schedule needs n >= 1, burn_in >= 0, thin >= 1");

  const MatrixXd B = couplings_to_matrix(truth.beta, p);
  const VectorXd alpha = truth.alpha.size() ? truth.alpha : VectorXd::Zero(p);
  Philox rng(options.seed, options.stream);
  VectorXd x(p);
  for (Index j = 0; j < p; ++j) x(j) = rng.coin() ? 1.0 : -1.0;

  auto sweep = [&] {
    for (Index j = 0; j < p; ++j) {
      const double field = alpha(j) + B.col(j).dot(x);
      const double prob_plus = 1.0 / (1.0 + std::exp(-field));
      x(j) = rng.uniform() < prob_plus ? 1.0 : -1.0;
    }
  };

  for (long s = 0; s < options.burn_in; ++s) sweep();
  MatrixXd out(options.n, p);
  for (Index i = 0; i < options.n; ++i) {
    for (long s = 0; s < options.thin; ++s) sweep();
    out.row(i) = x.transpose();
  }
  return out;
}

Dataset gibbs_sample(const Theta& truth, const IsingSpec& spec) {
  spec.validate();
  GibbsOptions opt;
  opt.n = spec.n;
  opt.burn_in = spec.burn_in;
  opt.thin = spec.thin;
  opt.seed = spec.seed;
  opt.stream = 1;
  return Dataset{gibbs_spins(truth, spec.p(), opt), std::nullopt};
}

VectorXd spins_of_state(std::uint64_t state, Index p) {
  VectorXd x(p);
  for (Index j = 0; j < p; ++j) x(j) = (state >> j) & 1u ? 1.0 : -1.0;
  return x;
}

VectorXd exact_ising_distribution(const Theta& truth, Index p) {
  if (p > kMaxExactNodes)
    throw ValidationError("exact enumeration is limited to p <= " + std::to_string(kMaxExactNodes));
  if (truth.beta.size() != pair_count(p)) throw ShapeError("coupling vector does not match p");
  if (truth.alpha.size() != 0 && truth.alpha.size() != p) throw ShapeError("field vector does not match p");
  const MatrixXd B = couplings_to_matrix(truth.beta, p);
  const VectorXd alpha = truth.alpha.size() ? truth.alpha : VectorXd::Zero(p);
  const std::uint64_t states = std::uint64_t{1} << p;
  VectorXd logw(static_cast<Index>(states));
  for (std::uint64_t s = 0; s < states; ++s) {
    const VectorXd x = spins_of_state(s, p);
    // x'Bx counts every pair twice, which supplies the 1/2 on j<k.
    logw(static_cast<Index>(s)) = 0.5 * alpha.dot(x) + 0.25 * x.dot(B * x);
  }
  const double top = logw.maxCoeff();
  VectorXd prob = (logw.array() - top).exp();
  prob /= prob.sum();
  return prob;
}

}  // namespace glbi
