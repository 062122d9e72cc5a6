#include "glbi/solver.hpp"

#include "glbi/detail/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

namespace glbi {

void SolverConfig::validate() const {
  if (!(kappa > 0.0) || !std::isfinite(kappa)) throw ValidationError("kappa must be positive");
  if (delta && (!(*delta > 0.0) || !std::isfinite(*delta)))
    throw ValidationError("delta must be positive");
  if (max_iters && *max_iters < 1) throw ValidationError("max_iters must be at least 1");
  if (max_iters && *max_iters > hard_cap)
    throw ValidationError("max_iters exceeds the hard cap of " + std::to_string(hard_cap));
  if (multiple < 1) throw ValidationError("iteration multiple must be at least 1");
  if (checkpoint_stride && *checkpoint_stride < 1)
    throw ValidationError("checkpoint stride must be at least 1");
  if (hard_cap < 1) throw ValidationError("hard cap must be at least 1");
}

const Checkpoint& Path::at_time(double t) const {
  if (checkpoints.empty()) throw ValidationError("path has no checkpoints");
  const long k = t <= 0.0 ? 0 : static_cast<long>(std::floor(t / delta + 1e-9));
  auto it = std::upper_bound(checkpoints.begin(), checkpoints.end(), k,
                             [](long key, const Checkpoint& c) { return key < c.k; });
  if (it == checkpoints.begin()) return checkpoints.front();
  return *std::prev(it);
}

VectorXd shrink(const VectorXd& z, double threshold) {
  if (!(threshold > 0.0)) throw ValidationError("shrink threshold must be positive");
  VectorXd out(z.size());
  for (Index i = 0; i < z.size(); ++i) {
    if (threshold == 1.0) {
      out(i) = detail::soft_threshold(z(i));
    } else {
      const double mag = std::max(std::abs(z(i)) - threshold, 0.0);
      out(i) = mag == 0.0 ? 0.0 : (z(i) > 0.0 ? mag : -mag);
    }
  }
  return out;
}

namespace {

double block_factor(double norm) { return norm > 1.0 ? 1.0 - 1.0 / norm : 0.0; }

}  // namespace

MatrixXd group_shrink(const MatrixXd& z_block, double kappa) {
  if (!(kappa > 0.0)) throw ValidationError("group_shrink kappa must be positive");
  return kappa * block_factor(z_block.norm()) * z_block;
}

double resolve_delta(double kappa, double lambda_hat) {
  if (!(kappa > 0.0) || !(lambda_hat > 0.0))
    throw ValidationError("resolve_delta needs positive kappa and curvature bound");
  return 1.0 / (kappa * lambda_hat);
}

SolverState initial_state(const LossModel& model) {
  const auto& shape = model.shape();
  SolverState s;
  s.alpha = model.init_intercept();
  s.z = VectorXd::Zero(shape.beta_dim);
  s.beta = VectorXd::Zero(shape.beta_dim);
  return s;
}

namespace {

Index unit_size_of(const LossModel& model, const SolverConfig& config) {
  return config.group_mode ? model.shape().group_size : 1;
}

std::vector<char> support_mask(const std::optional<std::vector<Index>>& support, Index units) {
  std::vector<char> mask(static_cast<size_t>(units), support ? 0 : 1);
  if (support) {
    for (Index u : *support) {
      if (u < 0 || u >= units)
        throw ValidationError("support index " + std::to_string(u) + " out of range");
      mask[static_cast<size_t>(u)] = 1;
    }
  }
  return mask;
}

}  // namespace

SolverState glbi_step(const SolverState& state, const LossModel& model,
                      const SolverConfig& config) {
  if (!config.delta || !(*config.delta > 0.0))
    throw ValidationError("glbi_step requires a resolved positive delta");
  const double kappa = config.kappa;
  const double delta = *config.delta;
  const Index width = unit_size_of(model, config);
  const Index units = model.shape().beta_dim / width;
  if (state.z.size() != model.shape().beta_dim) throw ShapeError("dual variable has wrong length");

  const Theta grad = model.gradient(state.theta());
  if (!grad.alpha.allFinite() || !grad.beta.allFinite())
    throw DivergenceError("non-finite gradient at iteration " + std::to_string(state.k));

  SolverState next;
  next.k = state.k + 1;
  next.alpha = state.alpha;
  for (Index i = 0; i < next.alpha.size(); ++i)
    next.alpha(i) = detail::intercept_update(state.alpha(i), kappa, delta, grad.alpha(i));
  next.z = state.z;
  next.beta = VectorXd::Zero(state.z.size());

  const auto mask = support_mask(config.support, units);
  for (Index u = 0; u < units; ++u) {
    if (!mask[static_cast<size_t>(u)]) {
      next.z.segment(u * width, width).setZero();
      continue;
    }
    for (Index i = u * width; i < (u + 1) * width; ++i)
      next.z(i) = detail::dual_update(state.z(i), delta, grad.beta(i));
    if (width == 1) {
      next.beta(u) = detail::primal_from_dual(next.z(u), kappa);
    } else {
      const auto seg = next.z.segment(u * width, width);
      next.beta.segment(u * width, width) = kappa * block_factor(seg.norm()) * seg;
    }
  }
  return next;
}

namespace detail {

Path make_path_meta(const LossModel& model, const SolverConfig& config, double delta,
                    double curvature) {
  Path path;
  path.kind = model.kind();
  path.shape = model.shape();
  path.nodes = model.nodes();
  path.states = model.states();
  path.with_intercept = model.with_intercept();
  path.kappa = config.kappa;
  path.delta = delta;
  path.curvature = curvature;
  path.multiple = config.multiple;
  path.group_mode = config.group_mode;
  path.support = config.support;
  const Index width = config.group_mode ? model.shape().group_size : 1;
  path.entry_iteration.assign(static_cast<size_t>(model.shape().beta_dim / width), kNeverEntered);
  return path;
}

PathRecorder::PathRecorder(Path meta, const SolverConfig& config)
    : path_(std::move(meta)), config_(config) {
  if (config_.max_iters) resolve_budget(*config_.max_iters);
}

void PathRecorder::resolve_budget(long k_max) {
  max_iters_ = k_max;
  if (config_.checkpoint_stride) {
    stride_ = *config_.checkpoint_stride;
  } else if (path_.units() <= 500) {
    stride_ = 1;
  } else {
    stride_ = std::max<long>(1, (k_max + 1999) / 2000);
  }
}

void PathRecorder::record(long k, const VectorXd& alpha, const VectorXd& beta) {
  Checkpoint c;
  c.k = k;
  c.t = static_cast<double>(k) * path_.delta;
  c.alpha = alpha;
  c.beta = beta.sparseView(0.0, 0.0);
  path_.checkpoints.push_back(std::move(c));
}

void PathRecorder::start(const VectorXd& alpha0) {
  record(0, alpha0, VectorXd::Zero(path_.shape.beta_dim));
  last_k_ = 0;
}

bool PathRecorder::observe(long k, const VectorXd& alpha, const VectorXd& beta) {
  last_k_ = k;
  const Index width = path_.unit_size();
  bool nonzero = false;
  for (Index u = 0; u < path_.units(); ++u) {
    auto& entry = path_.entry_iteration[static_cast<size_t>(u)];
    const bool active = (beta.segment(u * width, width).array() != 0.0).any();
    if (active) {
      nonzero = true;
      if (entry == kNeverEntered) entry = k;
    }
  }

  if (nonzero && !any_entry_) {
    any_entry_ = true;
    path_.k0 = k - 1;
    if (!max_iters_) {
      const long k_max = std::min(config_.hard_cap,
                                  std::max(k, config_.multiple * std::max<long>(path_.k0, 1)));
      resolve_budget(k_max);
      // Iterates before the first entry carry beta = 0; only alpha moved.
      for (size_t i = 0; i < pending_alpha_.size(); ++i) {
        const long kk = static_cast<long>(i) + 1;
        if (kk % *stride_ == 0) record(kk, pending_alpha_[i], VectorXd::Zero(beta.size()));
      }
      pending_alpha_.clear();
    }
  }

  if (!max_iters_) {
    if (k >= config_.hard_cap)
      throw ConvergenceError("no coefficient entered within the hard cap of " +
                                 std::to_string(config_.hard_cap) + " iterations",
                             static_cast<double>(k));
    pending_alpha_.push_back(alpha);
    return false;
  }

  const bool done = k >= *max_iters_;
  if (k % *stride_ == 0 || done) record(k, alpha, beta);
  return done;
}

Path PathRecorder::finish() && {
  path_.max_iters = max_iters_.value_or(last_k_);
  path_.stride = stride_.value_or(1);
  return std::move(path_);
}

}  // namespace detail

Path run_path(const LossModel& model, const SolverConfig& config) {
  config.validate();
  SolverState state = initial_state(model);
  model.check(state.theta());

  SolverConfig resolved = config;
  double curvature = 0.0;
  if (!resolved.delta) {
    curvature = model.curvature_bound(state.theta());
    resolved.delta = resolve_delta(resolved.kappa, curvature);
  }

  Path meta = detail::make_path_meta(model, resolved, *resolved.delta, curvature);
  meta.delta_auto = !config.delta.has_value();
  detail::PathRecorder recorder(std::move(meta), resolved);
  recorder.start(state.alpha);
  for (;;) {
    SolverState next;
    try {
      next = glbi_step(state, model, resolved);
    } catch (const DivergenceError& e) {
      throw PathDivergence(e.what(), Checkpoint{state.k, state.k * *resolved.delta, state.alpha,
                                                state.beta.sparseView(0.0, 0.0)});
    }
    if (!next.alpha.allFinite() || !next.z.allFinite() || !next.beta.allFinite()) {
      throw PathDivergence("iterates became non-finite at iteration " + std::to_string(next.k),
                           Checkpoint{state.k, state.k * *resolved.delta, state.alpha,
                                      state.beta.sparseView(0.0, 0.0)});
    }
    // A fixed point before any entry can never produce one.
    if (!recorder.budget_known() && next.alpha == state.alpha && next.z == state.z) {
      throw ConvergenceError("no coefficient can enter: the iteration is stationary at k = " +
                                 std::to_string(state.k),
                             0.0);
    }
    const bool done = recorder.observe(next.k, next.alpha, next.beta);
    state = std::move(next);
    if (done) break;
  }
  return std::move(recorder).finish();
}

namespace {

std::vector<Index> restricted_coordinates(const LossModel& model, const std::vector<Index>& support,
                                          Index unit_size) {
  const auto& shape = model.shape();
  const Index units = shape.beta_dim / unit_size;
  std::vector<Index> coords;
  for (Index i = 0; i < shape.alpha_dim; ++i) coords.push_back(i);
  std::vector<Index> sorted = support;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  for (Index u : sorted) {
    if (u < 0 || u >= units) throw ValidationError("support index out of range");
    for (Index i = 0; i < unit_size; ++i) coords.push_back(shape.alpha_dim + u * unit_size + i);
  }
  return coords;
}

}  // namespace

Theta fit_oracle(const LossModel& model, const std::vector<Index>& support, Index unit_size) {
  constexpr int kMaxIters = 200;
  constexpr double kTol = 1e-10;
  constexpr double kBlowup = 1e6;

  const auto& shape = model.shape();
  if (unit_size < 1 || shape.beta_dim % unit_size != 0)
    throw ValidationError("unit size does not divide the coefficient block");
  const auto coords = restricted_coordinates(model, support, unit_size);
  const Index d = static_cast<Index>(coords.size());

  VectorXd full = pack(initial_state(model).theta());
  auto restricted_grad = [&](const VectorXd& x) {
    const VectorXd g = pack(model.gradient(unpack(x, shape)));
    VectorXd out(d);
    for (Index i = 0; i < d; ++i) out(i) = g(coords[static_cast<size_t>(i)]);
    return out;
  };
  auto loss = [&](const VectorXd& x) { return model.value(unpack(x, shape)); };

  // Central-difference Hessian of the analytic gradient, then a Newton
  // step with a growing ridge until the factorization succeeds.
  auto newton_step = [&](const VectorXd& g) {
    MatrixXd H(d, d);
    for (Index c = 0; c < d; ++c) {
      const Index idx = coords[static_cast<size_t>(c)];
      const double h = 1e-5 * std::max(1.0, std::abs(full(idx)));
      VectorXd xp = full, xm = full;
      xp(idx) += h;
      xm(idx) -= h;
      H.col(c) = (restricted_grad(xp) - restricted_grad(xm)) / (2.0 * h);
    }
    H = 0.5 * (H + H.transpose()).eval();
    VectorXd step;
    double ridge = 0.0;
    for (int attempt = 0; attempt < 60; ++attempt) {
      Eigen::LLT<MatrixXd> llt(H + ridge * MatrixXd::Identity(d, d));
      if (llt.info() == Eigen::Success) {
        step = llt.solve(-g);
        if (step.allFinite()) return step;
      }
      ridge = ridge == 0.0 ? 1e-10 * std::max(1.0, H.diagonal().cwiseAbs().maxCoeff()) : 10 * ridge;
    }
    return VectorXd();
  };
  const auto no_minimizer = [] {
    return DivergenceError("oracle estimate diverges: the restricted problem has no finite minimizer");
  };

  VectorXd g = restricted_grad(full);
  double gnorm = d ? g.cwiseAbs().maxCoeff() : 0.0;
  for (int it = 0; it < kMaxIters && gnorm > kTol; ++it) {
    const VectorXd step = newton_step(g);
    if (step.size() != d) throw ConvergenceError("oracle Newton system is singular", gnorm);

    const double f0 = loss(full);
    const double slope = g.dot(step);
    double t = 1.0;
    VectorXd trial = full;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      trial = full;
      for (Index i = 0; i < d; ++i) trial(coords[static_cast<size_t>(i)]) += t * step(i);
      const double f1 = loss(trial);
      if (std::isfinite(f1) && f1 <= f0 + 1e-4 * t * slope) {
        accepted = true;
        break;
      }
      if (t == 1.0 && std::isfinite(f1) && restricted_grad(trial).cwiseAbs().maxCoeff() < gnorm &&
          f1 <= f0 + 1e-14 * std::abs(f0)) {
        // Rounding-level plateau near the minimizer: accept the full step.
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) throw ConvergenceError("oracle line search failed", gnorm);
    full = trial;
    if (full.norm() > kBlowup) throw no_minimizer();
    g = restricted_grad(full);
    gnorm = g.cwiseAbs().maxCoeff();
  }
  if (gnorm > kTol)
    throw ConvergenceError("oracle Newton did not reach gradient tolerance", gnorm);
  // On separable data the gradient vanishes only because the parameters run
  // off to infinity; the Newton step then stays large while the gradient is
  // tiny. At a genuine minimizer the step is of the order of the gradient.
  if (d > 0) {
    const VectorXd step = newton_step(g);
    if (step.size() != d || step.cwiseAbs().maxCoeff() > 1e-3 * std::max(1.0, full.cwiseAbs().maxCoeff()))
      throw no_minimizer();
  }

  Theta out = unpack(full, shape);
  return out;
}

double potential(const SolverState& state, const Theta& oracle, double kappa,
                 const std::vector<Index>& support, Index unit_size) {
  if (!(kappa > 0.0)) throw ValidationError("kappa must be positive");
  const Index dim = oracle.beta.size();
  if (state.beta.size() != dim || state.z.size() != dim || state.alpha.size() != oracle.alpha.size())
    throw ShapeError("state and oracle shapes differ");
  if (unit_size < 1 || dim % unit_size != 0) throw ShapeError("unit size does not divide beta");
  const Index units = dim / unit_size;
  std::vector<char> in_support(static_cast<size_t>(units), 0);
  for (Index u : support) {
    if (u < 0 || u >= units) throw ShapeError("support index out of range");
    in_support[static_cast<size_t>(u)] = 1;
  }

  double penalty = 0.0;
  double inner = 0.0;
  double dist2 = (state.alpha - oracle.alpha).squaredNorm();
  for (Index u = 0; u < units; ++u) {
    const auto zb = state.z.segment(u * unit_size, unit_size);
    const auto bo = oracle.beta.segment(u * unit_size, unit_size);
    const auto bk = state.beta.segment(u * unit_size, unit_size);
    if (!in_support[static_cast<size_t>(u)]) {
      if ((bk.array() != 0.0).any() || (zb.array() != 0.0).any() || (bo.array() != 0.0).any())
        throw ShapeError("state or oracle is nonzero outside the support");
      continue;
    }
    VectorXd rho(unit_size);
    if (unit_size == 1) {
      rho(0) = zb(0) - detail::soft_threshold(zb(0));
    } else {
      rho = zb - block_factor(zb.norm()) * zb;
    }
    penalty += bo.norm();
    inner += bo.dot(rho);
    dist2 += (bk - bo).squaredNorm();
  }
  return penalty - inner + dist2 / (2.0 * kappa);
}

std::uint64_t path_fingerprint(const Path& path) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix_bytes = [&h](const void* data, size_t len) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  };
  auto mix_double = [&](double v) { mix_bytes(&v, sizeof v); };
  auto mix_long = [&](long v) { mix_bytes(&v, sizeof v); };

  mix_double(path.delta);
  mix_double(path.kappa);
  mix_long(path.k0);
  mix_long(path.max_iters);
  for (const auto& c : path.checkpoints) {
    mix_long(c.k);
    mix_double(c.t);
    for (Index i = 0; i < c.alpha.size(); ++i) mix_double(c.alpha(i));
    for (SparseVec::InnerIterator it(c.beta); it; ++it) {
      mix_long(static_cast<long>(it.index()));
      mix_double(it.value());
    }
  }
  for (long e : path.entry_iteration) mix_long(e);
  return h;
}

}  // namespace glbi
