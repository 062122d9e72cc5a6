#include "glbi/parallel.hpp"

#include "glbi/detail/kernels.hpp"
#include "glbi/errors.hpp"
#include "glbi/losses.hpp"

#include <algorithm>
#include <barrier>
#include <chrono>
#include <cmath>
#include <exception>
#include <iomanip>
#include <string>
#include <thread>

namespace glbi {

ShardPlan plan_shards(Index p, int L) {
  if (L < 1) throw ValidationError("shard count must be at least 1");
  if (static_cast<Index>(L) > p)
    throw ValidationError("shard count " + std::to_string(L) + " exceeds the " + std::to_string(p) +
                          " available columns");
  ShardPlan plan;
  const Index base = p / L;
  const Index extra = p % L;
  Index begin = 0;
  for (int l = 0; l < L; ++l) {
    const Index size = base + (static_cast<Index>(l) < extra ? 1 : 0);
    plan.ranges.emplace_back(begin, begin + size);
    begin += size;
  }
  return plan;
}

namespace {

struct ShardFlags {
  bool bad_gradient = false;
  bool bad_iterate = false;
  bool moved = false;
  double max_abs_beta = 0.0;
};

}  // namespace

Path parallel_logistic_path(const Dataset& data, const SolverConfig& config, int L,
                            bool with_intercept) {
  config.validate();
  if (config.support) throw ValidationError("the sharded engine does not run support-restricted paths");
  if (config.group_mode) throw ValidationError("the sharded engine has no group mode");

  const auto model = make_loss(LossKind::Logistic, data, with_intercept);
  const MatrixXd& X = model->data().X;
  const VectorXd& y = *model->data().y;
  const Index n = X.rows();
  const Index p = X.cols();
  const ShardPlan plan = plan_shards(p, L);

  const SolverState start = initial_state(*model);
  model->check(start.theta());
  SolverConfig resolved = config;
  double curvature = 0.0;
  if (!resolved.delta) {
    curvature = model->curvature_bound(start.theta());
    resolved.delta = resolve_delta(resolved.kappa, curvature);
  }
  const double kappa = resolved.kappa;
  const double delta = *resolved.delta;
  const bool has_alpha = model->with_intercept();
  const double max_abs_x = X.size() ? X.cwiseAbs().maxCoeff() : 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);

  Path meta = detail::make_path_meta(*model, resolved, delta, curvature);
  meta.delta_auto = !config.delta.has_value();
  detail::PathRecorder recorder(std::move(meta), resolved);
  recorder.start(start.alpha);

  // State shared across the barrier phases. Workers touch only their own
  // column range of z / beta_next and their own slot of the per-shard
  // buffers; everything else is written by the barrier completion step.
  long k = 0;
  VectorXd alpha = start.alpha;
  VectorXd z = VectorXd::Zero(p);
  VectorXd beta_cur = VectorXd::Zero(p);
  VectorXd beta_next = VectorXd::Zero(p);
  VectorXd w = VectorXd::Zero(n);
  VectorXd g(n);
  double f = 0.0;
  detail::ReproGrid grid;
  std::vector<ShardFlags> flags(static_cast<size_t>(L));
  std::vector<VectorXd> part1(static_cast<size_t>(L), VectorXd::Zero(n));
  std::vector<VectorXd> part2(static_cast<size_t>(L), VectorXd::Zero(n));
  bool stop = false;
  std::exception_ptr failure;

  auto residual_weights = [&] {
    const double a = has_alpha ? alpha(0) : 0.0;
    f = 0.0;
    for (Index i = 0; i < n; ++i) {
      g(i) = detail::logistic_weight(a, w(i), y(i), inv_n);
      f += g(i);
    }
  };
  residual_weights();

  auto last_valid = [&] { return Checkpoint{k, k * delta, alpha, beta_cur.sparseView(0.0, 0.0)}; };

  // After the dual/primal updates: alpha, checks, recording, summation grid.
  auto after_update = [&]() noexcept {
    try {
      bool bad_gradient = has_alpha && !std::isfinite(f);
      bool bad_iterate = false, moved = false;
      double max_abs_beta = 0.0;
      for (const auto& s : flags) {
        bad_gradient |= s.bad_gradient;
        bad_iterate |= s.bad_iterate;
        moved |= s.moved;
        max_abs_beta = std::max(max_abs_beta, s.max_abs_beta);
      }
      if (bad_gradient)
        throw PathDivergence("non-finite gradient at iteration " + std::to_string(k), last_valid());
      VectorXd next_alpha = alpha;
      if (has_alpha) next_alpha(0) = detail::intercept_update(alpha(0), kappa, delta, f);
      if (bad_iterate || !next_alpha.allFinite())
        throw PathDivergence("iterates became non-finite at iteration " + std::to_string(k + 1),
                             last_valid());
      if (!recorder.budget_known() && next_alpha == alpha && !moved)
        throw ConvergenceError(
            "no coefficient can enter: the iteration is stationary at k = " + std::to_string(k), 0.0);
      alpha = std::move(next_alpha);
      ++k;
      if (recorder.observe(k, alpha, beta_next)) {
        stop = true;
        return;
      }
      grid = detail::make_repro_grid(max_abs_x * max_abs_beta, p);
    } catch (...) {
      failure = std::current_exception();
      stop = true;
    }
  };

  // After the partial products: ordered all-reduce of w, new weights.
  auto after_reduce = [&]() noexcept {
    w = part1[0];
    VectorXd low = part2[0];
    for (int l = 1; l < L; ++l) {
      w += part1[static_cast<size_t>(l)];
      low += part2[static_cast<size_t>(l)];
    }
    w += low;
    beta_cur.swap(beta_next);
    residual_weights();
  };

  std::barrier update_barrier(L, after_update);
  std::barrier reduce_barrier(L, after_reduce);

  auto worker = [&](int l) {
    const auto [begin, end] = plan.ranges[static_cast<size_t>(l)];
    ShardFlags& mine = flags[static_cast<size_t>(l)];
    VectorXd& acc1 = part1[static_cast<size_t>(l)];
    VectorXd& acc2 = part2[static_cast<size_t>(l)];
    for (;;) {
      mine = ShardFlags{};
      for (Index j = begin; j < end; ++j) {
        const double grad = detail::column_dot(X.col(j).data(), g.data(), n);
        if (!std::isfinite(grad)) mine.bad_gradient = true;
        const double zj = detail::dual_update(z(j), delta, grad);
        if (zj != z(j)) mine.moved = true;
        z(j) = zj;
        const double bj = detail::primal_from_dual(zj, kappa);
        beta_next(j) = bj;
        if (!std::isfinite(zj) || !std::isfinite(bj)) mine.bad_iterate = true;
        mine.max_abs_beta = std::max(mine.max_abs_beta, std::abs(bj));
      }
      update_barrier.arrive_and_wait();
      if (stop) break;

      acc1.setZero();
      acc2.setZero();
      if (!grid.empty) {
        for (Index j = begin; j < end; ++j) {
          if (beta_next(j) == 0.0) continue;
          detail::repro_axpy(grid, beta_next(j), X.col(j).data(), acc1.data(), acc2.data(), n);
        }
      }
      reduce_barrier.arrive_and_wait();
    }
  };

  {
    std::vector<std::jthread> threads;
    threads.reserve(static_cast<size_t>(L));
    for (int l = 0; l < L; ++l) threads.emplace_back(worker, l);
  }
  if (failure) std::rethrow_exception(failure);
  return std::move(recorder).finish();
}

std::vector<ScalingRow> scaling_benchmark(const LogisticSpec& spec, const std::vector<int>& L_list,
                                          long iterations, const SolverConfig& base) {
  if (L_list.empty()) throw ValidationError("benchmark needs at least one shard count");
  if (iterations < 1) throw ValidationError("benchmark iteration budget must be at least 1");
  const Simulated sim = gen_logistic(spec);
  SolverConfig cfg = base;
  cfg.max_iters = iterations;
  std::vector<ScalingRow> rows;
  for (int L : L_list) {
    const auto t0 = std::chrono::steady_clock::now();
    const Path path = parallel_logistic_path(sim.data, cfg, L);
    const auto t1 = std::chrono::steady_clock::now();
    ScalingRow row;
    row.L = L;
    row.seconds = std::chrono::duration<double>(t1 - t0).count();
    row.path_hash = path_fingerprint(path);
    row.iterations = path.final().k;
    rows.push_back(row);
  }
  for (auto& row : rows) row.speedup = row.seconds > 0.0 ? rows.front().seconds / row.seconds : 0.0;
  return rows;
}

void write_scaling_csv(std::ostream& out, const std::vector<ScalingRow>& rows) {
  out << "L,seconds,speedup,iterations,path_hash\n";
  for (const auto& r : rows) {
    out << r.L << ',' << std::setprecision(6) << r.seconds << ',' << r.speedup << ','
        << r.iterations << ',' << std::hex << std::setw(16) << std::setfill('0') << r.path_hash
        << std::dec << std::setfill(' ') << '\n';
  }
}

}  // namespace glbi
