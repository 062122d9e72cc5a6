#include "doctest.h"

#include "glbi/errors.hpp"
#include "glbi/losses.hpp"
#include "glbi/parallel.hpp"
#include "glbi/simulate.hpp"

#include <sstream>

using namespace glbi;

namespace {

void check_same(const Path& a, const Path& b) {
  REQUIRE(a.checkpoints.size() == b.checkpoints.size());
  CHECK(a.delta == b.delta);
  CHECK(a.k0 == b.k0);
  CHECK(a.max_iters == b.max_iters);
  CHECK(a.entry_iteration == b.entry_iteration);
  for (size_t i = 0; i < a.checkpoints.size(); ++i) {
    const auto& x = a.checkpoints[i];
    const auto& y = b.checkpoints[i];
    CHECK(x.k == y.k);
    CHECK(x.t == y.t);
    CHECK(x.alpha == y.alpha);
    CHECK(VectorXd(x.beta) == VectorXd(y.beta));
  }
  CHECK(path_fingerprint(a) == path_fingerprint(b));
}

}  // namespace

TEST_CASE("plan_shards") {
  const ShardPlan p = plan_shards(10, 4);
  REQUIRE(p.shards() == 4);
  std::vector<Index> sizes;
  for (const auto& [b, e] : p.ranges) sizes.push_back(e - b);
  CHECK(sizes == std::vector<Index>{3, 3, 2, 2});
  const ShardPlan one = plan_shards(7, 1);
  CHECK(one.ranges == std::vector<std::pair<Index, Index>>{{0, 7}});
  for (Index n : {1, 5, 17, 64})
    for (int L = 1; L <= n && L <= 9; ++L) {
      const ShardPlan s = plan_shards(n, L);
      Index next = 0, lo = n, hi = 0;
      for (const auto& [b, e] : s.ranges) {
        CHECK(b == next);
        CHECK(e > b);
        next = e;
        lo = std::min(lo, e - b);
        hi = std::max(hi, e - b);
      }
      CHECK(next == n);
      CHECK(hi - lo <= 1);
    }
  CHECK_THROWS_AS(plan_shards(3, 4), ValidationError);
  CHECK_THROWS_AS(plan_shards(3, 0), ValidationError);
}

TEST_CASE("sharded paths equal the serial path bit for bit") {
  LogisticSpec spec;
  spec.p = 37, spec.s = 6, spec.n = 300, spec.seed = 21;
  const Simulated sim = gen_logistic(spec);
  for (bool intercept : {true, false}) {
    CAPTURE(intercept);
    SolverConfig cfg;
    cfg.max_iters = 1500;
    const auto model = make_loss(LossKind::Logistic, sim.data, intercept);
    const Path serial = run_path(*model, cfg);
    for (int L : {1, 2, 3, 4, 7}) {
      CAPTURE(L);
      check_same(serial, parallel_logistic_path(sim.data, cfg, L, intercept));
    }
  }
  SUBCASE("auto budget and fixed delta") {
    SolverConfig cfg;
    cfg.delta = 0.2;
    cfg.multiple = 20;
    const auto model = make_loss(LossKind::Logistic, sim.data);
    const Path serial = run_path(*model, cfg);
    for (int L : {2, 4}) check_same(serial, parallel_logistic_path(sim.data, cfg, L));
    CHECK(serial.max_iters == 20 * serial.k0);
    CHECK_FALSE(serial.delta_auto);
  }
  SUBCASE("strided recording") {
    SolverConfig cfg;
    cfg.max_iters = 999;
    cfg.checkpoint_stride = 10;
    const auto model = make_loss(LossKind::Logistic, sim.data);
    check_same(run_path(*model, cfg), parallel_logistic_path(sim.data, cfg, 4));
  }
}

TEST_CASE("sharded engine errors") {
  LogisticSpec spec;
  spec.p = 6, spec.s = 2, spec.n = 50;
  const Simulated sim = gen_logistic(spec);
  SolverConfig cfg;
  cfg.max_iters = 10;
  CHECK_THROWS_AS(parallel_logistic_path(sim.data, cfg, 7), ValidationError);
  SolverConfig sup = cfg;
  sup.support = std::vector<Index>{0};
  CHECK_THROWS_AS(parallel_logistic_path(sim.data, sup, 2), ValidationError);
  Dataset bad = sim.data;
  (*bad.y)(0) = 0.5;
  CHECK_THROWS_AS(parallel_logistic_path(bad, cfg, 2), ValidationError);

  SUBCASE("divergence surfaces from the workers") {
    SolverConfig huge = cfg;
    huge.delta = 1e306;
    huge.max_iters = 100;
    CHECK_THROWS_AS(parallel_logistic_path(sim.data, huge, 3), DivergenceError);
    CHECK_THROWS_AS(run_path(*make_loss(LossKind::Logistic, sim.data), huge), DivergenceError);
  }
  SUBCASE("stationary start") {
    Dataset flat{MatrixXd::Zero(4, 3), VectorXd(Eigen::Vector4d(1, -1, 1, -1))};
    SolverConfig c;
    c.delta = 0.1;
    CHECK_THROWS_AS(parallel_logistic_path(flat, c, 2), ConvergenceError);
  }
}

TEST_CASE("scaling benchmark table") {
  LogisticSpec spec;
  spec.p = 40, spec.s = 5, spec.n = 200;
  const auto rows = scaling_benchmark(spec, {1, 2, 4}, 50);
  REQUIRE(rows.size() == 3);
  for (const auto& r : rows) {
    CHECK(r.path_hash == rows[0].path_hash);
    CHECK(r.iterations == 50);
  }
  CHECK(rows[0].speedup == 1.0);
  std::ostringstream out;
  write_scaling_csv(out, rows);
  CHECK(out.str().rfind("L,seconds,speedup,iterations,path_hash\n1,", 0) == 0);
  CHECK_THROWS_AS(scaling_benchmark(spec, {}, 10), ValidationError);
}
