#include "doctest.h"

#include "glbi/errors.hpp"
#include "glbi/evaluate.hpp"
#include "glbi/losses.hpp"
#include "glbi/simulate.hpp"
#include "support/scenarios.hpp"

#include <cmath>
#include <set>

using namespace glbi;

namespace {

// Pairwise hand count of Mann-Whitney wins.
double count_auc(const std::vector<long>& e, const std::vector<Index>& S) {
  std::set<Index> in(S.begin(), S.end());
  double won = 0, pairs = 0;
  for (size_t a = 0; a < e.size(); ++a)
    for (size_t b = 0; b < e.size(); ++b) {
      if (!in.count(static_cast<Index>(a)) || in.count(static_cast<Index>(b))) continue;
      pairs += 1;
      won += e[a] < e[b] ? 1.0 : e[a] == e[b] ? 0.5 : 0.0;
    }
  return won / pairs;
}

Dataset separable_toy(Index n, std::uint64_t seed) {
  Philox rng(seed);
  Dataset d{oracle::random_normal(rng, n, 6), VectorXd(n)};
  for (Index i = 0; i < n; ++i) (*d.y)(i) = d.X(i, 0) + d.X(i, 1) > 0 ? 1.0 : -1.0;
  return d;
}

}  // namespace

TEST_CASE("path_auc") {
  CHECK(path_auc({1, 2, 50, 60}, {0, 1}) == 1.0);
  CHECK(path_auc({kNeverEntered, kNeverEntered, kNeverEntered}, {1}) == 0.5);
  CHECK(path_auc({3, 5, 4, kNeverEntered}, {0, 1}) == 0.75);
  CHECK(count_auc({3, 5, 4, kNeverEntered}, {0, 1}) == 0.75);
  CHECK_THROWS_AS(path_auc({1, 2}, {}), ValidationError);
  CHECK_THROWS_AS(path_auc({1, 2}, {0, 1}), ValidationError);

  Philox rng(3);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<long> e(12);
    for (auto& v : e) v = rng.below(4) == 0 ? kNeverEntered : static_cast<long>(rng.below(20));
    std::vector<Index> S;
    for (Index j = 0; j < 12; ++j)
      if (rng.coin()) S.push_back(j);
    if (S.empty() || S.size() == 12) continue;
    const double a = path_auc(e, S);
    CHECK(a == doctest::Approx(count_auc(e, S)).epsilon(1e-15));
    // Strictly monotone reindexing keeps every comparison.
    std::vector<long> f(e);
    for (auto& v : f)
      if (v != kNeverEntered) v = 3 * v * v + 7;
    CHECK(path_auc(f, S) == a);
  }
}

TEST_CASE("fold_assignment partitions indices") {
  for (int K : {2, 5, 7}) {
    const auto f = fold_assignment(23, K, 4);
    CHECK(f.size() == 23);
    std::vector<int> sizes(static_cast<size_t>(K), 0);
    for (int v : f) {
      REQUIRE(v >= 0);
      REQUIRE(v < K);
      ++sizes[static_cast<size_t>(v)];
    }
    const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
    CHECK(*hi - *lo <= 1);
    CHECK(fold_assignment(23, K, 4) == f);
  }
  CHECK_THROWS_AS(fold_assignment(5, 1, 1), ValidationError);
  CHECK_THROWS_AS(fold_assignment(5, 6, 1), ValidationError);
}

TEST_CASE("misclassification") {
  MatrixXd X(4, 1);
  X << -1, 0, 1, 2;
  const Dataset d{X, VectorXd(Eigen::Vector4d(-1, 1, -1, 1))};
  const Theta th{VectorXd::Zero(1), VectorXd::Ones(1)};
  // Predictions -1, +1 (ties go to +1), +1, +1.
  CHECK(misclassification(d, th) == 0.25);
}

TEST_CASE("kfold_cv_logistic") {
  SolverConfig cfg;
  cfg.multiple = 100;
  CVOptions opt;
  opt.grid_size = 20;
  SUBCASE("separable toy reaches small error") {
    const CVReport r = kfold_cv_logistic(separable_toy(150, 1), cfg, opt);
    CHECK(r.selected_score() <= 0.05);
    CHECK(r.score_curve.size() == 20);
    CHECK(r.grid.size() == 20);
    CHECK(r.skipped_folds.empty());
    for (size_t g = 0; g < r.score_curve.size(); ++g) {
      CHECK(r.score_curve[r.selected_index] <= r.score_curve[g]);
      if (g < r.selected_index) CHECK(r.score_curve[g] > r.score_curve[r.selected_index]);
    }
    for (size_t g = 1; g < r.grid.size(); ++g) CHECK(r.grid[g] > r.grid[g - 1]);
    CHECK(r.selected_k == r.grid_k[r.selected_index]);
    CHECK(r.selected.beta.size() == 6);
  }
  SUBCASE("labels independent of the design") {
    Philox rng(77);
    const Dataset d{oracle::random_normal(rng, 200, 5), oracle::random_labels(rng, 200)};
    const CVReport r = kfold_cv_logistic(d, cfg, opt);
    CHECK(std::abs(r.selected_score() - 0.5) <= 0.1);
  }
  SUBCASE("leave-one-out on n = 12") {
    const Dataset d = separable_toy(12, 2);
    CVOptions loo = opt;
    loo.folds = 12;
    loo.grid_size = 5;
    CVReport r;
    CHECK_NOTHROW(r = kfold_cv_logistic(d, cfg, loo));
    CHECK(r.folds == 12);
  }
  SUBCASE("deterministic") {
    const Dataset d = separable_toy(80, 3);
    const CVReport a = kfold_cv_logistic(d, cfg, opt), b = kfold_cv_logistic(d, cfg, opt);
    CHECK(a.score_curve == b.score_curve);
    CHECK(a.selected_index == b.selected_index);
    CHECK(path_fingerprint(a.full_path) == path_fingerprint(b.full_path));
  }
  SUBCASE("single-class training folds are skipped with a warning") {
    Dataset d = separable_toy(30, 4);
    d.y->setConstant(-1.0);
    (*d.y)(7) = 1.0;
    (*d.y)(8) = 1.0;
    d.X(7, 0) = d.X(8, 0) = 5.0;
    CVOptions o = opt;
    o.folds = 3;
    const auto folds = fold_assignment(30, 3, o.seed);
    REQUIRE(folds[7] == folds[8]);  // both positives in one fold
    const CVReport r = kfold_cv_logistic(d, cfg, o);
    CHECK(r.skipped_folds == std::vector<int>{folds[7]});
    CHECK_FALSE(r.warnings.empty());
    CHECK(std::isnan(r.fold_scores[static_cast<size_t>(folds[7])][0]));
  }
  SUBCASE("leave-one-out with a single minority sample") {
    Dataset d = separable_toy(20, 5);
    d.y->setConstant(1.0);
    (*d.y)(0) = -1.0;
    CVOptions o = opt;
    o.folds = 20;
    // Every training complement that drops sample 0 is single-class; the
    // rest still have both classes, so only fold of sample 0 is skipped.
    const CVReport r = kfold_cv_logistic(d, cfg, o);
    CHECK(r.skipped_folds.size() == 1);
  }
  SUBCASE("all folds degenerate") {
    Dataset d = separable_toy(20, 5);
    d.y->setConstant(1.0);
    CHECK_THROWS_AS(kfold_cv_logistic(d, cfg, opt), ValidationError);
  }
  SUBCASE("invalid options") {
    const Dataset d = separable_toy(10, 6);
    CVOptions o = opt;
    o.folds = 11;
    CHECK_THROWS_AS(kfold_cv_logistic(d, cfg, o), ValidationError);
  }
}

TEST_CASE("d2") {
  SUBCASE("all-ones sample") {
    const MatrixXd D = d2(MatrixXd::Ones(5, 3));
    for (Index a = 0; a < 3; ++a)
      for (Index b = 0; b < 3; ++b) {
        CHECK(D(2 * a, 2 * b) == 1.0);
        CHECK(D(2 * a, 2 * b + 1) == 0.0);
        CHECK(D(2 * a + 1, 2 * b) == 0.0);
        CHECK(D(2 * a + 1, 2 * b + 1) == 0.0);
      }
  }
  SUBCASE("hand sample") {
    MatrixXd X(2, 2);
    X << 1, -1, 1, 1;
    MatrixXd expect(4, 4);
    expect << 1, 0, .5, .5,  //
        0, 0, 0, 0,          //
        .5, 0, .5, 0,        //
        .5, 0, 0, .5;
    CHECK(d2(X) == expect);
  }
  SUBCASE("block invariants on random samples") {
    Philox rng(9);
    for (int rep = 0; rep < 20; ++rep) {
      const Index p = 2 + static_cast<Index>(rng.below(6));
      const MatrixXd D = d2(oracle::random_spins(rng, 1 + static_cast<Index>(rng.below(40)), p));
      for (Index a = 0; a < p; ++a)
        for (Index b = 0; b < p; ++b) {
          const MatrixXd B = D.block(2 * a, 2 * b, 2, 2);
          CHECK(std::abs(B.sum() - 1.0) <= 1e-12);
          CHECK(B == D.block(2 * b, 2 * a, 2, 2).transpose());
          if (a == b) CHECK((B(0, 1) == 0.0 && B(1, 0) == 0.0));
        }
    }
  }
  CHECK_THROWS_AS(d2(MatrixXd::Zero(2, 2)), ValidationError);
}

TEST_CASE("mdc") {
  Philox rng(10);
  const MatrixXd X = oracle::random_spins(rng, 30, 4);
  CHECK(std::abs(mdc(X, X) - 1.0) <= 1e-12);
  MatrixXd skew = MatrixXd::Ones(30, 4);
  for (Index i = 0; i < 10; ++i) skew(i, i % 4) = -1.0;
  CHECK(mdc(skew, -skew) < 1.0);
  CHECK_THROWS_AS(mdc(X, X.topRows(10)), ShapeError);

  SUBCASE("independent samples from one model correlate strongly") {
    IsingSpec spec;
    const Theta t = grid_ising_params(spec);
    GibbsOptions a, b;
    a.n = b.n = 500;
    a.seed = b.seed = 5;
    a.stream = 1;
    b.stream = 2;
    CHECK(mdc(gibbs_spins(t, 36, a), gibbs_spins(t, 36, b)) >= 0.95);
  }
}

TEST_CASE("kfold_cv_ising_mdc") {
  IsingSpec spec;
  spec.N = 3, spec.n = 200, spec.seed = 2;
  const Dataset d = gibbs_sample(grid_ising_params(spec), spec);
  SolverConfig cfg;
  cfg.multiple = 50;
  CVOptions o;
  o.grid_size = 6;
  const CVReport a = kfold_cv_ising_mdc(d, LossKind::IsingMPF, cfg, o);
  CHECK(a.metric == "mdc");
  CHECK(a.maximize);
  CHECK(a.score_curve.size() == 6);
  for (double v : a.score_curve) CHECK(a.score_curve[a.selected_index] >= v);
  const CVReport b = kfold_cv_ising_mdc(d, LossKind::IsingMPF, cfg, o);
  CHECK(a.score_curve == b.score_curve);
  CHECK_THROWS_AS(kfold_cv_ising_mdc(d, LossKind::Logistic, cfg, o), ValidationError);
}

TEST_CASE("irr_constant") {
  CHECK(irr_constant(MatrixXd::Identity(6, 6), {0, 3}) == 0.0);
  const MatrixXd T = toeplitz_covariance(80, 0.25);
  std::vector<Index> S;
  for (Index j = 0; j < 20; ++j) S.push_back(j);
  const double v = irr_constant(T, S);
  CHECK(v < 1.0);
  CHECK(v > 0.0);
  CHECK(irr_constant(3.5 * T, S) == doctest::Approx(v).epsilon(1e-12));
  // Direct product for a small case.
  const MatrixXd T4 = toeplitz_covariance(4, 0.5);
  const MatrixXd prod = T4.block(2, 0, 2, 2) * T4.block(0, 0, 2, 2).inverse();
  CHECK(irr_constant(T4, {0, 1}) == doctest::Approx(prod.cwiseAbs().rowwise().sum().maxCoeff()).epsilon(1e-12));
  CHECK_THROWS_AS(irr_constant(MatrixXd::Ones(3, 3), {0, 1}), DomainError);
}

TEST_CASE("sign_consistency_scan") {
  SUBCASE("orthogonal strong signal") {
    const MatrixXd X = scenario::hadamard_design(4);  // 16 x 15
    VectorXd truth = VectorXd::Zero(15);
    truth(2) = 3.0, truth(5) = -2.0, truth(11) = 2.5;
    const auto m = make_loss(LossKind::Linear, Dataset{X, VectorXd(X * truth)});
    const Path path = run_path(*m, SolverConfig{});
    const SignScan s = sign_consistency_scan(path, truth);
    REQUIRE(s.first_match_k.has_value());
    CHECK(s.clean_through_k >= *s.first_match_k);
    CHECK(s.clean_through_k == path.final().k);
  }
  SUBCASE("never matching") {
    const auto m = make_loss(LossKind::Linear,
                             Dataset{MatrixXd::Identity(2, 2), VectorXd(Eigen::Vector2d(3.0, 0.0))}, false);
    SolverConfig c;
    c.delta = 0.1, c.max_iters = 30;
    const Path path = run_path(*m, c);
    const SignScan s = sign_consistency_scan(path, VectorXd(Eigen::Vector2d(0.0, -1.0)));
    CHECK_FALSE(s.first_match_k.has_value());
    CHECK(s.clean_through_k == 6);
    const SignScan e = sign_consistency_scan(path, VectorXd::Zero(2));
    CHECK(e.first_match_k == 0L);
  }
}

TEST_CASE("support_of") {
  CHECK(support_of(VectorXd(Eigen::Vector4d(0, 1, 0, -2))) == std::vector<Index>{1, 3});
  CHECK(support_of(VectorXd(Eigen::Vector4d(0, 1, 0, 0)), 2) == std::vector<Index>{0});
}
