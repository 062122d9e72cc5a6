#include "glbi/evaluate.hpp"

#include "glbi/errors.hpp"
#include "glbi/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace glbi {

double path_auc(const std::vector<long>& entry_iteration, const std::vector<Index>& true_support) {
  const Index units = static_cast<Index>(entry_iteration.size());
  std::vector<char> positive(entry_iteration.size(), 0);
  for (Index u : true_support) {
    if (u < 0 || u >= units) throw ValidationError("support index " + std::to_string(u) + " out of range");
    positive[static_cast<size_t>(u)] = 1;
  }
  const auto pos = std::count(positive.begin(), positive.end(), 1);
  const auto neg = static_cast<long>(units) - pos;
  if (pos == 0 || neg == 0) throw ValidationError("AUC is undefined for an empty or full true support");

  double wins = 0.0;
  for (Index a = 0; a < units; ++a) {
    if (!positive[static_cast<size_t>(a)]) continue;
    const long ea = entry_iteration[static_cast<size_t>(a)];
    for (Index b = 0; b < units; ++b) {
      if (positive[static_cast<size_t>(b)]) continue;
      const long eb = entry_iteration[static_cast<size_t>(b)];
      if (ea < eb) wins += 1.0;
      else if (ea == eb) wins += 0.5;
    }
  }
  return wins / (static_cast<double>(pos) * static_cast<double>(neg));
}

double path_auc(const Path& path, const std::vector<Index>& true_support) {
  return path_auc(path.entry_iteration, true_support);
}

std::vector<Index> support_of(const VectorXd& beta, Index unit_size) {
  if (unit_size < 1 || beta.size() % unit_size != 0) throw ShapeError("unit size does not divide beta");
  std::vector<Index> out;
  for (Index u = 0; u < beta.size() / unit_size; ++u)
    if ((beta.segment(u * unit_size, unit_size).array() != 0.0).any()) out.push_back(u);
  return out;
}

std::vector<int> fold_assignment(Index n, int K, std::uint64_t seed) {
  if (K < 2 || static_cast<Index>(K) > n)
    throw ValidationError("fold count K must satisfy 2 <= K <= n (n = " + std::to_string(n) + ")");
  std::vector<Index> perm(static_cast<size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  Philox rng(seed, 0);
  for (Index i = n - 1; i > 0; --i) {
    const auto j = static_cast<Index>(rng.below(static_cast<std::uint64_t>(i + 1)));
    std::swap(perm[static_cast<size_t>(i)], perm[static_cast<size_t>(j)]);
  }
  std::vector<int> fold(static_cast<size_t>(n));
  for (Index i = 0; i < n; ++i) fold[static_cast<size_t>(perm[static_cast<size_t>(i)])] = static_cast<int>(i % K);
  return fold;
}

double misclassification(const Dataset& data, const Theta& theta) {
  validate_logistic(data);
  if (theta.beta.size() != data.p()) throw ShapeError("coefficient length does not match the design");
  const double a = theta.alpha.size() ? theta.alpha(0) : 0.0;
  const VectorXd eta = (data.X * theta.beta).array() + a;
  const VectorXd& y = *data.y;
  Index wrong = 0;
  for (Index i = 0; i < data.n(); ++i) {
    const double pred = eta(i) >= 0.0 ? 1.0 : -1.0;
    if (pred != y(i)) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(data.n());
}

namespace {

Dataset take_rows(const Dataset& data, const std::vector<Index>& rows) {
  Dataset out;
  out.X.resize(static_cast<Index>(rows.size()), data.p());
  VectorXd y(static_cast<Index>(rows.size()));
  for (size_t r = 0; r < rows.size(); ++r) {
    out.X.row(static_cast<Index>(r)) = data.X.row(rows[r]);
    if (data.y) y(static_cast<Index>(r)) = (*data.y)(rows[r]);
  }
  if (data.y) out.y = std::move(y);
  return out;
}

void check_options(const CVOptions& options, Index n) {
  if (options.folds < 2 || static_cast<Index>(options.folds) > n)
    throw ValidationError("fold count K must satisfy 2 <= K <= n");
  if (options.grid_size < 1) throw ValidationError("grid size must be at least 1");
}

void fill_grid(CVReport& report, int grid_size) {
  const Path& full = report.full_path;
  const long k_lo = std::max<long>(full.k0, 1);
  const long k_hi = std::max(full.max_iters, k_lo);
  report.grid.resize(static_cast<size_t>(grid_size));
  report.grid_k.resize(static_cast<size_t>(grid_size));
  for (int g = 0; g < grid_size; ++g) {
    double k;
    if (grid_size == 1) k = static_cast<double>(k_lo);
    else if (g == grid_size - 1) k = static_cast<double>(k_hi);
    else
      k = static_cast<double>(k_lo) *
          std::pow(static_cast<double>(k_hi) / static_cast<double>(k_lo),
                   static_cast<double>(g) / static_cast<double>(grid_size - 1));
    report.grid[static_cast<size_t>(g)] = k * full.delta;
    report.grid_k[static_cast<size_t>(g)] = full.at_time(k * full.delta).k;
  }
}

// Pins delta and the iteration budget of a fold run so that its path
// reaches the last grid time.
SolverConfig fold_config(const LossModel& model, const SolverConfig& config, double t_max) {
  SolverConfig fc = config;
  if (!fc.delta) {
    const Theta start = initial_state(model).theta();
    fc.delta = resolve_delta(fc.kappa, model.curvature_bound(start));
  }
  const double budget = std::ceil(t_max / *fc.delta - 1e-9);
  fc.max_iters = std::clamp<long>(static_cast<long>(budget), 1L, fc.hard_cap);
  return fc;
}

void finalize(CVReport& report) {
  const size_t G = report.grid.size();
  report.score_curve.assign(G, 0.0);
  int used = 0;
  for (int f = 0; f < report.folds; ++f) {
    if (std::find(report.skipped_folds.begin(), report.skipped_folds.end(), f) != report.skipped_folds.end())
      continue;
    ++used;
    for (size_t g = 0; g < G; ++g) report.score_curve[g] += report.fold_scores[static_cast<size_t>(f)][g];
  }
  if (used == 0) throw ValidationError("every cross-validation fold is degenerate");
  for (double& s : report.score_curve) s /= used;

  size_t best = 0;
  for (size_t g = 1; g < G; ++g) {
    const bool better = report.maximize ? report.score_curve[g] > report.score_curve[best]
                                        : report.score_curve[g] < report.score_curve[best];
    if (better) best = g;
  }
  report.selected_index = best;
  report.selected_t = report.grid[best];
  const Checkpoint& c = report.full_path.at_time(report.selected_t);
  report.selected_k = c.k;
  report.selected = c.theta();
}

template <class ScoreFold>
CVReport cross_validate(const Dataset& data, LossKind kind, const SolverConfig& config,
                        const CVOptions& options, std::string metric, bool maximize,
                        ScoreFold&& score_fold) {
  check_options(options, data.n());
  config.validate();
  CVReport report;
  report.metric = std::move(metric);
  report.maximize = maximize;
  report.folds = options.folds;
  {
    auto full_model = make_loss(kind, data);
    report.full_path = run_path(*full_model, config);
  }
  fill_grid(report, options.grid_size);

  const auto fold = fold_assignment(data.n(), options.folds, options.seed);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  report.fold_scores.assign(static_cast<size_t>(options.folds),
                            std::vector<double>(report.grid.size(), nan));
  for (int f = 0; f < options.folds; ++f) {
    std::vector<Index> train, test;
    for (Index i = 0; i < data.n(); ++i) (fold[static_cast<size_t>(i)] == f ? test : train).push_back(i);
    const Dataset train_data = take_rows(data, train);
    const Dataset test_data = take_rows(data, test);
    auto skip = [&](const std::string& why) {
      report.skipped_folds.push_back(f);
      report.warnings.push_back("fold " + std::to_string(f + 1) + " skipped: " + why);
    };
    if (kind == LossKind::Logistic) {
      const auto plus = (train_data.y->array() > 0.0).count();
      if (plus == 0 || plus == train_data.n()) {
        skip("training labels contain a single class");
        continue;
      }
    }
    try {
      auto model = make_loss(kind, train_data);
      const SolverConfig fc = fold_config(*model, config, report.grid.back());
      const Path fold_path = run_path(*model, fc);
      std::vector<double> scores(report.grid.size());
      for (size_t g = 0; g < report.grid.size(); ++g)
        scores[g] = score_fold(f, g, test_data, fold_path.at_time(report.grid[g]).theta());
      report.fold_scores[static_cast<size_t>(f)] = std::move(scores);
    } catch (const ConvergenceError& e) {
      skip(e.what());
    } catch (const DomainError& e) {
      skip(e.what());
    }
  }
  finalize(report);
  return report;
}

}  // namespace

CVReport kfold_cv_logistic(const Dataset& data, const SolverConfig& config, const CVOptions& options) {
  validate_logistic(data);
  const auto plus = (data.y->array() > 0.0).count();
  if (plus == 0 || plus == data.n())
    throw ValidationError("labels contain a single class; every cross-validation fold is degenerate");
  return cross_validate(data, LossKind::Logistic, config, options, "misclassification", false,
                        [](int, size_t, const Dataset& test, const Theta& theta) {
                          return misclassification(test, theta);
                        });
}

MatrixXd d2(const MatrixXd& X) {
  validate_spins(X);
  const Index n = X.rows();
  const Index p = X.cols();
  if (n == 0) throw DomainError("d2 needs at least one sample");
  const MatrixXd up = (X.array() > 0.0).cast<double>().matrix();
  const MatrixXd down = (X.array() < 0.0).cast<double>().matrix();
  const MatrixXd pp = up.transpose() * up;
  const MatrixXd pm = up.transpose() * down;
  const MatrixXd mp = down.transpose() * up;
  const MatrixXd mm = down.transpose() * down;
  const double scale = static_cast<double>(n);
  MatrixXd out(2 * p, 2 * p);
  for (Index a = 0; a < p; ++a)
    for (Index b = 0; b < p; ++b) {
      out(2 * a, 2 * b) = pp(a, b) / scale;
      out(2 * a, 2 * b + 1) = pm(a, b) / scale;
      out(2 * a + 1, 2 * b) = mp(a, b) / scale;
      out(2 * a + 1, 2 * b + 1) = mm(a, b) / scale;
    }
  return out;
}

double mdc(const MatrixXd& X1, const MatrixXd& X2) {
  if (X1.rows() != X2.rows() || X1.cols() != X2.cols())
    throw ShapeError("mdc needs two samples of identical size");
  const MatrixXd a = d2(X1);
  const MatrixXd b = d2(X2);
  const Eigen::ArrayXd va = Eigen::Map<const VectorXd>(a.data(), a.size()).array() - a.mean();
  const Eigen::ArrayXd vb = Eigen::Map<const VectorXd>(b.data(), b.size()).array() - b.mean();
  const double saa = (va * va).sum();
  const double sbb = (vb * vb).sum();
  if (!(saa > 0.0) || !(sbb > 0.0)) throw DomainError("mdc is undefined: a d2 vector has zero variance");
  const double r = (va * vb).sum() / std::sqrt(saa * sbb);
  return std::clamp(r, -1.0, 1.0);
}

CVReport kfold_cv_ising_mdc(const Dataset& data, LossKind kind, const SolverConfig& config,
                            const CVOptions& options, const MdcOptions& sampler) {
  if (!is_ising(kind)) throw ValidationError("MDC cross-validation needs an Ising loss");
  validate_spins(data.X);
  const Index p = data.p();
  return cross_validate(
      data, kind, config, options, "mdc", true,
      [&](int f, size_t g, const Dataset& test, const Theta& theta) {
        GibbsOptions opt;
        opt.n = test.n();
        opt.burn_in = sampler.burn_in;
        opt.thin = sampler.thin;
        opt.seed = options.seed;
        opt.stream = (static_cast<std::uint64_t>(f + 1) << 32) | static_cast<std::uint64_t>(g);
        return mdc(test.X, gibbs_spins(theta, p, opt));
      });
}

double irr_constant(const MatrixXd& sigma, const std::vector<Index>& support) {
  const Index p = sigma.rows();
  if (sigma.cols() != p) throw ShapeError("covariance matrix must be square");
  std::vector<char> in(static_cast<size_t>(p), 0);
  for (Index j : support) {
    if (j < 0 || j >= p) throw ValidationError("support index " + std::to_string(j) + " out of range");
    in[static_cast<size_t>(j)] = 1;
  }
  std::vector<Index> S, Sc;
  for (Index j = 0; j < p; ++j) (in[static_cast<size_t>(j)] ? S : Sc).push_back(j);
  if (S.empty() || Sc.empty()) return 0.0;

  const MatrixXd A = sigma(S, S);
  Eigen::FullPivLU<MatrixXd> lu(A);
  if (!lu.isInvertible()) throw DomainError("Sigma restricted to the support is singular");
  // Sigma_{S,S} is symmetric, so Sigma_{Sc,S} A^{-1} = (A^{-1} Sigma_{S,Sc})'.
  const MatrixXd M = lu.solve(MatrixXd(sigma(S, Sc))).transpose();
  return M.cwiseAbs().rowwise().sum().maxCoeff();
}

SignScan sign_consistency_scan(const Path& path, const VectorXd& truth_beta) {
  if (truth_beta.size() != path.shape.beta_dim) throw ShapeError("truth length does not match the path");
  if (path.checkpoints.empty()) throw ValidationError("path has no checkpoints");
  const Index width = path.unit_size();
  const auto truth_units = support_of(truth_beta, width);
  std::vector<char> in(static_cast<size_t>(path.units()), 0);
  for (Index u : truth_units) in[static_cast<size_t>(u)] = 1;

  SignScan out;
  long first_fp = kNeverEntered;
  for (Index u = 0; u < path.units(); ++u)
    if (!in[static_cast<size_t>(u)]) first_fp = std::min(first_fp, path.entry_iteration[static_cast<size_t>(u)]);
  out.clean_through_k = first_fp == kNeverEntered ? path.final().k : first_fp - 1;

  auto sgn = [](double v) { return (v > 0.0) - (v < 0.0); };
  for (const auto& c : path.checkpoints) {
    const VectorXd b(c.beta);
    bool match = true;
    for (Index i = 0; i < b.size() && match; ++i) match = sgn(b(i)) == sgn(truth_beta(i));
    if (match) {
      out.first_match_k = c.k;
      break;
    }
  }
  return out;
}

}  // namespace glbi
