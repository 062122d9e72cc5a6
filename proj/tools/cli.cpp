#include "cli.hpp"

#include "glbi/errors.hpp"
#include "glbi/evaluate.hpp"
#include "glbi/io.hpp"
#include "glbi/losses.hpp"
#include "glbi/parallel.hpp"
#include "glbi/simulate.hpp"
#include "glbi/solver.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace glbi::cli {

namespace {

using io::Json;
namespace fs = std::filesystem;

std::string num(double v) { return io::format_double(v); }

std::string join_path(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

/// "1-20,25" (1-based, inclusive ranges) -> 0-based indices.
std::vector<Index> parse_index_list(const std::string& text, const std::string& flag) {
  std::vector<Index> out;
  std::stringstream ss(text);
  std::string item;
  auto bad = [&] { return ValidationError(flag + ": cannot parse index list '" + text + "'"); };
  auto to_index = [&](const std::string& s) {
    std::size_t used = 0;
    long v = 0;
    try {
      v = std::stol(s, &used);
    } catch (const std::exception&) {
      throw bad();
    }
    if (used != s.size() || v < 1) throw bad();
    return static_cast<Index>(v - 1);
  };
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto dash = item.find('-');
    if (dash == std::string::npos) {
      out.push_back(to_index(item));
    } else {
      const Index a = to_index(item.substr(0, dash));
      const Index b = to_index(item.substr(dash + 1));
      if (b < a) throw bad();
      for (Index i = a; i <= b; ++i) out.push_back(i);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<int> parse_int_list(const std::string& text, const std::string& flag) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size() || v < 1)
      throw ValidationError(flag + ": expected a comma-separated list of positive integers");
    out.push_back(v);
  }
  if (out.empty()) throw ValidationError(flag + ": empty list");
  return out;
}

// ---------------------------------------------------------------------------
// Solver flags shared by fit and the CV commands.

struct SolverFlags {
  double kappa = 10.0;
  std::string delta = "auto";
  std::string max_iters = "auto";
  long multiple = 1000;
  std::string stride = "auto";
  bool group_mode = false;
  bool no_intercept = false;

  void add(CLI::App* app) {
    app->add_option("--kappa", kappa, "Scale of the primal map beta = kappa * S(z, 1)")->capture_default_str();
    app->add_option("--delta", delta, "Step size, or 'auto' for 1 / (kappa * curvature bound)")
        ->capture_default_str();
    app->add_option("--max-iters", max_iters, "Iteration budget, or 'auto' for multiple * k0")
        ->capture_default_str();
    app->add_option("--multiple", multiple, "Budget multiple m in m * k0")->capture_default_str();
    app->add_option("--stride", stride, "Checkpoint stride, or 'auto'")->capture_default_str();
    app->add_flag("--group-mode", group_mode, "Block soft-thresholding over q x q coupling blocks");
    app->add_flag("--no-intercept", no_intercept, "Fit without the unpenalized intercept block");
  }

  SolverConfig resolve() const {
    SolverConfig c;
    c.kappa = kappa;
    c.multiple = multiple;
    c.group_mode = group_mode;
    if (delta != "auto") {
      try {
        std::size_t used = 0;
        const double d = std::stod(delta, &used);
        if (used != delta.size() || !(d > 0.0) || !std::isfinite(d)) throw std::invalid_argument("");
        c.delta = d;
      } catch (const std::exception&) {
        throw ValidationError("--delta: expected 'auto' or a positive number, got '" + delta + "'");
      }
    }
    auto positive_long = [](const std::string& s, const std::string& flag) {
      try {
        std::size_t used = 0;
        const long v = std::stol(s, &used);
        if (used != s.size() || v < 1) throw std::invalid_argument("");
        return v;
      } catch (const std::exception&) {
        throw ValidationError(flag + ": expected 'auto' or a positive integer, got '" + s + "'");
      }
    };
    if (max_iters != "auto") c.max_iters = positive_long(max_iters, "--max-iters");
    if (stride != "auto") c.checkpoint_stride = positive_long(stride, "--stride");
    if (!(kappa > 0.0)) throw ValidationError("--kappa: must be positive");
    if (multiple < 1) throw ValidationError("--multiple: must be at least 1");
    return c;
  }

  void argv(std::vector<std::string>& a) const {
    a.insert(a.end(), {"--kappa", num(kappa), "--delta", delta, "--max-iters", max_iters, "--multiple",
                       std::to_string(multiple), "--stride", stride});
    if (group_mode) a.push_back("--group-mode");
    if (no_intercept) a.push_back("--no-intercept");
  }

  Json echo() const {
    Json j;
    j["kappa"] = kappa;
    j["delta"] = delta;
    j["max_iters"] = max_iters;
    j["multiple"] = multiple;
    j["checkpoint_stride"] = stride;
    j["group_mode"] = group_mode;
    j["with_intercept"] = !no_intercept;
    return j;
  }
};

void write_sidecar(const std::string& file, const std::vector<std::string>& argv, const Json& config) {
  Json j;
  j["tool"] = "glbi";
  j["command"] = argv.empty() ? std::string() : argv.front();
  j["argv"] = argv;
  j["config"] = config;
  io::write_text(file, j.dump(2) + "\n");
}

Json read_json(const std::string& file) {
  try {
    return Json::parse(io::read_text(file));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(file + ": " + e.what());
  }
}

CLI::Validator unit_interval_open() {
  return CLI::Validator(
      [](std::string& s) -> std::string {
        try {
          const double v = std::stod(s);
          if (v >= 0.0 && v < 1.0) return {};
        } catch (const std::exception&) {
        }
        return "must lie in [0, 1)";
      },
      "in [0, 1)");
}

// ---------------------------------------------------------------------------
// simulate

struct SimLogisticFlags {
  LogisticSpec spec;
  std::string out;
};

struct SimIsingFlags {
  IsingSpec spec;
  std::string out;
};

void cmd_sim_logistic(const SimLogisticFlags& f, std::ostream& out) {
  const auto& s = f.spec;
  const Simulated sim = gen_logistic(s);
  io::write_dataset(join_path(f.out, "data.csv"), sim.data);
  Json truth = io::theta_json(sim.truth);
  truth["model"] = "logistic";
  truth["p"] = s.p;
  io::write_text(join_path(f.out, "truth.json"), truth.dump(2) + "\n");

  Json cfg;
  cfg["model"] = "logistic";
  cfg["p"] = s.p;
  cfg["s"] = s.s;
  cfg["n"] = s.n;
  cfg["M"] = s.M;
  cfg["r"] = s.r;
  cfg["seed"] = s.seed;
  write_sidecar(join_path(f.out, "run.json"),
                {"simulate", "logistic", "--p", std::to_string(s.p), "--s", std::to_string(s.s), "--n",
                 std::to_string(s.n), "--M", num(s.M), "--r", num(s.r), "--seed", std::to_string(s.seed),
                 "--out", f.out},
                cfg);
  out << "wrote " << join_path(f.out, "data.csv") << " (" << s.n << " x " << s.p << ")\n";
}

void cmd_sim_ising(const SimIsingFlags& f, std::ostream& out) {
  const auto& s = f.spec;
  const Theta truth = grid_ising_params(s);
  const Dataset data = gibbs_sample(truth, s);
  io::write_dataset(join_path(f.out, "data.csv"), data);
  Json t = io::theta_json(truth);
  t["model"] = "ising";
  t["nodes"] = s.p();
  Json edges = Json::array();
  for (const auto& [a, b] : grid_edges(s.N)) edges.push_back({a + 1, b + 1});
  t["edges"] = edges;
  io::write_text(join_path(f.out, "truth.json"), t.dump(2) + "\n");

  Json cfg;
  cfg["model"] = "ising";
  cfg["N"] = s.N;
  cfg["T"] = s.T;
  cfg["n"] = s.n;
  cfg["burn_in"] = s.burn_in;
  cfg["thin"] = s.thin;
  cfg["seed"] = s.seed;
  write_sidecar(join_path(f.out, "run.json"),
                {"simulate", "ising", "--N", std::to_string(s.N), "--T", num(s.T), "--n", std::to_string(s.n),
                 "--burn-in", std::to_string(s.burn_in), "--thin", std::to_string(s.thin), "--seed",
                 std::to_string(s.seed), "--out", f.out},
                cfg);
  out << "wrote " << join_path(f.out, "data.csv") << " (" << s.n << " x " << s.p() << ")\n";
}

// ---------------------------------------------------------------------------
// fit

struct FitFlags {
  std::string loss;
  std::string data;
  std::string out;
  int states = 0;
  int shards = 0;
  std::string support;
  SolverFlags solver;
};

void cmd_fit(const FitFlags& f, std::ostream& out) {
  const LossKind kind = parse_loss_kind(f.loss);
  const Dataset data = io::read_dataset(f.data);
  SolverConfig cfg = f.solver.resolve();
  if (!f.support.empty()) cfg.support = parse_index_list(f.support, "--support");
  const bool intercept = !f.solver.no_intercept;

  Path path;
  if (f.shards > 0) {
    if (kind != LossKind::Logistic) throw ValidationError("--shards is only available for the logistic loss");
    path = parallel_logistic_path(data, cfg, f.shards, intercept);
  } else {
    const auto model = make_loss(kind, data, intercept, f.states);
    path = run_path(*model, cfg);
  }

  // The echo deliberately omits --shards: sharded and serial runs must
  // produce identical files.
  Json echo = f.solver.echo();
  echo["loss"] = f.loss;
  echo["data"] = f.data;
  echo["states"] = f.states;
  echo["support"] = f.support;
  io::write_path(f.out, path, echo);

  std::vector<std::string> argv{"fit", "--loss", f.loss, "--data", f.data, "--out", f.out,
                                "--states", std::to_string(f.states), "--shards", std::to_string(f.shards)};
  if (!f.support.empty()) argv.insert(argv.end(), {"--support", f.support});
  f.solver.argv(argv);
  Json cfg_echo = echo;
  cfg_echo["shards"] = f.shards;
  write_sidecar(f.out + ".run.json", argv, cfg_echo);

  out << "delta " << num(path.delta) << (path.delta_auto ? " (auto)" : "") << ", k0 " << path.k0
      << ", iterations " << path.max_iters << ", checkpoints " << path.checkpoints.size() << "\n";
}

// ---------------------------------------------------------------------------
// eval

struct AucFlags {
  std::string path, truth, out;
};

Theta read_truth(const std::string& file) { return io::theta_from_json(read_json(file)); }

void cmd_auc(const AucFlags& f, std::ostream& out) {
  const Path path = io::read_path(f.path);
  const Theta truth = read_truth(f.truth);
  if (truth.beta.size() != path.shape.beta_dim) throw ShapeError("truth does not match the path's coefficient layout");
  const auto support = support_of(truth.beta, path.unit_size());
  const double auc = path_auc(path, support);
  Json r;
  r["metric"] = "auc";
  r["value"] = auc;
  r["positives"] = support.size();
  r["negatives"] = static_cast<std::size_t>(path.units()) - support.size();
  r["path"] = f.path;
  r["truth"] = f.truth;
  io::write_text(f.out + ".json", r.dump(2) + "\n");
  write_sidecar(f.out + ".run.json", {"eval", "auc", "--path", f.path, "--truth", f.truth, "--out", f.out}, r);
  out << "auc " << num(auc) << "\n";
}

struct CvFlags {
  std::string data, out, loss = "ising-mpf";
  int folds = 5;
  int grid = 50;
  std::uint64_t seed = 1;
  long burn_in = 100;
  long thin = 10;
  SolverFlags solver;
};

void emit_cv(const CvFlags& f, const CVReport& report, std::vector<std::string> argv, std::ostream& out) {
  Json j = io::cv_report_json(report);
  j["data"] = f.data;
  j["seed"] = f.seed;
  io::write_text(f.out + ".json", j.dump(2) + "\n");
  io::write_text(f.out + ".csv", io::cv_curve_csv(report));
  argv.insert(argv.end(), {"--data", f.data, "--out", f.out, "--folds", std::to_string(f.folds), "--grid",
                           std::to_string(f.grid), "--seed", std::to_string(f.seed)});
  f.solver.argv(argv);
  Json cfg = f.solver.echo();
  cfg["folds"] = f.folds;
  cfg["grid"] = f.grid;
  cfg["seed"] = f.seed;
  write_sidecar(f.out + ".run.json", argv, cfg);
  for (const auto& w : report.warnings) out << "warning: " << w << "\n";
  out << report.metric << " " << num(report.selected_score()) << " at position " << report.selected_index + 1
      << " (t " << num(report.selected_t) << ", k " << report.selected_k << ")\n";
}

CVOptions cv_options(const CvFlags& f) {
  CVOptions o;
  o.folds = f.folds;
  o.grid_size = f.grid;
  o.seed = f.seed;
  return o;
}

void cmd_cv_logistic(const CvFlags& f, std::ostream& out) {
  const Dataset data = io::read_dataset(f.data);
  if (f.solver.no_intercept) throw ValidationError("--no-intercept is not supported by cross-validation");
  const CVReport report = kfold_cv_logistic(data, f.solver.resolve(), cv_options(f));
  emit_cv(f, report, {"eval", "cv-logistic"}, out);
}

void cmd_cv_mdc(const CvFlags& f, std::ostream& out) {
  const LossKind kind = parse_loss_kind(f.loss);
  if (!is_ising(kind)) throw ValidationError("--loss: cv-mdc needs ising-composite or ising-mpf");
  if (f.solver.no_intercept) throw ValidationError("--no-intercept is not supported by cross-validation");
  const Dataset data = io::read_dataset(f.data);
  MdcOptions sampler;
  sampler.burn_in = f.burn_in;
  sampler.thin = f.thin;
  const CVReport report = kfold_cv_ising_mdc(data, kind, f.solver.resolve(), cv_options(f), sampler);
  emit_cv(f, report,
          {"eval", "cv-mdc", "--loss", f.loss, "--burn-in", std::to_string(f.burn_in), "--thin",
           std::to_string(f.thin)},
          out);
}

struct SignFlags {
  std::string path, truth, out;
};

void cmd_sign_scan(const SignFlags& f, std::ostream& out) {
  const Path path = io::read_path(f.path);
  const Theta truth = read_truth(f.truth);
  const SignScan scan = sign_consistency_scan(path, truth.beta);
  Json r;
  r["metric"] = "sign-scan";
  r["first_match_k"] = scan.first_match_k ? Json(*scan.first_match_k) : Json(nullptr);
  r["clean_through_k"] = scan.clean_through_k;
  r["match_within_clean_prefix"] = scan.first_match_k.has_value() && *scan.first_match_k <= scan.clean_through_k;
  r["path"] = f.path;
  r["truth"] = f.truth;
  io::write_text(f.out + ".json", r.dump(2) + "\n");
  write_sidecar(f.out + ".run.json", {"eval", "sign-scan", "--path", f.path, "--truth", f.truth, "--out", f.out},
                r);
  out << "first match k " << (scan.first_match_k ? std::to_string(*scan.first_match_k) : "none")
      << ", clean through k " << scan.clean_through_k << "\n";
}

struct IrrFlags {
  std::string sigma;
  Index toeplitz_p = 0;
  double r = 0.25;
  std::string support;
  std::string out;
};

void cmd_irr(const IrrFlags& f, std::ostream& out) {
  MatrixXd sigma;
  if (!f.sigma.empty()) {
    if (f.toeplitz_p > 0) throw ValidationError("--sigma and --toeplitz-p are mutually exclusive");
    sigma = io::read_dataset(f.sigma).X;
  } else if (f.toeplitz_p > 0) {
    if (!(f.r >= 0.0 && f.r < 1.0)) throw ValidationError("--r: must lie in [0, 1)");
    sigma = toeplitz_covariance(f.toeplitz_p, f.r);
  } else {
    throw ValidationError("--sigma or --toeplitz-p is required");
  }
  const auto support = parse_index_list(f.support, "--support");
  const double value = irr_constant(sigma, support);
  Json r;
  r["metric"] = "irr";
  r["value"] = value;
  r["below_one"] = value < 1.0;
  r["support_size"] = support.size();
  r["p"] = sigma.rows();
  std::vector<std::string> argv{"eval", "irr", "--support", f.support, "--out", f.out};
  if (!f.sigma.empty()) {
    argv.insert(argv.end(), {"--sigma", f.sigma});
  } else {
    argv.insert(argv.end(), {"--toeplitz-p", std::to_string(f.toeplitz_p), "--r", num(f.r)});
  }
  io::write_text(f.out + ".json", r.dump(2) + "\n");
  write_sidecar(f.out + ".run.json", argv, r);
  out << "irr " << num(value) << "\n";
}

// ---------------------------------------------------------------------------
// ingest

struct IngestFlags {
  std::string input, out;
  long top_p = 0;
  long min_degree = 1;
};

void cmd_ingest(const IngestFlags& f, std::ostream& out) {
  const std::string text = io::read_text(f.input);
  std::set<std::pair<std::string, std::string>> pairs;
  std::istringstream in(text);
  std::string line;
  long no = 0;
  bool header = true;
  while (std::getline(in, line)) {
    ++no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos)
      throw ValidationError(f.input + ":" + std::to_string(no) + ": expected 2 fields (item,entity)");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string item = trim(line.substr(0, comma));
    const std::string entity = trim(line.substr(comma + 1));
    if (header) {
      header = false;
      continue;
    }
    if (item.empty() || entity.empty())
      throw ValidationError(f.input + ":" + std::to_string(no) + ": empty item or entity id");
    pairs.emplace(item, entity);
  }
  if (header) throw ValidationError(f.input + ": missing header row");

  std::map<std::string, long> count;
  for (const auto& [item, entity] : pairs) ++count[entity];
  std::vector<std::pair<std::string, long>> ranked;
  for (const auto& [entity, c] : count)
    if (c >= f.min_degree) ranked.emplace_back(entity, c);
  // std::map iteration is already in id order, so a stable sort by count
  // breaks ties by entity id.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (f.top_p > 0 && static_cast<long>(ranked.size()) > f.top_p) ranked.resize(static_cast<size_t>(f.top_p));
  if (ranked.empty()) throw ValidationError("no entity passes the --min-degree / --top-p filters");

  std::map<std::string, Index> column;
  for (size_t j = 0; j < ranked.size(); ++j) column[ranked[j].first] = static_cast<Index>(j);
  std::map<std::string, std::vector<Index>> rows;
  for (const auto& [item, entity] : pairs) {
    const auto it = column.find(entity);
    if (it != column.end()) rows[item].push_back(it->second);
  }

  Dataset data;
  data.X = MatrixXd::Constant(static_cast<Index>(rows.size()), static_cast<Index>(ranked.size()), -1.0);
  std::string items = "row,item\n";
  Index i = 0;
  for (const auto& [item, cols] : rows) {
    for (Index j : cols) data.X(i, j) = 1.0;
    items += std::to_string(i + 1) + "," + item + "\n";
    ++i;
  }
  std::string names = "column,entity,count\n";
  for (size_t j = 0; j < ranked.size(); ++j)
    names += std::to_string(j + 1) + "," + ranked[j].first + "," + std::to_string(ranked[j].second) + "\n";

  io::write_dataset(join_path(f.out, "data.csv"), data);
  io::write_text(join_path(f.out, "names.csv"), names);
  io::write_text(join_path(f.out, "items.csv"), items);
  Json cfg;
  cfg["input"] = f.input;
  cfg["top_p"] = f.top_p;
  cfg["min_degree"] = f.min_degree;
  cfg["items"] = data.n();
  cfg["entities"] = data.p();
  write_sidecar(join_path(f.out, "run.json"),
                {"ingest", "--input", f.input, "--out", f.out, "--top-p", std::to_string(f.top_p), "--min-degree",
                 std::to_string(f.min_degree)},
                cfg);
  out << "wrote " << join_path(f.out, "data.csv") << " (" << data.n() << " x " << data.p() << ")\n";
}

// ---------------------------------------------------------------------------
// graph-export

struct GraphFlags {
  std::string path, out;
  double sparsity = -1.0;
  long k = -1;
};

void cmd_graph_export(const GraphFlags& f, std::ostream& out, std::ostream& err) {
  const Path path = io::read_path(f.path);
  if (!is_pairwise(path.kind)) throw ValidationError("graph-export needs an Ising or MRF path");
  if ((f.sparsity >= 0.0) == (f.k >= 0)) throw ValidationError("give exactly one of --sparsity or --k");
  const Index width = path.kind == LossKind::GroupMRF ? path.shape.group_size : 1;
  const Index pairs = path.shape.beta_dim / width;

  auto fraction = [&](const Checkpoint& c) {
    std::set<Index> units;
    for (SparseVec::InnerIterator it(c.beta); it; ++it) units.insert(it.index() / width);
    return pairs ? static_cast<double>(units.size()) / static_cast<double>(pairs) : 0.0;
  };

  const Checkpoint* chosen = &path.checkpoints.front();
  std::vector<std::string> warnings;
  if (f.k >= 0) {
    chosen = &path.at_time(static_cast<double>(f.k) * path.delta);
    if (chosen->k != f.k)
      warnings.push_back("iteration " + std::to_string(f.k) + " is not a checkpoint; using k = " +
                         std::to_string(chosen->k));
  } else {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& c : path.checkpoints) {
      const double gap = std::abs(fraction(c) - f.sparsity);
      if (gap < best) {
        best = gap;
        chosen = &c;
      }
    }
    if (best > 0.01)
      warnings.push_back("requested sparsity " + num(f.sparsity) + " is not reachable; nearest checkpoint has " +
                         num(fraction(*chosen)));
  }

  std::string csv = "node_a,node_b,weight,sign\n";
  const VectorXd beta(chosen->beta);
  Index edges = 0;
  for (Index u = 0; u < pairs; ++u) {
    const auto block = beta.segment(u * width, width);
    if (!(block.array() != 0.0).any()) continue;
    const auto [a, b] = pair_nodes(u, path.nodes);
    const double weight = width == 1 ? block(0) : block.norm();
    const char* sign = width == 1 ? (weight > 0.0 ? "+" : "-") : "";
    csv += std::to_string(a + 1) + "," + std::to_string(b + 1) + "," + num(weight) + "," + sign + "\n";
    ++edges;
  }
  io::write_text(f.out + ".csv", csv);
  Json info;
  info["path"] = f.path;
  info["k"] = chosen->k;
  info["t"] = chosen->t;
  info["edges"] = edges;
  info["sparsity"] = fraction(*chosen);
  if (f.sparsity >= 0.0) info["requested_sparsity"] = f.sparsity;
  info["warnings"] = warnings;
  io::write_text(f.out + ".json", info.dump(2) + "\n");
  std::vector<std::string> argv{"graph-export", "--path", f.path, "--out", f.out};
  if (f.sparsity >= 0.0) argv.insert(argv.end(), {"--sparsity", num(f.sparsity)});
  else argv.insert(argv.end(), {"--k", std::to_string(f.k)});
  write_sidecar(f.out + ".run.json", argv, info);
  for (const auto& w : warnings) err << "warning: " << w << "\n";
  out << edges << " edges at k " << chosen->k << "\n";
}

// ---------------------------------------------------------------------------
// bench

struct BenchFlags {
  LogisticSpec spec{2000, 20, 6000, 1.0, 0.25, 1};
  long iterations = 1000;
  std::string shards = "1,2,4";
  std::string out;
};

void cmd_bench(const BenchFlags& f, std::ostream& out) {
  const auto Ls = parse_int_list(f.shards, "--shards");
  const auto rows = scaling_benchmark(f.spec, Ls, f.iterations);
  std::ostringstream csv;
  write_scaling_csv(csv, rows);
  io::write_text(f.out + ".csv", csv.str());
  const auto& s = f.spec;
  Json cfg;
  cfg["p"] = s.p;
  cfg["s"] = s.s;
  cfg["n"] = s.n;
  cfg["M"] = s.M;
  cfg["r"] = s.r;
  cfg["seed"] = s.seed;
  cfg["iterations"] = f.iterations;
  cfg["shards"] = f.shards;
  write_sidecar(f.out + ".run.json",
                {"bench", "--p", std::to_string(s.p), "--s", std::to_string(s.s), "--n", std::to_string(s.n), "--M",
                 num(s.M), "--r", num(s.r), "--seed", std::to_string(s.seed), "--iters",
                 std::to_string(f.iterations), "--shards", f.shards, "--out", f.out},
                cfg);
  out << csv.str();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sparse regularization paths by generalized linearized Bregman iteration", "glbi"};
  app.require_subcommand(1);
  std::function<void()> action;
  int result = kExitOk;

  // simulate
  auto* sim = app.add_subcommand("simulate", "Generate a synthetic dataset");
  sim->require_subcommand(1);
  SimLogisticFlags slog;
  auto* sim_log = sim->add_subcommand("logistic", "Sparse logistic model with Toeplitz design");
  sim_log->add_option("--p", slog.spec.p, "Features")->capture_default_str();
  sim_log->add_option("--s", slog.spec.s, "Support size")->capture_default_str();
  sim_log->add_option("--n", slog.spec.n, "Samples")->capture_default_str();
  sim_log->add_option("--M", slog.spec.M, "Signal magnitude")->capture_default_str();
  sim_log->add_option("--r", slog.spec.r, "Toeplitz correlation")->capture_default_str()->check(unit_interval_open());
  sim_log->add_option("--seed", slog.spec.seed, "Seed")->capture_default_str();
  sim_log->add_option("--out", slog.out, "Output directory")->required();
  sim_log->callback([&] { action = [&] { cmd_sim_logistic(slog, out); }; });

  SimIsingFlags sis;
  auto* sim_is = sim->add_subcommand("ising", "Grid Ising model sampled by Gibbs sweeps");
  sim_is->add_option("--N", sis.spec.N, "Grid side")->capture_default_str();
  sim_is->add_option("--T", sis.spec.T, "Temperature scale")->capture_default_str();
  sim_is->add_option("--n", sis.spec.n, "Samples")->capture_default_str();
  sim_is->add_option("--burn-in", sis.spec.burn_in, "Discarded sweeps")->capture_default_str();
  sim_is->add_option("--thin", sis.spec.thin, "Sweeps between kept samples")->capture_default_str();
  sim_is->add_option("--seed", sis.spec.seed, "Seed")->capture_default_str();
  sim_is->add_option("--out", sis.out, "Output directory")->required();
  sim_is->callback([&] { action = [&] { cmd_sim_ising(sis, out); }; });

  // fit
  FitFlags fit;
  auto* fit_cmd = app.add_subcommand("fit", "Compute a regularization path");
  fit_cmd->add_option("--loss", fit.loss, "linear | logistic | ising-composite | ising-mpf | group-mrf")->required();
  fit_cmd->add_option("--data", fit.data, "Dataset CSV")->required();
  fit_cmd->add_option("--out", fit.out, "Output stem (writes <stem>.csv and <stem>.json)")->required();
  fit_cmd->add_option("--states", fit.states, "Node states q (group-mrf)")->capture_default_str();
  fit_cmd->add_option("--shards", fit.shards, "Column shards for the parallel logistic engine (0 = serial)")
      ->capture_default_str();
  fit_cmd->add_option("--support", fit.support, "Restrict updates to these units, e.g. 1-20");
  fit.solver.add(fit_cmd);
  fit_cmd->callback([&] { action = [&] { cmd_fit(fit, out); }; });

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate paths and designs");
  ev->require_subcommand(1);
  AucFlags auc;
  auto* ev_auc = ev->add_subcommand("auc", "Support-recovery AUC of a path");
  ev_auc->add_option("--path", auc.path, "Path JSON header")->required();
  ev_auc->add_option("--truth", auc.truth, "Truth JSON")->required();
  ev_auc->add_option("--out", auc.out, "Report stem")->required();
  ev_auc->callback([&] { action = [&] { cmd_auc(auc, out); }; });

  CvFlags cvl;
  auto* ev_cvl = ev->add_subcommand("cv-logistic", "K-fold CV misclassification along a logistic path");
  CvFlags cvm;
  auto* ev_cvm = ev->add_subcommand("cv-mdc", "K-fold CV 2nd-order marginal correlation along an Ising path");
  for (auto [cmd, flags] : {std::pair{ev_cvl, &cvl}, std::pair{ev_cvm, &cvm}}) {
    cmd->add_option("--data", flags->data, "Dataset CSV")->required();
    cmd->add_option("--out", flags->out, "Report stem")->required();
    cmd->add_option("--folds", flags->folds, "K")->capture_default_str();
    cmd->add_option("--grid", flags->grid, "Grid positions")->capture_default_str();
    cmd->add_option("--seed", flags->seed, "Seed")->capture_default_str();
    flags->solver.add(cmd);
  }
  ev_cvm->add_option("--loss", cvm.loss, "ising-composite | ising-mpf")->capture_default_str();
  ev_cvm->add_option("--burn-in", cvm.burn_in, "Gibbs burn-in sweeps")->capture_default_str();
  ev_cvm->add_option("--thin", cvm.thin, "Gibbs thinning sweeps")->capture_default_str();
  ev_cvl->callback([&] { action = [&] { cmd_cv_logistic(cvl, out); }; });
  ev_cvm->callback([&] { action = [&] { cmd_cv_mdc(cvm, out); }; });

  SignFlags sign;
  auto* ev_sign = ev->add_subcommand("sign-scan", "First sign match and false-positive-free prefix");
  ev_sign->add_option("--path", sign.path, "Path JSON header")->required();
  ev_sign->add_option("--truth", sign.truth, "Truth JSON")->required();
  ev_sign->add_option("--out", sign.out, "Report stem")->required();
  ev_sign->callback([&] { action = [&] { cmd_sign_scan(sign, out); }; });

  IrrFlags irr;
  auto* ev_irr = ev->add_subcommand("irr", "Irrepresentable constant of a covariance");
  ev_irr->add_option("--sigma", irr.sigma, "Covariance CSV (header row, p x p)");
  ev_irr->add_option("--toeplitz-p", irr.toeplitz_p, "Use Sigma_jk = r^|j-k| of this size");
  ev_irr->add_option("--r", irr.r, "Toeplitz correlation")->capture_default_str();
  ev_irr->add_option("--support", irr.support, "Support, e.g. 1-20")->required();
  ev_irr->add_option("--out", irr.out, "Report stem")->required();
  ev_irr->callback([&] { action = [&] { cmd_irr(irr, out); }; });

  // ingest
  IngestFlags ing;
  auto* ingest = app.add_subcommand("ingest", "Build a +/-1 item x entity matrix from an incidence CSV");
  ingest->add_option("--input", ing.input, "CSV with header and columns item,entity")->required();
  ingest->add_option("--out", ing.out, "Output directory")->required();
  ingest->add_option("--top-p", ing.top_p, "Keep the p highest-count entities (0 = all)")->capture_default_str();
  ingest->add_option("--min-degree", ing.min_degree, "Drop entities with fewer items")->capture_default_str();
  ingest->callback([&] { action = [&] { cmd_ingest(ing, out); }; });

  // graph-export
  GraphFlags gx;
  auto* graph = app.add_subcommand("graph-export", "Edge list of a pairwise path at one checkpoint");
  graph->add_option("--path", gx.path, "Path JSON header")->required();
  graph->add_option("--out", gx.out, "Output stem")->required();
  graph->add_option("--sparsity", gx.sparsity, "Target fraction of nonzero pairs");
  graph->add_option("--k", gx.k, "Checkpoint iteration");
  graph->callback([&] { action = [&] { cmd_graph_export(gx, out, err); }; });

  // bench
  BenchFlags bf;
  auto* bench = app.add_subcommand("bench", "Time the sharded logistic engine");
  bench->add_option("--p", bf.spec.p, "Features")->capture_default_str();
  bench->add_option("--s", bf.spec.s, "Support size")->capture_default_str();
  bench->add_option("--n", bf.spec.n, "Samples")->capture_default_str();
  bench->add_option("--M", bf.spec.M, "Signal magnitude")->capture_default_str();
  bench->add_option("--r", bf.spec.r, "Toeplitz correlation")->capture_default_str()->check(unit_interval_open());
  bench->add_option("--seed", bf.spec.seed, "Seed")->capture_default_str();
  bench->add_option("--iters", bf.iterations, "Fixed iteration budget")->capture_default_str();
  bench->add_option("--shards", bf.shards, "Comma-separated shard counts")->capture_default_str();
  bench->add_option("--out", bf.out, "Output stem")->required();
  bench->callback([&] { action = [&] { cmd_bench(bf, out); }; });

  // rerun
  std::string sidecar;
  auto* rerun = app.add_subcommand("rerun", "Repeat a run from its sidecar");
  rerun->add_option("sidecar", sidecar, "A *.run.json or run.json file")->required();
  rerun->callback([&] {
    action = [&] {
      const Json j = read_json(sidecar);
      std::vector<std::string> argv;
      try {
        argv = j.at("argv").get<std::vector<std::string>>();
      } catch (const nlohmann::json::exception&) {
        throw ValidationError(sidecar + ": missing argv");
      }
      if (argv.empty() || argv.front() == "rerun") throw ValidationError(sidecar + ": invalid argv");
      result = run(argv, out, err);
    };
  });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (action) action();
    return result;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace glbi::cli
