#include "doctest.h"

#include "glbi/errors.hpp"
#include "glbi/io.hpp"
#include "glbi/losses.hpp"
#include "glbi/simulate.hpp"
#include "support/oracles.hpp"

#include <filesystem>
#include <limits>

using namespace glbi;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("glbi_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void check_same_path(const Path& a, const Path& b) {
  CHECK(a.kind == b.kind);
  CHECK(a.nodes == b.nodes);
  CHECK(a.states == b.states);
  CHECK(a.with_intercept == b.with_intercept);
  CHECK(a.kappa == b.kappa);
  CHECK(a.delta == b.delta);
  CHECK(a.delta_auto == b.delta_auto);
  CHECK(a.curvature == b.curvature);
  CHECK(a.k0 == b.k0);
  CHECK(a.max_iters == b.max_iters);
  CHECK(a.stride == b.stride);
  CHECK(a.group_mode == b.group_mode);
  CHECK(a.support == b.support);
  CHECK(a.entry_iteration == b.entry_iteration);
  CHECK(a.shape.beta_dim == b.shape.beta_dim);
  CHECK(path_fingerprint(a) == path_fingerprint(b));
}

}  // namespace

TEST_CASE("format_double round trips") {
  Philox rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.normal() * std::pow(10.0, static_cast<double>(rng.below(40)) - 20.0);
    CHECK(std::stod(io::format_double(v)) == v);
  }
  CHECK(io::format_double(0.0) == "0");
  CHECK(io::format_double(-0.0) == "0");
  CHECK(io::format_double(0.1) == "0.1");
}

TEST_CASE("dataset CSV") {
  Philox rng(2);
  for (auto kind : {LossKind::Linear, LossKind::Logistic, LossKind::IsingMPF}) {
    const Dataset d = oracle::random_dataset(kind, rng, 9, 4);
    const Dataset back = io::parse_dataset_csv(io::dataset_csv(d), "mem");
    CHECK(back.X == d.X);
    CHECK(back.y.has_value() == d.y.has_value());
    if (d.y) CHECK(*back.y == *d.y);
  }
  CHECK(io::dataset_csv(Dataset{MatrixXd::Ones(1, 2), VectorXd::Constant(1, -1.0)}) == "y,x1,x2\n-1,1,1\n");

  SUBCASE("malformed input names the line") {
    try {
      io::parse_dataset_csv("x1,x2\n1,2\n1,oops\n", "data.csv");
      FAIL("expected a parse error");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("data.csv:3") != std::string::npos);
    }
    CHECK_THROWS_AS(io::parse_dataset_csv("x1,x2\n1,2,3\n", "d"), ValidationError);
    CHECK_THROWS_AS(io::parse_dataset_csv("", "d"), ValidationError);
  }
  SUBCASE("files") {
    const fs::path dir = scratch("dataset");
    const Dataset d = oracle::random_dataset(LossKind::Logistic, rng, 5, 3);
    io::write_dataset((dir / "sub" / "d.csv").string(), d);
    CHECK(io::read_dataset((dir / "sub" / "d.csv").string()).X == d.X);
    CHECK_THROWS_AS(io::read_dataset((dir / "missing.csv").string()), IoError);
  }
}

TEST_CASE("theta JSON") {
  const Theta t{VectorXd(Eigen::Vector2d(0.5, -1)), VectorXd(Eigen::Vector3d(0, 2.25, 0))};
  const io::Json j = io::theta_json(t);
  CHECK(j["support"] == io::Json::array({2}));
  const Theta back = io::theta_from_json(j);
  CHECK(back.alpha == t.alpha);
  CHECK(back.beta == t.beta);
}

TEST_CASE("path files round trip") {
  Philox rng(3);
  for (auto kind : oracle::kAllKinds) {
    CAPTURE(to_string(kind));
    const int q = kind == LossKind::GroupMRF ? 3 : 0;
    const auto m = make_loss(kind, oracle::random_dataset(kind, rng, 40, 4, 3), true, q);
    SolverConfig cfg;
    cfg.max_iters = 300;
    cfg.group_mode = kind == LossKind::GroupMRF;
    if (kind == LossKind::Linear) cfg.support = std::vector<Index>{0, 2};
    const Path p = run_path(*m, cfg);
    const io::Json echo = {{"note", "test"}};
    const Path back = io::path_from(io::path_header(p, "x.csv", echo), io::path_csv(p));
    check_same_path(p, back);

    const fs::path dir = scratch(std::string(to_string(kind)));
    io::write_path((dir / "run").string(), p, echo);
    CHECK(fs::exists(dir / "run.csv"));
    check_same_path(p, io::read_path((dir / "run.json").string()));
  }
}

TEST_CASE("path CSV layout") {
  const auto m = make_loss(LossKind::IsingComposite, Dataset{MatrixXd(Eigen::Matrix3d{{1, 1, -1}, {1, -1, 1}, {-1, -1, 1}}),
                                                             std::nullopt});
  Path p;
  p.kind = LossKind::IsingComposite;
  p.shape = m->shape();
  p.nodes = 3;
  p.states = 2;
  p.delta = 0.5;
  p.entry_iteration = {kNeverEntered, 2, kNeverEntered};
  Checkpoint c;
  c.k = 2, c.t = 1.0;
  c.alpha = VectorXd::Zero(3);
  c.beta = VectorXd(Eigen::Vector3d(0, -0.25, 0)).sparseView();
  p.checkpoints = {c};
  const std::string csv = io::path_csv(p);
  CHECK(csv.rfind("k,t,block,index,node_a,node_b,state_a,state_b,value\n", 0) == 0);
  // Pair index 1 is nodes (1, 3) in 1-based numbering.
  CHECK(csv.find("2,1,beta,2,1,3,,,-0.25\n") != std::string::npos);
  CHECK(csv.find("2,1,alpha,1,1,,,,0\n") != std::string::npos);
}

TEST_CASE("CV report outputs") {
  LogisticSpec spec;
  spec.p = 8, spec.s = 2, spec.n = 120;
  SolverConfig cfg;
  cfg.multiple = 20;
  CVOptions o;
  o.grid_size = 4;
  const CVReport r = kfold_cv_logistic(gen_logistic(spec).data, cfg, o);
  const io::Json j = io::cv_report_json(r);
  CHECK(j["metric"] == "misclassification");
  CHECK(j["score_curve"].size() == 4);
  const std::string csv = io::cv_curve_csv(r);
  CHECK(csv.rfind("position,t,k,score,fold_1,fold_2,fold_3,fold_4,fold_5\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
}
