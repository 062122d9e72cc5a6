#include "glbi/io.hpp"

#include "glbi/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace glbi::io {

namespace fs = std::filesystem;

std::string format_double(double v) {
  if (v == 0.0) return "0";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error while reading " + path);
  return ss.str();
}

void write_text(const std::string& path, const std::string& content) {
  std::error_code ec;
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent, ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << content;
  out.flush();
  if (!out) throw IoError("error while writing " + path);
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  for (auto& s : out) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  }
  return out;
}

double parse_number(const std::string& s, const std::string& where) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (s.empty() || res.ec != std::errc() || res.ptr != last)
    throw ValidationError(where + ": cannot parse '" + s + "' as a number");
  return v;
}

long parse_integer(const std::string& s, const std::string& where) {
  long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ValidationError(where + ": cannot parse '" + s + "' as an integer");
  return v;
}

std::vector<std::pair<long, std::string>> numbered_lines(const std::string& text) {
  std::vector<std::pair<long, std::string>> out;
  std::istringstream in(text);
  std::string line;
  long no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.emplace_back(no, line);
  }
  return out;
}

}  // namespace

std::string dataset_csv(const Dataset& data) {
  std::string out;
  std::vector<std::string> head;
  if (data.y) head.push_back("y");
  for (Index j = 0; j < data.p(); ++j) head.push_back("x" + std::to_string(j + 1));
  for (size_t c = 0; c < head.size(); ++c) out += (c ? "," : "") + head[c];
  out += '\n';
  for (Index i = 0; i < data.n(); ++i) {
    bool first = true;
    if (data.y) {
      out += format_double((*data.y)(i));
      first = false;
    }
    for (Index j = 0; j < data.p(); ++j) {
      if (!first) out += ',';
      out += format_double(data.X(i, j));
      first = false;
    }
    out += '\n';
  }
  return out;
}

Dataset parse_dataset_csv(const std::string& text, const std::string& source) {
  const auto lines = numbered_lines(text);
  if (lines.empty()) throw ValidationError(source + ": no header row");
  const auto header = split_csv(lines.front().second);
  const bool labelled = !header.empty() && header.front() == "y";
  const Index width = static_cast<Index>(header.size());
  const Index p = width - (labelled ? 1 : 0);
  if (p < 1) throw ValidationError(source + ": no feature columns");
  const Index n = static_cast<Index>(lines.size()) - 1;
  Dataset data;
  data.X.resize(n, p);
  VectorXd y(n);
  for (Index i = 0; i < n; ++i) {
    const auto& [no, line] = lines[static_cast<size_t>(i + 1)];
    const std::string where = source + ":" + std::to_string(no);
    const auto cells = split_csv(line);
    if (static_cast<Index>(cells.size()) != width)
      throw ValidationError(where + ": expected " + std::to_string(width) + " fields, found " +
                            std::to_string(cells.size()));
    Index c = 0;
    if (labelled) y(i) = parse_number(cells[static_cast<size_t>(c++)], where);
    for (Index j = 0; j < p; ++j) data.X(i, j) = parse_number(cells[static_cast<size_t>(c++)], where);
  }
  if (labelled) data.y = std::move(y);
  return data;
}

Dataset read_dataset(const std::string& path) { return parse_dataset_csv(read_text(path), path); }

void write_dataset(const std::string& path, const Dataset& data) { write_text(path, dataset_csv(data)); }

Json theta_json(const Theta& theta) {
  Json j;
  j["alpha"] = std::vector<double>(theta.alpha.data(), theta.alpha.data() + theta.alpha.size());
  j["beta"] = std::vector<double>(theta.beta.data(), theta.beta.data() + theta.beta.size());
  std::vector<Index> support;
  for (Index i = 0; i < theta.beta.size(); ++i)
    if (theta.beta(i) != 0.0) support.push_back(i + 1);
  j["support"] = support;
  return j;
}

Theta theta_from_json(const Json& j) {
  try {
    const auto a = j.at("alpha").get<std::vector<double>>();
    const auto b = j.at("beta").get<std::vector<double>>();
    Theta t;
    t.alpha = Eigen::Map<const VectorXd>(a.data(), static_cast<Index>(a.size()));
    t.beta = Eigen::Map<const VectorXd>(b.data(), static_cast<Index>(b.size()));
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed parameter JSON: ") + e.what());
  }
}

namespace {

struct CoordinateLabel {
  std::string node_a, node_b, state_a, state_b;
};

CoordinateLabel label_alpha(const Path& path, Index i) {
  CoordinateLabel l;
  if (path.kind == LossKind::GroupMRF && path.states > 0) {
    l.node_a = std::to_string(i / path.states + 1);
    l.state_a = std::to_string(i % path.states + 1);
  } else if (is_ising(path.kind)) {
    l.node_a = std::to_string(i + 1);
  }
  return l;
}

CoordinateLabel label_beta(const Path& path, Index i) {
  CoordinateLabel l;
  if (is_ising(path.kind)) {
    const auto [a, b] = pair_nodes(i, path.nodes);
    l.node_a = std::to_string(a + 1);
    l.node_b = std::to_string(b + 1);
  } else if (path.kind == LossKind::GroupMRF && path.states > 0) {
    const Index q = path.states;
    const auto [a, b] = pair_nodes(i / (q * q), path.nodes);
    const Index r = i % (q * q);
    l.node_a = std::to_string(a + 1);
    l.node_b = std::to_string(b + 1);
    l.state_a = std::to_string(r / q + 1);
    l.state_b = std::to_string(r % q + 1);
  } else {
    l.node_a = std::to_string(i + 1);
  }
  return l;
}

void append_row(std::string& out, const Checkpoint& c, const char* block, Index index,
                const CoordinateLabel& l, double value) {
  out += std::to_string(c.k);
  out += ',';
  out += format_double(c.t);
  out += ',';
  out += block;
  out += ',';
  out += std::to_string(index + 1);
  out += ',' + l.node_a + ',' + l.node_b + ',' + l.state_a + ',' + l.state_b + ',';
  out += format_double(value);
  out += '\n';
}

Json optional_index_list(const std::optional<std::vector<Index>>& v) {
  if (!v) return nullptr;
  Json arr = Json::array();
  for (Index i : *v) arr.push_back(i + 1);
  return arr;
}

}  // namespace

std::string path_csv(const Path& path) {
  std::string out = "k,t,block,index,node_a,node_b,state_a,state_b,value\n";
  for (const auto& c : path.checkpoints) {
    for (Index i = 0; i < c.alpha.size(); ++i) append_row(out, c, "alpha", i, label_alpha(path, i), c.alpha(i));
    for (SparseVec::InnerIterator it(c.beta); it; ++it)
      append_row(out, c, "beta", it.index(), label_beta(path, it.index()), it.value());
  }
  return out;
}

Json path_header(const Path& path, const std::string& csv_name, const Json& config_echo) {
  Json h;
  h["format"] = "glbi-path";
  h["version"] = 1;
  h["checkpoint_file"] = csv_name;
  h["loss"] = std::string(to_string(path.kind));
  h["nodes"] = path.nodes;
  h["states"] = path.states;
  h["with_intercept"] = path.with_intercept;
  h["alpha_dim"] = path.shape.alpha_dim;
  h["beta_dim"] = path.shape.beta_dim;
  h["group_size"] = path.shape.group_size;
  h["kappa"] = path.kappa;
  h["delta"] = path.delta;
  h["delta_auto"] = path.delta_auto;
  h["curvature_bound"] = path.curvature;
  h["k0"] = path.k0;
  h["max_iters"] = path.max_iters;
  h["multiple"] = path.multiple;
  h["checkpoint_stride"] = path.stride;
  h["group_mode"] = path.group_mode;
  h["support"] = optional_index_list(path.support);
  Json entries = Json::array();
  for (long e : path.entry_iteration) {
    if (e == kNeverEntered) entries.push_back(nullptr);
    else entries.push_back(e);
  }
  h["entry_iteration"] = std::move(entries);
  std::vector<long> ks;
  ks.reserve(path.checkpoints.size());
  for (const auto& c : path.checkpoints) ks.push_back(c.k);
  h["checkpoints"] = ks;
  h["config"] = config_echo;
  return h;
}

Path path_from(const Json& h, const std::string& csv_text) {
  Path path;
  try {
    if (h.at("format") != "glbi-path") throw ValidationError("not a path header");
    path.kind = parse_loss_kind(h.at("loss").get<std::string>());
    path.nodes = h.at("nodes").get<Index>();
    path.states = h.at("states").get<int>();
    path.with_intercept = h.at("with_intercept").get<bool>();
    path.shape.alpha_dim = h.at("alpha_dim").get<Index>();
    path.shape.beta_dim = h.at("beta_dim").get<Index>();
    path.shape.group_size = h.at("group_size").get<Index>();
    path.kappa = h.at("kappa").get<double>();
    path.delta = h.at("delta").get<double>();
    path.delta_auto = h.at("delta_auto").get<bool>();
    path.curvature = h.at("curvature_bound").get<double>();
    path.k0 = h.at("k0").get<long>();
    path.max_iters = h.at("max_iters").get<long>();
    path.multiple = h.at("multiple").get<long>();
    path.stride = h.at("checkpoint_stride").get<long>();
    path.group_mode = h.at("group_mode").get<bool>();
    if (!h.at("support").is_null()) {
      std::vector<Index> s;
      for (const auto& v : h.at("support")) s.push_back(v.get<Index>() - 1);
      path.support = std::move(s);
    }
    for (const auto& e : h.at("entry_iteration"))
      path.entry_iteration.push_back(e.is_null() ? kNeverEntered : e.get<long>());
    for (const auto& k : h.at("checkpoints")) {
      Checkpoint c;
      c.k = k.get<long>();
      c.t = static_cast<double>(c.k) * path.delta;
      c.alpha = VectorXd::Zero(path.shape.alpha_dim);
      c.beta = SparseVec(path.shape.beta_dim);
      path.checkpoints.push_back(std::move(c));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed path header: ") + e.what());
  }

  std::map<long, size_t> slot;
  for (size_t i = 0; i < path.checkpoints.size(); ++i) slot[path.checkpoints[i].k] = i;
  const auto lines = numbered_lines(csv_text);
  std::vector<std::vector<std::pair<Index, double>>> beta_entries(path.checkpoints.size());
  for (size_t r = 1; r < lines.size(); ++r) {
    const auto& [no, line] = lines[r];
    const std::string where = "path table line " + std::to_string(no);
    const auto cells = split_csv(line);
    if (cells.size() != 9) throw ValidationError(where + ": expected 9 fields");
    const long k = parse_integer(cells[0], where);
    const auto it = slot.find(k);
    if (it == slot.end()) throw ValidationError(where + ": iteration not listed in the header");
    const Index index = parse_integer(cells[3], where) - 1;
    const double value = parse_number(cells[8], where);
    Checkpoint& c = path.checkpoints[it->second];
    if (cells[2] == "alpha") {
      if (index < 0 || index >= c.alpha.size()) throw ValidationError(where + ": alpha index out of range");
      c.alpha(index) = value;
    } else if (cells[2] == "beta") {
      if (index < 0 || index >= path.shape.beta_dim) throw ValidationError(where + ": beta index out of range");
      beta_entries[it->second].emplace_back(index, value);
    } else {
      throw ValidationError(where + ": unknown block '" + cells[2] + "'");
    }
  }
  for (size_t i = 0; i < path.checkpoints.size(); ++i) {
    auto& entries = beta_entries[i];
    std::sort(entries.begin(), entries.end());
    SparseVec& b = path.checkpoints[i].beta;
    b.reserve(static_cast<Index>(entries.size()));
    for (const auto& [idx, v] : entries) b.insertBack(idx) = v;
  }
  return path;
}

void write_path(const std::string& stem, const Path& path, const Json& config_echo) {
  const std::string csv = stem + ".csv";
  write_text(csv, path_csv(path));
  write_text(stem + ".json", path_header(path, fs::path(csv).filename().string(), config_echo).dump(2) + "\n");
}

Path read_path(const std::string& json_path) {
  Json h;
  try {
    h = Json::parse(read_text(json_path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(json_path + ": " + e.what());
  }
  if (!h.contains("checkpoint_file") || !h["checkpoint_file"].is_string())
    throw ValidationError(json_path + ": missing checkpoint_file");
  const fs::path csv = fs::path(json_path).parent_path() / h["checkpoint_file"].get<std::string>();
  return path_from(h, read_text(csv.string()));
}

Json cv_report_json(const CVReport& r) {
  Json j;
  j["metric"] = r.metric;
  j["objective"] = r.maximize ? "max" : "min";
  j["folds"] = r.folds;
  j["grid_t"] = r.grid;
  j["grid_k"] = r.grid_k;
  j["score_curve"] = r.score_curve;
  j["selected_index"] = r.selected_index + 1;
  j["selected_t"] = r.selected_t;
  j["selected_k"] = r.selected_k;
  j["selected_score"] = r.selected_score();
  std::vector<int> skipped;
  for (int f : r.skipped_folds) skipped.push_back(f + 1);
  j["skipped_folds"] = skipped;
  j["warnings"] = r.warnings;
  j["selected"] = theta_json(r.selected);
  return j;
}

std::string cv_curve_csv(const CVReport& r) {
  std::string out = "position,t,k,score";
  for (int f = 0; f < r.folds; ++f) out += ",fold_" + std::to_string(f + 1);
  out += '\n';
  for (size_t g = 0; g < r.grid.size(); ++g) {
    out += std::to_string(g + 1) + ',' + format_double(r.grid[g]) + ',' + std::to_string(r.grid_k[g]) +
           ',' + format_double(r.score_curve[g]);
    for (int f = 0; f < r.folds; ++f) {
      const double v = r.fold_scores[static_cast<size_t>(f)][g];
      out += ',';
      if (!std::isnan(v)) out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

}  // namespace glbi::io
