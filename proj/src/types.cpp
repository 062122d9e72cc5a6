#include "glbi/types.hpp"

#include "glbi/errors.hpp"

#include <cmath>

namespace glbi {

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::Linear: return "linear";
    case LossKind::Logistic: return "logistic";
    case LossKind::IsingComposite: return "ising-composite";
    case LossKind::IsingMPF: return "ising-mpf";
    case LossKind::GroupMRF: return "group-mrf";
  }
  return "unknown";
}

LossKind parse_loss_kind(std::string_view name) {
  for (auto kind : {LossKind::Linear, LossKind::Logistic, LossKind::IsingComposite,
                    LossKind::IsingMPF, LossKind::GroupMRF}) {
    if (name == to_string(kind)) return kind;
  }
  throw ValidationError("unknown loss kind '" + std::string(name) + "'");
}

void validate_linear(const Dataset& data) {
  if (!data.y) throw ValidationError("linear data requires a response column y");
  if (data.y->size() != data.n()) throw ShapeError("response length differs from row count");
  if (!data.X.allFinite() || !data.y->allFinite())
    throw DomainError("linear data contains non-finite values");
}

void validate_logistic(const Dataset& data) {
  if (!data.y) throw ValidationError("logistic data requires a label column y");
  if (data.y->size() != data.n()) throw ShapeError("label length differs from row count");
  for (Index i = 0; i < data.n(); ++i) {
    const double v = (*data.y)(i);
    if (v != 1.0 && v != -1.0)
      throw ValidationError("logistic labels must be +1/-1 (row " + std::to_string(i + 1) + ")");
  }
  if (!data.X.allFinite()) throw DomainError("logistic design contains non-finite values");
}

void validate_spins(const MatrixXd& X) {
  for (Index j = 0; j < X.cols(); ++j)
    for (Index i = 0; i < X.rows(); ++i) {
      const double v = X(i, j);
      if (v != 1.0 && v != -1.0)
        throw ValidationError("spin entries must be +1/-1 (row " + std::to_string(i + 1) +
                              ", column " + std::to_string(j + 1) + ")");
    }
}

void validate_states(const MatrixXd& X, int q) {
  if (q < 2) throw ValidationError("discrete MRF needs at least 2 states");
  for (Index j = 0; j < X.cols(); ++j)
    for (Index i = 0; i < X.rows(); ++i) {
      const double v = X(i, j);
      if (v != std::round(v) || v < 1.0 || v > q)
        throw ValidationError("MRF states must be integers in 1.." + std::to_string(q) +
                              " (row " + std::to_string(i + 1) + ", column " +
                              std::to_string(j + 1) + ")");
    }
}

std::pair<Index, Index> pair_nodes(Index idx, Index p) {
  Index j = 0;
  Index row_len = p - 1;
  while (idx >= row_len) {
    idx -= row_len;
    ++j;
    --row_len;
  }
  return {j, j + 1 + idx};
}

MatrixXd couplings_to_matrix(const VectorXd& beta, Index p) {
  if (beta.size() != pair_count(p)) throw ShapeError("coupling vector length does not match p");
  MatrixXd B = MatrixXd::Zero(p, p);
  Index idx = 0;
  for (Index j = 0; j < p; ++j)
    for (Index k = j + 1; k < p; ++k, ++idx) {
      B(j, k) = beta(idx);
      B(k, j) = beta(idx);
    }
  return B;
}

VectorXd matrix_to_couplings(const MatrixXd& B) {
  const Index p = B.rows();
  VectorXd beta(pair_count(p));
  Index idx = 0;
  for (Index j = 0; j < p; ++j)
    for (Index k = j + 1; k < p; ++k) beta(idx++) = B(j, k);
  return beta;
}

Index nodes_from_pair_count(Index pairs) {
  Index p = 1;
  while (pair_count(p) < pairs) ++p;
  if (pair_count(p) != pairs) throw ShapeError("length is not a triangular pair count");
  return p;
}

}  // namespace glbi
