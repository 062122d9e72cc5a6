#pragma once

#include "glbi/simulate.hpp"
#include "glbi/solver.hpp"
#include "glbi/types.hpp"

#include <cstdint>
#include <ostream>
#include <vector>

namespace glbi {

/// Contiguous column ranges [begin, end) covering 0..p-1.
struct ShardPlan {
  std::vector<std::pair<Index, Index>> ranges;

  int shards() const { return static_cast<int>(ranges.size()); }
};

/// Balanced split: the first p % L shards get one extra column.
ShardPlan plan_shards(Index p, int L);

/// Logistic GLBI with the design split column-wise over L worker threads.
///
/// Worker l owns X_l, z_l and beta_l. Per iteration it updates z_l and
/// beta_l from X_l'g and then forms its share of w = X beta on the
/// order-independent summation grid; a coordinator adds the L shares in
/// ascending shard order, updates alpha and the residual weights g, and
/// records the path. Exchange per iteration is two length-n buffers per
/// shard. The result is bitwise identical to run_path on the serial
/// logistic loss for every L.
Path parallel_logistic_path(const Dataset& data, const SolverConfig& config, int L,
                            bool with_intercept = true);

struct ScalingRow {
  int L = 1;
  double seconds = 0.0;
  double speedup = 1.0;  // seconds of the first row / seconds of this row
  std::uint64_t path_hash = 0;
  long iterations = 0;
};

/// Times parallel_logistic_path on gen_logistic(spec) for each L with the
/// iteration budget fixed to `iterations`.
std::vector<ScalingRow> scaling_benchmark(const LogisticSpec& spec, const std::vector<int>& L_list,
                                          long iterations, const SolverConfig& base = {});

/// CSV with columns L,seconds,speedup,iterations,path_hash.
void write_scaling_csv(std::ostream& out, const std::vector<ScalingRow>& rows);

}  // namespace glbi
