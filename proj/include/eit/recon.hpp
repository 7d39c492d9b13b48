#pragma once

#include <string>
#include <vector>

#include "eit/forward.hpp"

namespace eit {

struct IterationRecord {
  int iteration = 0;
  double misfit = 0.0;     // data-fit value
  double penalty = 0.0;    // regularizer value (TV, l1, ...)
  double step = 0.0;       // damping factor / step size
  int backtracks = 0;
  int nonzeros = 0;        // sparsity methods
  double monotonicity_ref = 0.0;  // accepted-step bound (sparsity)
  double wall_seconds = 0.0;
};

struct ReconResult {
  Conductivity sigma;
  std::vector<IterationRecord> history;
  bool warning = false;
  std::string note;
  double wall_seconds = 0.0;
};

void write_trace_csv(const std::string& path, const std::vector<IterationRecord>& history);

}  // namespace eit
