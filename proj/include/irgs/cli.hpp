#pragma once

#include <functional>
#include <string>
#include <vector>

#include "irgs/image.hpp"
#include "irgs/synthdata.hpp"

namespace irgs::cli {

// Entry point behind the `irgs` binary. args excludes the program name.
// Exit codes: 0 success, 2 usage/config error, 3 runtime numeric failure.
int run(const std::vector<std::string>& args);

struct EvalRow {
  std::string metric;
  double mean = 0.0;
  double stddev = 0.0;
};

// Scores a predictor over labeled scenes; images whose metrics are undefined
// (e.g. no foreground) are skipped with a warning. `threads` <= 1 runs
// sequentially; aggregation order is by scene index either way.
std::vector<EvalRow> evaluate_scenes(
    const std::vector<LabeledScene>& scenes,
    const std::function<LabelPlane(const Image&, std::size_t)>& predict, int threads,
    std::vector<std::string>* warnings);

// IRGS_THREADS env var capping (>= 1); falls back to hardware concurrency.
int effective_threads(std::size_t work_items);

}  // namespace irgs::cli
