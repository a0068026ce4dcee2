#pragma once

#include <iosfwd>
#include <limits>

#include "clot/metrics.hpp"
#include "clot/semicircle.hpp"
#include "clot/training.hpp"

namespace clot {

/// Metrics for one (eval time, condition) cell: model samples scored against
/// freshly drawn truth from the generating process.
struct EvalCell {
  double t = 0.0;
  int condition_id = 0;
  double nll = 0.0;
  double cd = 0.0;
  double w2 = 0.0;
};

struct RunEval {
  std::uint64_t train_seed = 0;
  std::vector<EvalCell> cells;
  double mean_nll = 0.0;
  double mean_cd = 0.0;
  double mean_w2 = 0.0;
};

/// Mean with a standard error over runs; the error is NaN ("absent") for a
/// single run.
struct Aggregate {
  double mean = 0.0;
  double std_error = std::numeric_limits<double>::quiet_NaN();

  bool has_error() const { return std_error == std_error; }
};

struct VariantReport {
  std::string name;
  bool failed = false;
  std::string error;
  std::vector<RunEval> runs;
  Aggregate nll, cd, w2;
};

struct AblationOptions {
  std::vector<double> eval_times = {0.25, 0.75};
  int runs = 5;
  std::uint64_t seed = 1;
  int eval_samples = 100;   // generated and truth samples per cell
  double nll_bandwidth = 0.05;
};

struct AblationReport {
  std::vector<double> eval_times;
  int runs = 0;
  int eval_samples = 0;
  std::vector<VariantReport> variants;

  const VariantReport* find(const std::string& name) const;
};

/// Scores one trained surrogate against the semicircle process at the given
/// times, one cell per (time, condition).  Truth draws depend only on
/// eval_seed and the cell, so different models are scored against identical
/// truth sets.
RunEval evaluate_semicircle_model(const SurrogateModel& model,
                                  const SemicircleOptions& gen,
                                  const std::vector<double>& eval_times,
                                  int samples, double nll_bandwidth,
                                  std::uint64_t eval_seed);

/// Trains each named config `runs` times (fresh data and seeds per run, shared
/// across variants within a run) and aggregates per-variant metrics.  A
/// variant whose training throws is marked failed and keeps its completed
/// runs.
AblationReport run_ablation(
    const std::vector<std::pair<std::string, TrainingConfig>>& variants,
    const SemicircleOptions& gen, const AblationOptions& opts,
    std::ostream* log = nullptr);

std::string ablation_report_to_json(const AblationReport& report);

/// Flat tab-separated table (one row per variant/run/cell) for plotting.
std::string ablation_report_table(const AblationReport& report);

}  // namespace clot
