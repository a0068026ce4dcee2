#pragma once

#include <iosfwd>
#include <memory>

#include "clot/config_file.hpp"
#include "clot/sampling.hpp"

namespace clot {

/// Model variants: with or without a learned metric, with or without the
/// density potential.
enum class Variant {
  kIdentity,           // identity kinetic term, no potential
  kMetric,             // learned metric, no potential
  kIdentityPotential,  // identity kinetic term + potential
  kMetricPotential,    // learned metric + potential
};

Variant variant_from_name(const std::string& name);
std::string variant_name(Variant v);

struct TrainingConfig;
void apply_variant(TrainingConfig& cfg, Variant v);

struct TrainingConfig {
  // Density / potential.
  bool use_potential = true;
  double alpha = 0.05;
  double epsilon = 1e-9;
  double h_y = 0.05;
  double h_x = 0.0;  // <= 0: exact-match (discrete) conditioning

  // Metric field.
  bool learn_metric = true;
  bool learn_eigenvalues = true;
  std::vector<double> fixed_eigenvalues = {1.0, 0.1};
  double budget = 2.0;
  std::vector<int> hidden_metric = {128, 128};
  double lr_metric = 5e-3;

  // Dual / map / path networks.
  std::vector<int> hidden_g = {64, 64, 64, 64};
  std::vector<int> hidden_map = {64, 64, 64, 64};
  std::vector<int> hidden_spline = {1024, 1024};
  std::string activation = "relu";
  int film_width = 16;
  int knots = 15;
  int quad_points = 32;
  double lr_g = 1e-4;
  double lr_map = 1e-4;
  double lr_spline = 1e-4;

  // Loop structure: outer iterations each run `inner_iters` dual/map/path
  // updates per interval, then one metric update.
  int outer_iters = 200;
  int inner_iters = 10;
  int refine_iters = 10;
  int refine_memory = 8;
  int batch_size = 0;  // 0 = full batch
  std::uint64_t seed = 0;

  int trace_every = 1;
};

TrainingConfig training_config_from_doc(ConfigDoc& doc);
std::string training_config_to_json(const TrainingConfig& cfg);
TrainingConfig training_config_from_json(const std::string& text);

/// Builds the (zero-parameter) transport bundle a config describes for one
/// observation set: networks sized to the data, metric field and density
/// potential present exactly when the config enables them.
std::unique_ptr<TransportBundle> make_bundle(const ObservationSet& data,
                                             const TrainingConfig& cfg);

/// Per-outer-iteration training record.
struct TraceRecord {
  int outer = 0;
  std::vector<double> dual;      // per interval, last inner iteration
  std::vector<double> map_loss;  // per interval
  std::vector<double> path_loss; // per interval
  double metric_loss = 0.0;
  double grad_g = 0.0, grad_map = 0.0, grad_spline = 0.0, grad_metric = 0.0;
  double seconds = 0.0;  // wall time since training started
};

std::string trace_record_to_json(const TraceRecord& r);

/// Alternating optimization of the dual potentials, transport maps, path
/// generator, and metric field on one observation set.  Exposes single update
/// steps for testing; run() executes the full schedule.
class Trainer {
 public:
  Trainer(std::shared_ptr<const ObservationSet> data, const TrainingConfig& cfg);
  ~Trainer();

  const TransportBundle& bundle() const { return *bundle_; }
  TransportBundle& bundle() { return *bundle_; }
  const TrainingConfig& config() const { return cfg_; }

  struct StepStats {
    double dual = 0.0;
    double map_loss = 0.0;
    double path_loss = 0.0;
    double metric_term = 0.0;
  };

  /// One inner iteration on interval k: dual ascent, map descent, path descent.
  /// With `accumulate_metric_term` set, the refined couplings computed for this
  /// sweep also feed the metric-loss accumulator (no extra refinement solve).
  StepStats inner_step(int k, bool accumulate_metric_term = false);

  /// Adds interval k's mean optimal-path action gradient into the metric
  /// accumulator, refining couplings at the current parameters; returns the
  /// loss term.  No-op (0) without a learned metric.
  double accumulate_metric(int k);

  /// Applies the accumulated metric gradient (one Adam ascent-free descent
  /// step) and clears the accumulator.  Returns the gradient infinity-norm.
  double metric_step();

  /// Full schedule; trace records stream to `trace` when non-null and log
  /// lines to `log` when non-null.
  void run(std::ostream* trace, std::ostream* log);

  /// Moves the trained pieces into a servable surrogate.  The trainer is
  /// unusable afterwards.
  std::unique_ptr<SurrogateModel> finish();

 private:
  struct IntervalData;

  std::shared_ptr<const ObservationSet> data_;
  TrainingConfig cfg_;
  std::unique_ptr<TransportBundle> bundle_;
  std::vector<IntervalData> intervals_;
  std::vector<AdamState> g_state_, map_state_;
  AdamState spline_state_, metric_state_;
  ParamVector metric_accum_;
  int metric_terms_ = 0;
  LbfgsOptions refine_opts_;
  Rng rng_;
  double last_grad_g_ = 0.0, last_grad_map_ = 0.0, last_grad_spline_ = 0.0;
};

std::unique_ptr<SurrogateModel> train_model(std::shared_ptr<const ObservationSet> data,
                                            const TrainingConfig& cfg,
                                            std::ostream* trace, std::ostream* log);

}  // namespace clot
