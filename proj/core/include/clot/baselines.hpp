#pragma once

#include <iosfwd>
#include <memory>

#include "clot/film_mlp.hpp"
#include "clot/observation_set.hpp"
#include "clot/rng.hpp"

namespace clot {

enum class BaselineKind { kDirect, kCfm };

BaselineKind baseline_kind_from_name(const std::string& name);
std::string baseline_kind_name(BaselineKind k);

struct BaselineConfig {
  BaselineKind kind = BaselineKind::kDirect;
  std::vector<int> hidden = {64, 64, 64, 64};
  std::string activation = "swish";
  int film_width = 16;
  double lr = 1e-3;
  int epochs = 10000;
  int patience = 100;            // epochs without validation improvement
  double validation_fraction = 0.1;
  int batch_size = 256;          // 1000 is conventional for the flow variant
  int euler_steps = 100;         // integration steps per interval crossing
  std::uint64_t seed = 0;
};

BaselineConfig default_direct_config();
BaselineConfig default_cfm_config();

/// Reference surrogates trained on the same anchor data as the transport
/// model.  The direct variant regresses (base sample at the first anchor,
/// target time) onto the matched sample at that time, conditions entering
/// through FiLM.  The flow variant fits one velocity field per interval on
/// straight-line interpolants between independently paired anchor samples and
/// integrates base samples forward with explicit Euler steps.
class BaselineModel {
 public:
  BaselineModel(const ObservationSet& data, const BaselineConfig& cfg);
  ~BaselineModel();

  BaselineKind kind() const { return cfg_.kind; }
  const BaselineConfig& config() const { return cfg_; }

  struct TrainSummary {
    int epochs_run = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    bool early_stopped = false;
  };

  TrainSummary train(std::ostream* log = nullptr);

  /// Prediction for one base sample drawn at the first anchor.  Direct: one
  /// network evaluation; flow: Euler integration across intervals up to the
  /// normalized target time.
  VectorXd predict(const VectorXd& y_base, const Condition& x, double t_star) const;
  MatrixXd predict_many(const MatrixXd& y_base, const Condition& x,
                        double t_star) const;

  /// Draw `count` base samples (with replacement) from the first anchor's
  /// group for x and push each to t_star.
  MatrixXd sample_many(double t_star, const Condition& x, int count, Rng& rng) const;

 private:
  struct Pairs;

  MatrixXd flow_integrate(MatrixXd y, const MatrixXd& encoded, double t_star) const;

  const ObservationSet& data_;
  BaselineConfig cfg_;
  ConditionEncoder encoder_;
  std::vector<FilmMlp> nets_;  // direct: 1; flow: one per interval
  std::vector<std::unique_ptr<Pairs>> train_sets_;
  Rng rng_;
};

}  // namespace clot
