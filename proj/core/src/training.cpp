#include "clot/training.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <ostream>

namespace clot {

using nlohmann::json;

Variant variant_from_name(const std::string& name) {
  if (name == "K_I") return Variant::kIdentity;
  if (name == "K_theta") return Variant::kMetric;
  if (name == "K_I-U") return Variant::kIdentityPotential;
  if (name == "K_theta-U") return Variant::kMetricPotential;
  throw validation_error("unknown variant: " + name +
                         " (expected K_I, K_theta, K_I-U, or K_theta-U)");
}

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kIdentity: return "K_I";
    case Variant::kMetric: return "K_theta";
    case Variant::kIdentityPotential: return "K_I-U";
    case Variant::kMetricPotential: return "K_theta-U";
  }
  throw contract_error("variant_name: bad enum");
}

void apply_variant(TrainingConfig& cfg, Variant v) {
  cfg.learn_metric = v == Variant::kMetric || v == Variant::kMetricPotential;
  cfg.use_potential =
      v == Variant::kIdentityPotential || v == Variant::kMetricPotential;
}

TrainingConfig training_config_from_doc(ConfigDoc& doc) {
  TrainingConfig c;
  c.use_potential = doc.get_bool("use_potential", c.use_potential);
  c.alpha = doc.get_double("alpha", c.alpha);
  c.epsilon = doc.get_double("epsilon", c.epsilon);
  c.h_y = doc.get_double("h_y", c.h_y);
  c.h_x = doc.get_double("h_x", c.h_x);
  c.learn_metric = doc.get_bool("learn_metric", c.learn_metric);
  c.learn_eigenvalues = doc.get_bool("learn_eigenvalues", c.learn_eigenvalues);
  c.fixed_eigenvalues = doc.get_double_list("fixed_eigenvalues", c.fixed_eigenvalues);
  c.budget = doc.get_double("budget", c.budget);
  c.hidden_metric = doc.get_int_list("hidden_metric", c.hidden_metric);
  c.lr_metric = doc.get_double("lr_metric", c.lr_metric);
  c.hidden_g = doc.get_int_list("hidden_g", c.hidden_g);
  c.hidden_map = doc.get_int_list("hidden_map", c.hidden_map);
  c.hidden_spline = doc.get_int_list("hidden_spline", c.hidden_spline);
  c.activation = doc.get_string("activation", c.activation);
  c.film_width = doc.get_int("film_width", c.film_width);
  c.knots = doc.get_int("knots", c.knots);
  c.quad_points = doc.get_int("quad_points", c.quad_points);
  c.lr_g = doc.get_double("lr_g", c.lr_g);
  c.lr_map = doc.get_double("lr_map", c.lr_map);
  c.lr_spline = doc.get_double("lr_spline", c.lr_spline);
  c.outer_iters = doc.get_int("outer_iters", c.outer_iters);
  c.inner_iters = doc.get_int("inner_iters", c.inner_iters);
  c.refine_iters = doc.get_int("refine_iters", c.refine_iters);
  c.refine_memory = doc.get_int("refine_memory", c.refine_memory);
  c.batch_size = doc.get_int("batch_size", c.batch_size);
  c.seed = static_cast<std::uint64_t>(doc.get_int("seed", static_cast<int>(c.seed)));
  c.trace_every = doc.get_int("trace_every", c.trace_every);

  CLOT_VALIDATE(c.h_y > 0.0, "config: h_y must be positive");
  CLOT_VALIDATE(c.epsilon > 0.0, "config: epsilon must be positive");
  CLOT_VALIDATE(c.knots >= 0, "config: knots must be >= 0");
  CLOT_VALIDATE(c.quad_points > 0, "config: quad_points must be positive");
  CLOT_VALIDATE(c.outer_iters >= 0 && c.inner_iters >= 0,
                "config: bad iteration counts");
  CLOT_VALIDATE(c.refine_iters >= 0, "config: refine_iters must be >= 0");
  activation_from_name(c.activation);  // validates
  return c;
}

namespace {

json config_json(const TrainingConfig& c) {
  return json{{"use_potential", c.use_potential},
              {"alpha", c.alpha},
              {"epsilon", c.epsilon},
              {"h_y", c.h_y},
              {"h_x", c.h_x},
              {"learn_metric", c.learn_metric},
              {"learn_eigenvalues", c.learn_eigenvalues},
              {"fixed_eigenvalues", c.fixed_eigenvalues},
              {"budget", c.budget},
              {"hidden_metric", c.hidden_metric},
              {"lr_metric", c.lr_metric},
              {"hidden_g", c.hidden_g},
              {"hidden_map", c.hidden_map},
              {"hidden_spline", c.hidden_spline},
              {"activation", c.activation},
              {"film_width", c.film_width},
              {"knots", c.knots},
              {"quad_points", c.quad_points},
              {"lr_g", c.lr_g},
              {"lr_map", c.lr_map},
              {"lr_spline", c.lr_spline},
              {"outer_iters", c.outer_iters},
              {"inner_iters", c.inner_iters},
              {"refine_iters", c.refine_iters},
              {"refine_memory", c.refine_memory},
              {"batch_size", c.batch_size},
              {"seed", c.seed},
              {"trace_every", c.trace_every}};
}

}  // namespace

std::string training_config_to_json(const TrainingConfig& cfg) {
  return config_json(cfg).dump();
}

TrainingConfig training_config_from_json(const std::string& text) {
  const json j = json::parse(text);
  TrainingConfig c;
  c.use_potential = j.value("use_potential", c.use_potential);
  c.alpha = j.value("alpha", c.alpha);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.h_y = j.value("h_y", c.h_y);
  c.h_x = j.value("h_x", c.h_x);
  c.learn_metric = j.value("learn_metric", c.learn_metric);
  c.learn_eigenvalues = j.value("learn_eigenvalues", c.learn_eigenvalues);
  c.fixed_eigenvalues = j.value("fixed_eigenvalues", c.fixed_eigenvalues);
  c.budget = j.value("budget", c.budget);
  c.hidden_metric = j.value("hidden_metric", c.hidden_metric);
  c.lr_metric = j.value("lr_metric", c.lr_metric);
  c.hidden_g = j.value("hidden_g", c.hidden_g);
  c.hidden_map = j.value("hidden_map", c.hidden_map);
  c.hidden_spline = j.value("hidden_spline", c.hidden_spline);
  c.activation = j.value("activation", c.activation);
  c.film_width = j.value("film_width", c.film_width);
  c.knots = j.value("knots", c.knots);
  c.quad_points = j.value("quad_points", c.quad_points);
  c.lr_g = j.value("lr_g", c.lr_g);
  c.lr_map = j.value("lr_map", c.lr_map);
  c.lr_spline = j.value("lr_spline", c.lr_spline);
  c.outer_iters = j.value("outer_iters", c.outer_iters);
  c.inner_iters = j.value("inner_iters", c.inner_iters);
  c.refine_iters = j.value("refine_iters", c.refine_iters);
  c.refine_memory = j.value("refine_memory", c.refine_memory);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seed = j.value("seed", c.seed);
  c.trace_every = j.value("trace_every", c.trace_every);
  return c;
}

std::string trace_record_to_json(const TraceRecord& r) {
  return json{{"outer", r.outer},
              {"dual", r.dual},
              {"map_loss", r.map_loss},
              {"path_loss", r.path_loss},
              {"metric_loss", r.metric_loss},
              {"grad_norms",
               {{"g", r.grad_g},
                {"map", r.grad_map},
                {"spline", r.grad_spline},
                {"metric", r.grad_metric}}},
              {"seconds", r.seconds}}
      .dump();
}

std::unique_ptr<TransportBundle> make_bundle(const ObservationSet& data,
                                             const TrainingConfig& cfg) {
  CLOT_REQUIRE(data.finalized(), "make_bundle: finalized observation set required");
  CLOT_VALIDATE(data.anchor_count() >= 2,
                "training needs at least two anchor times");

  Potential potential;
  if (cfg.use_potential && cfg.alpha != 0.0) {
    NwEstimator::Options kde_opts;
    kde_opts.h_y = cfg.h_y;
    kde_opts.h_x = data.discrete_conditions() ? 0.0 : cfg.h_x;
    auto kde = std::make_shared<NwEstimator>(data, kde_opts);
    potential = Potential(std::move(kde), cfg.alpha, cfg.epsilon);
  }

  std::optional<MetricField::Options> metric_opts;
  if (cfg.learn_metric) {
    MetricField::Options mo;
    mo.budget = cfg.budget;
    mo.hidden = cfg.hidden_metric;
    mo.activation = activation_from_name(cfg.activation);
    mo.film_width = cfg.film_width;
    mo.learn_eigenvalues = cfg.learn_eigenvalues;
    if (!cfg.learn_eigenvalues) {
      CLOT_VALIDATE(static_cast<int>(cfg.fixed_eigenvalues.size()) == data.dim(),
                    "config: fixed_eigenvalues length must equal the outcome dimension");
      mo.fixed_eigenvalues = Eigen::Map<const VectorXd>(
          cfg.fixed_eigenvalues.data(),
          static_cast<Index>(cfg.fixed_eigenvalues.size()));
    }
    metric_opts = mo;
  }

  TransportOptions opts;
  opts.d_y = data.dim();
  opts.knots = cfg.knots;
  opts.quad_points = cfg.quad_points;
  opts.hidden_g = cfg.hidden_g;
  opts.hidden_map = cfg.hidden_map;
  opts.hidden_spline = cfg.hidden_spline;
  opts.activation = activation_from_name(cfg.activation);
  opts.film_width = cfg.film_width;

  return std::make_unique<TransportBundle>(data.anchor_times(), data.make_encoder(),
                                           opts, metric_opts, std::move(potential));
}

// ---- trainer ----------------------------------------------------------------

struct Trainer::IntervalData {
  MatrixXd y0, y1;
  std::vector<Condition> conds0, conds1;
  MatrixXd enc0, enc1;
};

Trainer::Trainer(std::shared_ptr<const ObservationSet> data,
                 const TrainingConfig& cfg)
    : data_(std::move(data)),
      cfg_(cfg),
      metric_accum_(),
      rng_(cfg.seed) {
  CLOT_REQUIRE(data_ != nullptr, "Trainer: observation set required");
  bundle_ = make_bundle(*data_, cfg_);
  Rng init_rng = rng_.child(1);
  bundle_->init(init_rng);

  const int intervals = bundle_->interval_count();
  intervals_.resize(static_cast<std::size_t>(intervals));
  for (int k = 0; k < intervals; ++k) {
    auto& iv = intervals_[static_cast<std::size_t>(k)];
    auto fill = [&](int anchor, MatrixXd& y, std::vector<Condition>& conds,
                    MatrixXd& enc) {
      Index total = 0;
      const auto groups = data_->groups_at(anchor);
      CLOT_VALIDATE(!groups.empty(), "training anchor has no samples");
      for (const auto* gp : groups) total += gp->ys.cols();
      y.resize(data_->dim(), total);
      conds.clear();
      conds.reserve(static_cast<std::size_t>(total));
      Index at = 0;
      for (const auto* gp : groups) {
        y.middleCols(at, gp->ys.cols()) = gp->ys;
        for (Index c = 0; c < gp->ys.cols(); ++c) conds.push_back(gp->x);
        at += gp->ys.cols();
      }
      enc = bundle_->encoder().encode_batch(conds);
    };
    fill(k, iv.y0, iv.conds0, iv.enc0);
    fill(k + 1, iv.y1, iv.conds1, iv.enc1);
  }

  g_state_.resize(static_cast<std::size_t>(intervals));
  map_state_.resize(static_cast<std::size_t>(intervals));
  if (bundle_->metric() != nullptr) {
    metric_accum_ = ParamVector(bundle_->metric()->net().layout());
  }

  refine_opts_.max_iters = cfg_.refine_iters;
  refine_opts_.memory = cfg_.refine_memory;
  // Map targets only need ~1e-3 accuracy; a tighter change tolerance keeps
  // nearly-converged samples in the batch for no benefit, and stragglers that
  // cannot find a productive step within a few halvings keep their best point.
  refine_opts_.f_tol = 1e-7;
  refine_opts_.max_backtracks = 6;
}

Trainer::~Trainer() = default;

Trainer::StepStats Trainer::inner_step(int k, bool accumulate_metric_term) {
  auto& iv = intervals_.at(static_cast<std::size_t>(k));
  StepStats stats;
  const Index n0 = iv.y0.cols();
  const Index n1 = iv.y1.cols();

  const CTransformBatch ct = c_transform_batch(*bundle_, k, iv.y0, iv.conds0,
                                               cfg_.refine_iters, refine_opts_);
  const GeometryBatch geo = bundle_->geometry_batch(iv.conds0);

  // ---- metric loss: this sweep's refined couplings are the freshest available
  // when the metric applies its one update per inner cycle, so the gradient is
  // taken here rather than re-refining afterwards (the couplings are constants
  // for the metric step either way).
  if (accumulate_metric_term && bundle_->metric() != nullptr) {
    ActionEvaluator::Request req;
    req.metric_param_grad = &metric_accum_;
    req.param_scale = 1.0 / static_cast<double>(n0);
    const auto act = bundle_->action().evaluate(iv.y0, ct.y1, ct.offsets, geo, req);
    stats.metric_term = act.action.mean();
    ++metric_terms_;
  }

  // ---- dual potential: ascend mean g^c(y0) + mean g(y1).  The refined end
  // points are constants here, so only the two direct g terms contribute.
  {
    FilmMlp& g = bundle_->g(k);
    ParamVector grad(g.layout());
    const FilmState film0 = g.film(iv.enc0);
    const FilmState film1 = g.film(iv.enc1);
    MlpCache c0, c1;
    g.forward(ct.y1, &film0, 1, &c0);
    const MatrixXd gv1 = g.forward(iv.y1, &film1, 1, &c1);
    FilmCotangents fc;
    g.backward(MatrixXd::Constant(1, n0, -1.0 / static_cast<double>(n0)), c0,
               &film0, &grad, nullptr, &fc);
    g.film_backward(fc, iv.enc0, film0, &grad);
    g.backward(MatrixXd::Constant(1, n1, 1.0 / static_cast<double>(n1)), c1,
               &film1, &grad, nullptr, &fc);
    g.film_backward(fc, iv.enc1, film1, &grad);
    stats.dual = ct.value.mean() + gv1.row(0).mean();
    last_grad_g_ = grad.values().lpNorm<Eigen::Infinity>();
    AdamOptions ao;
    ao.lr = cfg_.lr_g;
    const VectorXd ascent = -grad.values();
    adam_step(g.params(), ascent, g_state_.at(static_cast<std::size_t>(k)), ao);
  }

  // ---- transport map: descend mean squared distance to the refined ends.
  {
    FilmMlp& t = bundle_->map(k);
    ParamVector grad(t.layout());
    const FilmState film = t.film(iv.enc0);
    MlpCache cache;
    const MatrixXd pred = t.forward(iv.y0, &film, 1, &cache);
    const MatrixXd diff = pred - ct.y1;
    stats.map_loss = diff.squaredNorm() / static_cast<double>(n0);
    FilmCotangents fc;
    t.backward((2.0 / static_cast<double>(n0)) * diff, cache, &film, &grad,
               nullptr, &fc);
    t.film_backward(fc, iv.enc0, film, &grad);
    last_grad_map_ = grad.values().lpNorm<Eigen::Infinity>();
    AdamOptions ao;
    ao.lr = cfg_.lr_map;
    adam_step(t.params(), grad.values(), map_state_.at(static_cast<std::size_t>(k)),
              ao);
  }

  // ---- path generator: descend the mean action along paths between each
  // start point and its (post-update) mapped end point.
  {
    FilmMlp& s = bundle_->spline_gen();
    ParamVector grad(s.layout());
    const FilmState film_t = bundle_->map(k).film(iv.enc0);
    const MatrixXd y1_pred = bundle_->map(k).forward(iv.y0, &film_t);
    const FilmState film_s = s.film(iv.enc0);
    MatrixXd input(2 * iv.y0.rows(), n0);
    input.topRows(iv.y0.rows()) = iv.y0;
    input.bottomRows(iv.y0.rows()) = y1_pred;
    MlpCache cache;
    const MatrixXd offsets = s.forward(input, &film_s, 1, &cache);
    ActionEvaluator::Request req;
    req.offset_grads = true;
    const auto act = bundle_->action().evaluate(iv.y0, y1_pred, offsets, geo, req);
    stats.path_loss = act.action.mean();
    FilmCotangents fc;
    s.backward(act.d_offsets / static_cast<double>(n0), cache, &film_s, &grad,
               nullptr, &fc);
    s.film_backward(fc, iv.enc0, film_s, &grad);
    last_grad_spline_ = grad.values().lpNorm<Eigen::Infinity>();
    AdamOptions ao;
    ao.lr = cfg_.lr_spline;
    adam_step(s.params(), grad.values(), spline_state_, ao);
  }
  return stats;
}

double Trainer::accumulate_metric(int k) {
  if (bundle_->metric() == nullptr) return 0.0;
  auto& iv = intervals_.at(static_cast<std::size_t>(k));
  const Index n0 = iv.y0.cols();
  const CTransformBatch ct = c_transform_batch(*bundle_, k, iv.y0, iv.conds0,
                                               cfg_.refine_iters, refine_opts_);
  const GeometryBatch geo = bundle_->geometry_batch(iv.conds0);
  ActionEvaluator::Request req;
  req.metric_param_grad = &metric_accum_;
  req.param_scale = 1.0 / static_cast<double>(n0);
  const auto act = bundle_->action().evaluate(iv.y0, ct.y1, ct.offsets, geo, req);
  ++metric_terms_;
  return act.action.mean();
}

double Trainer::metric_step() {
  if (bundle_->metric() == nullptr) return 0.0;
  CLOT_REQUIRE(metric_terms_ > 0, "metric_step: nothing accumulated");
  const double norm = metric_accum_.values().lpNorm<Eigen::Infinity>();
  AdamOptions ao;
  ao.lr = cfg_.lr_metric;
  adam_step(bundle_->metric()->net().params(), metric_accum_.values(),
            metric_state_, ao);
  metric_accum_.set_zero();
  metric_terms_ = 0;
  return norm;
}

void Trainer::run(std::ostream* trace, std::ostream* log) {
  const auto start = std::chrono::steady_clock::now();
  const int intervals = bundle_->interval_count();
  for (int outer = 0; outer < cfg_.outer_iters; ++outer) {
    TraceRecord rec;
    rec.outer = outer;
    rec.dual.assign(static_cast<std::size_t>(intervals), 0.0);
    rec.map_loss.assign(static_cast<std::size_t>(intervals), 0.0);
    rec.path_loss.assign(static_cast<std::size_t>(intervals), 0.0);
    for (int inner = 0; inner < cfg_.inner_iters; ++inner) {
      const bool last = inner + 1 == cfg_.inner_iters;
      for (int k = 0; k < intervals; ++k) {
        const StepStats st = inner_step(k, last);
        if (last) {
          rec.dual[static_cast<std::size_t>(k)] = st.dual;
          rec.map_loss[static_cast<std::size_t>(k)] = st.map_loss;
          rec.path_loss[static_cast<std::size_t>(k)] = st.path_loss;
          rec.metric_loss += st.metric_term;
        }
      }
    }
    if (bundle_->metric() != nullptr) {
      if (cfg_.inner_iters == 0) {
        // No sweeps carried couplings; refine once so the metric still moves.
        for (int k = 0; k < intervals; ++k) rec.metric_loss += accumulate_metric(k);
      }
      rec.grad_metric = metric_step();
    }
    rec.grad_g = last_grad_g_;
    rec.grad_map = last_grad_map_;
    rec.grad_spline = last_grad_spline_;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                start)
                      .count();
    if (trace != nullptr && outer % cfg_.trace_every == 0) {
      // Flushed per record so an aborted run keeps its partial trace.
      (*trace) << trace_record_to_json(rec) << "\n";
      trace->flush();
    }
    if (log != nullptr && (outer % 10 == 0 || outer + 1 == cfg_.outer_iters)) {
      (*log) << "outer " << outer << "/" << cfg_.outer_iters
             << " dual[0] " << rec.dual.front() << " map[0] "
             << rec.map_loss.front() << " path[0] " << rec.path_loss.front()
             << " metric " << rec.metric_loss << " (" << rec.seconds << "s)"
             << std::endl;
    }
  }
}

std::unique_ptr<SurrogateModel> Trainer::finish() {
  CLOT_REQUIRE(bundle_ != nullptr, "Trainer::finish called twice");
  return std::make_unique<SurrogateModel>(std::move(bundle_), data_);
}

std::unique_ptr<SurrogateModel> train_model(std::shared_ptr<const ObservationSet> data,
                                            const TrainingConfig& cfg,
                                            std::ostream* trace, std::ostream* log) {
  Trainer trainer(std::move(data), cfg);
  trainer.run(trace, log);
  return trainer.finish();
}

}  // namespace clot
