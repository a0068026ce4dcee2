#include "clot/transport.hpp"

namespace clot {

TransportBundle::TransportBundle(std::vector<double> anchor_times,
                                 ConditionEncoder encoder, TransportOptions opts,
                                 std::optional<MetricField::Options> metric_opts,
                                 Potential potential)
    : anchor_times_(std::move(anchor_times)),
      encoder_(std::move(encoder)),
      opts_(opts),
      basis_(opts.knots),
      potential_(std::move(potential)) {
  CLOT_REQUIRE(anchor_times_.size() >= 2, "TransportBundle: need at least two anchors");
  for (std::size_t i = 1; i < anchor_times_.size(); ++i) {
    CLOT_REQUIRE(anchor_times_[i] > anchor_times_[i - 1],
                 "TransportBundle: anchor times must be strictly increasing");
  }
  CLOT_REQUIRE(opts.d_y >= 1, "TransportBundle: d_y must be positive");

  const int cond_dim = encoder_.encoded_dim();
  auto mlp = [&](int in, int out, const std::vector<int>& hidden) {
    MlpConfig cfg;
    cfg.input_dim = in;
    cfg.output_dim = out;
    cfg.hidden = hidden;
    cfg.activation = opts.activation;
    cfg.condition_dim = cond_dim;
    cfg.film_width = opts.film_width;
    return FilmMlp(cfg);
  };
  const int intervals = interval_count();
  g_.reserve(static_cast<std::size_t>(intervals));
  map_.reserve(static_cast<std::size_t>(intervals));
  for (int k = 0; k < intervals; ++k) {
    g_.push_back(mlp(opts.d_y, 1, opts.hidden_g));
    map_.push_back(mlp(opts.d_y, opts.d_y, opts.hidden_map));
  }
  spline_gen_ = mlp(2 * opts.d_y, opts.d_y * opts.knots, opts.hidden_spline);

  if (metric_opts.has_value()) {
    auto mo = *metric_opts;
    mo.dim = opts.d_y;
    mo.condition_dim = cond_dim;
    metric_.emplace(mo);
  }
  action_ = std::make_unique<ActionEvaluator>(lagrangian(), basis_, opts.quad_points);
}

void TransportBundle::init(Rng& rng) {
  // Fixed derivation order keeps parameter draws stable across runs.
  for (std::size_t k = 0; k < g_.size(); ++k) {
    Rng r = rng.child(100 + static_cast<std::uint64_t>(k));
    g_[k].init(r);
  }
  for (std::size_t k = 0; k < map_.size(); ++k) {
    Rng r = rng.child(200 + static_cast<std::uint64_t>(k));
    map_[k].init(r);
  }
  Rng rs = rng.child(300);
  spline_gen_.init(rs);
  if (metric_) {
    Rng rm = rng.child(400);
    metric_->init(rm);
  }
}

FilmMlp& TransportBundle::g(int k) {
  CLOT_REQUIRE(k >= 0 && k < interval_count(), "TransportBundle: interval out of range");
  return g_[static_cast<std::size_t>(k)];
}
const FilmMlp& TransportBundle::g(int k) const {
  CLOT_REQUIRE(k >= 0 && k < interval_count(), "TransportBundle: interval out of range");
  return g_[static_cast<std::size_t>(k)];
}
FilmMlp& TransportBundle::map(int k) {
  CLOT_REQUIRE(k >= 0 && k < interval_count(), "TransportBundle: interval out of range");
  return map_[static_cast<std::size_t>(k)];
}
const FilmMlp& TransportBundle::map(int k) const {
  CLOT_REQUIRE(k >= 0 && k < interval_count(), "TransportBundle: interval out of range");
  return map_[static_cast<std::size_t>(k)];
}

MatrixXd TransportBundle::predict_map(int k, const MatrixXd& y,
                                      const FilmState& film) const {
  return map(k).forward(y, &film);
}

VectorXd TransportBundle::predict_map1(int k, const VectorXd& y,
                                       const Condition& x) const {
  return map(k).forward1(y, encoder_.encode(x));
}

MatrixXd TransportBundle::predict_offsets(const MatrixXd& y0, const MatrixXd& y1,
                                          const FilmState& film) const {
  MatrixXd input(2 * opts_.d_y, y0.cols());
  input.topRows(opts_.d_y) = y0;
  input.bottomRows(opts_.d_y) = y1;
  return spline_gen_.forward(input, &film);
}

SplinePath TransportBundle::predict_path1(const VectorXd& y0, const VectorXd& y1,
                                          const Condition& x) const {
  const MatrixXd enc = encoder_.encode(x);
  const FilmState film = spline_gen_.film(enc);
  MatrixXd y0m = y0, y1m = y1;
  const MatrixXd off = predict_offsets(y0m, y1m, film);
  SplinePath path;
  path.y0 = y0;
  path.y1 = y1;
  path.offsets = Eigen::Map<const MatrixXd>(off.data(), opts_.d_y, opts_.knots);
  return path;
}

namespace {

/// Objective for the inner refinement: columns are candidate end points; the
/// path is re-generated from the path network at every candidate, so the
/// optimization sees the same landscape the sampler will use.
class CtObjective final : public BatchedObjective {
 public:
  CtObjective(const TransportBundle& bundle, int k, const MatrixXd& y0,
              const GeometryBatch& geo, const FilmState* film_s,
              const FilmState* film_g)
      : bundle_(bundle),
        k_(k),
        y0_(y0),
        geo_(geo),
        film_s_(film_s),
        film_g_(film_g) {}

  Index dim() const override { return y0_.rows(); }

  void evaluate(const MatrixXd& x, const std::vector<int>& idx, VectorXd& f,
                MatrixXd* grad) override {
    const Index d = y0_.rows();
    const auto n = static_cast<Index>(idx.size());
    const bool full = n == y0_.cols();
    const bool want_grad = grad != nullptr;

    // Subset views of per-sample state.
    MatrixXd y0_sub(d, n);
    for (Index c = 0; c < n; ++c) y0_sub.col(c) = y0_.col(idx[static_cast<std::size_t>(c)]);
    GeometryBatch geo_sub = full ? geo_ : geo_.select(idx);
    FilmState fs_sub, fg_sub;
    const FilmState* fs = film_s_;
    const FilmState* fg = film_g_;
    if (!full) {
      if (fs != nullptr) {
        fs_sub = fs->select(idx);
        fs = &fs_sub;
      }
      if (fg != nullptr) {
        fg_sub = fg->select(idx);
        fg = &fg_sub;
      }
    }

    // Path offsets from the generator.
    MatrixXd input(2 * d, n);
    input.topRows(d) = y0_sub;
    input.bottomRows(d) = x;
    MlpCache s_cache;
    const MatrixXd offsets = bundle_.spline_gen().forward(
        input, fs, 1, want_grad ? &s_cache : nullptr);

    ActionEvaluator::Request req;
    req.endpoint_grads = want_grad;
    req.offset_grads = want_grad;
    const auto act = bundle_.action().evaluate(y0_sub, x, offsets, geo_sub, req);

    MlpCache g_cache;
    const MatrixXd gv = bundle_.g(k_).forward(x, fg, 1, want_grad ? &g_cache : nullptr);
    f = act.action - gv.row(0).transpose();

    if (want_grad) {
      // End-point sensitivity: direct through the spline endpoints, indirect
      // through the generated offsets, minus the potential's slope.
      MatrixXd s_input_grad;
      bundle_.spline_gen().backward(act.d_offsets, s_cache, fs, nullptr,
                                    &s_input_grad, nullptr);
      MatrixXd g_input_grad;
      bundle_.g(k_).backward(MatrixXd::Ones(1, n), g_cache, fg, nullptr,
                             &g_input_grad, nullptr);
      grad->noalias() = act.d_y1;
      *grad += s_input_grad.bottomRows(d);
      *grad -= g_input_grad;
    }
  }

 private:
  const TransportBundle& bundle_;
  int k_;
  const MatrixXd& y0_;
  const GeometryBatch& geo_;
  const FilmState* film_s_;
  const FilmState* film_g_;
};

}  // namespace

CTransformBatch c_transform_batch(const TransportBundle& bundle, int k,
                                  const MatrixXd& y0,
                                  const std::vector<Condition>& conds,
                                  int refine_iters, const LbfgsOptions& opts) {
  const Index n = y0.cols();
  CLOT_REQUIRE(static_cast<Index>(conds.size()) == n,
               "c_transform_batch: one condition per column required");
  CLOT_REQUIRE(y0.rows() == bundle.options().d_y,
               "c_transform_batch: y0 dimension mismatch");

  const MatrixXd encoded = bundle.encoder().encode_batch(conds);
  const GeometryBatch geo = bundle.geometry_batch(conds);
  const bool conditioned = bundle.spline_gen().conditioned();
  FilmState film_s, film_g, film_t;
  if (conditioned) {
    film_s = bundle.film_spline(encoded);
    film_g = bundle.film_g(k, encoded);
    film_t = bundle.film_map(k, encoded);
  }

  // Warm start at the transport map's prediction.
  const MatrixXd y1_init =
      conditioned ? bundle.predict_map(k, y0, film_t) : bundle.map(k).forward(y0);

  CtObjective obj(bundle, k, y0, geo, conditioned ? &film_s : nullptr,
                  conditioned ? &film_g : nullptr);
  LbfgsOptions lo = opts;
  lo.max_iters = refine_iters;
  const BatchedLbfgsResult res = lbfgs_minimize_batch(obj, y1_init, lo);

  CTransformBatch out;
  out.y1 = res.x;
  out.iters = res.iters;
  out.eval_rounds = res.eval_rounds;

  // Final clean pass at the refined end points for the pieces callers reuse.
  MatrixXd input(2 * y0.rows(), n);
  input.topRows(y0.rows()) = y0;
  input.bottomRows(y0.rows()) = out.y1;
  out.offsets = bundle.spline_gen().forward(input, conditioned ? &film_s : nullptr);
  ActionEvaluator::Request req;
  out.action =
      bundle.action().evaluate(y0, out.y1, out.offsets, geo, req).action;
  const MatrixXd gv =
      bundle.g(k).forward(out.y1, conditioned ? &film_g : nullptr);
  out.g_at_y1 = gv.row(0).transpose();
  out.value = out.action - out.g_at_y1;
  return out;
}

CTransformResult c_transform(const TransportBundle& bundle, int k,
                             const VectorXd& y0, const Condition& x,
                             int refine_iters, const LbfgsOptions& opts) {
  MatrixXd y0m = y0;
  const CTransformBatch b =
      c_transform_batch(bundle, k, y0m, {x}, refine_iters, opts);
  CTransformResult r;
  r.y1 = b.y1.col(0);
  r.value = b.value(0);
  r.action = b.action(0);
  r.iters = b.iters(0);
  r.path.y0 = y0;
  r.path.y1 = r.y1;
  r.path.offsets = Eigen::Map<const MatrixXd>(b.offsets.data(), y0.size(),
                                              bundle.options().knots);
  return r;
}

double dual_value(const TransportBundle& bundle, int k, const MatrixXd& y0,
                  const std::vector<Condition>& conds0, const MatrixXd& y1,
                  const std::vector<Condition>& conds1, int refine_iters,
                  const LbfgsOptions& opts) {
  const CTransformBatch b =
      c_transform_batch(bundle, k, y0, conds0, refine_iters, opts);
  const MatrixXd enc1 = bundle.encoder().encode_batch(conds1);
  MatrixXd gv;
  if (bundle.g(k).conditioned()) {
    const FilmState film = bundle.film_g(k, enc1);
    gv = bundle.g(k).forward(y1, &film);
  } else {
    gv = bundle.g(k).forward(y1);
  }
  return b.value.mean() + gv.row(0).mean();
}

}  // namespace clot
