#include "clot/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>

#include "clot/optim.hpp"

namespace clot {

BaselineKind baseline_kind_from_name(const std::string& name) {
  if (name == "direct") return BaselineKind::kDirect;
  if (name == "cfm") return BaselineKind::kCfm;
  throw validation_error("unknown baseline kind: " + name +
                         " (expected direct or cfm)");
}

std::string baseline_kind_name(BaselineKind k) {
  return k == BaselineKind::kDirect ? "direct" : "cfm";
}

BaselineConfig default_direct_config() { return BaselineConfig{}; }

BaselineConfig default_cfm_config() {
  BaselineConfig c;
  c.kind = BaselineKind::kCfm;
  c.batch_size = 1000;
  return c;
}

// ---- training sets ----------------------------------------------------------

struct BaselineModel::Pairs {
  MatrixXd input;    // direct: (D+1) x N with target time row; flow: D x N starts
  MatrixXd target;   // direct only
  MatrixXd encoded;  // condition encoding per column
  std::vector<int> cond_pool;       // flow: end-pool index per column
  std::vector<MatrixXd> end_pools;  // flow: candidate end points per condition

  std::vector<int> train_ids, val_ids;

  // Flow validation uses triples frozen at construction so the early-stopping
  // signal is not re-randomized every epoch.
  MatrixXd val_input, val_target, val_encoded;
};

namespace {

std::vector<int> gather(const std::vector<int>& ids, std::size_t at, std::size_t n) {
  return {ids.begin() + static_cast<std::ptrdiff_t>(at),
          ids.begin() + static_cast<std::ptrdiff_t>(at + n)};
}

MatrixXd take_cols(const MatrixXd& m, const std::vector<int>& idx) {
  MatrixXd out(m.rows(), static_cast<Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.col(static_cast<Index>(i)) = m.col(idx[i]);
  }
  return out;
}

}  // namespace

BaselineModel::BaselineModel(const ObservationSet& data, const BaselineConfig& cfg)
    : data_(data), cfg_(cfg), encoder_(data.make_encoder()), rng_(cfg.seed) {
  CLOT_REQUIRE(data_.finalized(), "BaselineModel: finalized observation set required");
  CLOT_VALIDATE(data_.anchor_count() >= 2,
                "baseline training needs at least two anchor times");
  CLOT_VALIDATE(cfg_.batch_size > 0 && cfg_.epochs >= 0 && cfg_.euler_steps > 0,
                "baseline config: bad loop sizes");
  const int d = data_.dim();

  MlpConfig net_cfg;
  net_cfg.input_dim = d + 1;  // sample plus a time coordinate
  net_cfg.output_dim = d;
  net_cfg.hidden = cfg_.hidden;
  net_cfg.activation = activation_from_name(cfg_.activation);
  net_cfg.condition_dim = encoder_.encoded_dim();
  net_cfg.film_width = cfg_.film_width;

  const int net_count =
      cfg_.kind == BaselineKind::kDirect ? 1 : data_.interval_count();
  nets_.reserve(static_cast<std::size_t>(net_count));
  for (int i = 0; i < net_count; ++i) {
    nets_.emplace_back(net_cfg);
    Rng init = rng_.child(10 + static_cast<std::uint64_t>(i));
    nets_.back().init(init);
  }

  const auto split = [&](Pairs& p, Index n) {
    std::vector<int> order = rng_.permutation(static_cast<int>(n));
    auto val_n = static_cast<std::size_t>(
        std::floor(cfg_.validation_fraction * static_cast<double>(n)));
    if (n < 10) val_n = 0;  // too small to hold anything out
    p.val_ids = gather(order, 0, val_n);
    p.train_ids = gather(order, val_n, static_cast<std::size_t>(n) - val_n);
    CLOT_VALIDATE(!p.train_ids.empty(), "baseline training set is empty");
  };

  if (cfg_.kind == BaselineKind::kDirect) {
    // Base sample at the first anchor, matched by (condition, pair key) to the
    // sample at every anchor time, first anchor included.
    std::map<std::pair<int, int>, Index> base_at;  // (cond index, key) -> column
    MatrixXd base(d, 0);
    {
      Index total = 0;
      for (const auto* gp : data_.groups_at(0)) total += gp->ys.cols();
      base.resize(d, total);
      Index at = 0;
      for (const auto* gp : data_.groups_at(0)) {
        const int ci = encoder_.is_discrete() ? encoder_.index_of(gp->x.id()) : 0;
        for (Index c = 0; c < gp->ys.cols(); ++c) {
          base.col(at) = gp->ys.col(c);
          const int key = gp->pair_keys[static_cast<std::size_t>(c)];
          if (key >= 0) base_at[{ci, key}] = at;
          ++at;
        }
      }
    }
    std::vector<Index> base_col;
    std::vector<VectorXd> targets;
    std::vector<Condition> conds;
    std::vector<double> times;
    for (int a = 0; a < data_.anchor_count(); ++a) {
      for (const auto* gp : data_.groups_at(a)) {
        const int ci = encoder_.is_discrete() ? encoder_.index_of(gp->x.id()) : 0;
        for (Index c = 0; c < gp->ys.cols(); ++c) {
          const int key = gp->pair_keys[static_cast<std::size_t>(c)];
          if (key < 0) continue;
          const auto hit = base_at.find({ci, key});
          if (hit == base_at.end()) continue;
          base_col.push_back(hit->second);
          targets.push_back(gp->ys.col(c));
          conds.push_back(gp->x);
          times.push_back(data_.anchor_times()[static_cast<std::size_t>(a)]);
        }
      }
    }
    CLOT_VALIDATE(!targets.empty(),
                  "direct baseline needs pair keys matching the first anchor");
    auto p = std::make_unique<Pairs>();
    const Index n = static_cast<Index>(targets.size());
    p->input.resize(d + 1, n);
    p->target.resize(d, n);
    for (Index i = 0; i < n; ++i) {
      p->input.col(i).head(d) = base.col(base_col[static_cast<std::size_t>(i)]);
      p->input(d, i) = times[static_cast<std::size_t>(i)];
      p->target.col(i) = targets[static_cast<std::size_t>(i)];
    }
    p->encoded = encoder_.encode_batch(conds);
    split(*p, n);
    train_sets_.push_back(std::move(p));
  } else {
    for (int k = 0; k < data_.interval_count(); ++k) {
      auto p = std::make_unique<Pairs>();
      std::vector<Condition> conds;
      Index total = 0;
      for (const auto* gp : data_.groups_at(k)) total += gp->ys.cols();
      p->input.resize(d, total);
      p->cond_pool.reserve(static_cast<std::size_t>(total));
      Index at = 0;
      for (const auto* gp : data_.groups_at(k)) {
        const auto* end = data_.find_group(k + 1, gp->x);
        CLOT_VALIDATE(end != nullptr && end->ys.cols() > 0,
                      "flow baseline: condition missing at the next anchor");
        const int pool = static_cast<int>(p->end_pools.size());
        p->end_pools.push_back(end->ys);
        for (Index c = 0; c < gp->ys.cols(); ++c) {
          p->input.col(at) = gp->ys.col(c);
          p->cond_pool.push_back(pool);
          conds.push_back(gp->x);
          ++at;
        }
      }
      p->encoded = encoder_.encode_batch(conds);
      split(*p, total);

      const Index vn = static_cast<Index>(p->val_ids.size());
      p->val_input.resize(d + 1, vn);
      p->val_target.resize(d, vn);
      p->val_encoded.resize(p->encoded.rows(), vn);
      for (Index i = 0; i < vn; ++i) {
        const int col = p->val_ids[static_cast<std::size_t>(i)];
        const auto& pool = p->end_pools[static_cast<std::size_t>(
            p->cond_pool[static_cast<std::size_t>(col)])];
        const VectorXd y0 = p->input.col(col);
        const VectorXd y1 = pool.col(static_cast<Index>(
            rng_.uniform_index(static_cast<std::uint64_t>(pool.cols()))));
        const double t = rng_.uniform01();
        p->val_input.col(i).head(d) = (1.0 - t) * y0 + t * y1;
        p->val_input(d, i) = t;
        p->val_target.col(i) = y1 - y0;
        p->val_encoded.col(i) = p->encoded.col(col);
      }
      train_sets_.push_back(std::move(p));
    }
  }
}

BaselineModel::~BaselineModel() = default;

BaselineModel::TrainSummary BaselineModel::train(std::ostream* log) {
  const int d = data_.dim();
  TrainSummary summary;
  double val_sum = 0.0, train_sum = 0.0;

  for (std::size_t net_i = 0; net_i < nets_.size(); ++net_i) {
    FilmMlp& net = nets_[net_i];
    Pairs& pairs = *train_sets_[net_i];
    AdamState adam;
    AdamOptions adam_opts;
    adam_opts.lr = cfg_.lr;
    ParamVector grad(net.layout());

    // One minibatch pass; updates when `adam_state` is non-null.
    auto pass = [&](const std::vector<int>& ids, AdamState* adam_state) {
      double sq_sum = 0.0;
      const auto bs = static_cast<std::size_t>(cfg_.batch_size);
      for (std::size_t at = 0; at < ids.size(); at += bs) {
        const std::size_t n = std::min(bs, ids.size() - at);
        const std::vector<int> batch = gather(ids, at, n);
        MatrixXd input, target;
        if (cfg_.kind == BaselineKind::kDirect) {
          input = take_cols(pairs.input, batch);
          target = take_cols(pairs.target, batch);
        } else {
          input.resize(d + 1, static_cast<Index>(n));
          target.resize(d, static_cast<Index>(n));
          for (std::size_t i = 0; i < n; ++i) {
            const int col = batch[i];
            const auto& pool = pairs.end_pools[static_cast<std::size_t>(
                pairs.cond_pool[static_cast<std::size_t>(col)])];
            const VectorXd y0 = pairs.input.col(col);
            const VectorXd y1 = pool.col(static_cast<Index>(
                rng_.uniform_index(static_cast<std::uint64_t>(pool.cols()))));
            const double t = rng_.uniform01();
            input.col(static_cast<Index>(i)).head(d) = (1.0 - t) * y0 + t * y1;
            input(d, static_cast<Index>(i)) = t;
            target.col(static_cast<Index>(i)) = y1 - y0;
          }
        }
        const MatrixXd enc = take_cols(pairs.encoded, batch);
        const FilmState film = net.film(enc);
        MlpCache cache;
        const MatrixXd diff =
            net.forward(input, &film, 1, &cache) - target;
        sq_sum += diff.squaredNorm();
        if (adam_state != nullptr) {
          grad.set_zero();
          FilmCotangents fc;
          net.backward((2.0 / static_cast<double>(n)) * diff, cache, &film,
                       &grad, nullptr, &fc);
          net.film_backward(fc, enc, film, &grad);
          adam_step(net.params(), grad.values(), *adam_state, adam_opts);
        }
      }
      return sq_sum / static_cast<double>(ids.size());
    };

    auto val_loss = [&]() {
      if (cfg_.kind == BaselineKind::kDirect) {
        if (pairs.val_ids.empty()) return std::numeric_limits<double>::quiet_NaN();
        const MatrixXd input = take_cols(pairs.input, pairs.val_ids);
        const MatrixXd target = take_cols(pairs.target, pairs.val_ids);
        const MatrixXd enc = take_cols(pairs.encoded, pairs.val_ids);
        const FilmState film = net.film(enc);
        return (net.forward(input, &film) - target).squaredNorm() /
               static_cast<double>(pairs.val_ids.size());
      }
      if (pairs.val_input.cols() == 0) return std::numeric_limits<double>::quiet_NaN();
      const FilmState film = net.film(pairs.val_encoded);
      return (net.forward(pairs.val_input, &film) - pairs.val_target).squaredNorm() /
             static_cast<double>(pairs.val_input.cols());
    };

    VectorXd best_params = net.params().values();
    double best_val = std::numeric_limits<double>::infinity();
    double last_train = 0.0;
    int bad_epochs = 0;
    int epoch = 0;
    bool stopped = false;
    for (; epoch < cfg_.epochs; ++epoch) {
      std::vector<int> order = pairs.train_ids;
      const std::vector<int> shuffle =
          rng_.permutation(static_cast<int>(order.size()));
      std::vector<int> shuffled(order.size());
      for (std::size_t i = 0; i < order.size(); ++i) {
        shuffled[i] = order[static_cast<std::size_t>(shuffle[i])];
      }
      last_train = pass(shuffled, &adam);
      double v = val_loss();
      if (std::isnan(v)) v = last_train;
      if (v < best_val) {
        best_val = v;
        best_params = net.params().values();
        bad_epochs = 0;
      } else if (++bad_epochs >= cfg_.patience) {
        stopped = true;
        ++epoch;
        break;
      }
      if (log != nullptr && epoch % 200 == 0) {
        (*log) << baseline_kind_name(cfg_.kind) << " net " << net_i << " epoch "
               << epoch << " train " << last_train << " val " << v << "\n";
      }
    }
    net.params().values() = best_params;
    summary.epochs_run = std::max(summary.epochs_run, epoch);
    summary.early_stopped = summary.early_stopped || stopped;
    train_sum += last_train;
    val_sum += best_val;
  }
  summary.train_loss = train_sum / static_cast<double>(nets_.size());
  summary.val_loss = val_sum / static_cast<double>(nets_.size());
  return summary;
}

// ---- inference --------------------------------------------------------------

MatrixXd BaselineModel::flow_integrate(MatrixXd y, const MatrixXd& encoded,
                                       double t_star) const {
  const int d = data_.dim();
  const auto& anchors = data_.anchor_times();
  MatrixXd input(d + 1, y.cols());
  for (std::size_t k = 0; k + 1 < anchors.size(); ++k) {
    const double t0 = anchors[k], t1 = anchors[k + 1];
    if (t_star <= t0) break;
    const double s_end = std::min(1.0, (t_star - t0) / (t1 - t0));
    const FilmState film = nets_[k].film(encoded);
    const double ds = s_end / static_cast<double>(cfg_.euler_steps);
    double s = 0.0;
    for (int step = 0; step < cfg_.euler_steps; ++step) {
      input.topRows(d) = y;
      input.row(d).setConstant(s);
      y += ds * nets_[k].forward(input, &film);
      s += ds;
    }
    if (s_end < 1.0) break;
  }
  return y;
}

VectorXd BaselineModel::predict(const VectorXd& y_base, const Condition& x,
                                double t_star) const {
  return predict_many(y_base, x, t_star).col(0);
}

MatrixXd BaselineModel::predict_many(const MatrixXd& y_base, const Condition& x,
                                     double t_star) const {
  CLOT_VALIDATE(y_base.rows() == data_.dim(), "predict: sample dimension mismatch");
  const auto& anchors = data_.anchor_times();
  CLOT_VALIDATE(t_star >= anchors.front() - 1e-9 && t_star <= anchors.back() + 1e-9,
                "predict: query time outside the trained anchor span");
  const MatrixXd encoded =
      encoder_.encode(x).replicate(1, y_base.cols());
  if (cfg_.kind == BaselineKind::kDirect) {
    MatrixXd input(data_.dim() + 1, y_base.cols());
    input.topRows(data_.dim()) = y_base;
    input.row(data_.dim()).setConstant(t_star);
    const FilmState film = nets_[0].film(encoded);
    return nets_[0].forward(input, &film);
  }
  return flow_integrate(y_base, encoded, t_star);
}

MatrixXd BaselineModel::sample_many(double t_star, const Condition& x, int count,
                                    Rng& rng) const {
  CLOT_VALIDATE(count > 0, "sample_many: count must be positive");
  const auto* group = data_.find_group(0, x);
  CLOT_VALIDATE(group != nullptr && group->ys.cols() > 0,
                "no anchor samples for the requested condition");
  MatrixXd base(data_.dim(), count);
  for (int i = 0; i < count; ++i) {
    base.col(i) = group->ys.col(static_cast<Index>(
        rng.uniform_index(static_cast<std::uint64_t>(group->ys.cols()))));
  }
  return predict_many(base, x, t_star);
}

}  // namespace clot
