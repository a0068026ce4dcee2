#include "clot/film_mlp.hpp"

#include <cmath>

namespace clot {
namespace {

constexpr double kSeluLambda = 1.0507009873554804934193349852946;
constexpr double kSeluAlpha = 1.6732632423543772848170429916717;

}  // namespace

Activation activation_from_name(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "swish") return Activation::kSwish;
  if (name == "selu") return Activation::kSelu;
  if (name == "tanh") return Activation::kTanh;
  throw validation_error("unknown activation: " + name);
}

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::kRelu: return "relu";
    case Activation::kSwish: return "swish";
    case Activation::kSelu: return "selu";
    case Activation::kTanh: return "tanh";
  }
  throw contract_error("activation_name: bad enum");
}

void apply_activation(Activation a, MatrixXd& z) {
  switch (a) {
    case Activation::kRelu:
      z = z.cwiseMax(0.0);
      return;
    case Activation::kSwish:
      z = z.array() / (1.0 + (-z.array()).exp());
      return;
    case Activation::kSelu:
      z = (z.array() > 0.0)
              .select(kSeluLambda * z.array(),
                      kSeluLambda * kSeluAlpha * (z.array().exp() - 1.0));
      return;
    case Activation::kTanh:
      z = z.array().tanh();
      return;
  }
}

MatrixXd activation_derivative(Activation a, const MatrixXd& z) {
  switch (a) {
    case Activation::kRelu:
      return (z.array() > 0.0).cast<double>();
    case Activation::kSwish: {
      MatrixXd s = (1.0 + (-z.array()).exp()).inverse();
      return s.array() * (1.0 + z.array() * (1.0 - s.array()));
    }
    case Activation::kSelu:
      return (z.array() > 0.0)
          .select(MatrixXd::Constant(z.rows(), z.cols(), kSeluLambda),
                  kSeluLambda * kSeluAlpha * z.array().exp());
    case Activation::kTanh:
      return 1.0 - z.array().tanh().square();
  }
  throw contract_error("activation_derivative: bad enum");
}

/// back ∘= σ'(z), without materializing the derivative matrix (hot path for
/// wide layers on large batches).
void scale_by_activation_derivative(Activation a, const MatrixXd& z, MatrixXd& back) {
  switch (a) {
    case Activation::kRelu:
      back.array() *= (z.array() > 0.0).cast<double>();
      return;
    case Activation::kSwish: {
      const auto s = (1.0 + (-z.array()).exp()).inverse();
      back.array() *= s * (1.0 + z.array() * (1.0 - s));
      return;
    }
    case Activation::kSelu:
      back.array() *= (z.array() > 0.0)
                          .select(MatrixXd::Constant(z.rows(), z.cols(), kSeluLambda),
                                  kSeluLambda * kSeluAlpha * z.array().exp())
                          .array();
      return;
    case Activation::kTanh:
      back.array() *= 1.0 - z.array().tanh().square();
      return;
  }
  throw contract_error("scale_by_activation_derivative: bad enum");
}

FilmState FilmState::select(const std::vector<int>& idx) const {
  FilmState out;
  auto gather = [&](const MatrixXd& m, MatrixXd& dst) {
    dst.resize(m.rows(), static_cast<Index>(idx.size()));
    for (std::size_t c = 0; c < idx.size(); ++c) {
      dst.col(static_cast<Index>(c)) = m.col(idx[c]);
    }
  };
  gather(hidden_z, out.hidden_z);
  gather(hidden, out.hidden);
  gather(dgamma, out.dgamma);
  gather(beta, out.beta);
  return out;
}

FilmMlp::FilmMlp(const MlpConfig& config) : config_(config) {
  CLOT_REQUIRE(config.input_dim > 0, "FilmMlp: input_dim must be positive");
  CLOT_REQUIRE(config.output_dim > 0, "FilmMlp: output_dim must be positive");
  CLOT_REQUIRE(config.condition_dim == 0 || !config.hidden.empty(),
               "FilmMlp: FiLM conditioning requires at least one hidden layer");
  for (int h : config.hidden) {
    CLOT_REQUIRE(h > 0, "FilmMlp: hidden widths must be positive");
  }

  auto layout = std::make_shared<ParamLayout>();
  int fan_in = config.input_dim;
  for (std::size_t l = 0; l < config.hidden.size(); ++l) {
    const int width = config.hidden[l];
    const std::string tag = "layer" + std::to_string(l);
    w_seg_.push_back(layout->add(tag + ".W", width, fan_in));
    b_seg_.push_back(layout->add(tag + ".b", width, 1));
    fan_in = width;
  }
  w_seg_.push_back(layout->add("out.W", config.output_dim, fan_in));
  b_seg_.push_back(layout->add("out.b", config.output_dim, 1));

  if (config.condition_dim > 0) {
    CLOT_REQUIRE(config.film_width > 0, "FilmMlp: film_width must be positive");
    const int h0 = config.hidden.front();
    film_w0_ = layout->add("film.W0", config.film_width, config.condition_dim);
    film_b0_ = layout->add("film.b0", config.film_width, 1);
    film_w1_ = layout->add("film.W1", 2 * h0, config.film_width);
    film_b1_ = layout->add("film.b1", 2 * h0, 1);
  }

  layout_ = std::move(layout);
  params_ = ParamVector(layout_);
}

void FilmMlp::init(Rng& rng) {
  // He-style fan-in scaling for the rectified family, unit-variance-preserving
  // for tanh/selu.  Biases start at zero.
  const double gain = (config_.activation == Activation::kRelu ||
                       config_.activation == Activation::kSwish)
                          ? 2.0
                          : 1.0;
  auto fill = [&](int seg, double scale) {
    auto m = params_.matrix(seg);
    for (Index c = 0; c < m.cols(); ++c) {
      for (Index r = 0; r < m.rows(); ++r) {
        m(r, c) = scale * rng.normal();
      }
    }
  };
  for (std::size_t l = 0; l < w_seg_.size(); ++l) {
    const auto& seg = layout_->segment(w_seg_[l]);
    fill(w_seg_[l], std::sqrt(gain / static_cast<double>(seg.cols)));
    params_.matrix(b_seg_[l]).setZero();
  }
  if (film_w0_ >= 0) {
    const auto& seg = layout_->segment(film_w0_);
    fill(film_w0_, std::sqrt(gain / static_cast<double>(seg.cols)));
    params_.matrix(film_b0_).setZero();
    // Zeroed output layer: modulation starts as identity (gamma = 1, beta = 0).
    params_.matrix(film_w1_).setZero();
    params_.matrix(film_b1_).setZero();
  }
}

FilmState FilmMlp::film(const MatrixXd& cond) const {
  CLOT_REQUIRE(conditioned(), "FilmMlp::film: network is unconditioned");
  CLOT_REQUIRE(cond.rows() == config_.condition_dim,
               "FilmMlp::film: condition dimension mismatch");
  FilmState st;
  st.hidden_z = params_.matrix(film_w0_) * cond;
  st.hidden_z.colwise() += params_.matrix(film_b0_).col(0);
  st.hidden = st.hidden_z;
  apply_activation(config_.activation, st.hidden);
  MatrixXd out = params_.matrix(film_w1_) * st.hidden;
  out.colwise() += params_.matrix(film_b1_).col(0);
  const Index h0 = config_.hidden.front();
  st.dgamma = out.topRows(h0);
  st.beta = out.bottomRows(h0);
  return st;
}

MatrixXd FilmMlp::forward(const MatrixXd& input, const FilmState* film,
                          int replicas, MlpCache* cache) const {
  CLOT_REQUIRE(input.rows() == config_.input_dim,
               "FilmMlp::forward: input dimension mismatch");
  CLOT_REQUIRE((film != nullptr) == conditioned(),
               "FilmMlp::forward: film state presence must match conditioning");
  if (film != nullptr) {
    CLOT_REQUIRE(replicas >= 1 && film->batch() * replicas == input.cols(),
                 "FilmMlp::forward: replica count inconsistent with batch");
  }
  const std::size_t layers = config_.hidden.size();
  if (cache != nullptr) {
    cache->input = input;
    cache->z.assign(layers, MatrixXd());
    cache->h.assign(layers, MatrixXd());
    cache->replicas = replicas;
  }

  // ReLU backward only needs activation signs, which the stored outputs carry;
  // other activations keep their pre-activations.
  const bool store_z = config_.activation != Activation::kRelu;
  MatrixXd held;
  const MatrixXd* cur = &input;
  for (std::size_t l = 0; l < layers; ++l) {
    MatrixXd z = params_.matrix(w_seg_[l]) * (*cur);
    z.colwise() += params_.matrix(b_seg_[l]).col(0);
    if (cache != nullptr && store_z) cache->z[l] = z;
    apply_activation(config_.activation, z);
    if (l == 0 && film != nullptr) {
      if (cache != nullptr) cache->h0_raw = z;
      const Index n_cond = film->batch();
      for (Index i = 0; i < n_cond; ++i) {
        auto block = z.middleCols(i * replicas, replicas);
        block.array().colwise() *= (1.0 + film->dgamma.col(i).array());
        block.colwise() += film->beta.col(i);
      }
    }
    if (cache != nullptr) {
      cache->h[l] = std::move(z);
      cur = &cache->h[l];
    } else {
      held = std::move(z);
      cur = &held;
    }
  }
  MatrixXd out = params_.matrix(w_seg_[layers]) * (*cur);
  out.colwise() += params_.matrix(b_seg_[layers]).col(0);
  return out;
}

MatrixXd FilmMlp::forward_cond(const MatrixXd& input, const MatrixXd& cond) const {
  if (!conditioned()) return forward(input);
  FilmState st = film(cond);
  return forward(input, &st);
}

VectorXd FilmMlp::forward1(const VectorXd& input, const VectorXd& cond) const {
  MatrixXd out = forward_cond(input, cond);
  return out.col(0);
}

void FilmMlp::backward(const MatrixXd& out_cot, const MlpCache& cache,
                       const FilmState* film, ParamVector* param_grad,
                       MatrixXd* input_grad, FilmCotangents* film_cot) const {
  const std::size_t layers = config_.hidden.size();
  CLOT_REQUIRE(out_cot.rows() == config_.output_dim,
               "FilmMlp::backward: cotangent dimension mismatch");
  CLOT_REQUIRE(param_grad == nullptr || param_grad->layout() == layout_,
               "FilmMlp::backward: gradient layout mismatch");
  CLOT_REQUIRE((film != nullptr) == (conditioned() && cache.h0_raw.size() > 0),
               "FilmMlp::backward: film state must match the forward call");
  CLOT_REQUIRE(film_cot == nullptr || film != nullptr,
               "FilmMlp::backward: film cotangents requested without film state");

  const MatrixXd& last = layers == 0 ? cache.input : cache.h[layers - 1];
  if (param_grad != nullptr) {
    param_grad->matrix(w_seg_[layers]).noalias() += out_cot * last.transpose();
    param_grad->matrix(b_seg_[layers]).col(0) += out_cot.rowwise().sum();
  }
  MatrixXd back = params_.matrix(w_seg_[layers]).transpose() * out_cot;

  MatrixXd scratch;
  for (std::size_t l = layers; l-- > 0;) {
    if (l == 0 && film != nullptr) {
      // h0 = (1 + dgamma) .* h0_raw + beta, so the beta cotangent is `back`
      // as-is, the dgamma cotangent pairs with h0_raw, and the pass-through
      // picks up the (1 + dgamma) scale.
      const int replicas = cache.replicas;
      const Index n_cond = film->batch();
      if (film_cot != nullptr) {
        film_cot->dgamma.resize(back.rows(), n_cond);
        film_cot->beta.resize(back.rows(), n_cond);
      }
      for (Index i = 0; i < n_cond; ++i) {
        auto block = back.middleCols(i * replicas, replicas);
        if (film_cot != nullptr) {
          film_cot->beta.col(i) = block.rowwise().sum();
          film_cot->dgamma.col(i) =
              (block.array() *
               cache.h0_raw.middleCols(i * replicas, replicas).array())
                  .rowwise()
                  .sum();
        }
        block.array().colwise() *= (1.0 + film->dgamma.col(i).array());
      }
    }
    if (config_.activation == Activation::kRelu) {
      // relu(z) > 0 iff z > 0, so the stored outputs provide the mask (for the
      // modulated layer the pre-modulation copy keeps the sign).
      const MatrixXd& src =
          (l == 0 && film != nullptr) ? cache.h0_raw : cache.h[l];
      back.array() *= (src.array() > 0.0).cast<double>();
    } else {
      scale_by_activation_derivative(config_.activation, cache.z[l], back);
    }
    const MatrixXd& below = (l == 0) ? cache.input : cache.h[l - 1];
    if (param_grad != nullptr) {
      param_grad->matrix(w_seg_[l]).noalias() += back * below.transpose();
      param_grad->matrix(b_seg_[l]).col(0) += back.rowwise().sum();
    }
    if (l > 0) {
      scratch.noalias() = params_.matrix(w_seg_[l]).transpose() * back;
      back.swap(scratch);
    } else if (input_grad != nullptr) {
      input_grad->noalias() = params_.matrix(w_seg_[l]).transpose() * back;
    }
  }
  if (layers == 0 && input_grad != nullptr) {
    *input_grad = back;
  }
}

void FilmMlp::film_backward(const FilmCotangents& cot, const MatrixXd& cond,
                            const FilmState& state, ParamVector* param_grad,
                            MatrixXd* cond_grad) const {
  CLOT_REQUIRE(conditioned(), "FilmMlp::film_backward: network is unconditioned");
  MatrixXd d_out(cot.dgamma.rows() * 2, cot.dgamma.cols());
  d_out.topRows(cot.dgamma.rows()) = cot.dgamma;
  d_out.bottomRows(cot.beta.rows()) = cot.beta;
  if (param_grad != nullptr) {
    param_grad->matrix(film_w1_).noalias() += d_out * state.hidden.transpose();
    param_grad->matrix(film_b1_).col(0) += d_out.rowwise().sum();
  }
  MatrixXd dh = params_.matrix(film_w1_).transpose() * d_out;
  MatrixXd dz = dh.array() * activation_derivative(config_.activation, state.hidden_z).array();
  if (param_grad != nullptr) {
    param_grad->matrix(film_w0_).noalias() += dz * cond.transpose();
    param_grad->matrix(film_b0_).col(0) += dz.rowwise().sum();
  }
  if (cond_grad != nullptr) {
    cond_grad->noalias() = params_.matrix(film_w0_).transpose() * dz;
  }
}

}  // namespace clot
