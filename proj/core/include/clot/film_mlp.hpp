#pragma once

#include <memory>
#include <string>
#include <vector>

#include "clot/param_vector.hpp"
#include "clot/rng.hpp"

namespace clot {

enum class Activation { kRelu, kSwish, kSelu, kTanh };

Activation activation_from_name(const std::string& name);
std::string activation_name(Activation a);

struct MlpConfig {
  int input_dim = 0;
  int output_dim = 0;
  std::vector<int> hidden;
  Activation activation = Activation::kRelu;
  /// 0 disables conditioning; otherwise a FiLM block modulates the first
  /// hidden layer from a side input of this dimension.
  int condition_dim = 0;
  /// Hidden width of the FiLM embedder network.
  int film_width = 16;
};

/// Output of the FiLM embedder for a batch of condition columns, kept around
/// both as the modulators themselves and as the cache for its backward pass.
/// The modulation applied to the first hidden layer h is (1 + dgamma) * h +
/// beta, so zeroed embedder output weights start the network at identity
/// modulation.
struct FilmState {
  MatrixXd hidden_z;  // film_width x n, embedder pre-activation
  MatrixXd hidden;    // film_width x n
  MatrixXd dgamma;    // h0 x n
  MatrixXd beta;      // h0 x n

  Index batch() const { return dgamma.cols(); }
  FilmState select(const std::vector<int>& idx) const;
};

/// Activations recorded by a forward pass, consumed by backward().
struct MlpCache {
  MatrixXd input;
  std::vector<MatrixXd> z;  // pre-activation per hidden layer
  std::vector<MatrixXd> h;  // post-activation (after modulation for layer 0)
  MatrixXd h0_raw;          // layer-0 post-activation before modulation
  int replicas = 1;
};

/// Cotangents flowing into the FiLM modulators, one column per condition.
struct FilmCotangents {
  MatrixXd dgamma;
  MatrixXd beta;
};

/// Multi-layer perceptron with optional FiLM conditioning on a side input.
/// All passes are batched with one sample per column; gradients are exact
/// reverse-mode accumulation into a shared flat parameter layout.
///
/// The film state is computed separately from the main forward pass so that
/// callers evaluating many main inputs under few (frozen) conditions pay for
/// the embedder once: `replicas` tells forward() that modulator column i
/// covers input columns [i*replicas, (i+1)*replicas).
class FilmMlp {
 public:
  FilmMlp() = default;
  explicit FilmMlp(const MlpConfig& config);

  void init(Rng& rng);

  const MlpConfig& config() const { return config_; }
  const std::shared_ptr<const ParamLayout>& layout() const { return layout_; }
  ParamVector& params() { return params_; }
  const ParamVector& params() const { return params_; }
  bool conditioned() const { return config_.condition_dim > 0; }

  FilmState film(const MatrixXd& cond) const;

  MatrixXd forward(const MatrixXd& input, const FilmState* film = nullptr,
                   int replicas = 1, MlpCache* cache = nullptr) const;

  /// One-call conditioned forward (embedder + main path).
  MatrixXd forward_cond(const MatrixXd& input, const MatrixXd& cond) const;
  VectorXd forward1(const VectorXd& input, const VectorXd& cond) const;

  /// Reverse pass through the main path.  `film` must be the same state passed
  /// to forward() (or null).  `param_grad` is accumulated (+=) if non-null;
  /// `input_grad` and `film_cot` are overwritten if non-null.  `film_cot`
  /// columns are summed over each condition's replica block.
  void backward(const MatrixXd& out_cot, const MlpCache& cache,
                const FilmState* film, ParamVector* param_grad,
                MatrixXd* input_grad = nullptr,
                FilmCotangents* film_cot = nullptr) const;

  /// Reverse pass through the embedder.  `param_grad` accumulated if non-null,
  /// `cond_grad` overwritten if non-null.
  void film_backward(const FilmCotangents& cot, const MatrixXd& cond,
                     const FilmState& state, ParamVector* param_grad,
                     MatrixXd* cond_grad = nullptr) const;

 private:
  MlpConfig config_;
  std::shared_ptr<const ParamLayout> layout_;
  ParamVector params_;
  std::vector<int> w_seg_;  // hidden layers then output layer
  std::vector<int> b_seg_;
  int film_w0_ = -1, film_b0_ = -1, film_w1_ = -1, film_b1_ = -1;
};

/// Elementwise activation and its derivative as a function of pre-activation.
void apply_activation(Activation a, MatrixXd& z);
MatrixXd activation_derivative(Activation a, const MatrixXd& z);
/// back ∘= σ'(z) in place, avoiding a derivative-sized temporary.
void scale_by_activation_derivative(Activation a, const MatrixXd& z, MatrixXd& back);

}  // namespace clot
