#pragma once

#include "recipegen/features.hpp"
#include "recipegen/model.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace recipegen {

struct TrainConfig {
  double learning_rate = 1e-3;
  double decay_rate = 0.9;  // lr multiplier applied after every epoch
  int epochs = 10;
  int batch_size = 16;
  double grad_clip_norm = 5.0;
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  void validate() const;
};

/// Learning rate in effect after `completed_epochs` epochs.
double learning_rate_after(const TrainConfig& config, int completed_epochs);

/// Examples padded into matrices, one row per example. Target position t of
/// row r is a prediction iff target_mask(r, t) is set, i.e. iff
/// targets(r, t + 1) is a real token.
struct Batch {
  Eigen::MatrixXi names;
  Eigen::MatrixXi ingredients;
  Eigen::MatrixXi targets;
  Eigen::VectorXi name_lengths;
  Eigen::VectorXi ingredient_lengths;
  Eigen::VectorXi target_lengths;
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> target_mask;
  std::vector<CalorieLevel> calories;
  std::vector<const Example*> examples;

  int rows() const { return static_cast<int>(examples.size()); }
  long predicted_tokens() const { return target_mask.count(); }
  EncodedInput input(int row) const;
  std::vector<int> target(int row) const;
  const UserHistory& history(int row) const { return examples[static_cast<std::size_t>(row)]->history; }
};

/// `pad_to` widens the target matrix beyond the longest target (extra PAD).
Batch make_batch(std::span<const Example* const> examples, int pad_to = 0);

/// Groups examples of similar target length. Every index appears once; the
/// order of batches is shuffled.
std::vector<std::vector<std::size_t>> bucket_batches(const std::vector<Example>& examples, int batch_size,
                                                     std::uint64_t seed);

/// Mean negative log-likelihood per predicted token.
template <typename Scalar>
Scalar compute_loss(const RecipeModel<Scalar>& model, const Batch& batch);

/// compute_loss plus its gradient, accumulated into `grad`.
template <typename Scalar>
Scalar compute_loss_and_gradient(const RecipeModel<Scalar>& model, const Batch& batch,
                                 ModelParameters<Scalar>& grad);

/// exp of the mean negative log-likelihood per predicted BPE token.
template <typename Scalar>
double perplexity(const RecipeModel<Scalar>& model, std::span<const Example> examples);

/// Contiguous views of every tensor of a visitable parameter struct, in
/// visit order.
template <class Params>
std::vector<std::span<typename Params::scalar_type>> tensor_spans(Params& p) {
  std::vector<std::span<typename Params::scalar_type>> out;
  p.visit([&](const std::string&, auto& t) { out.emplace_back(t.data(), static_cast<std::size_t>(t.size())); });
  return out;
}

template <class Params>
double gradient_norm(const Params& grad) {
  double sq = 0;
  grad.visit([&](const std::string&, const auto& t) { sq += double(t.squaredNorm()); });
  return std::sqrt(sq);
}

/// Scales `grad` to norm `max_norm` when it is larger. Returns the norm
/// before clipping.
template <class Params>
double clip_gradient(Params& grad, double max_norm) {
  const double norm = gradient_norm(grad);
  if (norm > max_norm) {
    const auto scale = typename Params::scalar_type(max_norm / norm);
    grad.visit([&](const std::string&, auto& t) { t *= scale; });
  }
  return norm;
}

/// Adam over any visitable parameter struct.
template <class Params>
class Adam {
 public:
  explicit Adam(const Params& like, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8)
      : m_(like), v_(like), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {
    m_.visit([](const std::string&, auto& t) { t.setZero(); });
    v_.visit([](const std::string&, auto& t) { t.setZero(); });
  }

  void step(Params& params, Params& grad, double learning_rate) {
    using Scalar = typename Params::scalar_type;
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, double(t_));
    const double c2 = 1.0 - std::pow(beta2_, double(t_));
    const auto p = tensor_spans(params), g = tensor_spans(grad), m = tensor_spans(m_), v = tensor_spans(v_);
    for (std::size_t k = 0; k < p.size(); ++k) {
      for (std::size_t i = 0; i < p[k].size(); ++i) {
        const double gi = double(g[k][i]);
        const double mi = beta1_ * double(m[k][i]) + (1 - beta1_) * gi;
        const double vi = beta2_ * double(v[k][i]) + (1 - beta2_) * gi * gi;
        m[k][i] = Scalar(mi);
        v[k][i] = Scalar(vi);
        p[k][i] -= Scalar(learning_rate * (mi / c1) / (std::sqrt(vi / c2) + epsilon_));
      }
    }
  }
  long steps() const { return t_; }

 private:
  Params m_, v_;
  double beta1_, beta2_, epsilon_;
  long t_ = 0;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double learning_rate = 0.0;
  double train_loss = 0.0;
  double dev_perplexity = 0.0;
  double seconds = 0.0;
  bool best = false;
};

std::string to_json_line(const EpochRecord& record);

template <typename Scalar>
struct TrainResult {
  RecipeModel<Scalar> best;
  int best_epoch = 0;
  std::vector<EpochRecord> log;
};

/// Raised when a batch yields a non-finite loss or non-finite parameters.
class TrainingAborted : public std::runtime_error {
 public:
  TrainingAborted(const std::string& what, std::string diagnostic)
      : std::runtime_error(what), diagnostic_(std::move(diagnostic)) {}
  const std::string& diagnostic() const { return diagnostic_; }

 private:
  std::string diagnostic_;
};

/// Textual dump of a batch for post-mortem inspection.
std::string describe_batch(const Batch& batch);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Teacher-forced Adam training. Dev perplexity (train perplexity when `dev`
/// is empty) is measured after every epoch and the best parameters are
/// returned.
template <typename Scalar>
TrainResult<Scalar> train(RecipeModel<Scalar> model, const TrainConfig& config,
                          const std::vector<Example>& train_set, const std::vector<Example>& dev_set,
                          const EpochCallback& on_epoch = {});

}  // namespace recipegen
