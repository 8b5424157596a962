#include "recipegen/training.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace recipegen {

void TrainConfig::validate() const {
  if (!(learning_rate > 0)) throw std::invalid_argument("learning_rate must be > 0");
  if (!(decay_rate > 0 && decay_rate <= 1)) throw std::invalid_argument("decay_rate must be in (0, 1]");
  if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(grad_clip_norm > 0)) throw std::invalid_argument("grad_clip_norm must be > 0");
  if (!(adam_beta1 >= 0 && adam_beta1 < 1 && adam_beta2 >= 0 && adam_beta2 < 1))
    throw std::invalid_argument("Adam betas must be in [0, 1)");
  if (!(adam_epsilon > 0)) throw std::invalid_argument("adam_epsilon must be > 0");
}

double learning_rate_after(const TrainConfig& config, int completed_epochs) {
  return config.learning_rate * std::pow(config.decay_rate, completed_epochs);
}

EncodedInput Batch::input(int row) const {
  EncodedInput in;
  for (int j = 0; j < name_lengths(row); ++j) in.name.push_back(names(row, j));
  for (int j = 0; j < ingredient_lengths(row); ++j) in.ingredients.push_back(ingredients(row, j));
  in.calorie = calories[static_cast<std::size_t>(row)];
  return in;
}

std::vector<int> Batch::target(int row) const {
  std::vector<int> t;
  for (int j = 0; j < target_lengths(row); ++j) t.push_back(targets(row, j));
  return t;
}

Batch make_batch(std::span<const Example* const> examples, int pad_to) {
  Batch b;
  const int n = static_cast<int>(examples.size());
  int ln = 0, li = 0, lt = pad_to;
  for (const auto* e : examples) {
    ln = std::max(ln, static_cast<int>(e->input.name.size()));
    li = std::max(li, static_cast<int>(e->input.ingredients.size()));
    lt = std::max(lt, static_cast<int>(e->target.size()));
  }
  b.names = Eigen::MatrixXi::Constant(n, ln, BpeModel::kPad);
  b.ingredients = Eigen::MatrixXi::Constant(n, li, BpeModel::kPad);
  b.targets = Eigen::MatrixXi::Constant(n, lt, BpeModel::kPad);
  b.name_lengths.resize(n);
  b.ingredient_lengths.resize(n);
  b.target_lengths.resize(n);
  b.target_mask.setConstant(n, std::max(lt - 1, 0), false);
  for (int r = 0; r < n; ++r) {
    const Example& e = *examples[static_cast<std::size_t>(r)];
    for (std::size_t j = 0; j < e.input.name.size(); ++j) b.names(r, Index(j)) = e.input.name[j];
    for (std::size_t j = 0; j < e.input.ingredients.size(); ++j) b.ingredients(r, Index(j)) = e.input.ingredients[j];
    for (std::size_t j = 0; j < e.target.size(); ++j) b.targets(r, Index(j)) = e.target[j];
    b.name_lengths(r) = static_cast<int>(e.input.name.size());
    b.ingredient_lengths(r) = static_cast<int>(e.input.ingredients.size());
    b.target_lengths(r) = static_cast<int>(e.target.size());
    for (int t = 0; t + 1 < b.target_lengths(r); ++t) b.target_mask(r, t) = true;
    b.calories.push_back(e.input.calorie);
    b.examples.push_back(&e);
  }
  return b;
}

std::vector<std::vector<std::size_t>> bucket_batches(const std::vector<Example>& examples, int batch_size,
                                                     std::uint64_t seed) {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return examples[a].target.size() < examples[b].target.size(); });
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < order.size(); i += std::size_t(batch_size))
    batches.emplace_back(order.begin() + long(i), order.begin() + long(std::min(order.size(), i + std::size_t(batch_size))));
  std::shuffle(batches.begin(), batches.end(), rng);
  return batches;
}

template <typename Scalar>
Scalar compute_loss(const RecipeModel<Scalar>& model, const Batch& batch) {
  double nll = 0;
  for (int r = 0; r < batch.rows(); ++r) {
    const auto target = batch.target(r);
    nll -= double(sequence_log_likelihood(model, batch.input(r), batch.history(r), target).total);
  }
  const long n = batch.predicted_tokens();
  return n > 0 ? Scalar(nll / double(n)) : Scalar(0);
}

template <typename Scalar>
Scalar compute_loss_and_gradient(const RecipeModel<Scalar>& model, const Batch& batch,
                                 ModelParameters<Scalar>& grad) {
  const long n = batch.predicted_tokens();
  if (n == 0) return Scalar(0);
  const Scalar weight = Scalar(1.0 / double(n));
  double nll = 0;
  for (int r = 0; r < batch.rows(); ++r) {
    const auto target = batch.target(r);
    nll -= double(accumulate_gradient(model, batch.input(r), batch.history(r), target, grad, weight).total);
  }
  return Scalar(nll / double(n));
}

template <typename Scalar>
double perplexity(const RecipeModel<Scalar>& model, std::span<const Example> examples) {
  double nll = 0;
  long tokens = 0;
  for (const auto& e : examples) {
    const auto s = sequence_log_likelihood(model, e.input, e.history, e.target);
    nll -= double(s.total);
    tokens += static_cast<long>(s.per_token.size());
  }
  return tokens > 0 ? std::exp(nll / double(tokens)) : 1.0;
}

std::string to_json_line(const EpochRecord& r) {
  nlohmann::ordered_json j;
  j["epoch"] = r.epoch;
  j["lr"] = r.learning_rate;
  j["train_loss"] = r.train_loss;
  j["dev_ppl"] = r.dev_perplexity;
  j["seconds"] = r.seconds;
  j["best"] = r.best;
  return j.dump();
}

std::string describe_batch(const Batch& batch) {
  std::ostringstream out;
  for (int r = 0; r < batch.rows(); ++r) {
    const Example& e = *batch.examples[std::size_t(r)];
    out << "row " << r << " user=" << e.user_id << " recipe=" << e.recipe_id << " calorie=" << to_string(e.input.calorie)
        << "\n  name:";
    for (int t : e.input.name) out << ' ' << t;
    out << "\n  ingredients:";
    for (int t : e.input.ingredients) out << ' ' << t;
    out << "\n  history: recipes=" << e.history.recipes.size() << " techniques=" << e.history.techniques.size()
        << "\n  target:";
    for (int t : e.target) out << ' ' << t;
    out << '\n';
  }
  return out.str();
}

namespace {

template <typename Scalar>
bool parameters_finite(const ModelParameters<Scalar>& p) {
  bool ok = true;
  p.visit([&](const std::string&, const auto& t) { ok = ok && t.allFinite(); });
  return ok;
}

}  // namespace

template <typename Scalar>
TrainResult<Scalar> train(RecipeModel<Scalar> model, const TrainConfig& config,
                          const std::vector<Example>& train_set, const std::vector<Example>& dev_set,
                          const EpochCallback& on_epoch) {
  config.validate();
  const auto& monitor = dev_set.empty() ? train_set : dev_set;
  TrainResult<Scalar> result{model, 0, {}};
  double best_ppl = std::numeric_limits<double>::infinity();
  Adam<ModelParameters<Scalar>> adam(model.params, config.adam_beta1, config.adam_beta2, config.adam_epsilon);
  auto grad = ModelParameters<Scalar>::zeros(model.config);
  std::mt19937_64 seeds(config.seed);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const double lr = learning_rate_after(config, epoch - 1);
    double loss_sum = 0;
    long tokens = 0;
    const auto batches = bucket_batches(train_set, config.batch_size, seeds());
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      std::vector<const Example*> rows;
      for (auto i : batches[bi]) rows.push_back(&train_set[i]);
      const Batch batch = make_batch(rows);
      grad.set_zero();
      const double loss = double(compute_loss_and_gradient(model, batch, grad));
      const auto fail = [&](const std::string& what) {
        std::ostringstream diag;
        diag << "epoch " << epoch << " batch " << bi << " loss " << loss << '\n' << describe_batch(batch);
        throw TrainingAborted(what + " at epoch " + std::to_string(epoch) + ", batch " + std::to_string(bi),
                              diag.str());
      };
      if (!std::isfinite(loss) || !std::isfinite(gradient_norm(grad))) fail("non-finite loss or gradient");
      clip_gradient(grad, config.grad_clip_norm);
      adam.step(model.params, grad, lr);
      if (!parameters_finite(model.params)) fail("non-finite parameters");
      loss_sum += loss * double(batch.predicted_tokens());
      tokens += batch.predicted_tokens();
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.learning_rate = lr;
    rec.train_loss = tokens > 0 ? loss_sum / double(tokens) : 0.0;
    rec.dev_perplexity = perplexity(model, std::span<const Example>(monitor));
    if (rec.dev_perplexity < best_ppl) {
      best_ppl = rec.dev_perplexity;
      result.best = model;
      result.best_epoch = epoch;
      rec.best = true;
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.log.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

#define RECIPEGEN_INSTANTIATE(S)                                                                         \
  template S compute_loss(const RecipeModel<S>&, const Batch&);                                          \
  template S compute_loss_and_gradient(const RecipeModel<S>&, const Batch&, ModelParameters<S>&);        \
  template double perplexity(const RecipeModel<S>&, std::span<const Example>);                           \
  template TrainResult<S> train(RecipeModel<S>, const TrainConfig&, const std::vector<Example>&,         \
                                const std::vector<Example>&, const EpochCallback&);

RECIPEGEN_INSTANTIATE(float)
RECIPEGEN_INSTANTIATE(double)

}  // namespace recipegen
