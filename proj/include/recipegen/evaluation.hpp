#pragma once

#include "recipegen/nn.hpp"
#include "recipegen/tokenizer.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace recipegen {

using Tokens = std::vector<std::string>;

// ---------------------------------------------------------------------------
// Overlap and diversity metrics. All scores are percentages.

inline constexpr double kBleuEpsilon = 1e-9;
inline constexpr double kRougeBeta = 1.2;

/// Corpus BLEU-n (n = 1 or 4): clipped n-gram precisions pooled over the
/// corpus, geometric mean over orders 1..n, zero match counts replaced by
/// kBleuEpsilon, times the brevity penalty. Empty candidates score 0.
double bleu(const std::vector<Tokens>& candidates, const std::vector<Tokens>& references, int n);
double bleu(const Tokens& candidate, const Tokens& reference, int n);

/// LCS F-measure with recall weighted by kRougeBeta.
double rouge_l(const Tokens& candidate, const Tokens& reference);
/// Mean of rouge_l over aligned pairs.
double rouge_l(const std::vector<Tokens>& candidates, const std::vector<Tokens>& references);

/// Distinct n-grams over total n-grams across the corpus. 0 when the corpus
/// has no n-gram at all.
double distinct_n(const std::vector<Tokens>& corpus, int n);
std::size_t ngram_total(const std::vector<Tokens>& corpus, int n);

std::size_t longest_common_subsequence(const Tokens& a, const Tokens& b);

// ---------------------------------------------------------------------------
// Ranking metrics over 1-based gold ranks.

double uma(const std::vector<int>& ranks);
double mrr(const std::vector<int>& ranks);

// ---------------------------------------------------------------------------
// Learned step scorers.

/// Splits generated text into steps at sentence-final punctuation.
std::vector<std::string> split_steps(const std::string& text);

using StepTokens = std::vector<std::vector<int>>;  // one BPE id list per step
StepTokens tokenize_steps(const BpeModel& bpe, const std::vector<std::string>& steps);

struct ScorerConfig {
  int vocab_size = 0;
  int embedding_dim = 32;
  int hidden = 32;       // step encoder state
  int pair_hidden = 32;  // entailment feed-forward layer
  int epochs = 20;
  double learning_rate = 3e-3;
  double negative_ratio = 1.0;  // entailment negatives per positive
  std::uint64_t seed = 0;
};

/// Token embeddings plus a GRU whose states are mean-pooled into one vector
/// per step.
struct StepEncoder {
  Eigen::MatrixXd embedding;  // d x |V|
  GruCell<double> gru;

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".embedding", embedding);
    gru.visit(prefix + ".gru", f);
  }
};

struct CoherenceParameters {
  using scalar_type = double;
  StepEncoder step;
  GruCell<double> recipe;  // runs over step vectors

  template <class F>
  void visit(F&& f) {
    step.visit("step", f);
    recipe.visit("recipe", f);
  }
  template <class F>
  void visit(F&& f) const {
    const_cast<CoherenceParameters*>(this)->visit([&](const std::string& n, const auto& t) { f(n, t); });
  }
};

struct EntailmentParameters {
  using scalar_type = double;
  StepEncoder step;
  Eigen::MatrixXd hidden_w;  // m x 3h over [a; b; a - b]
  Eigen::VectorXd hidden_b;
  Eigen::VectorXd out_w;     // m
  Eigen::VectorXd out_b;     // 1

  template <class F>
  void visit(F&& f) {
    step.visit("step", f);
    f(std::string("pair.hidden.weight"), hidden_w);
    f(std::string("pair.hidden.bias"), hidden_b);
    f(std::string("pair.out.weight"), out_w);
    f(std::string("pair.out.bias"), out_b);
  }
  template <class F>
  void visit(F&& f) const {
    const_cast<EntailmentParameters*>(this)->visit([&](const std::string& n, const auto& t) { f(n, t); });
  }
};

CoherenceParameters init_coherence(const ScorerConfig& config);
EntailmentParameters init_entailment(const ScorerConfig& config);

/// Final recipe-GRU state over the step vectors of `steps`.
Eigen::VectorXd encode_recipe(const CoherenceParameters& p, const StepTokens& steps);

/// cos(g, f) - cos(g, r) with g, f, r the encodings of the generated recipe,
/// the gold recipe and the gold recipe with its steps reversed.
double coherence_score(const CoherenceParameters& p, const StepTokens& generated, const StepTokens& gold);
/// Same protocol with the forward and backward references given explicitly.
double coherence_score(const CoherenceParameters& p, const StepTokens& generated, const StepTokens& forward,
                       const StepTokens& backward);

/// Training objective for one recipe: cos(f, r) - cos(s, f) + cos(s, r),
/// where s encodes `subsequence`, an order-preserving subset of the steps.
/// Accumulates the gradient into `grad` when given.
double coherence_loss(const CoherenceParameters& p, const StepTokens& steps, const StepTokens& subsequence,
                      CoherenceParameters* grad = nullptr);

/// A random order-preserving proper subset of at least two steps (the whole
/// recipe when it has fewer than three).
StepTokens random_subsequence(const StepTokens& steps, std::mt19937_64& rng);

/// Recipes with fewer than two steps are skipped.
CoherenceParameters train_coherence_scorer(const std::vector<StepTokens>& recipes, const ScorerConfig& config);

struct StepPair {
  std::vector<int> first, second;
  bool follows = false;
};

/// Every adjacent pair as a positive and `negative_ratio` times as many
/// non-adjacent forward pairs from the same recipe as negatives. Recipes with
/// fewer than three steps contribute nothing.
std::vector<StepPair> make_entailment_pairs(const std::vector<StepTokens>& recipes, std::mt19937_64& rng,
                                            double negative_ratio = 1.0);

double entailment_probability(const EntailmentParameters& p, const std::vector<int>& first,
                              const std::vector<int>& second);

/// Binary cross-entropy of one labelled pair, gradient accumulated into `grad`
/// when given.
double entailment_loss(const EntailmentParameters& p, const StepPair& pair, EntailmentParameters* grad = nullptr);

EntailmentParameters train_entailment(const std::vector<StepTokens>& recipes, const ScorerConfig& config);

double entailment_accuracy(const EntailmentParameters& p, const std::vector<StepPair>& pairs);

/// Mean follow probability over adjacent step pairs; nullopt for recipes with
/// fewer than two steps.
std::optional<double> entailment_score(const EntailmentParameters& p, const StepTokens& generated);

// ---------------------------------------------------------------------------
// Reports.

struct RecipeScores {
  std::string user_id;
  std::string recipe_id;
  double bleu1 = 0, bleu4 = 0, rouge_l = 0;
  std::optional<double> coherence, entailment;
  std::optional<int> rank;
};

struct MetricReport {
  std::string model;
  std::uint64_t seed = 0;
  std::map<std::string, double> metrics;
  std::vector<RecipeScores> per_recipe;
  std::vector<std::string> warnings;
};

/// Names of the aggregate metrics, in report order.
const std::vector<std::string>& metric_names();

std::string report_json(const MetricReport& report);
std::string report_table(const std::vector<MetricReport>& reports);

}  // namespace recipegen
