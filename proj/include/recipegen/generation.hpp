#pragma once

#include "recipegen/corpus.hpp"
#include "recipegen/model.hpp"

#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace recipegen {

struct GenerationOptions {
  int k = 3;
  int max_len = 256;  // emitted tokens, EOS included
  std::uint64_t seed = 0;
};

/// One decoding step as seen by the sampler.
struct StepTrace {
  std::vector<int> candidates;        // top-k ids, most probable first
  std::vector<double> probabilities;  // renormalized over the candidates
  int sampled = 0;
};

/// Ids of the k most probable tokens, excluding PAD and BOS. Equal
/// probabilities are ordered by id.
template <typename Scalar>
std::vector<int> top_k_candidates(const VectorX<Scalar>& log_probs, int k);

/// Top-k sampling from BOS without teacher forcing. Returns the emitted
/// tokens (BOS excluded); the sequence ends with EOS unless max_len was hit.
template <typename Scalar>
std::vector<int> generate(const RecipeModel<Scalar>& model, const EncodedInput& input, const UserHistory& history,
                          const GenerationOptions& options, std::vector<StepTrace>* trace = nullptr);

enum class TiePolicy { Pessimistic, Random };

/// 1-based rank of the gold score among gold + decoys, higher is better.
/// Pessimistic ties rank the gold below every equal decoy; random ties place
/// it uniformly within its tie group.
int rank_of_gold(double gold, std::span<const double> decoys, TiePolicy policy, std::mt19937_64* rng = nullptr);

/// Scores the same gold target under the gold history and every decoy
/// history, then ranks the gold.
template <typename Scalar>
int rank_users(const RecipeModel<Scalar>& model, const EncodedInput& input, std::span<const int> gold_tokens,
               const UserHistory& gold, std::span<const UserHistory> decoys, TiePolicy policy,
               std::mt19937_64* rng = nullptr);

/// `count` distinct users drawn uniformly from `candidates`, never `gold`.
std::vector<std::string> sample_decoys(const std::vector<std::string>& candidates, const std::string& gold,
                                       std::size_t count, std::mt19937_64& rng);

/// Cosine similarity of word-count vectors of two names.
double name_similarity(const std::string& a, const std::string& b);

/// Training recipe with the most similar name; ties go to the smallest
/// recipe id.
const Recipe& nn_baseline(const std::vector<Recipe>& train_recipes, const std::string& query_name);

/// One line of a generations file.
struct GenerationRecord {
  std::string user_id;
  std::string recipe_id;
  std::string name;
  std::vector<std::string> ingredients;
  CalorieLevel calorie = CalorieLevel::Low;
  std::vector<int> tokens;
  std::string text;
  std::uint64_t seed = 0;
  std::string model;  // variant name or "nn"
};

void write_generations(std::ostream& out, const std::vector<GenerationRecord>& records);
/// Throws std::runtime_error naming the 1-based line of the first invalid record.
std::vector<GenerationRecord> read_generations(std::istream& in);

}  // namespace recipegen
