#include "recipegen/generation.hpp"

#include "recipegen/tokenizer.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

namespace recipegen {

template <typename Scalar>
std::vector<int> top_k_candidates(const VectorX<Scalar>& log_probs, int k) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  std::vector<int> ids;
  for (int i = 0; i < int(log_probs.size()); ++i)
    if (i != BpeModel::kPad && i != BpeModel::kBos) ids.push_back(i);
  const auto n = std::min<std::size_t>(std::size_t(k), ids.size());
  std::partial_sort(ids.begin(), ids.begin() + long(n), ids.end(), [&](int a, int b) {
    return log_probs(a) > log_probs(b) || (log_probs(a) == log_probs(b) && a < b);
  });
  ids.resize(n);
  return ids;
}

template <typename Scalar>
std::vector<int> generate(const RecipeModel<Scalar>& model, const EncodedInput& input, const UserHistory& history,
                          const GenerationOptions& options, std::vector<StepTrace>* trace) {
  if (options.max_len < 1) throw std::invalid_argument("max_len must be >= 1");
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  DecoderSession<Scalar> session(model, input, history);
  std::vector<int> out;
  int token = BpeModel::kBos;
  while (int(out.size()) < options.max_len) {
    const VectorX<Scalar> log_probs = session.step(token);
    StepTrace step;
    step.candidates = top_k_candidates(log_probs, options.k);
    const double top = double(log_probs(step.candidates.front()));
    double total = 0;
    for (int c : step.candidates) {
      step.probabilities.push_back(std::exp(double(log_probs(c)) - top));
      total += step.probabilities.back();
    }
    for (auto& p : step.probabilities) p /= total;
    const double u = unit(rng);
    double acc = 0;
    step.sampled = step.candidates.back();
    for (std::size_t i = 0; i < step.candidates.size(); ++i) {
      acc += step.probabilities[i];
      if (u < acc) {
        step.sampled = step.candidates[i];
        break;
      }
    }
    token = step.sampled;
    out.push_back(token);
    if (trace) trace->push_back(std::move(step));
    if (token == BpeModel::kEos) break;
  }
  return out;
}

int rank_of_gold(double gold, std::span<const double> decoys, TiePolicy policy, std::mt19937_64* rng) {
  int greater = 0, equal = 0;
  for (double d : decoys) {
    if (d > gold) ++greater;
    else if (d == gold) ++equal;
  }
  if (policy == TiePolicy::Pessimistic) return 1 + greater + equal;
  if (equal == 0) return 1 + greater;
  if (!rng) throw std::invalid_argument("random tie-breaking needs a generator");
  return 1 + greater + std::uniform_int_distribution<int>(0, equal)(*rng);
}

template <typename Scalar>
int rank_users(const RecipeModel<Scalar>& model, const EncodedInput& input, std::span<const int> gold_tokens,
               const UserHistory& gold, std::span<const UserHistory> decoys, TiePolicy policy,
               std::mt19937_64* rng) {
  const double g = double(sequence_log_likelihood(model, input, gold, gold_tokens).total);
  std::vector<double> scores;
  for (const auto& d : decoys) scores.push_back(double(sequence_log_likelihood(model, input, d, gold_tokens).total));
  return rank_of_gold(g, scores, policy, rng);
}

std::vector<std::string> sample_decoys(const std::vector<std::string>& candidates, const std::string& gold,
                                       std::size_t count, std::mt19937_64& rng) {
  std::vector<std::string> pool;
  for (const auto& c : candidates)
    if (c != gold) pool.push_back(c);
  std::sort(pool.begin(), pool.end());
  pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
  if (pool.size() < count)
    throw std::invalid_argument("need " + std::to_string(count) + " decoy users, only " + std::to_string(pool.size()) +
                                " available");
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = std::uniform_int_distribution<std::size_t>(i, pool.size() - 1)(rng);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  return pool;
}

double name_similarity(const std::string& a, const std::string& b) {
  std::map<std::string, double> ca, cb;
  for (const auto& w : word_tokens(a)) ca[w] += 1;
  for (const auto& w : word_tokens(b)) cb[w] += 1;
  double dot = 0, na = 0, nb = 0;
  for (const auto& [w, c] : ca) {
    na += c * c;
    const auto it = cb.find(w);
    if (it != cb.end()) dot += c * it->second;
  }
  for (const auto& [w, c] : cb) nb += c * c;
  return na > 0 && nb > 0 ? dot / std::sqrt(na * nb) : 0.0;
}

const Recipe& nn_baseline(const std::vector<Recipe>& train_recipes, const std::string& query_name) {
  if (train_recipes.empty()) throw std::invalid_argument("nearest-neighbour baseline needs training recipes");
  const Recipe* best = nullptr;
  double best_sim = -1;
  for (const auto& r : train_recipes) {
    const double s = name_similarity(query_name, r.name);
    if (!best || s > best_sim || (s == best_sim && id_less(r.recipe_id, best->recipe_id))) {
      best = &r;
      best_sim = s;
    }
  }
  return *best;
}

void write_generations(std::ostream& out, const std::vector<GenerationRecord>& records) {
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["user_id"] = r.user_id;
    j["recipe_id"] = r.recipe_id;
    j["name"] = r.name;
    j["ingredients"] = r.ingredients;
    j["calorie_level"] = static_cast<int>(r.calorie);
    j["model"] = r.model;
    j["seed"] = r.seed;
    j["tokens"] = r.tokens;
    j["text"] = r.text;
    out << j.dump() << '\n';
  }
}

std::vector<GenerationRecord> read_generations(std::istream& in) {
  std::vector<GenerationRecord> out;
  std::string line;
  for (std::size_t row = 1; std::getline(in, line); ++row) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      GenerationRecord r;
      r.user_id = j.at("user_id").get<std::string>();
      r.recipe_id = j.at("recipe_id").get<std::string>();
      r.name = j.at("name").get<std::string>();
      r.ingredients = j.at("ingredients").get<std::vector<std::string>>();
      r.calorie = calorie_level_from_int(j.at("calorie_level").get<int>());
      r.model = j.at("model").get<std::string>();
      r.seed = j.at("seed").get<std::uint64_t>();
      r.tokens = j.at("tokens").get<std::vector<int>>();
      r.text = j.at("text").get<std::string>();
      out.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw std::runtime_error("generations line " + std::to_string(row) + ": " + e.what());
    }
  }
  return out;
}

#define RECIPEGEN_INSTANTIATE(S)                                                                               \
  template std::vector<int> top_k_candidates(const VectorX<S>&, int);                                          \
  template std::vector<int> generate(const RecipeModel<S>&, const EncodedInput&, const UserHistory&,           \
                                     const GenerationOptions&, std::vector<StepTrace>*);                       \
  template int rank_users(const RecipeModel<S>&, const EncodedInput&, std::span<const int>, const UserHistory&, \
                          std::span<const UserHistory>, TiePolicy, std::mt19937_64*);

RECIPEGEN_INSTANTIATE(float)
RECIPEGEN_INSTANTIATE(double)

}  // namespace recipegen
