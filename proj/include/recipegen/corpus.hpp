#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace recipegen {

enum class CalorieLevel : int { Low = 0, Medium = 1, High = 2 };

std::string to_string(CalorieLevel level);
CalorieLevel calorie_level_from_int(int value);

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Opaque identifiers ordered numerically when both are digit strings,
/// lexicographically otherwise.
bool id_less(const std::string& a, const std::string& b);

struct Recipe {
  std::string recipe_id;
  std::string name;
  std::vector<std::string> steps;
  std::vector<std::string> ingredients;
  std::optional<CalorieLevel> calorie_level;
  std::optional<double> calories;
  std::set<std::string> techniques;
};

/// Day-resolution calendar date stored as days since 1970-01-01.
struct Date {
  std::int32_t days = 0;

  static Date parse(const std::string& iso);  // YYYY-MM-DD, throws CorpusError
  std::string iso() const;
  auto operator<=>(const Date&) const = default;
};

struct Interaction {
  std::string user_id;
  std::string recipe_id;
  Date date;

  bool operator==(const Interaction&) const = default;
};

/// Chronological order with recipe_id as the tie-break.
bool chronological_less(const Interaction& a, const Interaction& b);

struct RowError {
  std::string file;
  std::size_t row = 0;  // 1-based
  std::string message;
};

struct LoadedCorpus {
  std::vector<Recipe> recipes;
  std::vector<Interaction> interactions;
  std::vector<RowError> errors;
};

/// Recipes are JSON Lines with the fields recipe_id, name, n_steps, steps,
/// n_ingredients, ingredients and optional calorie_level / calories.
/// Interactions are CSV with a header naming user_id, recipe_id, date.
LoadedCorpus load_corpus(const std::string& recipes_path, const std::string& interactions_path);

std::vector<Recipe> read_recipes(std::istream& in, const std::string& label,
                                 std::vector<RowError>& errors);
std::vector<Interaction> read_interactions(std::istream& in, const std::string& label,
                                           std::vector<RowError>& errors);
void write_recipes(std::ostream& out, const std::vector<Recipe>& recipes);
void write_interactions(std::ostream& out, const std::vector<Interaction>& interactions);

struct FilterRules {
  std::size_t min_steps = 3;
  std::size_t min_ingredients = 4;
  std::size_t max_ingredients = 20;
  std::size_t min_user_interactions = 4;
};

struct FilteredCorpus {
  std::vector<Recipe> recipes;
  std::vector<Interaction> interactions;
};

FilteredCorpus filter_corpus(const std::vector<Recipe>& recipes,
                             const std::vector<Interaction>& interactions,
                             const FilterRules& rules = {});

/// Per-user temporal leave-one-out. Held-out interactions whose recipe also
/// appears in train are moved to `seen_dev` / `seen_test` so evaluation only covers
/// unseen recipes.
struct SplitCorpus {
  std::vector<Interaction> train;
  std::vector<Interaction> dev;
  std::vector<Interaction> test;
  std::vector<Interaction> seen_dev;
  std::vector<Interaction> seen_test;
};

SplitCorpus split_leave_one_out(const std::vector<Interaction>& interactions);

class TechniqueLexicon {
 public:
  explicit TechniqueLexicon(const std::vector<std::string>& techniques);
  static TechniqueLexicon load(const std::string& path);
  static TechniqueLexicon parse(std::istream& in);

  const std::vector<std::string>& techniques() const { return techniques_; }
  std::size_t size() const { return techniques_.size(); }

 private:
  std::vector<std::string> techniques_;  // sorted, lowercase, unique
};

/// Whole-word, case-insensitive match of each lexicon entry against the steps.
std::set<std::string> extract_techniques(const std::vector<std::string>& steps,
                                         const TechniqueLexicon& lexicon);

/// Lowercase alphanumeric word tokens (apostrophes kept inside words).
std::vector<std::string> word_tokens(const std::string& text);

struct UserProfile {
  std::string user_id;
  std::vector<std::string> prior_recipe_ids;  // most recent first
  std::map<std::string, double> rho;
};

using RecipeIndex = std::map<std::string, const Recipe*>;
RecipeIndex index_recipes(const std::vector<Recipe>& recipes);

UserProfile build_user_profile(const std::string& user_id,
                               const std::vector<Interaction>& train,
                               const RecipeIndex& recipes, std::size_t k);

std::map<std::string, UserProfile> build_user_profiles(const std::vector<Interaction>& train,
                                                       const RecipeIndex& recipes, std::size_t k);

/// Tertile boundaries of the training calorie distribution. Values at or
/// below `low_max` are low, at or below `medium_max` medium, otherwise high.
struct CalorieBins {
  double low_max = 0.0;
  double medium_max = 0.0;
};

CalorieBins fit_calorie_bins(std::vector<double> train_calories);

CalorieLevel assign_calorie_level(const std::optional<int>& label,
                                  const std::optional<double>& calories, const CalorieBins& bins);

/// Fills every recipe's calorie level, fitting bins on `train_recipe_ids`.
/// Returns the bins used.
CalorieBins resolve_calorie_levels(std::vector<Recipe>& recipes,
                                   const std::set<std::string>& train_recipe_ids);

struct SplitStats {
  std::size_t users = 0;
  std::size_t recipes = 0;
  std::size_t actions = 0;
};

struct CorpusStats {
  SplitStats train, dev, test;
  double train_sparsity = 0.0;  // unobserved fraction of user x recipe pairs
};

CorpusStats corpus_stats(const SplitCorpus& split);
std::string format_stats(const CorpusStats& stats);

}  // namespace recipegen
