#pragma once

#include "recipegen/corpus.hpp"
#include "recipegen/model.hpp"
#include "recipegen/tokenizer.hpp"

#include <map>
#include <string>
#include <vector>

namespace recipegen {

/// Dense string -> row mapping. Row 0 is reserved for unknown items.
class Vocabulary {
 public:
  static constexpr int kUnknown = 0;

  Vocabulary() : items_{"<unk>"} {}
  explicit Vocabulary(const std::vector<std::string>& items);

  int lookup(const std::string& item) const;
  const std::string& item(int row) const { return items_.at(static_cast<std::size_t>(row)); }
  const std::vector<std::string>& items() const { return items_; }
  int size() const { return static_cast<int>(items_.size()); }
  bool operator==(const Vocabulary&) const = default;

 private:
  std::vector<std::string> items_;
  std::map<std::string, int> rows_;
};

/// Everything needed to turn corpus records into model inputs.
struct FeatureSpace {
  BpeModel bpe;
  Vocabulary ingredients;
  Vocabulary recipes;
  Vocabulary techniques;
  std::size_t input_ingredients = 5;  // leading ingredients given to the encoder

  /// Fills the table sizes of `config` from this feature space.
  void size_config(ModelConfig& config) const;
};

/// Ingredient and recipe tables cover the training recipes; the technique
/// table covers the lexicon.
FeatureSpace build_feature_space(BpeModel bpe, const std::vector<Recipe>& train_recipes,
                                 const TechniqueLexicon& lexicon, std::size_t input_ingredients = 5);

/// Steps joined into the single text the decoder is trained to produce.
std::string steps_text(const std::vector<std::string>& steps);

/// Name, leading ingredients and calorie level of a recipe.
EncodedInput encode_input(const FeatureSpace& space, const Recipe& recipe);

/// BOS, BPE ids of the steps, EOS. Long recipes are cut so the sequence has at
/// most `max_predictions` predicted tokens, the last of which is EOS.
std::vector<int> encode_target(const BpeModel& bpe, const std::vector<std::string>& steps,
                               std::size_t max_predictions);

/// Table rows for a profile. Prior recipes unknown to the recipe index still
/// get a recipe row (possibly unknown) but no name tokens beyond UNK.
UserHistory resolve_history(const FeatureSpace& space, const UserProfile& profile,
                            const RecipeIndex& recipes);

/// One supervised case: the conditioning input, the user's history and the
/// gold target sequence.
struct Example {
  std::string user_id;
  std::string recipe_id;
  EncodedInput input;
  UserHistory history;
  std::vector<int> target;
};

/// Builds one example per interaction whose recipe is in the index. Users
/// without a profile get an empty history.
std::vector<Example> build_examples(const FeatureSpace& space, const std::vector<Interaction>& interactions,
                                    const RecipeIndex& recipes,
                                    const std::map<std::string, UserProfile>& profiles,
                                    std::size_t max_predictions);

/// Training cases, one per train interaction. Each case's history is built
/// from the user's other train interactions, so a target never appears in
/// its own history.
std::vector<Example> build_training_examples(const FeatureSpace& space, const std::vector<Interaction>& train,
                                             const RecipeIndex& recipes, std::size_t k,
                                             std::size_t max_predictions);

}  // namespace recipegen
