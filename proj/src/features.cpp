#include "recipegen/features.hpp"

#include <algorithm>
#include <set>

namespace recipegen {

Vocabulary::Vocabulary(const std::vector<std::string>& items) : Vocabulary() {
  for (const auto& s : items) {
    if (rows_.count(s)) continue;
    rows_[s] = static_cast<int>(items_.size());
    items_.push_back(s);
  }
}

int Vocabulary::lookup(const std::string& item) const {
  const auto it = rows_.find(item);
  return it == rows_.end() ? kUnknown : it->second;
}

void FeatureSpace::size_config(ModelConfig& config) const {
  config.vocab_size = static_cast<int>(bpe.size());
  config.ingredient_count = ingredients.size();
  config.recipe_count = recipes.size();
  config.technique_count = techniques.size();
}

FeatureSpace build_feature_space(BpeModel bpe, const std::vector<Recipe>& train_recipes,
                                 const TechniqueLexicon& lexicon, std::size_t input_ingredients) {
  if (input_ingredients == 0) throw std::invalid_argument("input_ingredients must be >= 1");
  std::set<std::string> ingredients;
  std::vector<std::string> ids;
  for (const auto& r : train_recipes) {
    ingredients.insert(r.ingredients.begin(), r.ingredients.end());
    ids.push_back(r.recipe_id);
  }
  std::sort(ids.begin(), ids.end(), id_less);
  FeatureSpace s;
  s.bpe = std::move(bpe);
  s.ingredients = Vocabulary({ingredients.begin(), ingredients.end()});
  s.recipes = Vocabulary(ids);
  s.techniques = Vocabulary(lexicon.techniques());
  s.input_ingredients = input_ingredients;
  return s;
}

std::string steps_text(const std::vector<std::string>& steps) {
  std::string out;
  for (const auto& s : steps) {
    if (!out.empty()) out += " . ";
    out += s;
  }
  return out;
}

EncodedInput encode_input(const FeatureSpace& space, const Recipe& recipe) {
  EncodedInput in;
  in.name = space.bpe.encode(recipe.name);
  if (in.name.empty()) in.name.push_back(BpeModel::kUnk);
  const auto n = std::min(space.input_ingredients, recipe.ingredients.size());
  for (std::size_t i = 0; i < n; ++i) in.ingredients.push_back(space.ingredients.lookup(recipe.ingredients[i]));
  if (in.ingredients.empty()) in.ingredients.push_back(Vocabulary::kUnknown);
  if (!recipe.calorie_level) throw CorpusError("recipe " + recipe.recipe_id + " has no calorie level");
  in.calorie = *recipe.calorie_level;
  return in;
}

std::vector<int> encode_target(const BpeModel& bpe, const std::vector<std::string>& steps,
                               std::size_t max_predictions) {
  if (max_predictions == 0) throw std::invalid_argument("max_predictions must be >= 1");
  auto body = bpe.encode(steps_text(steps));
  if (body.size() + 1 > max_predictions) body.resize(max_predictions - 1);
  std::vector<int> out;
  out.reserve(body.size() + 2);
  out.push_back(BpeModel::kBos);
  out.insert(out.end(), body.begin(), body.end());
  out.push_back(BpeModel::kEos);
  return out;
}

UserHistory resolve_history(const FeatureSpace& space, const UserProfile& profile,
                            const RecipeIndex& recipes) {
  UserHistory h;
  for (const auto& id : profile.prior_recipe_ids) {
    h.recipes.push_back(space.recipes.lookup(id));
    const auto it = recipes.find(id);
    std::vector<int> name;
    if (it != recipes.end()) name = space.bpe.encode(it->second->name);
    if (name.empty()) name.push_back(BpeModel::kUnk);
    h.recipe_names.push_back(std::move(name));
  }
  for (const auto& [technique, weight] : profile.rho) {
    const int row = space.techniques.lookup(technique);
    if (row == Vocabulary::kUnknown) continue;
    h.techniques.push_back(row);
    h.technique_weights.push_back(weight);
  }
  return h;
}

std::vector<Example> build_examples(const FeatureSpace& space, const std::vector<Interaction>& interactions,
                                    const RecipeIndex& recipes,
                                    const std::map<std::string, UserProfile>& profiles,
                                    std::size_t max_predictions) {
  std::vector<Example> out;
  std::map<std::string, UserHistory> histories;
  for (const auto& i : interactions) {
    const auto r = recipes.find(i.recipe_id);
    if (r == recipes.end()) continue;
    auto h = histories.find(i.user_id);
    if (h == histories.end()) {
      const auto p = profiles.find(i.user_id);
      h = histories.emplace(i.user_id, p == profiles.end() ? UserHistory{} : resolve_history(space, p->second, recipes))
              .first;
    }
    out.push_back({i.user_id, i.recipe_id, encode_input(space, *r->second), h->second,
                   encode_target(space.bpe, r->second->steps, max_predictions)});
  }
  return out;
}

std::vector<Example> build_training_examples(const FeatureSpace& space, const std::vector<Interaction>& train,
                                             const RecipeIndex& recipes, std::size_t k,
                                             std::size_t max_predictions) {
  std::map<std::string, std::vector<Interaction>> by_user;
  for (const auto& i : train) by_user[i.user_id].push_back(i);
  std::vector<Example> out;
  for (const auto& i : train) {
    const auto r = recipes.find(i.recipe_id);
    if (r == recipes.end()) continue;
    auto others = by_user[i.user_id];
    std::erase(others, i);
    const auto profile = build_user_profile(i.user_id, others, recipes, k);
    out.push_back({i.user_id, i.recipe_id, encode_input(space, *r->second), resolve_history(space, profile, recipes),
                   encode_target(space.bpe, r->second->steps, max_predictions)});
  }
  return out;
}

}  // namespace recipegen
