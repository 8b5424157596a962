#include "recipegen/synthetic.hpp"

#include <algorithm>
#include <random>
#include <set>

namespace recipegen {

namespace {

struct Cluster {
  std::vector<std::string> ingredients;
  std::vector<std::string> dishes;
  std::vector<std::string> techniques;
};

const Cluster kClusters[2] = {
    {{"rice", "chicken", "garlic", "ginger", "soy sauce", "scallion", "tofu", "sesame oil", "noodles", "cabbage",
      "pork", "chili"},
     {"bowl", "skillet", "soup", "platter"},
     {"bake", "boil", "fry", "grill", "poach", "roast", "steam"}},
    {{"flour", "butter", "sugar", "egg", "milk", "vanilla", "cream", "honey", "oats", "apple", "cinnamon",
      "yogurt"},
     {"cake", "tart", "muffins", "pudding"},
     {"blend", "fold", "knead", "marinate", "simmer", "stir", "whisk"}},
};

const char* const kAdjectives[] = {"easy", "quick", "rustic", "classic", "spicy", "golden", "simple", "hearty"};

template <class T, class Rng>
const T& pick(const std::vector<T>& v, Rng& rng) {
  return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

}  // namespace

SyntheticCorpus make_synthetic_corpus(const SyntheticOptions& o) {
  if (o.users_per_cluster < 1 || o.interactions_per_user < 1)
    throw std::invalid_argument("synthetic corpus needs at least one user and one interaction");
  std::mt19937_64 rng(o.seed);
  SyntheticCorpus out;
  for (const auto& c : kClusters) out.lexicon.insert(out.lexicon.end(), c.techniques.begin(), c.techniques.end());
  std::sort(out.lexicon.begin(), out.lexicon.end());

  int next_recipe = 1000;
  const auto new_recipe = [&](const Cluster& c, const std::vector<std::string>& techniques) {
    std::vector<std::string> ingredients = c.ingredients;
    std::shuffle(ingredients.begin(), ingredients.end(), rng);
    ingredients.resize(std::uniform_int_distribution<std::size_t>(4, 7)(rng));
    std::vector<std::string> tech = techniques;
    if (rng() % 2) std::swap(tech[0], tech[1]);
    const std::string dish = pick(c.dishes, rng);
    Recipe r;
    r.recipe_id = std::to_string(next_recipe++);
    r.name = std::string(kAdjectives[rng() % std::size(kAdjectives)]) + " " + ingredients[0] + " " + dish;
    r.ingredients = ingredients;
    r.steps = {"prepare the " + ingredients[0] + " and the " + ingredients[1],
               tech[0] + " the " + ingredients[0] + " until tender",
               tech[1] + " the " + ingredients[2] + " with the " + ingredients[1],
               "mix everything with the " + ingredients[3],
               "serve the " + dish + " warm"};
    r.calories = double(std::uniform_int_distribution<int>(100, 900)(rng));
    return r;
  };

  for (int ci = 0; ci < 2; ++ci) {
    const Cluster& c = kClusters[ci];
    std::vector<std::vector<std::string>> pairs;
    for (std::size_t a = 0; a < c.techniques.size(); ++a)
      for (std::size_t b = a + 1; b < c.techniques.size(); ++b) pairs.push_back({c.techniques[a], c.techniques[b]});
    std::shuffle(pairs.begin(), pairs.end(), rng);
    std::vector<std::size_t> cluster_recipes;  // indices into out.recipes
    for (int u = 0; u < o.users_per_cluster; ++u) {
      const std::string user = "u" + std::to_string(ci) + "_" + std::to_string(u);
      const auto& techniques = pairs[std::size_t(u) % pairs.size()];
      out.user_cluster[user] = ci;
      out.user_techniques[user] = techniques;
      int day = std::uniform_int_distribution<int>(14000, 14100)(rng);
      std::set<std::string> seen;
      std::vector<std::size_t> mine;
      for (int j = 0; j < o.interactions_per_user; ++j) {
        day += std::uniform_int_distribution<int>(1, 10)(rng);
        std::size_t index = out.recipes.size();
        if (!cluster_recipes.empty() && std::uniform_real_distribution<double>(0, 1)(rng) < o.reuse_probability) {
          const auto candidate = pick(cluster_recipes, rng);
          if (!seen.count(out.recipes[candidate].recipe_id)) index = candidate;
        }
        if (index == out.recipes.size()) {
          out.recipes.push_back(new_recipe(c, techniques));
          mine.push_back(index);
        }
        seen.insert(out.recipes[index].recipe_id);
        out.interactions.push_back({user, out.recipes[index].recipe_id, Date{day}});
      }
      cluster_recipes.insert(cluster_recipes.end(), mine.begin(), mine.end());
    }
  }
  return out;
}

}  // namespace recipegen
