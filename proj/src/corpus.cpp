#include "recipegen/corpus.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace recipegen {

using nlohmann::json;

std::string to_string(CalorieLevel level) {
  switch (level) {
    case CalorieLevel::Low: return "low";
    case CalorieLevel::Medium: return "medium";
    case CalorieLevel::High: return "high";
  }
  return "?";
}

CalorieLevel calorie_level_from_int(int value) {
  if (value < 0 || value > 2) throw CorpusError("calorie_level must be 0, 1 or 2, got " + std::to_string(value));
  return static_cast<CalorieLevel>(value);
}

namespace {

bool all_digits(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

// Splits one CSV record, honoring double-quoted fields.
std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trim(field));
      field.clear();
    } else {
      field += c;
    }
  }
  if (quoted) throw CorpusError("unterminated quoted field");
  out.push_back(trim(field));
  return out;
}

std::string json_id(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  throw CorpusError("identifier must be a string or integer");
}

std::vector<std::string> string_list(const json& v, const char* field) {
  if (!v.is_array()) throw CorpusError(std::string(field) + " must be a list");
  std::vector<std::string> out;
  for (const auto& e : v) {
    if (!e.is_string()) throw CorpusError(std::string(field) + " entries must be strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

Recipe parse_recipe(const std::string& line) {
  const json j = json::parse(line);
  if (!j.is_object()) throw CorpusError("record is not an object");
  for (const char* f : {"recipe_id", "name", "n_steps", "steps", "n_ingredients", "ingredients"})
    if (!j.contains(f)) throw CorpusError(std::string("missing field ") + f);
  Recipe r;
  r.recipe_id = json_id(j.at("recipe_id"));
  r.name = j.at("name").get<std::string>();
  r.steps = string_list(j.at("steps"), "steps");
  r.ingredients = string_list(j.at("ingredients"), "ingredients");
  if (j.at("n_steps").get<std::size_t>() != r.steps.size())
    throw CorpusError("n_steps does not match steps length");
  if (j.at("n_ingredients").get<std::size_t>() != r.ingredients.size())
    throw CorpusError("n_ingredients does not match ingredients length");
  if (j.contains("calorie_level") && !j.at("calorie_level").is_null())
    r.calorie_level = calorie_level_from_int(j.at("calorie_level").get<int>());
  if (j.contains("calories") && !j.at("calories").is_null())
    r.calories = j.at("calories").get<double>();
  if (!r.calorie_level && !r.calories) throw CorpusError("neither calorie_level nor calories present");
  if (j.contains("techniques")) {
    for (auto& t : string_list(j.at("techniques"), "techniques")) r.techniques.insert(t);
  }
  return r;
}

}  // namespace

bool id_less(const std::string& a, const std::string& b) {
  if (all_digits(a) && all_digits(b)) {
    const auto strip = [](const std::string& s) {
      const auto p = s.find_first_not_of('0');
      return p == std::string::npos ? std::string("0") : s.substr(p);
    };
    const std::string x = strip(a), y = strip(b);
    if (x.size() != y.size()) return x.size() < y.size();
    if (x != y) return x < y;
  }
  return a < b;
}

Date Date::parse(const std::string& iso) {
  int y = 0;
  unsigned m = 0, d = 0;
  char dash1 = 0, dash2 = 0;
  std::istringstream in(trim(iso));
  in >> y >> dash1 >> m >> dash2 >> d;
  if (!in || dash1 != '-' || dash2 != '-' || !in.eof())
    throw CorpusError("invalid date '" + iso + "', expected YYYY-MM-DD");
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) throw CorpusError("invalid date '" + iso + "'");
  return Date{static_cast<std::int32_t>(std::chrono::sys_days{ymd}.time_since_epoch().count())};
}

std::string Date::iso() const {
  const std::chrono::year_month_day ymd{std::chrono::sys_days{std::chrono::days{days}}};
  std::ostringstream out;
  out << std::setfill('0') << std::setw(4) << int(ymd.year()) << '-' << std::setw(2)
      << unsigned(ymd.month()) << '-' << std::setw(2) << unsigned(ymd.day());
  return out.str();
}

bool chronological_less(const Interaction& a, const Interaction& b) {
  if (a.date != b.date) return a.date < b.date;
  return id_less(a.recipe_id, b.recipe_id);
}

std::vector<Recipe> read_recipes(std::istream& in, const std::string& label,
                                 std::vector<RowError>& errors) {
  std::vector<Recipe> out;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    try {
      out.push_back(parse_recipe(line));
    } catch (const std::exception& e) {
      errors.push_back({label, row, e.what()});
    }
  }
  return out;
}

std::vector<Interaction> read_interactions(std::istream& in, const std::string& label,
                                           std::vector<RowError>& errors) {
  std::vector<Interaction> out;
  std::string line;
  if (!std::getline(in, line)) return out;
  const auto header = split_csv(line);
  const auto column = [&](const std::string& name) -> std::size_t {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw CorpusError(label + ": header lacks column " + name);
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t cu = column("user_id"), cr = column("recipe_id"), cd = column("date");
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    try {
      const auto f = split_csv(line);
      if (f.size() != header.size())
        throw CorpusError("expected " + std::to_string(header.size()) + " fields, got " + std::to_string(f.size()));
      if (f[cu].empty() || f[cr].empty()) throw CorpusError("empty identifier");
      out.push_back({f[cu], f[cr], Date::parse(f[cd])});
    } catch (const std::exception& e) {
      errors.push_back({label, row, e.what()});
    }
  }
  return out;
}

LoadedCorpus load_corpus(const std::string& recipes_path, const std::string& interactions_path) {
  std::ifstream rin(recipes_path);
  if (!rin) throw CorpusError("cannot open recipes file: " + recipes_path);
  std::ifstream iin(interactions_path);
  if (!iin) throw CorpusError("cannot open interactions file: " + interactions_path);
  LoadedCorpus c;
  c.recipes = read_recipes(rin, recipes_path, c.errors);
  c.interactions = read_interactions(iin, interactions_path, c.errors);
  return c;
}

void write_recipes(std::ostream& out, const std::vector<Recipe>& recipes) {
  for (const auto& r : recipes) {
    json j;
    j["recipe_id"] = r.recipe_id;
    j["name"] = r.name;
    j["n_steps"] = r.steps.size();
    j["steps"] = r.steps;
    j["n_ingredients"] = r.ingredients.size();
    j["ingredients"] = r.ingredients;
    if (r.calorie_level) j["calorie_level"] = static_cast<int>(*r.calorie_level);
    if (r.calories) j["calories"] = *r.calories;
    j["techniques"] = std::vector<std::string>(r.techniques.begin(), r.techniques.end());
    out << j.dump() << '\n';
  }
}

void write_interactions(std::ostream& out, const std::vector<Interaction>& interactions) {
  out << "user_id,recipe_id,date\n";
  for (const auto& i : interactions) out << i.user_id << ',' << i.recipe_id << ',' << i.date.iso() << '\n';
}

FilteredCorpus filter_corpus(const std::vector<Recipe>& recipes,
                             const std::vector<Interaction>& interactions, const FilterRules& rules) {
  FilteredCorpus out;
  std::unordered_set<std::string> kept;
  for (const auto& r : recipes) {
    const auto ni = r.ingredients.size();
    if (r.steps.size() >= rules.min_steps && ni >= rules.min_ingredients && ni <= rules.max_ingredients) {
      out.recipes.push_back(r);
      kept.insert(r.recipe_id);
    }
  }
  for (const auto& i : interactions)
    if (kept.count(i.recipe_id)) out.interactions.push_back(i);

  // User pruning never removes recipes, so this converges after one pass; the
  // loop keeps the fixed point explicit.
  for (bool changed = true; changed;) {
    std::unordered_map<std::string, std::size_t> counts;
    for (const auto& i : out.interactions) ++counts[i.user_id];
    std::vector<Interaction> next;
    next.reserve(out.interactions.size());
    for (const auto& i : out.interactions)
      if (counts[i.user_id] >= rules.min_user_interactions) next.push_back(i);
    changed = next.size() != out.interactions.size();
    out.interactions = std::move(next);
  }
  return out;
}

SplitCorpus split_leave_one_out(const std::vector<Interaction>& interactions) {
  std::map<std::string, std::vector<Interaction>> by_user;
  for (const auto& i : interactions) by_user[i.user_id].push_back(i);

  SplitCorpus split;
  std::vector<Interaction> dev, test;
  for (auto& [user, list] : by_user) {
    if (list.size() < 3)
      throw CorpusError("user " + user + " has " + std::to_string(list.size()) +
                        " interactions; leave-one-out needs at least 3");
    std::stable_sort(list.begin(), list.end(), chronological_less);
    test.push_back(list.back());
    dev.push_back(list[list.size() - 2]);
    split.train.insert(split.train.end(), list.begin(), list.end() - 2);
  }
  std::unordered_set<std::string> train_recipes;
  for (const auto& i : split.train) train_recipes.insert(i.recipe_id);
  for (auto& i : dev) (train_recipes.count(i.recipe_id) ? split.seen_dev : split.dev).push_back(i);
  for (auto& i : test) (train_recipes.count(i.recipe_id) ? split.seen_test : split.test).push_back(i);
  return split;
}

TechniqueLexicon::TechniqueLexicon(const std::vector<std::string>& techniques) {
  std::set<std::string> unique;
  for (const auto& t : techniques) {
    const auto words = word_tokens(t);
    if (words.empty()) continue;
    std::string norm;
    for (const auto& w : words) norm += (norm.empty() ? "" : " ") + w;
    unique.insert(norm);
  }
  if (unique.empty()) throw CorpusError("technique lexicon is empty");
  techniques_.assign(unique.begin(), unique.end());
}

TechniqueLexicon TechniqueLexicon::parse(std::istream& in) {
  std::vector<std::string> list;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (!line.empty()) list.push_back(lower(line));
  }
  return TechniqueLexicon(list);
}

TechniqueLexicon TechniqueLexicon::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open technique lexicon: " + path);
  return parse(in);
}

std::vector<std::string> word_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (const char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || c >= 0x80 || (c == '\'' && !cur.empty())) {
      cur += static_cast<char>(std::tolower(c));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::set<std::string> extract_techniques(const std::vector<std::string>& steps,
                                         const TechniqueLexicon& lexicon) {
  std::vector<std::vector<std::string>> patterns;
  for (const auto& t : lexicon.techniques()) patterns.push_back(word_tokens(t));

  std::set<std::string> found;
  for (const auto& step : steps) {
    const auto words = word_tokens(step);
    for (std::size_t p = 0; p < patterns.size(); ++p) {
      const auto& pat = patterns[p];
      if (pat.size() > words.size()) continue;
      for (std::size_t i = 0; i + pat.size() <= words.size(); ++i) {
        if (std::equal(pat.begin(), pat.end(), words.begin() + static_cast<std::ptrdiff_t>(i))) {
          found.insert(lexicon.techniques()[p]);
          break;
        }
      }
    }
  }
  return found;
}

RecipeIndex index_recipes(const std::vector<Recipe>& recipes) {
  RecipeIndex index;
  for (const auto& r : recipes) index[r.recipe_id] = &r;
  return index;
}

namespace {

UserProfile profile_from_history(const std::string& user_id, std::vector<Interaction> history,
                                 const RecipeIndex& recipes, std::size_t k) {
  UserProfile p;
  p.user_id = user_id;
  std::stable_sort(history.begin(), history.end(),
                   [](const Interaction& a, const Interaction& b) { return chronological_less(b, a); });
  std::map<std::string, double> counts;
  double total = 0;
  for (const auto& i : history) {
    const auto it = recipes.find(i.recipe_id);
    if (p.prior_recipe_ids.size() < k) p.prior_recipe_ids.push_back(i.recipe_id);
    if (it == recipes.end()) continue;
    for (const auto& t : it->second->techniques) {
      counts[t] += 1;
      total += 1;
    }
  }
  if (total > 0)
    for (const auto& [t, c] : counts) p.rho[t] = c / total;
  return p;
}

}  // namespace

UserProfile build_user_profile(const std::string& user_id, const std::vector<Interaction>& train,
                               const RecipeIndex& recipes, std::size_t k) {
  if (k == 0) throw std::invalid_argument("profile window k must be >= 1");
  std::vector<Interaction> history;
  for (const auto& i : train)
    if (i.user_id == user_id) history.push_back(i);
  return profile_from_history(user_id, std::move(history), recipes, k);
}

std::map<std::string, UserProfile> build_user_profiles(const std::vector<Interaction>& train,
                                                       const RecipeIndex& recipes, std::size_t k) {
  if (k == 0) throw std::invalid_argument("profile window k must be >= 1");
  std::map<std::string, std::vector<Interaction>> by_user;
  for (const auto& i : train) by_user[i.user_id].push_back(i);
  std::map<std::string, UserProfile> out;
  for (auto& [user, list] : by_user) out[user] = profile_from_history(user, std::move(list), recipes, k);
  return out;
}

CalorieBins fit_calorie_bins(std::vector<double> values) {
  if (values.empty()) return {};
  std::sort(values.begin(), values.end());
  // Nearest-rank percentiles.
  const auto rank = [&](double p) {
    const auto r = static_cast<std::size_t>(std::ceil(p * static_cast<double>(values.size())));
    return values[std::max<std::size_t>(r, 1) - 1];
  };
  return {rank(1.0 / 3.0), rank(2.0 / 3.0)};
}

CalorieLevel assign_calorie_level(const std::optional<int>& label, const std::optional<double>& calories,
                                  const CalorieBins& bins) {
  if (label) return calorie_level_from_int(*label);
  if (!calories) throw CorpusError("neither calorie_level nor calories present");
  if (*calories <= bins.low_max) return CalorieLevel::Low;
  if (*calories <= bins.medium_max) return CalorieLevel::Medium;
  return CalorieLevel::High;
}

CalorieBins resolve_calorie_levels(std::vector<Recipe>& recipes, const std::set<std::string>& train_recipe_ids) {
  std::vector<double> train_values;
  for (const auto& r : recipes)
    if (!r.calorie_level && r.calories && train_recipe_ids.count(r.recipe_id)) train_values.push_back(*r.calories);
  const CalorieBins bins = fit_calorie_bins(std::move(train_values));
  for (auto& r : recipes) {
    if (r.calorie_level) continue;
    r.calorie_level = assign_calorie_level(std::nullopt, r.calories, bins);
  }
  return bins;
}

namespace {

SplitStats stats_of(const std::vector<Interaction>& list) {
  std::set<std::string> users, recipes;
  for (const auto& i : list) {
    users.insert(i.user_id);
    recipes.insert(i.recipe_id);
  }
  return {users.size(), recipes.size(), list.size()};
}

}  // namespace

CorpusStats corpus_stats(const SplitCorpus& split) {
  CorpusStats s;
  s.train = stats_of(split.train);
  s.dev = stats_of(split.dev);
  s.test = stats_of(split.test);
  std::set<std::pair<std::string, std::string>> pairs;
  for (const auto& i : split.train) pairs.emplace(i.user_id, i.recipe_id);
  const double possible = double(s.train.users) * double(s.train.recipes);
  s.train_sparsity = possible > 0 ? 1.0 - double(pairs.size()) / possible : 0.0;
  return s;
}

std::string format_stats(const CorpusStats& s) {
  std::ostringstream out;
  out << "split\tusers\trecipes\tactions\tsparsity\n";
  out << "train\t" << s.train.users << '\t' << s.train.recipes << '\t' << s.train.actions << '\t'
      << std::fixed << std::setprecision(3) << 100.0 * s.train_sparsity << "%\n";
  out << "dev\t" << s.dev.users << '\t' << s.dev.recipes << '\t' << s.dev.actions << "\t--\n";
  out << "test\t" << s.test.users << '\t' << s.test.recipes << '\t' << s.test.actions << "\t--\n";
  return out.str();
}

}  // namespace recipegen
