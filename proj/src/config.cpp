#include "recipegen/config.hpp"

#include <boost/property_tree/ini_parser.hpp>

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace recipegen {

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"paths.recipes", "data/toy/recipes.jsonl", "raw recipe records, one JSON object per line"},
      {"paths.interactions", "data/toy/interactions.csv", "raw interactions CSV (user_id,recipe_id,date)"},
      {"paths.techniques", "data/techniques.txt", "technique lexicon, one verb per line"},
      {"paths.work_dir", "out", "directory for every artifact"},
      {"corpus.min_steps", "3", "drop recipes with fewer steps"},
      {"corpus.min_ingredients", "4", "drop recipes with fewer ingredients"},
      {"corpus.max_ingredients", "20", "drop recipes with more ingredients"},
      {"corpus.min_user_interactions", "4", "drop users with fewer interactions"},
      {"tokenizer.vocab_size", "15000", "BPE vocabulary size including specials"},
      {"tokenizer.max_predictions", "256", "predicted tokens per target, EOS included"},
      {"tokenizer.input_ingredients", "5", "leading ingredients given to the encoder (3 to 5)"},
      {"model.variant", "enc_dec", "enc_dec, prior_tech, prior_recipe or prior_name"},
      {"model.hidden", "256", "GRU state size"},
      {"model.vocab_dim", "300", "BPE embedding size"},
      {"model.ingredient_dim", "10", "ingredient embedding size"},
      {"model.recipe_dim", "50", "prior recipe embedding size"},
      {"model.technique_dim", "50", "technique embedding size"},
      {"model.calorie_dim", "5", "calorie level embedding size"},
      {"model.history", "20", "prior recipes per user profile"},
      {"model.encoder_layers", "2", "bidirectional encoder layers"},
      {"model.decoder_layers", "2", "decoder GRU layers"},
      {"training.learning_rate", "0.001", "Adam learning rate"},
      {"training.decay_rate", "0.9", "learning rate multiplier per epoch"},
      {"training.epochs", "10", "training epochs"},
      {"training.batch_size", "16", "examples per batch"},
      {"training.grad_clip_norm", "5", "global gradient norm cap"},
      {"generation.k", "3", "top-k sampling width"},
      {"generation.max_len", "256", "emitted tokens per recipe"},
      {"evaluation.decoys", "9", "decoy users per ranking case"},
      {"evaluation.tie_policy", "pessimistic", "pessimistic or random"},
      {"evaluation.scorers", "true", "train and apply the coherence and entailment scorers"},
      {"evaluation.scorer_epochs", "20", "scorer training epochs"},
      {"evaluation.scorer_dim", "32", "scorer embedding size"},
      {"evaluation.scorer_hidden", "32", "scorer GRU and classifier size"},
      {"run.seed", "0", "root seed for every random stream"},
  };
  return keys;
}

ConfigTree default_config_tree() {
  ConfigTree t;
  for (const auto& k : config_keys()) t.put(k.key, k.default_value);
  return t;
}

namespace {

bool known_key(const std::string& key) {
  for (const auto& k : config_keys())
    if (k.key == key) return true;
  return false;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

void check_keys(const ConfigTree& t, const std::string& label) {
  for (const auto& [section, body] : t) {
    if (body.empty()) throw ConfigError(label + ": value outside a section: " + section);
    for (const auto& [name, value] : body) {
      if (!known_key(section + "." + name)) throw ConfigError(label + ": unknown key " + section + "." + name);
    }
  }
}

template <class T>
T parse_number(const ConfigTree& t, const std::string& key) {
  const std::string s = trim(t.get<std::string>(key));
  T value{};
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || end != s.data() + s.size())
    throw ConfigError(key + ": expected a number, got '" + s + "'");
  return value;
}

int get_int(const ConfigTree& t, const std::string& key, int min) {
  const int v = parse_number<int>(t, key);
  if (v < min) throw ConfigError(key + ": must be >= " + std::to_string(min));
  return v;
}

std::size_t get_size(const ConfigTree& t, const std::string& key, std::size_t min) {
  return static_cast<std::size_t>(get_int(t, key, int(min)));
}

double get_double(const ConfigTree& t, const std::string& key) {
  const std::string s = trim(t.get<std::string>(key));
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw ConfigError(key + ": expected a number, got '" + s + "'");
  return v;
}

bool get_bool(const ConfigTree& t, const std::string& key) {
  const std::string s = trim(t.get<std::string>(key));
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + s + "'");
}

}  // namespace

ConfigTree parse_config(std::istream& in, const std::string& label) {
  ConfigTree t;
  try {
    boost::property_tree::ini_parser::read_ini(in, t);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(label + ": " + e.message() + " at line " + std::to_string(e.line()));
  }
  check_keys(t, label);
  return t;
}

ConfigTree read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  return parse_config(in, path);
}

void overlay_config(ConfigTree& base, const ConfigTree& overlay) {
  for (const auto& [section, body] : overlay)
    for (const auto& [name, value] : body) base.put(section + "." + name, value.data());
}

void apply_assignments(ConfigTree& tree, const std::vector<std::string>& assignments) {
  for (const auto& a : assignments) {
    const auto eq = a.find('=');
    if (eq == std::string::npos) throw ConfigError("expected section.key=value, got '" + a + "'");
    const std::string key = trim(a.substr(0, eq));
    if (!known_key(key)) throw ConfigError("unknown key " + key);
    tree.put(key, trim(a.substr(eq + 1)));
  }
}

std::string write_config(const ConfigTree& tree) {
  std::ostringstream out;
  boost::property_tree::ini_parser::write_ini(out, tree);
  return out.str();
}

Settings settings_from_tree(const ConfigTree& t) {
  Settings s;
  s.recipes_path = trim(t.get<std::string>("paths.recipes"));
  s.interactions_path = trim(t.get<std::string>("paths.interactions"));
  s.techniques_path = trim(t.get<std::string>("paths.techniques"));
  s.work_dir = trim(t.get<std::string>("paths.work_dir"));
  if (s.work_dir.empty()) throw ConfigError("paths.work_dir: must not be empty");

  s.filter.min_steps = get_size(t, "corpus.min_steps", 1);
  s.filter.min_ingredients = get_size(t, "corpus.min_ingredients", 1);
  s.filter.max_ingredients = get_size(t, "corpus.max_ingredients", 1);
  s.filter.min_user_interactions = get_size(t, "corpus.min_user_interactions", 3);
  if (s.filter.max_ingredients < s.filter.min_ingredients)
    throw ConfigError("corpus.max_ingredients: must be >= corpus.min_ingredients");

  s.bpe_vocab = get_size(t, "tokenizer.vocab_size", BpeModel::kSpecials + 1);
  s.max_predictions = get_size(t, "tokenizer.max_predictions", 2);
  s.input_ingredients = get_size(t, "tokenizer.input_ingredients", 3);
  if (s.input_ingredients > 5) throw ConfigError("tokenizer.input_ingredients: must be between 3 and 5");

  try {
    s.model.variant = parse_variant(trim(t.get<std::string>("model.variant")));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("model.variant: ") + e.what());
  }
  s.model.hidden = get_int(t, "model.hidden", 1);
  s.model.vocab_dim = get_int(t, "model.vocab_dim", 1);
  s.model.ingredient_dim = get_int(t, "model.ingredient_dim", 1);
  s.model.recipe_dim = get_int(t, "model.recipe_dim", 1);
  s.model.technique_dim = get_int(t, "model.technique_dim", 1);
  s.model.calorie_dim = get_int(t, "model.calorie_dim", 1);
  s.model.history = get_int(t, "model.history", 1);
  s.model.encoder_layers = get_int(t, "model.encoder_layers", 1);
  s.model.decoder_layers = get_int(t, "model.decoder_layers", 1);
  s.model.max_length = int(s.max_predictions);

  s.training.learning_rate = get_double(t, "training.learning_rate");
  s.training.decay_rate = get_double(t, "training.decay_rate");
  s.training.epochs = get_int(t, "training.epochs", 0);
  s.training.batch_size = get_int(t, "training.batch_size", 1);
  s.training.grad_clip_norm = get_double(t, "training.grad_clip_norm");
  try {
    s.training.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("training: ") + e.what());
  }

  s.generation.k = get_int(t, "generation.k", 1);
  s.generation.max_len = get_int(t, "generation.max_len", 1);

  s.evaluation.decoys = get_size(t, "evaluation.decoys", 1);
  const std::string tie = trim(t.get<std::string>("evaluation.tie_policy"));
  if (tie == "pessimistic") s.evaluation.tie_policy = TiePolicy::Pessimistic;
  else if (tie == "random") s.evaluation.tie_policy = TiePolicy::Random;
  else throw ConfigError("evaluation.tie_policy: expected pessimistic or random, got '" + tie + "'");
  s.evaluation.scorers = get_bool(t, "evaluation.scorers");
  s.evaluation.scorer.epochs = get_int(t, "evaluation.scorer_epochs", 0);
  s.evaluation.scorer.embedding_dim = get_int(t, "evaluation.scorer_dim", 1);
  s.evaluation.scorer.hidden = get_int(t, "evaluation.scorer_hidden", 1);
  s.evaluation.scorer.pair_hidden = s.evaluation.scorer.hidden;

  s.seed = parse_number<std::uint64_t>(t, "run.seed");
  s.training.seed = derive_seed(s.seed, "batches");
  s.generation.seed = derive_seed(s.seed, "generation");
  s.evaluation.scorer.seed = derive_seed(s.seed, "scorers");
  return s;
}

Settings load_settings(const std::string& config_path, const std::vector<std::string>& assignments) {
  ConfigTree t = default_config_tree();
  if (!config_path.empty()) overlay_config(t, read_config_file(config_path));
  apply_assignments(t, assignments);
  return settings_from_tree(t);
}

std::uint64_t derive_seed(std::uint64_t root, const std::string& purpose) {
  // FNV-1a over the purpose, mixed with the root by splitmix64.
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : purpose) h = (h ^ c) * 1099511628211ull;
  std::uint64_t z = root + h + 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace recipegen
