#pragma once

#include "recipegen/corpus.hpp"
#include "recipegen/evaluation.hpp"
#include "recipegen/generation.hpp"
#include "recipegen/model.hpp"
#include "recipegen/training.hpp"

#include <boost/property_tree/ptree.hpp>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace recipegen {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One configurable key, written "section.name".
struct ConfigKey {
  std::string key;
  std::string default_value;
  std::string help;
};

/// Every key the config file may set, in file order.
const std::vector<ConfigKey>& config_keys();

using ConfigTree = boost::property_tree::ptree;

ConfigTree default_config_tree();
/// Reads an INI file. Unknown sections or keys are rejected.
ConfigTree read_config_file(const std::string& path);
ConfigTree parse_config(std::istream& in, const std::string& label);
/// Copies every value of `overlay` onto `base`.
void overlay_config(ConfigTree& base, const ConfigTree& overlay);
/// Applies "section.key=value" assignments.
void apply_assignments(ConfigTree& tree, const std::vector<std::string>& assignments);
std::string write_config(const ConfigTree& tree);

struct EvaluationSettings {
  std::size_t decoys = 9;
  TiePolicy tie_policy = TiePolicy::Pessimistic;
  bool scorers = true;
  ScorerConfig scorer;  // vocab_size and seed are filled at run time
};

struct Settings {
  std::string recipes_path;
  std::string interactions_path;
  std::string techniques_path;
  std::string work_dir;
  FilterRules filter;
  std::size_t bpe_vocab = 1000;
  std::size_t max_predictions = 256;
  std::size_t input_ingredients = 5;
  ModelConfig model;  // table sizes are filled from the data
  TrainConfig training;
  GenerationOptions generation;
  EvaluationSettings evaluation;
  std::uint64_t seed = 0;
};

/// Typed view of a fully layered tree. Throws ConfigError naming the key of
/// the first invalid value.
Settings settings_from_tree(const ConfigTree& tree);

/// Built-in defaults, then the config file (when given), then assignments.
Settings load_settings(const std::string& config_path, const std::vector<std::string>& assignments);

/// Independent stream seed for one purpose, derived from the root seed.
std::uint64_t derive_seed(std::uint64_t root, const std::string& purpose);

}  // namespace recipegen
