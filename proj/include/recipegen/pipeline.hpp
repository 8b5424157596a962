#pragma once

#include "recipegen/checkpoint.hpp"
#include "recipegen/config.hpp"
#include "recipegen/corpus.hpp"
#include "recipegen/evaluation.hpp"
#include "recipegen/features.hpp"
#include "recipegen/generation.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace recipegen {

/// Bad input from the operator: missing files, invalid artifacts, mismatched
/// options. Reported with exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File names inside the work directory.
struct Artifacts {
  std::filesystem::path dir;

  std::filesystem::path recipes() const { return dir / "recipes.jsonl"; }
  std::filesystem::path split(const std::string& part) const { return dir / (part + ".csv"); }
  std::filesystem::path profiles() const { return dir / "profiles.jsonl"; }
  std::filesystem::path lexicon() const { return dir / "techniques.txt"; }
  std::filesystem::path stats() const { return dir / "stats.tsv"; }
  std::filesystem::path manifest() const { return dir / "preprocess.json"; }
  std::filesystem::path row_errors() const { return dir / "row_errors.txt"; }
  std::filesystem::path bpe() const { return dir / "bpe.txt"; }
  std::filesystem::path checkpoint(const std::string& model) const { return dir / ("model_" + model + ".ckpt"); }
  std::filesystem::path train_log(const std::string& model) const { return dir / ("train_" + model + ".jsonl"); }
  std::filesystem::path abort_dump(const std::string& model) const { return dir / ("abort_" + model + ".txt"); }
  std::filesystem::path generations(const std::string& model) const {
    return dir / ("generations_" + model + ".jsonl");
  }
  std::filesystem::path report(const std::string& model) const { return dir / ("report_" + model + ".json"); }
  std::filesystem::path ranks(const std::string& model) const { return dir / ("ranks_" + model + ".json"); }
};

inline const char* const kSplitParts[] = {"train", "dev", "test", "seen_dev", "seen_test"};

/// Preprocessed corpus read back from the work directory. Not copyable: the
/// index points into `recipes`.
struct PreparedCorpus {
  std::vector<Recipe> recipes;
  RecipeIndex index;
  SplitCorpus split;
  std::map<std::string, UserProfile> profiles;
  TechniqueLexicon lexicon;

  explicit PreparedCorpus(TechniqueLexicon lex) : lexicon(std::move(lex)) {}
  PreparedCorpus(const PreparedCorpus&) = delete;
  PreparedCorpus& operator=(const PreparedCorpus&) = delete;
  PreparedCorpus(PreparedCorpus&&) = default;
  PreparedCorpus& operator=(PreparedCorpus&&) = default;

  /// Recipes of the train interactions, in id order.
  std::vector<Recipe> train_recipes() const;
};

PreparedCorpus load_prepared(const Artifacts& artifacts);

void write_profiles(std::ostream& out, const std::map<std::string, UserProfile>& profiles);
std::map<std::string, UserProfile> read_profiles(std::istream& in);

/// Ranks every case's own user among `decoys` other users drawn from the keys
/// of `histories`. Cases whose user has too few alternatives throw.
template <typename Scalar>
std::vector<int> user_ranks(const RecipeModel<Scalar>& model, const std::vector<Example>& cases,
                            const std::map<std::string, UserHistory>& histories, std::size_t decoys,
                            TiePolicy policy, std::uint64_t seed);

/// Resolved history of every profiled user.
std::map<std::string, UserHistory> resolve_histories(const FeatureSpace& space,
                                                     const std::map<std::string, UserProfile>& profiles,
                                                     const RecipeIndex& recipes);

CorpusStats cmd_preprocess(const Settings& settings, std::ostream& log);

void cmd_tokenize(const Settings& settings, std::ostream& log);

struct TrainSummary {
  int best_epoch = 0;
  double best_dev_perplexity = 0.0;
  std::size_t epochs_run = 0;
  std::filesystem::path checkpoint;
};
TrainSummary cmd_train(const Settings& settings, std::ostream& log);

struct GenerateRequest {
  bool nn_baseline = false;
  std::string checkpoint;  // empty: the work directory's checkpoint for the variant
  std::string output;      // empty: the work directory's generations file
};
std::filesystem::path cmd_generate(const Settings& settings, const GenerateRequest& request, std::ostream& log);

struct EvaluateRequest {
  std::string generations;  // empty: generations of the configured variant
  std::string checkpoint;   // empty: the work directory's checkpoint for the generating model
  std::string output;       // empty: the work directory's report file
};
MetricReport cmd_evaluate(const Settings& settings, const EvaluateRequest& request, std::ostream& log);

struct RankSummary {
  std::vector<int> ranks;
  double uma = 0.0;
  double mrr = 0.0;
};
RankSummary cmd_rank(const Settings& settings, const std::string& checkpoint, std::ostream& log);

}  // namespace recipegen
