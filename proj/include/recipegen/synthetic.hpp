#pragma once

#include "recipegen/corpus.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace recipegen {

/// Parameters of a generated two-cluster corpus. Each cluster has its own
/// ingredients, dishes and techniques; each user belongs to one cluster and
/// cooks with a fixed pair of that cluster's techniques.
struct SyntheticOptions {
  int users_per_cluster = 20;
  int interactions_per_user = 6;
  double reuse_probability = 0.0;  // chance an interaction revisits a cluster-mate's recipe
  std::uint64_t seed = 7;
};

struct SyntheticCorpus {
  std::vector<Recipe> recipes;
  std::vector<Interaction> interactions;
  std::vector<std::string> lexicon;
  std::map<std::string, int> user_cluster;
  std::map<std::string, std::vector<std::string>> user_techniques;
};

/// Recipes follow five phases (prepare, two technique steps, combine, serve)
/// so step order carries signal. Recipe names and ingredients depend only on
/// the cluster, while the technique words in the steps depend on the user.
SyntheticCorpus make_synthetic_corpus(const SyntheticOptions& options);

}  // namespace recipegen
