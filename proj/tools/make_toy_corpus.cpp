// Writes the two-cluster synthetic corpus as raw recipes and interactions.

#include "recipegen/synthetic.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Generate a synthetic raw corpus with two taste clusters."};
  std::string out_dir = "data/toy";
  recipegen::SyntheticOptions o;
  o.users_per_cluster = 20;
  o.interactions_per_user = 5;
  o.reuse_probability = 0.3;
  app.add_option("-o,--out", out_dir, "output directory")->capture_default_str();
  app.add_option("--users-per-cluster", o.users_per_cluster, "users in each cluster")->capture_default_str();
  app.add_option("--interactions", o.interactions_per_user, "interactions per user")->capture_default_str();
  app.add_option("--reuse", o.reuse_probability, "chance an interaction revisits a cluster-mate's recipe")
      ->capture_default_str();
  app.add_option("--seed", o.seed, "random seed")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  try {
    const auto corpus = recipegen::make_synthetic_corpus(o);
    std::filesystem::create_directories(out_dir);
    std::ofstream recipes(std::filesystem::path(out_dir) / "recipes.jsonl");
    recipegen::write_recipes(recipes, corpus.recipes);
    std::ofstream interactions(std::filesystem::path(out_dir) / "interactions.csv");
    recipegen::write_interactions(interactions, corpus.interactions);
    if (!recipes || !interactions) throw std::runtime_error("cannot write into " + out_dir);
    std::cout << corpus.recipes.size() << " recipes, " << corpus.interactions.size() << " interactions\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
