#include "recipegen/pipeline.hpp"

#include "recipegen/tokenizer.hpp"
#include "recipegen/training.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <set>

namespace recipegen {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::ifstream open_artifact(const fs::path& path, const std::string& producer) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("missing artifact " + path.string() + " (run `recipegen " + producer + "` first)");
  return in;
}

std::ofstream create(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write " + path.string());
  return out;
}

void require_input(const std::string& path, const char* what) {
  if (path.empty()) throw UsageError(std::string(what) + " path is not configured");
  if (!fs::exists(path)) throw UsageError("missing " + std::string(what) + " file: " + path);
}

std::vector<Interaction> read_split(const fs::path& path) {
  auto in = open_artifact(path, "preprocess");
  std::vector<RowError> errors;
  auto out = read_interactions(in, path.string(), errors);
  if (!errors.empty())
    throw UsageError(path.string() + " row " + std::to_string(errors.front().row) + ": " + errors.front().message);
  return out;
}

BpeModel load_bpe(const Artifacts& a) {
  auto in = open_artifact(a.bpe(), "tokenize");
  return BpeModel::load(in);
}

std::vector<Example> test_examples(const FeatureSpace& space, const PreparedCorpus& c, std::size_t max_predictions) {
  return build_examples(space, c.split.test, c.index, c.profiles, max_predictions);
}

/// Histories of the users that have a test case; the decoy pool.
std::map<std::string, UserHistory> test_user_histories(const FeatureSpace& space, const PreparedCorpus& c) {
  std::set<std::string> users;
  for (const auto& i : c.split.test) users.insert(i.user_id);
  std::map<std::string, UserProfile> profiles;
  for (const auto& u : users) {
    const auto it = c.profiles.find(u);
    profiles[u] = it != c.profiles.end() ? it->second : UserProfile{u, {}, {}};
  }
  return resolve_histories(space, profiles, c.index);
}

Checkpoint<double> load_model(const Artifacts& a, const std::string& path, const std::string& model) {
  const fs::path p = path.empty() ? a.checkpoint(model) : fs::path(path);
  if (!fs::exists(p)) throw UsageError("missing checkpoint " + p.string() + " (run `recipegen train` first)");
  return load_checkpoint<double>(p.string());
}

std::vector<std::string> leading_ingredients(const Recipe& r, std::size_t n) {
  return {r.ingredients.begin(), r.ingredients.begin() + long(std::min(n, r.ingredients.size()))};
}

}  // namespace

std::vector<Recipe> PreparedCorpus::train_recipes() const {
  std::set<std::string, decltype(&id_less)> ids(&id_less);
  for (const auto& i : split.train) ids.insert(i.recipe_id);
  std::vector<Recipe> out;
  for (const auto& id : ids) {
    const auto it = index.find(id);
    if (it != index.end()) out.push_back(*it->second);
  }
  return out;
}

void write_profiles(std::ostream& out, const std::map<std::string, UserProfile>& profiles) {
  for (const auto& [user, p] : profiles) {
    ordered_json j;
    j["user_id"] = p.user_id;
    j["prior_recipe_ids"] = p.prior_recipe_ids;
    ordered_json rho = ordered_json::object();
    for (const auto& [t, w] : p.rho) rho[t] = w;
    j["rho"] = rho;
    out << j.dump() << '\n';
  }
}

std::map<std::string, UserProfile> read_profiles(std::istream& in) {
  std::map<std::string, UserProfile> out;
  std::string line;
  for (std::size_t row = 1; std::getline(in, line); ++row) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      UserProfile p;
      p.user_id = j.at("user_id").get<std::string>();
      p.prior_recipe_ids = j.at("prior_recipe_ids").get<std::vector<std::string>>();
      for (const auto& [t, w] : j.at("rho").items()) p.rho[t] = w.get<double>();
      out[p.user_id] = std::move(p);
    } catch (const std::exception& e) {
      throw UsageError("profiles line " + std::to_string(row) + ": " + e.what());
    }
  }
  return out;
}

PreparedCorpus load_prepared(const Artifacts& a) {
  auto lexicon_in = open_artifact(a.lexicon(), "preprocess");
  PreparedCorpus c(TechniqueLexicon::parse(lexicon_in));
  {
    auto in = open_artifact(a.recipes(), "preprocess");
    std::vector<RowError> errors;
    c.recipes = read_recipes(in, a.recipes().string(), errors);
    if (!errors.empty())
      throw UsageError(a.recipes().string() + " row " + std::to_string(errors.front().row) + ": " +
                       errors.front().message);
  }
  c.index = index_recipes(c.recipes);
  c.split.train = read_split(a.split("train"));
  c.split.dev = read_split(a.split("dev"));
  c.split.test = read_split(a.split("test"));
  c.split.seen_dev = read_split(a.split("seen_dev"));
  c.split.seen_test = read_split(a.split("seen_test"));
  {
    auto in = open_artifact(a.profiles(), "preprocess");
    c.profiles = read_profiles(in);
  }
  return c;
}

std::map<std::string, UserHistory> resolve_histories(const FeatureSpace& space,
                                                     const std::map<std::string, UserProfile>& profiles,
                                                     const RecipeIndex& recipes) {
  std::map<std::string, UserHistory> out;
  for (const auto& [user, p] : profiles) out[user] = resolve_history(space, p, recipes);
  return out;
}

template <typename Scalar>
std::vector<int> user_ranks(const RecipeModel<Scalar>& model, const std::vector<Example>& cases,
                            const std::map<std::string, UserHistory>& histories, std::size_t decoys,
                            TiePolicy policy, std::uint64_t seed) {
  std::vector<std::string> users;
  for (const auto& [u, h] : histories) users.push_back(u);
  std::mt19937_64 rng(seed);
  std::vector<int> ranks;
  for (const auto& c : cases) {
    std::vector<UserHistory> others;
    for (const auto& u : sample_decoys(users, c.user_id, decoys, rng)) others.push_back(histories.at(u));
    ranks.push_back(rank_users(model, c.input, std::span<const int>(c.target), c.history,
                               std::span<const UserHistory>(others), policy, &rng));
  }
  return ranks;
}

template std::vector<int> user_ranks(const RecipeModel<float>&, const std::vector<Example>&,
                                     const std::map<std::string, UserHistory>&, std::size_t, TiePolicy,
                                     std::uint64_t);
template std::vector<int> user_ranks(const RecipeModel<double>&, const std::vector<Example>&,
                                     const std::map<std::string, UserHistory>&, std::size_t, TiePolicy,
                                     std::uint64_t);

CorpusStats cmd_preprocess(const Settings& s, std::ostream& log) {
  require_input(s.recipes_path, "recipes");
  require_input(s.interactions_path, "interactions");
  require_input(s.techniques_path, "techniques");
  auto loaded = load_corpus(s.recipes_path, s.interactions_path);
  const auto lexicon = TechniqueLexicon::load(s.techniques_path);
  for (auto& r : loaded.recipes) r.techniques = extract_techniques(r.steps, lexicon);
  auto filtered = filter_corpus(loaded.recipes, loaded.interactions, s.filter);
  if (filtered.interactions.empty()) throw CorpusError("no interactions survive filtering");
  const auto split = split_leave_one_out(filtered.interactions);
  std::set<std::string> train_ids;
  for (const auto& i : split.train) train_ids.insert(i.recipe_id);
  const auto bins = resolve_calorie_levels(filtered.recipes, train_ids);
  const auto index = index_recipes(filtered.recipes);
  const auto profiles = build_user_profiles(split.train, index, std::size_t(s.model.history));
  const auto stats = corpus_stats(split);

  const Artifacts a{s.work_dir};
  fs::create_directories(a.dir);
  {
    auto out = create(a.recipes());
    write_recipes(out, filtered.recipes);
  }
  const std::vector<Interaction>* parts[] = {&split.train, &split.dev, &split.test, &split.seen_dev,
                                             &split.seen_test};
  for (std::size_t p = 0; p < std::size(kSplitParts); ++p) {
    auto out = create(a.split(kSplitParts[p]));
    write_interactions(out, *parts[p]);
  }
  {
    auto out = create(a.profiles());
    write_profiles(out, profiles);
  }
  {
    auto out = create(a.lexicon());
    for (const auto& t : lexicon.techniques()) out << t << '\n';
  }
  {
    auto out = create(a.stats());
    out << format_stats(stats);
  }
  {
    auto out = create(a.row_errors());
    for (const auto& e : loaded.errors) out << e.file << ':' << e.row << ": " << e.message << '\n';
  }
  {
    ordered_json m;
    m["seed"] = s.seed;
    m["raw_recipes"] = loaded.recipes.size();
    m["raw_interactions"] = loaded.interactions.size();
    m["skipped_rows"] = loaded.errors.size();
    m["recipes"] = filtered.recipes.size();
    m["interactions"] = filtered.interactions.size();
    m["users"] = profiles.size();
    m["calorie_low_max"] = bins.low_max;
    m["calorie_medium_max"] = bins.medium_max;
    auto out = create(a.manifest());
    out << m.dump(2) << '\n';
  }
  if (!loaded.errors.empty())
    log << "skipped " << loaded.errors.size() << " malformed rows, see " << a.row_errors().string() << '\n';
  log << format_stats(stats);
  return stats;
}

void cmd_tokenize(const Settings& s, std::ostream& log) {
  const Artifacts a{s.work_dir};
  const auto c = load_prepared(a);
  std::vector<std::string> texts;
  for (const auto& r : c.train_recipes()) {
    texts.push_back(r.name);
    texts.push_back(steps_text(r.steps));
  }
  const auto bpe = train_bpe(texts, s.bpe_vocab);
  bpe.save(a.bpe().string());
  log << "BPE vocabulary " << bpe.size() << " tokens, " << bpe.merges().size() << " merges\n";
}

TrainSummary cmd_train(const Settings& s, std::ostream& log) {
  const Artifacts a{s.work_dir};
  const auto c = load_prepared(a);
  const auto space = build_feature_space(load_bpe(a), c.train_recipes(), c.lexicon, s.input_ingredients);
  ModelConfig config = s.model;
  space.size_config(config);
  config.max_length = int(s.max_predictions);
  const auto train_set =
      build_training_examples(space, c.split.train, c.index, std::size_t(config.history), s.max_predictions);
  const auto dev_set = build_examples(space, c.split.dev, c.index, c.profiles, s.max_predictions);
  if (train_set.empty()) throw UsageError("no training examples");

  const std::string name = to_string(config.variant);
  const auto model = RecipeModel<double>::initialize(config, derive_seed(s.seed, "init"));
  auto log_file = create(a.train_log(name));
  log << "training " << name << " on " << train_set.size() << " examples, " << dev_set.size() << " dev\n";
  TrainResult<double> result{model, 0, {}};
  try {
    result = train(model, s.training, train_set, dev_set, [&](const EpochRecord& r) {
      log_file << to_json_line(r) << '\n' << std::flush;
      log << "epoch " << r.epoch << " lr " << r.learning_rate << " loss " << r.train_loss << " dev_ppl "
          << r.dev_perplexity << (r.best ? " *" : "") << '\n';
    });
  } catch (const TrainingAborted& e) {
    auto dump = create(a.abort_dump(name));
    dump << e.what() << '\n' << e.diagnostic();
    log << "diagnostic written to " << a.abort_dump(name).string() << '\n';
    throw;
  }
  TrainSummary summary;
  summary.best_epoch = result.best_epoch;
  summary.epochs_run = result.log.size();
  summary.best_dev_perplexity =
      result.best_epoch > 0 ? result.log[std::size_t(result.best_epoch - 1)].dev_perplexity
                            : perplexity(result.best, std::span<const Example>(dev_set.empty() ? train_set : dev_set));
  summary.checkpoint = a.checkpoint(name);
  save_checkpoint(summary.checkpoint.string(), result.best, space,
                  {s.seed, result.best_epoch, summary.best_dev_perplexity, s.max_predictions});
  log << "checkpoint " << summary.checkpoint.string() << " (epoch " << summary.best_epoch << ")\n";
  return summary;
}

fs::path cmd_generate(const Settings& s, const GenerateRequest& request, std::ostream& log) {
  const Artifacts a{s.work_dir};
  const auto c = load_prepared(a);
  std::vector<GenerationRecord> records;
  std::string name;
  if (request.nn_baseline) {
    name = "nn";
    const auto bpe = load_bpe(a);
    const auto train_recipes = c.train_recipes();
    if (train_recipes.empty()) throw UsageError("nearest-neighbour baseline needs training recipes");
    for (const auto& i : c.split.test) {
      const auto it = c.index.find(i.recipe_id);
      if (it == c.index.end()) continue;
      const Recipe& gold = *it->second;
      const Recipe& nn = nn_baseline(train_recipes, gold.name);
      GenerationRecord r;
      r.user_id = i.user_id;
      r.recipe_id = gold.recipe_id;
      r.name = gold.name;
      r.ingredients = leading_ingredients(gold, s.input_ingredients);
      r.calorie = gold.calorie_level.value_or(CalorieLevel::Low);
      r.text = steps_text(nn.steps);
      r.tokens = bpe.encode(r.text);
      r.tokens.push_back(BpeModel::kEos);
      r.seed = s.seed;
      r.model = name;
      records.push_back(std::move(r));
    }
  } else {
    const auto ck = load_model(a, request.checkpoint, to_string(s.model.variant));
    name = to_string(ck.model.config.variant);
    if (ck.model.config.variant != s.model.variant)
      throw UsageError("checkpoint variant " + name + " does not match configured variant " +
                       to_string(s.model.variant));
    const auto cases = test_examples(ck.space, c, ck.info.max_predictions);
    std::mt19937_64 seeds(s.generation.seed);
    for (const auto& e : cases) {
      const Recipe& gold = *c.index.at(e.recipe_id);
      GenerationOptions opts = s.generation;
      opts.seed = seeds();
      GenerationRecord r;
      r.user_id = e.user_id;
      r.recipe_id = e.recipe_id;
      r.name = gold.name;
      r.ingredients = leading_ingredients(gold, ck.space.input_ingredients);
      r.calorie = e.input.calorie;
      r.tokens = generate(ck.model, e.input, e.history, opts);
      r.text = ck.space.bpe.decode(r.tokens);
      r.seed = opts.seed;
      r.model = name;
      records.push_back(std::move(r));
    }
  }
  const fs::path out_path = request.output.empty() ? a.generations(name) : fs::path(request.output);
  auto out = create(out_path);
  write_generations(out, records);
  log << "wrote " << records.size() << " generations to " << out_path.string() << '\n';
  return out_path;
}

MetricReport cmd_evaluate(const Settings& s, const EvaluateRequest& request, std::ostream& log) {
  const Artifacts a{s.work_dir};
  const fs::path gen_path =
      request.generations.empty() ? a.generations(to_string(s.model.variant)) : fs::path(request.generations);
  std::vector<GenerationRecord> records;
  {
    std::ifstream in(gen_path);
    if (!in) throw UsageError("missing generations file: " + gen_path.string());
    try {
      records = read_generations(in);
    } catch (const std::runtime_error& e) {
      throw UsageError(gen_path.string() + ": " + e.what());
    }
  }
  if (records.empty()) throw UsageError("generations file has no records: " + gen_path.string());
  const std::string name = records.front().model;
  for (std::size_t i = 0; i < records.size(); ++i)
    if (records[i].model != name)
      throw UsageError(gen_path.string() + ": generations line " + std::to_string(i + 1) + ": model " +
                       records[i].model + " differs from " + name);

  const auto c = load_prepared(a);
  const auto bpe = load_bpe(a);
  MetricReport report;
  report.model = name;
  report.seed = s.seed;

  std::vector<Tokens> cands, refs;
  std::vector<const Recipe*> golds;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto it = c.index.find(records[i].recipe_id);
    if (it == c.index.end())
      throw UsageError(gen_path.string() + ": generations line " + std::to_string(i + 1) + ": unknown recipe " +
                       records[i].recipe_id);
    golds.push_back(it->second);
    cands.push_back(word_tokens(records[i].text));
    refs.push_back(word_tokens(steps_text(it->second->steps)));
    RecipeScores rs;
    rs.user_id = records[i].user_id;
    rs.recipe_id = records[i].recipe_id;
    rs.bleu1 = bleu(cands.back(), refs.back(), 1);
    rs.bleu4 = bleu(cands.back(), refs.back(), 4);
    rs.rouge_l = rouge_l(cands.back(), refs.back());
    report.per_recipe.push_back(rs);
  }
  report.metrics["bleu1"] = bleu(cands, refs, 1);
  report.metrics["bleu4"] = bleu(cands, refs, 4);
  report.metrics["rouge_l"] = rouge_l(cands, refs);
  report.metrics["distinct1"] = distinct_n(cands, 1);
  report.metrics["distinct2"] = distinct_n(cands, 2);

  if (s.evaluation.scorers) {
    std::vector<StepTokens> train_steps;
    for (const auto& r : c.train_recipes()) train_steps.push_back(tokenize_steps(bpe, r.steps));
    ScorerConfig sc = s.evaluation.scorer;
    sc.vocab_size = int(bpe.size());
    const auto coherence = train_coherence_scorer(train_steps, sc);
    const auto entailment = train_entailment(train_steps, sc);
    double coh = 0, ent = 0;
    std::size_t n_coh = 0, n_ent = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto generated = tokenize_steps(bpe, split_steps(records[i].text));
      const auto gold = tokenize_steps(bpe, split_steps(steps_text(golds[i]->steps)));
      if (!generated.empty() && !gold.empty()) {
        report.per_recipe[i].coherence = coherence_score(coherence, generated, gold);
        coh += *report.per_recipe[i].coherence;
        ++n_coh;
      }
      report.per_recipe[i].entailment = entailment_score(entailment, generated);
      if (report.per_recipe[i].entailment) {
        ent += *report.per_recipe[i].entailment;
        ++n_ent;
      }
    }
    if (n_coh) report.metrics["coherence"] = coh / double(n_coh);
    else report.warnings.push_back("coherence: no generated recipe has a step");
    if (n_ent) report.metrics["entailment"] = ent / double(n_ent);
    else report.warnings.push_back("entailment: no generated recipe has two steps");
  } else {
    report.warnings.push_back("coherence and entailment scorers disabled");
  }

  if (name == "nn") {
    report.warnings.push_back("perplexity, uma and mrr need a trained model");
  } else {
    const auto ck = load_model(a, request.checkpoint, name);
    if (to_string(ck.model.config.variant) != name)
      throw UsageError("checkpoint variant " + to_string(ck.model.config.variant) + " does not match generations model " +
                       name);
    const auto cases = test_examples(ck.space, c, ck.info.max_predictions);
    report.metrics["perplexity"] = perplexity(ck.model, std::span<const Example>(cases));
    const auto histories = test_user_histories(ck.space, c);
    if (histories.size() <= s.evaluation.decoys) {
      report.warnings.push_back("uma and mrr skipped: " + std::to_string(histories.size()) + " test users, " +
                                std::to_string(s.evaluation.decoys) + " decoys requested");
    } else {
      const auto ranks = user_ranks(ck.model, cases, histories, s.evaluation.decoys, s.evaluation.tie_policy,
                                    derive_seed(s.seed, "decoys"));
      report.metrics["uma"] = uma(ranks);
      report.metrics["mrr"] = mrr(ranks);
      std::map<std::pair<std::string, std::string>, int> by_case;
      for (std::size_t i = 0; i < cases.size(); ++i) by_case[{cases[i].user_id, cases[i].recipe_id}] = ranks[i];
      for (auto& rs : report.per_recipe) {
        const auto it = by_case.find({rs.user_id, rs.recipe_id});
        if (it != by_case.end()) rs.rank = it->second;
      }
    }
  }

  const fs::path out_path = request.output.empty() ? a.report(name) : fs::path(request.output);
  auto out = create(out_path);
  out << report_json(report);
  log << report_table({report});
  for (const auto& w : report.warnings) log << "warning: " << w << '\n';
  return report;
}

RankSummary cmd_rank(const Settings& s, const std::string& checkpoint, std::ostream& log) {
  const Artifacts a{s.work_dir};
  const auto c = load_prepared(a);
  const auto ck = load_model(a, checkpoint, to_string(s.model.variant));
  const std::string name = to_string(ck.model.config.variant);
  const auto cases = test_examples(ck.space, c, ck.info.max_predictions);
  const auto histories = test_user_histories(ck.space, c);
  if (histories.size() <= s.evaluation.decoys)
    throw UsageError(std::to_string(histories.size()) + " test users cannot supply " +
                     std::to_string(s.evaluation.decoys) + " decoys");
  RankSummary r;
  r.ranks = user_ranks(ck.model, cases, histories, s.evaluation.decoys, s.evaluation.tie_policy,
                       derive_seed(s.seed, "decoys"));
  r.uma = uma(r.ranks);
  r.mrr = mrr(r.ranks);
  ordered_json j;
  j["model"] = name;
  j["seed"] = s.seed;
  j["decoys"] = s.evaluation.decoys;
  j["uma"] = r.uma;
  j["mrr"] = r.mrr;
  ordered_json rows = ordered_json::array();
  for (std::size_t i = 0; i < cases.size(); ++i)
    rows.push_back({{"user_id", cases[i].user_id}, {"recipe_id", cases[i].recipe_id}, {"rank", r.ranks[i]}});
  j["ranks"] = rows;
  auto out = create(a.ranks(name));
  out << j.dump(2) << '\n';
  log << name << "\tUMA " << r.uma << "\tMRR " << r.mrr << "\t(" << cases.size() << " cases, "
      << s.evaluation.decoys << " decoys)\n";
  return r;
}

}  // namespace recipegen
