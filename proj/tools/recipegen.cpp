// recipegen: preprocess, tokenize, train, generate, evaluate and rank.

#include "recipegen/pipeline.hpp"
#include "recipegen/tokenizer.hpp"
#include "recipegen/training.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

using namespace recipegen;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> assignments;
  std::optional<std::uint64_t> seed;
  std::string work_dir;
  std::vector<std::string> flag_assignments;  // filled by command-specific flags
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config, "INI config file with [paths], [corpus], [tokenizer], [model], "
                                           "[training], [generation], [evaluation] and [run] sections")
      ->check(CLI::ExistingFile);
  cmd->add_option("--set", c.assignments, "override any config key, e.g. --set model.hidden=64 (repeatable)");
  cmd->add_option("--seed", c.seed, "root seed (run.seed)");
  cmd->add_option("--work-dir", c.work_dir, "artifact directory (paths.work_dir)");
}

// Adds a flag that maps onto one config key.
template <class T>
CLI::Option* key_flag(CLI::App* cmd, Common& c, const std::string& flag, const std::string& key,
                      const std::string& help) {
  return cmd->add_option_function<T>(
      flag,
      [&c, key](const T& v) {
        std::ostringstream s;
        s << v;
        c.flag_assignments.push_back(key + "=" + s.str());
      },
      help + " (" + key + ")");
}

Settings resolve(const Common& c) {
  auto a = c.assignments;
  if (c.seed) a.push_back("run.seed=" + std::to_string(*c.seed));
  if (!c.work_dir.empty()) a.push_back("paths.work_dir=" + c.work_dir);
  a.insert(a.end(), c.flag_assignments.begin(), c.flag_assignments.end());
  return load_settings(c.config, a);
}

std::string keys_help() {
  std::string out = "Config keys (flag > config file > default):\n";
  for (const auto& k : config_keys()) out += "  " + k.key + " = " + k.default_value + "    " + k.help + "\n";
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Personalized recipe generation: corpus preparation, BPE, training, decoding and evaluation."};
  app.footer(keys_help() + "\nExit codes: 0 success, 1 internal error, 2 user or input error.");
  app.require_subcommand(1);

  Common common;

  auto* pre = app.add_subcommand("preprocess", "filter the raw corpus, split it per user and build profiles");
  add_common(pre, common);
  key_flag<std::string>(pre, common, "--recipes", "paths.recipes", "raw recipes file");
  key_flag<std::string>(pre, common, "--interactions", "paths.interactions", "raw interactions file");
  key_flag<std::string>(pre, common, "--techniques", "paths.techniques", "technique lexicon");

  auto* tok = app.add_subcommand("tokenize", "learn the BPE vocabulary from the training recipes");
  add_common(tok, common);
  key_flag<int>(tok, common, "--vocab-size", "tokenizer.vocab_size", "BPE vocabulary size");

  auto* tr = app.add_subcommand("train", "train one model variant and keep the best dev checkpoint");
  add_common(tr, common);
  key_flag<std::string>(tr, common, "--variant", "model.variant", "enc_dec, prior_tech, prior_recipe or prior_name");
  key_flag<int>(tr, common, "--epochs", "training.epochs", "training epochs");

  GenerateRequest gen_req;
  std::string baseline;
  auto* gen = app.add_subcommand("generate", "decode a recipe for every test interaction");
  add_common(gen, common);
  key_flag<std::string>(gen, common, "--variant", "model.variant", "variant of the checkpoint to decode with");
  key_flag<int>(gen, common, "--k", "generation.k", "top-k sampling width; 1 is greedy");
  key_flag<int>(gen, common, "--max-len", "generation.max_len", "emitted tokens per recipe");
  gen->add_option("--baseline", baseline, "use a baseline instead of a model")->check(CLI::IsMember({"nn"}));
  gen->add_option("--checkpoint", gen_req.checkpoint, "checkpoint file (default: work dir)");
  gen->add_option("-o,--output", gen_req.output, "generations file (default: work dir)");

  EvaluateRequest eval_req;
  auto* ev = app.add_subcommand("evaluate", "score a generations file and write a metric report");
  add_common(ev, common);
  key_flag<std::string>(ev, common, "--variant", "model.variant", "selects the default generations file");
  key_flag<int>(ev, common, "--decoys", "evaluation.decoys", "decoy users per ranking case");
  ev->add_option("-g,--generations", eval_req.generations, "generations file (default: work dir)");
  ev->add_option("--checkpoint", eval_req.checkpoint, "checkpoint file (default: work dir)");
  ev->add_option("-o,--output", eval_req.output, "report file (default: work dir)");

  std::string rank_ckpt;
  auto* rk = app.add_subcommand("rank", "user matching accuracy and MRR over the test interactions");
  add_common(rk, common);
  key_flag<std::string>(rk, common, "--variant", "model.variant", "variant of the checkpoint");
  key_flag<int>(rk, common, "--decoys", "evaluation.decoys", "decoy users per ranking case");
  rk->add_option("--checkpoint", rank_ckpt, "checkpoint file (default: work dir)");

  auto* cfg = app.add_subcommand("config", "print the resolved configuration");
  add_common(cfg, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const Settings s = resolve(common);
    if (pre->parsed()) cmd_preprocess(s, std::cout);
    else if (tok->parsed()) cmd_tokenize(s, std::cout);
    else if (tr->parsed()) cmd_train(s, std::cout);
    else if (gen->parsed()) {
      gen_req.nn_baseline = baseline == "nn";
      cmd_generate(s, gen_req, std::cout);
    } else if (ev->parsed()) cmd_evaluate(s, eval_req, std::cout);
    else if (rk->parsed()) cmd_rank(s, rank_ckpt, std::cout);
    else if (cfg->parsed()) {
      auto tree = default_config_tree();
      if (!common.config.empty()) overlay_config(tree, read_config_file(common.config));
      auto a = common.assignments;
      if (common.seed) a.push_back("run.seed=" + std::to_string(*common.seed));
      if (!common.work_dir.empty()) a.push_back("paths.work_dir=" + common.work_dir);
      apply_assignments(tree, a);
      std::cout << write_config(tree);
    }
    return 0;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const CorpusError& e) {
    std::cerr << "corpus error: " << e.what() << '\n';
    return 2;
  } catch (const TokenizerError& e) {
    std::cerr << "tokenizer error: " << e.what() << '\n';
    return 2;
  } catch (const CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << '\n';
    return 2;
  } catch (const ModelError& e) {
    std::cerr << "model config error: " << e.what() << '\n';
    return 2;
  } catch (const TrainingAborted& e) {
    std::cerr << "training aborted: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
}
