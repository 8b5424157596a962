#include "recipegen/evaluation.hpp"

#include "recipegen/training.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

namespace recipegen {

namespace {

using NGramCounts = std::map<Tokens, std::size_t>;

NGramCounts ngrams(const Tokens& t, int n) {
  NGramCounts out;
  for (std::size_t i = 0; i + std::size_t(n) <= t.size(); ++i) ++out[Tokens(t.begin() + long(i), t.begin() + long(i) + n)];
  return out;
}

}  // namespace

double bleu(const std::vector<Tokens>& candidates, const std::vector<Tokens>& references, int n) {
  if (n < 1) throw std::invalid_argument("BLEU order must be >= 1");
  if (candidates.size() != references.size()) throw std::invalid_argument("BLEU needs one reference per candidate");
  std::size_t c = 0, r = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    c += candidates[i].size();
    r += references[i].size();
  }
  if (c == 0) return 0.0;
  double log_sum = 0;
  for (int m = 1; m <= n; ++m) {
    std::size_t matches = 0, total = 0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      const auto cand = ngrams(candidates[i], m);
      const auto ref = ngrams(references[i], m);
      for (const auto& [g, count] : cand) {
        total += count;
        const auto it = ref.find(g);
        if (it != ref.end()) matches += std::min(count, it->second);
      }
    }
    const double num = matches == 0 ? kBleuEpsilon : double(matches);
    log_sum += std::log(num / double(std::max<std::size_t>(total, 1)));
  }
  const double bp = c > r ? 1.0 : std::exp(1.0 - double(r) / double(c));
  return 100.0 * bp * std::exp(log_sum / n);
}

double bleu(const Tokens& candidate, const Tokens& reference, int n) {
  return bleu(std::vector<Tokens>{candidate}, std::vector<Tokens>{reference}, n);
}

std::size_t longest_common_subsequence(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(const Tokens& candidate, const Tokens& reference) {
  if (candidate.empty() || reference.empty()) return 0.0;
  const double lcs = double(longest_common_subsequence(candidate, reference));
  if (lcs == 0) return 0.0;
  const double p = lcs / double(candidate.size());
  const double r = lcs / double(reference.size());
  const double b2 = kRougeBeta * kRougeBeta;
  return 100.0 * (1 + b2) * p * r / (r + b2 * p);
}

double rouge_l(const std::vector<Tokens>& candidates, const std::vector<Tokens>& references) {
  if (candidates.size() != references.size()) throw std::invalid_argument("ROUGE needs one reference per candidate");
  if (candidates.empty()) return 0.0;
  double sum = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) sum += rouge_l(candidates[i], references[i]);
  return sum / double(candidates.size());
}

std::size_t ngram_total(const std::vector<Tokens>& corpus, int n) {
  std::size_t total = 0;
  for (const auto& t : corpus)
    if (t.size() >= std::size_t(n)) total += t.size() - std::size_t(n) + 1;
  return total;
}

double distinct_n(const std::vector<Tokens>& corpus, int n) {
  if (n < 1) throw std::invalid_argument("distinct-n order must be >= 1");
  std::set<Tokens> distinct;
  for (const auto& t : corpus)
    for (const auto& [g, count] : ngrams(t, n)) distinct.insert(g);
  const auto total = ngram_total(corpus, n);
  return total == 0 ? 0.0 : 100.0 * double(distinct.size()) / double(total);
}

double uma(const std::vector<int>& ranks) {
  if (ranks.empty()) return 0.0;
  return double(std::count(ranks.begin(), ranks.end(), 1)) / double(ranks.size());
}

double mrr(const std::vector<int>& ranks) {
  if (ranks.empty()) return 0.0;
  double sum = 0;
  for (int r : ranks) {
    if (r < 1) throw std::invalid_argument("ranks are 1-based");
    sum += 1.0 / r;
  }
  return sum / double(ranks.size());
}

std::vector<std::string> split_steps(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  const auto flush = [&] {
    const auto words = split_whitespace(cur);
    std::string joined;
    for (const auto& w : words) joined += (joined.empty() ? "" : " ") + w;
    if (!joined.empty()) out.push_back(joined);
    cur.clear();
  };
  for (char c : text) {
    if (c == '.' || c == '!' || c == '?') flush();
    else cur += c;
  }
  flush();
  return out;
}

StepTokens tokenize_steps(const BpeModel& bpe, const std::vector<std::string>& steps) {
  StepTokens out;
  for (const auto& s : steps) out.push_back(bpe.encode(s));
  return out;
}

// ---------------------------------------------------------------------------
// Step encoder

namespace {

struct StepCache {
  std::vector<int> tokens;
  std::vector<GruStepCache<double>> gru;
};

struct RecipeCache {
  std::vector<StepCache> steps;
  std::vector<GruStepCache<double>> gru;
};

Eigen::VectorXd encode_step(const StepEncoder& e, const std::vector<int>& tokens, StepCache* cache) {
  std::vector<int> ids;
  for (int t : tokens) ids.push_back(t >= 0 && t < e.embedding.cols() ? t : BpeModel::kUnk);
  if (ids.empty()) ids.push_back(BpeModel::kUnk);
  Eigen::MatrixXd x(e.embedding.rows(), Index(ids.size()));
  for (std::size_t i = 0; i < ids.size(); ++i) x.col(Index(i)) = e.embedding.col(ids[i]);
  const Eigen::MatrixXd states = gru_sequence(e.gru, x, false, cache ? &cache->gru : nullptr);
  if (cache) cache->tokens = ids;
  return states.rowwise().mean();
}

void encode_step_backward(const StepEncoder& e, StepEncoder& g, const StepCache& c, const Eigen::VectorXd& d_out) {
  const Index len = Index(c.tokens.size());
  const Eigen::MatrixXd d_states = (d_out / double(len)).replicate(1, len);
  const Eigen::MatrixXd dx = gru_sequence_backward(e.gru, g.gru, c.gru, d_states, false);
  for (Index t = 0; t < len; ++t) g.embedding.col(c.tokens[std::size_t(t)]) += dx.col(t);
}

Eigen::VectorXd encode_recipe_impl(const CoherenceParameters& p, const StepTokens& steps, RecipeCache* cache) {
  if (steps.empty()) return Eigen::VectorXd::Zero(p.recipe.hidden());
  Eigen::MatrixXd s(p.step.gru.hidden(), Index(steps.size()));
  if (cache) cache->steps.assign(steps.size(), {});
  for (std::size_t i = 0; i < steps.size(); ++i)
    s.col(Index(i)) = encode_step(p.step, steps[i], cache ? &cache->steps[i] : nullptr);
  const Eigen::MatrixXd states = gru_sequence(p.recipe, s, false, cache ? &cache->gru : nullptr);
  return states.col(states.cols() - 1);
}

void encode_recipe_backward(const CoherenceParameters& p, CoherenceParameters& g, const RecipeCache& c,
                            const Eigen::VectorXd& d_final) {
  const Index n = Index(c.steps.size());
  if (n == 0) return;
  Eigen::MatrixXd d_states = Eigen::MatrixXd::Zero(p.recipe.hidden(), n);
  d_states.col(n - 1) = d_final;
  const Eigen::MatrixXd ds = gru_sequence_backward(p.recipe, g.recipe, c.gru, d_states, false);
  for (Index i = 0; i < n; ++i) encode_step_backward(p.step, g.step, c.steps[std::size_t(i)], ds.col(i));
}

StepTokens reversed(const StepTokens& steps) { return StepTokens(steps.rbegin(), steps.rend()); }

template <class Params>
void init_weights(Params& p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  p.visit([&](const std::string& name, auto& t) {
    if (name.find("bias") != std::string::npos) t.setZero();
    else fill_uniform(t, 0.08, rng);
  });
}

StepEncoder make_step_encoder(const ScorerConfig& c) {
  if (c.vocab_size < 4 || c.embedding_dim < 1 || c.hidden < 1)
    throw std::invalid_argument("scorer needs a vocabulary and positive dimensions");
  return {Eigen::MatrixXd::Zero(c.embedding_dim, c.vocab_size), GruCell<double>(c.embedding_dim, c.hidden)};
}

template <class Params>
Params zeros_like(const Params& p) {
  Params z = p;
  z.visit([](const std::string&, auto& t) { t.setZero(); });
  return z;
}

}  // namespace

CoherenceParameters init_coherence(const ScorerConfig& c) {
  CoherenceParameters p{make_step_encoder(c), GruCell<double>(c.hidden, c.hidden)};
  init_weights(p, c.seed);
  return p;
}

EntailmentParameters init_entailment(const ScorerConfig& c) {
  EntailmentParameters p;
  p.step = make_step_encoder(c);
  p.hidden_w = Eigen::MatrixXd::Zero(c.pair_hidden, 3 * c.hidden);
  p.hidden_b = Eigen::VectorXd::Zero(c.pair_hidden);
  p.out_w = Eigen::VectorXd::Zero(c.pair_hidden);
  p.out_b = Eigen::VectorXd::Zero(1);
  init_weights(p, c.seed);
  return p;
}

Eigen::VectorXd encode_recipe(const CoherenceParameters& p, const StepTokens& steps) {
  return encode_recipe_impl(p, steps, nullptr);
}

double coherence_score(const CoherenceParameters& p, const StepTokens& generated, const StepTokens& forward,
                       const StepTokens& backward) {
  const Eigen::VectorXd g = encode_recipe(p, generated);
  return cosine<double>(g, encode_recipe(p, forward)) - cosine<double>(g, encode_recipe(p, backward));
}

double coherence_score(const CoherenceParameters& p, const StepTokens& generated, const StepTokens& gold) {
  return coherence_score(p, generated, gold, reversed(gold));
}

double coherence_loss(const CoherenceParameters& p, const StepTokens& steps, const StepTokens& subsequence,
                      CoherenceParameters* grad) {
  RecipeCache cf, cr, cs;
  const Eigen::VectorXd f = encode_recipe_impl(p, steps, grad ? &cf : nullptr);
  const Eigen::VectorXd r = encode_recipe_impl(p, reversed(steps), grad ? &cr : nullptr);
  const Eigen::VectorXd s = encode_recipe_impl(p, subsequence, grad ? &cs : nullptr);
  const double loss = cosine<double>(f, r) - cosine<double>(s, f) + cosine<double>(s, r);
  if (grad) {
    const Eigen::VectorXd df = cosine_grad<double>(f, r) - cosine_grad<double>(f, s);
    const Eigen::VectorXd dr = cosine_grad<double>(r, f) + cosine_grad<double>(r, s);
    const Eigen::VectorXd ds = cosine_grad<double>(s, r) - cosine_grad<double>(s, f);
    encode_recipe_backward(p, *grad, cf, df);
    encode_recipe_backward(p, *grad, cr, dr);
    encode_recipe_backward(p, *grad, cs, ds);
  }
  return loss;
}

StepTokens random_subsequence(const StepTokens& steps, std::mt19937_64& rng) {
  if (steps.size() < 3) return steps;
  const auto keep = std::uniform_int_distribution<std::size_t>(2, steps.size() - 1)(rng);
  std::vector<std::size_t> idx(steps.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(keep);
  std::sort(idx.begin(), idx.end());
  StepTokens out;
  for (auto i : idx) out.push_back(steps[i]);
  return out;
}

CoherenceParameters train_coherence_scorer(const std::vector<StepTokens>& recipes, const ScorerConfig& config) {
  auto p = init_coherence(config);
  std::vector<const StepTokens*> usable;
  for (const auto& r : recipes)
    if (r.size() >= 2) usable.push_back(&r);
  Adam<CoherenceParameters> adam(p);
  auto grad = zeros_like(p);
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ull);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(usable.begin(), usable.end(), rng);
    for (const auto* r : usable) {
      grad.visit([](const std::string&, auto& t) { t.setZero(); });
      coherence_loss(p, *r, random_subsequence(*r, rng), &grad);
      clip_gradient(grad, 5.0);
      adam.step(p, grad, config.learning_rate);
    }
  }
  return p;
}

std::vector<StepPair> make_entailment_pairs(const std::vector<StepTokens>& recipes, std::mt19937_64& rng,
                                            double negative_ratio) {
  std::vector<StepPair> out;
  for (const auto& r : recipes) {
    if (r.size() < 3) continue;
    std::vector<std::pair<std::size_t, std::size_t>> negatives;
    for (std::size_t i = 0; i < r.size(); ++i)
      for (std::size_t j = i + 2; j < r.size(); ++j) negatives.emplace_back(i, j);
    for (std::size_t i = 0; i + 1 < r.size(); ++i) out.push_back({r[i], r[i + 1], true});
    const auto wanted = std::size_t(std::lround(negative_ratio * double(r.size() - 1)));
    std::shuffle(negatives.begin(), negatives.end(), rng);
    for (std::size_t k = 0; k < wanted; ++k) {
      const auto [i, j] = negatives[k % negatives.size()];
      out.push_back({r[i], r[j], false});
    }
  }
  return out;
}

namespace {

struct PairForward {
  StepCache ca, cb;
  Eigen::VectorXd x, z;
  double p = 0;
};

void pair_forward(const EntailmentParameters& p, const std::vector<int>& first, const std::vector<int>& second,
                  PairForward& f, bool cache) {
  const Eigen::VectorXd a = encode_step(p.step, first, cache ? &f.ca : nullptr);
  const Eigen::VectorXd b = encode_step(p.step, second, cache ? &f.cb : nullptr);
  f.x.resize(3 * a.size());
  f.x << a, b, a - b;
  f.z = (p.hidden_w * f.x + p.hidden_b).array().tanh().matrix();
  const double logit = p.out_w.dot(f.z) + p.out_b(0);
  f.p = 1.0 / (1.0 + std::exp(-logit));
}

}  // namespace

double entailment_probability(const EntailmentParameters& p, const std::vector<int>& first,
                              const std::vector<int>& second) {
  PairForward f;
  pair_forward(p, first, second, f, false);
  return f.p;
}

double entailment_loss(const EntailmentParameters& p, const StepPair& pair, EntailmentParameters* grad) {
  PairForward f;
  pair_forward(p, pair.first, pair.second, f, grad != nullptr);
  const double y = pair.follows ? 1.0 : 0.0;
  const double eps = 1e-12;
  const double loss = -(y * std::log(std::max(f.p, eps)) + (1 - y) * std::log(std::max(1 - f.p, eps)));
  if (grad) {
    const double d_logit = f.p - y;
    grad->out_w += d_logit * f.z;
    grad->out_b(0) += d_logit;
    const Eigen::VectorXd d_pre = (d_logit * p.out_w).cwiseProduct((1.0 - f.z.array().square()).matrix());
    grad->hidden_w.noalias() += d_pre * f.x.transpose();
    grad->hidden_b += d_pre;
    const Eigen::VectorXd dx = p.hidden_w.transpose() * d_pre;
    const Index h = dx.size() / 3;
    encode_step_backward(p.step, grad->step, f.ca, dx.head(h) + dx.tail(h));
    encode_step_backward(p.step, grad->step, f.cb, dx.segment(h, h) - dx.tail(h));
  }
  return loss;
}

EntailmentParameters train_entailment(const std::vector<StepTokens>& recipes, const ScorerConfig& config) {
  auto p = init_entailment(config);
  Adam<EntailmentParameters> adam(p);
  auto grad = zeros_like(p);
  std::mt19937_64 rng(config.seed ^ 0x5bd1e995ull);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    auto pairs = make_entailment_pairs(recipes, rng, config.negative_ratio);
    std::shuffle(pairs.begin(), pairs.end(), rng);
    for (const auto& pair : pairs) {
      grad.visit([](const std::string&, auto& t) { t.setZero(); });
      entailment_loss(p, pair, &grad);
      clip_gradient(grad, 5.0);
      adam.step(p, grad, config.learning_rate);
    }
  }
  return p;
}

double entailment_accuracy(const EntailmentParameters& p, const std::vector<StepPair>& pairs) {
  if (pairs.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& pair : pairs) correct += (entailment_probability(p, pair.first, pair.second) >= 0.5) == pair.follows;
  return double(correct) / double(pairs.size());
}

std::optional<double> entailment_score(const EntailmentParameters& p, const StepTokens& generated) {
  if (generated.size() < 2) return std::nullopt;
  double sum = 0;
  for (std::size_t i = 0; i + 1 < generated.size(); ++i) sum += entailment_probability(p, generated[i], generated[i + 1]);
  return sum / double(generated.size() - 1);
}

// ---------------------------------------------------------------------------
// Reports

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names = {"perplexity", "bleu1", "bleu4",     "rouge_l",   "distinct1",
                                                 "distinct2",  "uma",   "mrr",       "coherence", "entailment"};
  return names;
}

std::string report_json(const MetricReport& r) {
  nlohmann::ordered_json j;
  j["model"] = r.model;
  j["seed"] = r.seed;
  nlohmann::ordered_json m = nlohmann::ordered_json::object();
  for (const auto& name : metric_names()) {
    const auto it = r.metrics.find(name);
    if (it != r.metrics.end()) m[name] = it->second;
  }
  j["metrics"] = m;
  j["warnings"] = r.warnings;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& s : r.per_recipe) {
    nlohmann::ordered_json row;
    row["user_id"] = s.user_id;
    row["recipe_id"] = s.recipe_id;
    row["bleu1"] = s.bleu1;
    row["bleu4"] = s.bleu4;
    row["rouge_l"] = s.rouge_l;
    row["coherence"] = s.coherence ? nlohmann::ordered_json(*s.coherence) : nlohmann::ordered_json();
    row["entailment"] = s.entailment ? nlohmann::ordered_json(*s.entailment) : nlohmann::ordered_json();
    row["rank"] = s.rank ? nlohmann::ordered_json(*s.rank) : nlohmann::ordered_json();
    rows.push_back(row);
  }
  j["per_recipe"] = rows;
  return j.dump(2) + "\n";
}

std::string report_table(const std::vector<MetricReport>& reports) {
  static const std::map<std::string, std::string> headers = {
      {"perplexity", "PPL"}, {"bleu1", "BLEU-1"}, {"bleu4", "BLEU-4"}, {"rouge_l", "ROUGE-L"},
      {"distinct1", "D-1"},  {"distinct2", "D-2"}, {"uma", "UMA"},       {"mrr", "MRR"},
      {"coherence", "Coh"},  {"entailment", "Ent"}};
  std::ostringstream out;
  out << std::left << std::setw(14) << "model";
  for (const auto& n : metric_names()) out << std::right << std::setw(9) << headers.at(n);
  out << '\n';
  for (const auto& r : reports) {
    out << std::left << std::setw(14) << r.model;
    for (const auto& n : metric_names()) {
      const auto it = r.metrics.find(n);
      out << std::right << std::setw(9);
      if (it == r.metrics.end()) out << "--";
      else out << std::fixed << std::setprecision(3) << it->second;
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace recipegen
