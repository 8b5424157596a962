#include "gradient_check.hpp"
#include "oracles.hpp"
#include "recipegen/evaluation.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cmath>
#include <random>

using namespace recipegen;
using namespace recipegen::testing;

namespace {

Tokens words(const std::string& s) { return split_whitespace(s); }

ScorerConfig tiny_scorer() {
  ScorerConfig c;
  c.vocab_size = 12;
  c.embedding_dim = 3;
  c.hidden = 4;
  c.pair_hidden = 3;
  c.seed = 5;
  return c;
}

// Larger weights than the default init so that every gradient entry sits well
// above finite-difference round-off.
template <class Params>
void spread_weights(Params& p) {
  std::mt19937_64 rng(99);
  p.visit([&](const std::string&, auto& t) { fill_uniform(t, 0.6, rng); });
}

template <class Params>
void check_all(const std::vector<testing::TensorCheck>& checks) {
  for (const auto& c : checks) {
    INFO(c.name);
    CHECK(c.max_rel_error < 1e-4);
  }
}

}  // namespace

TEST_CASE("bleu of a candidate against itself is 100") {
  const Tokens t = words("heat the oil in a large pan");
  CHECK(bleu(t, t, 1) == doctest::Approx(100));
  CHECK(bleu(t, t, 4) == doctest::Approx(100));
}

TEST_CASE("bleu hand computed values") {
  CHECK(bleu(words("a b c d"), words("a b c e"), 1) == doctest::Approx(75));
  // Short candidate: every unigram matches, brevity penalty exp(1 - 4/2).
  CHECK(bleu(words("a b"), words("a b c d"), 1) == doctest::Approx(100 * std::exp(-1.0)));
  // No 4-gram match: epsilon floor gives a tiny but positive score.
  const double b4 = bleu(words("a b c d"), words("a b c e"), 4);
  CHECK(b4 > 0);
  CHECK(b4 < 1);
  CHECK(bleu(Tokens{}, words("a b"), 4) == 0);
  // Clipping: "the" appears twice in the reference.
  CHECK(bleu(words("the the the the"), words("the cat the mat"), 1) == doctest::Approx(50));
}

TEST_CASE("bleu matches a brute-force oracle on random corpora") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Tokens> cands, refs;
    const int docs = std::uniform_int_distribution<int>(1, 4)(rng);
    for (int d = 0; d < docs; ++d) {
      cands.push_back(random_tokens(rng, 9, 3));
      refs.push_back(random_tokens(rng, 9, 3));
    }
    for (int n : {1, 4}) {
      INFO("trial " << trial << " n " << n);
      CHECK(bleu(cands, refs, n) == doctest::Approx(naive_bleu(cands, refs, n)).epsilon(1e-12));
    }
  }
}

TEST_CASE("bleu rejects mismatched corpora") {
  CHECK_THROWS_AS(bleu(std::vector<Tokens>{{"a"}}, std::vector<Tokens>{}, 1), std::invalid_argument);
  CHECK_THROWS_AS(bleu(words("a"), words("a"), 0), std::invalid_argument);
}

TEST_CASE("rouge-l hand computed value") {
  // LCS 3, P = 1, R = 3/4.
  const double b2 = 1.44, p = 1.0, r = 0.75;
  CHECK(rouge_l(words("a c d"), words("a b c d")) == doctest::Approx(100 * (1 + b2) * p * r / (r + b2 * p)));
  CHECK(rouge_l(words("a b"), words("a b")) == doctest::Approx(100));
  CHECK(rouge_l(words("x y"), words("a b")) == 0);
  CHECK(rouge_l(Tokens{}, words("a b")) == 0);
}

TEST_CASE("lcs matches subsequence enumeration") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const auto a = random_tokens(rng, 10, 3), b = random_tokens(rng, 10, 3);
    CHECK(longest_common_subsequence(a, b) == naive_lcs(a, b));
    CHECK(longest_common_subsequence(a, b) == longest_common_subsequence(b, a));
  }
}

TEST_CASE("rouge-l corpus score is the pair mean") {
  const std::vector<Tokens> c = {words("a b"), words("a c d")};
  const std::vector<Tokens> r = {words("a b"), words("a b c d")};
  CHECK(rouge_l(c, r) == doctest::Approx((rouge_l(c[0], r[0]) + rouge_l(c[1], r[1])) / 2));
}

TEST_CASE("distinct-n examples") {
  CHECK(distinct_n({words("a a a a")}, 1) == doctest::Approx(25));
  CHECK(distinct_n({words("a a a a")}, 2) == doctest::Approx(100.0 / 3));
  CHECK(distinct_n({words("a b c")}, 1) == doctest::Approx(100));
  CHECK(distinct_n({words("a")}, 2) == 0);
  CHECK(ngram_total({words("a b c"), words("d")}, 2) == 2);
}

TEST_CASE("duplicating a corpus halves distinct-n") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Tokens> corpus;
    for (int d = 0; d < 3; ++d) corpus.push_back(random_tokens(rng, 8, 4));
    auto doubled = corpus;
    doubled.insert(doubled.end(), corpus.begin(), corpus.end());
    for (int n : {1, 2}) {
      if (ngram_total(corpus, n) == 0) continue;
      CHECK(distinct_n(doubled, n) == doctest::Approx(distinct_n(corpus, n) / 2));
    }
  }
}

TEST_CASE("uma and mrr examples") {
  CHECK(uma({1, 2, 1, 10}) == doctest::Approx(0.5));
  CHECK(mrr({1, 2, 4}) == doctest::Approx(0.5833333333));
  CHECK(uma({}) == 0);
  CHECK_THROWS_AS(mrr({0}), std::invalid_argument);
}

TEST_CASE("uma never exceeds mrr") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<int> ranks(std::uniform_int_distribution<std::size_t>(1, 20)(rng));
    for (auto& r : ranks) r = std::uniform_int_distribution<int>(1, 10)(rng);
    CHECK(uma(ranks) <= mrr(ranks) + 1e-15);
  }
}

TEST_CASE("split_steps cuts at sentence punctuation") {
  const auto s = split_steps("heat the oil .  add onions!stir well? serve  ");
  REQUIRE(s.size() == 4);
  CHECK(s[0] == "heat the oil");
  CHECK(s[1] == "add onions");
  CHECK(s[2] == "stir well");
  CHECK(s[3] == "serve");
  CHECK(split_steps(" . . ").empty());
}

TEST_CASE("coherence loss gradient matches finite differences") {
  auto p = init_coherence(tiny_scorer());
  spread_weights(p);
  const StepTokens steps = {{4, 5, 6}, {7}, {8, 9}, {10, 11, 4}};
  const StepTokens sub = {steps[0], steps[2]};
  auto grad = p;
  grad.visit([](const std::string&, auto& t) { t.setZero(); });
  coherence_loss(p, steps, sub, &grad);
  const auto checks = testing::check_gradients(p, grad, [&] { return coherence_loss(p, steps, sub); }, 1e-5);
  check_all<CoherenceParameters>(checks);
}

TEST_CASE("entailment loss gradient matches finite differences") {
  auto p = init_entailment(tiny_scorer());
  spread_weights(p);
  for (bool follows : {true, false}) {
    const StepPair pair{{4, 5, 6}, {7, 9}, follows};
    auto grad = p;
    grad.visit([](const std::string&, auto& t) { t.setZero(); });
    entailment_loss(p, pair, &grad);
    const auto checks = testing::check_gradients(p, grad, [&] { return entailment_loss(p, pair); }, 1e-5);
    check_all<EntailmentParameters>(checks);
  }
}

TEST_CASE("coherence score is antisymmetric in its references") {
  const auto p = init_coherence(tiny_scorer());
  const StepTokens g = {{4, 5}, {6}}, f = {{7, 8}, {9}, {10}}, b = {{10}, {9}, {7, 8}};
  CHECK(coherence_score(p, g, f, b) == doctest::Approx(-coherence_score(p, g, b, f)));
  CHECK(coherence_score(p, g, f, f) == doctest::Approx(0));
  // Gold against itself: 1 - cos(f, reversed f).
  const StepTokens rev(f.rbegin(), f.rend());
  CHECK(coherence_score(p, f, f) ==
        doctest::Approx(1 - cosine<double>(encode_recipe(p, f), encode_recipe(p, rev))));
}

TEST_CASE("entailment score averages adjacent pairs") {
  auto p = init_entailment(tiny_scorer());
  p.out_w.setZero();
  p.out_b(0) = std::log(0.7 / 0.3);
  CHECK(*entailment_score(p, {{4}, {5, 6}, {7}, {8}}) == doctest::Approx(0.7));
  CHECK_FALSE(entailment_score(p, {{4}}).has_value());
  CHECK_FALSE(entailment_score(p, {}).has_value());
}

TEST_CASE("entailment pairs are balanced adjacent and non-adjacent forward pairs") {
  // One-token steps whose token is their position recover the indices.
  std::vector<StepTokens> recipes;
  for (int n : {2, 3, 5, 7}) {
    StepTokens r;
    for (int i = 0; i < n; ++i) r.push_back({i});
    recipes.push_back(r);
  }
  std::mt19937_64 rng(1);
  const auto pairs = make_entailment_pairs(recipes, rng);
  std::size_t pos = 0, neg = 0;
  for (const auto& pr : pairs) {
    const int i = pr.first[0], j = pr.second[0];
    if (pr.follows) {
      ++pos;
      CHECK(j == i + 1);
    } else {
      ++neg;
      CHECK(j >= i + 2);
    }
  }
  CHECK(pos == 2 + 4 + 6);  // the two-step recipe is skipped
  CHECK(neg == pos);
}

TEST_CASE("random subsequences preserve order and are proper") {
  StepTokens steps;
  for (int i = 0; i < 6; ++i) steps.push_back({i});
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const auto s = random_subsequence(steps, rng);
    CHECK(s.size() >= 2);
    CHECK(s.size() < steps.size());
    for (std::size_t k = 1; k < s.size(); ++k) CHECK(s[k - 1][0] < s[k][0]);
  }
  const StepTokens two = {{1}, {2}};
  CHECK(random_subsequence(two, rng) == two);
}

TEST_CASE("entailment classifier learns step order on a toy corpus") {
  // Step i of every recipe uses token 4 + i, so order is fully learnable.
  std::vector<StepTokens> recipes;
  std::mt19937_64 rng(2);
  for (int r = 0; r < 20; ++r) {
    StepTokens s;
    for (int i = 0; i < 5; ++i) s.push_back({4 + i, 4 + std::uniform_int_distribution<int>(0, 6)(rng)});
    recipes.push_back(s);
  }
  auto cfg = tiny_scorer();
  cfg.embedding_dim = 8;
  cfg.hidden = 8;
  cfg.pair_hidden = 8;
  cfg.epochs = 30;
  const auto p = train_entailment(recipes, cfg);
  std::mt19937_64 eval_rng(4);
  CHECK(entailment_accuracy(p, make_entailment_pairs(recipes, eval_rng)) > 0.9);
}

TEST_CASE("report json keeps metric order and omits absent metrics") {
  MetricReport r;
  r.model = "nn";
  r.seed = 3;
  r.metrics = {{"rouge_l", 12.5}, {"bleu1", 30.0}};
  r.warnings = {"coherence skipped"};
  r.per_recipe.push_back({"u1", "r1", 30.0, 1.0, 12.5, std::nullopt, 0.5, 2});
  const auto j = nlohmann::ordered_json::parse(report_json(r));
  CHECK(j["model"] == "nn");
  std::vector<std::string> keys;
  for (const auto& [k, v] : j["metrics"].items()) keys.push_back(k);
  CHECK(keys == std::vector<std::string>{"bleu1", "rouge_l"});
  CHECK(j["per_recipe"][0]["coherence"].is_null());
  CHECK(j["per_recipe"][0]["rank"] == 2);
  const auto table = report_table({r});
  CHECK(table.find("BLEU-1") != std::string::npos);
  CHECK(table.find("30.000") != std::string::npos);
  CHECK(table.find("--") != std::string::npos);
}
