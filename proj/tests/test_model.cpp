#include "gradient_check.hpp"
#include "recipegen/model.hpp"

#include <doctest.h>

#include <random>

using namespace recipegen;

namespace {

ModelConfig tiny_config(Variant variant) {
  ModelConfig c;
  c.hidden = 8;
  c.vocab_dim = 12;
  c.ingredient_dim = 4;
  c.recipe_dim = 5;
  c.technique_dim = 5;
  c.calorie_dim = 3;
  c.variant = variant;
  c.vocab_size = 50;
  c.ingredient_count = 10;
  c.recipe_count = 7;
  c.technique_count = 6;
  return c;
}

UserHistory sample_history() {
  UserHistory h;
  h.recipes = {3, 1, 6};
  h.recipe_names = {{5, 9}, {12}, {7, 8, 30}};
  h.techniques = {0, 2, 5};
  h.technique_weights = {0.5, 0.3, 0.2};
  return h;
}

EncodedInput sample_input() { return {{5, 17, 22}, {2, 7}, CalorieLevel::Medium}; }

const std::vector<int> kTarget = {1, 14, 9, 33, 2};

}  // namespace

TEST_CASE("parameter shapes follow the configuration") {
  ModelConfig c;  // built-in defaults
  c.vocab_size = 100;
  c.ingredient_count = 20;
  c.recipe_count = 30;
  c.technique_count = 5;
  CHECK(c.hidden == 256);
  CHECK(c.vocab_dim == 300);
  CHECK(c.ingredient_dim == 10);
  CHECK(c.recipe_dim == 50);
  CHECK(c.technique_dim == 50);
  CHECK(c.calorie_dim == 5);
  CHECK(c.history == 20);
  c.variant = Variant::PriorName;
  const auto p = ModelParameters<float>::zeros(c);
  CHECK(p.name_encoder.size() == 2);
  CHECK(p.decoder.size() == 2);
  CHECK(p.user_attention.key_proj.rows() == 256);
  CHECK(p.user_attention.key_proj.cols() == 300);
  CHECK(p.fusion_w.cols() == 300 + 3 * 256);
  CHECK(p.recipe_embedding.size() == 0);
  c.variant = Variant::EncDec;
  CHECK(ModelParameters<float>::zeros(c).user_attention.empty());
}

TEST_CASE("encoders produce one 2h column per position") {
  ModelConfig c = tiny_config(Variant::EncDec);
  c.hidden = 256;
  c.vocab_dim = 300;
  auto m = RecipeModel<double>::initialize(c, 1);
  const std::vector<int> name = {4, 5, 6, 7};
  CHECK(encode_name(m.params, name).rows() == 512);
  CHECK(encode_name(m.params, name).cols() == 4);
  const std::vector<int> one = {9};
  CHECK(encode_name(m.params, one).cols() == 1);
  const std::vector<int> ingredients = {1, 2, 3};
  CHECK(encode_ingredients(m.params, ingredients).cols() == 3);
  CHECK_THROWS_AS(encode_name(m.params, std::span<const int>()), ModelError);
}

TEST_CASE("zeroed parameters give zero encoder and decoder states") {
  const auto c = tiny_config(Variant::EncDec);
  const auto p = ModelParameters<double>::zeros(c);
  const std::vector<int> name = {4, 5, 6};
  CHECK(encode_name(p, name).isZero(0));
  const std::vector<int> ingredients = {1, 2};
  CHECK(encode_ingredients(p, ingredients).isZero(0));
  CHECK(encode_calorie(p, CalorieLevel::High).isZero(0));
  std::vector<VectorX<double>> h(2, VectorX<double>::Zero(8));
  const VectorX<double> ctx = VectorX<double>::Zero(8);
  const auto out = decoder_step(p, 7, ctx, h);
  CHECK(out.output.isZero(0));
}

TEST_CASE("single GRU step matches a hand computation") {
  // One-unit cell with hand-set weights: all gate pre-activations are scalars.
  GruCell<double> cell(1, 1);
  cell.w_input << 0.5, -0.25, 1.0;
  cell.w_hidden << 0.1, 0.2, 0.3;
  cell.b_input << 0.0, 0.1, -0.2;
  VectorX<double> x(1), h(1);
  x << 2.0;
  h << 0.4;
  const double r = 1 / (1 + std::exp(-(0.5 * 2 + 0.1 * 0.4)));
  const double z = 1 / (1 + std::exp(-(-0.25 * 2 + 0.1 + 0.2 * 0.4)));
  const double n = std::tanh(1.0 * 2 - 0.2 + r * (0.3 * 0.4));
  const double expected = (1 - z) * n + z * 0.4;
  CHECK(gru_step(cell, x, h)(0) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("calorie levels map to distinct states") {
  auto m = RecipeModel<double>::initialize(tiny_config(Variant::EncDec), 7);
  const auto lo = encode_calorie(m.params, CalorieLevel::Low);
  const auto me = encode_calorie(m.params, CalorieLevel::Medium);
  const auto hi = encode_calorie(m.params, CalorieLevel::High);
  CHECK(lo.size() == 16);
  CHECK((lo - me).norm() > 1e-6);
  CHECK((lo - hi).norm() > 1e-6);
  CHECK((me - hi).norm() > 1e-6);
  m.params.calorie_proj.setZero();
  CHECK(encode_calorie(m.params, CalorieLevel::High).isZero(0));
}

TEST_CASE("attention weights") {
  AttentionHead<double> head(3, 3);
  MatrixX<double> keys = MatrixX<double>::Random(3, 4);
  VectorX<double> q = VectorX<double>::Random(3);

  SUBCASE("zero head gives uniform weights") {
    const auto w = attention_weights(head, keys, q);
    for (int i = 0; i < 4; ++i) CHECK(w(i) == doctest::Approx(0.25));
  }
  SUBCASE("hand-set scores 0 and 1") {
    // w = (1,0,0), b = 0, query 0: scores are tanh of each key's first entry.
    head.score_w << 1, 0, 0;
    MatrixX<double> k(3, 2);
    k << 0, 1e3, 0, 0, 0, 0;  // tanh(1e3) rounds to exactly 1 in double
    const VectorX<double> zero = VectorX<double>::Zero(3);
    const auto w = attention_weights(head, k, zero);
    const double e = std::exp(1.0);
    CHECK(w(0) == doctest::Approx(1 / (1 + e)).epsilon(1e-12));
    CHECK(w(1) == doctest::Approx(e / (1 + e)).epsilon(1e-12));
  }
}

TEST_CASE("ingredient context is a convex combination of projected keys") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    auto m = RecipeModel<double>::initialize(tiny_config(Variant::EncDec), rng());
    m.params.ingredient_attention.score_w *= 20;  // sharpen
    const std::vector<int> ingredients = {1, 4, 6};
    const auto states = encode_ingredients(m.params, ingredients);
    const VectorX<double> q = VectorX<double>::Random(8);
    const auto ctx = ingredient_context(m.params, states, q);
    const MatrixX<double> keys = m.params.ingredient_attention.key_proj * states;
    // Brute-force loop oracle.
    std::vector<double> scores;
    double z = 0;
    for (Index j = 0; j < keys.cols(); ++j) {
      double s = m.params.ingredient_attention.score_b(0);
      for (Index i = 0; i < 8; ++i) s += m.params.ingredient_attention.score_w(i) * (keys(i, j) + q(i));
      scores.push_back(std::exp(std::tanh(s)));
      z += scores.back();
    }
    for (Index i = 0; i < 8; ++i) {
      double expected = 0;
      for (Index j = 0; j < keys.cols(); ++j) expected += scores[j] / z * keys(i, j);
      CHECK(ctx(i) == doctest::Approx(expected).epsilon(1e-9));
      CHECK(ctx(i) <= keys.row(i).maxCoeff() + 1e-12);
      CHECK(ctx(i) >= keys.row(i).minCoeff() - 1e-12);
    }
  }
  auto m = RecipeModel<double>::initialize(tiny_config(Variant::EncDec), 5);
  const std::vector<int> single = {3};
  const auto states = encode_ingredients(m.params, single);
  const VectorX<double> expected = m.params.ingredient_attention.key_proj * states.col(0);
  const VectorX<double> q = VectorX<double>::Random(8);
  CHECK((ingredient_context(m.params, states, q) - expected).norm() < 1e-14);
}

TEST_CASE("decoder initialization is the affine map of the final states") {
  auto m = RecipeModel<double>::initialize(tiny_config(Variant::EncDec), 11);
  m.params.init_b.setRandom();
  const auto enc = encode(m, sample_input());
  const auto h0 = init_decoder(m.params, enc.name_states, enc.ingredient_states, enc.calorie_state);
  CHECK(h0.size() == 8);
  CHECK(enc.h0.size() == 2);
  CHECK(enc.h0[0] == enc.h0[1]);
  VectorX<double> in(48);
  in << enc.name_states.col(enc.name_states.cols() - 1), enc.ingredient_states.col(1), enc.calorie_state;
  for (Index i = 0; i < 8; ++i) {
    double expected = m.params.init_b(i);
    for (Index j = 0; j < 48; ++j) expected += m.params.init_w(i, j) * in(j);
    CHECK(h0(i) == doctest::Approx(expected).epsilon(1e-12));
  }
  m.params.init_w.setZero();
  CHECK(init_decoder(m.params, enc.name_states, enc.ingredient_states, enc.calorie_state) == m.params.init_b);
}

TEST_CASE("user contexts") {
  auto m = RecipeModel<double>::initialize(tiny_config(Variant::PriorTech), 2);
  const VectorX<double> q = VectorX<double>::Random(8);

  SUBCASE("empty history gives a zero context") {
    CHECK(prior_technique_context(m.params, UserHistory{}, q).isZero(0));
  }
  SUBCASE("single technique with full preference doubles the projected key") {
    UserHistory h;
    h.techniques = {4};
    h.technique_weights = {1.0};
    const VectorX<double> key = m.params.user_attention.key_proj * m.params.technique_embedding.col(4);
    CHECK((prior_technique_context(m.params, h, q) - 2 * key).norm() < 1e-14);
  }
  SUBCASE("uniform attention plus preference weights") {
    m.params.user_attention.score_w.setZero();
    const auto h = sample_history();
    MatrixX<double> keys = m.params.user_attention.key_proj *
                           history_keys(m.params, h, Variant::PriorTech);
    const VectorX<double> expected = keys.col(0) * (1.0 / 3 + 0.5) + keys.col(1) * (1.0 / 3 + 0.3) +
                                     keys.col(2) * (1.0 / 3 + 0.2);
    CHECK((prior_technique_context(m.params, h, q) - expected).norm() < 1e-14);
    CHECK(1.0 / 3 + 0.5 == doctest::Approx(0.8333).epsilon(1e-4));
  }
  SUBCASE("prior recipe contexts") {
    auto mr = RecipeModel<double>::initialize(tiny_config(Variant::PriorRecipe), 4);
    CHECK(prior_recipe_context(mr.params, UserHistory{}, q, RecipeRepresentation::RecipeTable).isZero(0));
    UserHistory one;
    one.recipes = {2};
    const VectorX<double> key = mr.params.user_attention.key_proj * mr.params.recipe_embedding.col(2);
    CHECK((prior_recipe_context(mr.params, one, q, RecipeRepresentation::RecipeTable) - key).norm() < 1e-14);

    const auto h = sample_history();
    const auto ctx = prior_recipe_context(mr.params, h, q, RecipeRepresentation::RecipeTable);
    const auto& head = mr.params.user_attention;
    VectorX<double> expected = VectorX<double>::Zero(8);
    std::vector<VectorX<double>> projected;
    double z = 0;
    std::vector<double> s;
    for (int r : h.recipes) {
      projected.push_back(head.key_proj * mr.params.recipe_embedding.col(r));
      s.push_back(std::exp(std::tanh(head.score_w.dot(projected.back() + q) + head.score_b(0))));
      z += s.back();
    }
    for (std::size_t j = 0; j < projected.size(); ++j) expected += s[j] / z * projected[j];
    CHECK((ctx - expected).norm() < 1e-12);
  }
  SUBCASE("prior name keys are unweighted name-token means") {
    auto mn = RecipeModel<double>::initialize(tiny_config(Variant::PriorName), 4);
    const auto h = sample_history();
    const auto keys = history_keys(mn.params, h, Variant::PriorName);
    const auto& v = mn.params.vocab_embedding;
    CHECK((keys.col(2) - (v.col(7) + v.col(8) + v.col(30)) / 3).norm() < 1e-14);
  }
}

TEST_CASE("fusion and vocabulary projection") {
  auto m = RecipeModel<double>::initialize(tiny_config(Variant::EncDec), 9);
  const VectorX<double> o = VectorX<double>::Random(8), ai = VectorX<double>::Random(8),
                        au = VectorX<double>::Zero(8);
  const auto fused = fuse(m.params, 6, o, ai, au);
  CHECK(fused.size() == 8);
  CHECK(fused.minCoeff() >= 0);
  VectorX<double> in(12 + 24);
  in << m.params.vocab_embedding.col(6), o, ai, au;
  const VectorX<double> expected = (m.params.fusion_w * in + m.params.fusion_b).cwiseMax(0.0);
  CHECK((fused - expected).norm() < 1e-14);

  m.params.fusion_w.setZero();
  m.params.fusion_b.setConstant(-1);
  CHECK(fuse(m.params, 6, o, ai, au).isZero(0));

  const auto probs = project_vocab(m.params, VectorX<double>::Random(8).eval());
  CHECK(probs.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(probs.minCoeff() > 0);
  auto zero = ModelParameters<double>::zeros(tiny_config(Variant::EncDec));
  const auto uniform = project_vocab(zero, VectorX<double>::Random(8).eval());
  for (Index i = 0; i < uniform.size(); ++i) CHECK(uniform(i) == doctest::Approx(1.0 / 50));

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> shift(-50, 50);
  for (int trial = 0; trial < 100; ++trial) {
    const VectorX<double> a = VectorX<double>::Random(8);
    Index before, after;
    project_vocab(m.params, a).maxCoeff(&before);
    auto shifted = m.params;
    shifted.output_b.array() += shift(rng);
    project_vocab(shifted, a).maxCoeff(&after);
    CHECK(before == after);
  }
}

TEST_CASE("sequence log-likelihood") {
  SUBCASE("zero parameters give -log|V| per token") {
    RecipeModel<double> m{tiny_config(Variant::EncDec), ModelParameters<double>::zeros(tiny_config(Variant::EncDec))};
    const auto s = sequence_log_likelihood(m, sample_input(), UserHistory{}, kTarget);
    REQUIRE(s.per_token.size() == 4);
    for (double lp : s.per_token) CHECK(lp == doctest::Approx(-std::log(50.0)).epsilon(1e-14));
  }
  SUBCASE("composition of the step operations") {
    auto m = RecipeModel<double>::initialize(tiny_config(Variant::PriorRecipe), 21);
    const auto input = sample_input();
    const auto history = sample_history();
    const auto enc = encode(m, input);
    std::vector<VectorX<double>> h = enc.h0;
    double total = 0;
    for (std::size_t t = 0; t + 1 < kTarget.size(); ++t) {
      const auto ai = ingredient_context(m.params, enc.ingredient_states, h.back());
      auto step = decoder_step(m.params, kTarget[t], ai, h);
      h = step.h;
      const auto au = prior_recipe_context(m.params, history, step.output, RecipeRepresentation::RecipeTable);
      const auto probs = project_vocab(m.params, fuse(m.params, kTarget[t], step.output, ai, au));
      total += std::log(probs(kTarget[t + 1]));
    }
    const auto s = sequence_log_likelihood(m, input, history, kTarget);
    CHECK(s.total == doctest::Approx(total).epsilon(1e-10));
  }
  SUBCASE("order sensitivity") {
    auto m = RecipeModel<double>::initialize(tiny_config(Variant::EncDec), 22);
    m.params.output_w *= 10;
    const std::vector<int> shuffled = {1, 33, 14, 9, 2};
    CHECK(sequence_log_likelihood(m, sample_input(), {}, kTarget).total !=
          sequence_log_likelihood(m, sample_input(), {}, shuffled).total);
  }
  SUBCASE("over-long targets are rejected") {
    auto c = tiny_config(Variant::EncDec);
    c.max_length = 3;
    auto m = RecipeModel<double>::initialize(c, 1);
    CHECK_THROWS_AS(sequence_log_likelihood(m, sample_input(), {}, kTarget), ModelError);
  }
}

TEST_CASE("gradient path reproduces the forward log-likelihood") {
  for (auto v : {Variant::EncDec, Variant::PriorTech, Variant::PriorRecipe, Variant::PriorName}) {
    auto m = RecipeModel<double>::initialize(tiny_config(v), 31);
    auto grad = ModelParameters<double>::zeros(m.config);
    const auto a = accumulate_gradient(m, sample_input(), sample_history(), kTarget, grad, 1.0);
    const auto b = sequence_log_likelihood(m, sample_input(), sample_history(), kTarget);
    CHECK(a.total == doctest::Approx(b.total).epsilon(1e-13));
  }
}

TEST_CASE("analytic gradients match central finite differences") {
  for (auto v : {Variant::EncDec, Variant::PriorTech, Variant::PriorRecipe, Variant::PriorName}) {
    CAPTURE(to_string(v));
    auto m = RecipeModel<double>::initialize(tiny_config(v), 41);
    // Non-zero biases so every bias gradient path is exercised away from symmetry.
    std::mt19937_64 rng(5);
    m.params.visit([&](const std::string& name, auto& t) {
      if (name.find("bias") != std::string::npos) fill_uniform(t, 0.1, rng);
    });
    m.params.visit([](const std::string&, auto& t) { t *= 4.0; });
    auto grad = ModelParameters<double>::zeros(m.config);
    const auto input = sample_input();
    const auto history = sample_history();
    accumulate_gradient(m, input, history, kTarget, grad, 1.0);
    const auto loss = [&] { return -sequence_log_likelihood(m, input, history, kTarget).total; };
    for (const auto& c : testing::check_gradients(m.params, grad, loss)) {
      CAPTURE(c.name);
      CHECK(c.max_rel_error < 1e-3);
    }
  }
}

TEST_CASE("variants with an empty profile reduce to the baseline") {
  std::mt19937_64 rng(8);
  for (auto v : {Variant::PriorTech, Variant::PriorRecipe, Variant::PriorName}) {
    auto prior = RecipeModel<double>::initialize(tiny_config(v), rng());
    RecipeModel<double> base{tiny_config(Variant::EncDec), prior.params};
    base.params.user_attention = {};
    DecoderSession<double> a(prior, sample_input(), UserHistory{});
    DecoderSession<double> b(base, sample_input(), UserHistory{});
    for (int t : kTarget) CHECK((a.step(t) - b.step(t)).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("float instantiation agrees with double") {
  auto md = RecipeModel<double>::initialize(tiny_config(Variant::PriorName), 3);
  RecipeModel<float> mf{md.config, ModelParameters<float>::zeros(md.config)};
  std::vector<MatrixX<double>> values;
  md.params.visit([&](const std::string&, const auto& t) { values.push_back(t); });
  std::size_t k = 0;
  mf.params.visit([&](const std::string&, auto& t) { t = values[k++].cast<float>(); });
  const double d = sequence_log_likelihood(md, sample_input(), sample_history(), kTarget).total;
  const float f = sequence_log_likelihood(mf, sample_input(), sample_history(), kTarget).total;
  CHECK(f == doctest::Approx(d).epsilon(1e-5));
}
