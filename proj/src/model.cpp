#include "recipegen/model.hpp"

#include <random>

namespace recipegen {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::EncDec: return "enc_dec";
    case Variant::PriorTech: return "prior_tech";
    case Variant::PriorRecipe: return "prior_recipe";
    case Variant::PriorName: return "prior_name";
  }
  return "?";
}

Variant parse_variant(const std::string& s) {
  for (const auto v : {Variant::EncDec, Variant::PriorTech, Variant::PriorRecipe, Variant::PriorName})
    if (to_string(v) == s) return v;
  throw std::invalid_argument("unknown variant '" + s + "' (expected enc_dec, prior_tech, prior_recipe, prior_name)");
}

void ModelConfig::validate() const {
  const auto positive = [](int v, const char* what) {
    if (v < 1) throw ModelError(std::string(what) + " must be >= 1");
  };
  positive(hidden, "hidden");
  positive(vocab_dim, "vocab_dim");
  positive(ingredient_dim, "ingredient_dim");
  positive(recipe_dim, "recipe_dim");
  positive(technique_dim, "technique_dim");
  positive(calorie_dim, "calorie_dim");
  positive(history, "history");
  positive(encoder_layers, "encoder_layers");
  positive(decoder_layers, "decoder_layers");
  positive(max_length, "max_length");
  if (vocab_size <= 4) throw ModelError("vocab_size must exceed the 4 special tokens");
  positive(ingredient_count, "ingredient_count");
  if (variant == Variant::PriorRecipe) positive(recipe_count, "recipe_count");
  if (variant == Variant::PriorTech) positive(technique_count, "technique_count");
}

int ModelConfig::user_key_dim() const {
  switch (variant) {
    case Variant::EncDec: return 0;
    case Variant::PriorTech: return technique_dim;
    case Variant::PriorRecipe: return recipe_dim;
    case Variant::PriorName: return vocab_dim;
  }
  return 0;
}

template <typename Scalar>
ModelParameters<Scalar> ModelParameters<Scalar>::zeros(const ModelConfig& c) {
  c.validate();
  using M = MatrixX<Scalar>;
  using V = VectorX<Scalar>;
  const Index h = c.hidden;
  ModelParameters p;
  p.vocab_embedding = M::Zero(c.vocab_dim, c.vocab_size);
  p.ingredient_embedding = M::Zero(c.ingredient_dim, c.ingredient_count);
  p.calorie_embedding = M::Zero(c.calorie_dim, 3);
  p.recipe_embedding = c.variant == Variant::PriorRecipe ? M::Zero(c.recipe_dim, c.recipe_count) : M();
  p.technique_embedding =
      c.variant == Variant::PriorTech ? M::Zero(c.technique_dim, c.technique_count) : M();
  for (int l = 0; l < c.encoder_layers; ++l) {
    const Index name_in = l == 0 ? c.vocab_dim : 2 * h;
    const Index ingr_in = l == 0 ? c.ingredient_dim : 2 * h;
    p.name_encoder.push_back({GruCell<Scalar>(name_in, h), GruCell<Scalar>(name_in, h)});
    p.ingredient_encoder.push_back({GruCell<Scalar>(ingr_in, h), GruCell<Scalar>(ingr_in, h)});
  }
  p.calorie_proj = M::Zero(2 * h, c.calorie_dim);
  p.ingredient_attention = AttentionHead<Scalar>(2 * h, h);
  if (c.variant != Variant::EncDec) p.user_attention = AttentionHead<Scalar>(c.user_key_dim(), h);
  p.init_w = M::Zero(h, 6 * h);
  p.init_b = V::Zero(h);
  for (int l = 0; l < c.decoder_layers; ++l)
    p.decoder.emplace_back(l == 0 ? c.vocab_dim + h : h, h);
  p.fusion_w = M::Zero(h, c.vocab_dim + 3 * h);
  p.fusion_b = V::Zero(h);
  p.output_w = M::Zero(c.vocab_size, h);
  p.output_b = V::Zero(c.vocab_size);
  return p;
}

template <typename Scalar>
void ModelParameters<Scalar>::set_zero() {
  visit([](const std::string&, auto& t) { t.setZero(); });
}

template <typename Scalar>
std::size_t ModelParameters<Scalar>::parameter_count() const {
  std::size_t n = 0;
  visit([&n](const std::string&, const auto& t) { n += static_cast<std::size_t>(t.size()); });
  return n;
}

template <typename Scalar>
RecipeModel<Scalar> RecipeModel<Scalar>::initialize(const ModelConfig& config, std::uint64_t seed) {
  RecipeModel m{config, ModelParameters<Scalar>::zeros(config)};
  std::mt19937_64 rng(seed);
  m.params.visit([&rng](const std::string& name, auto& t) {
    if (name.find("bias") == std::string::npos) fill_uniform(t, Scalar(0.08), rng);
  });
  return m;
}

namespace {

template <typename Scalar>
MatrixX<Scalar> gather_columns(const MatrixX<Scalar>& table, std::span<const int> ids, const char* what) {
  MatrixX<Scalar> out(table.rows(), static_cast<Index>(ids.size()));
  for (std::size_t j = 0; j < ids.size(); ++j) {
    if (ids[j] < 0 || ids[j] >= table.cols())
      throw ModelError(std::string(what) + " id out of range: " + std::to_string(ids[j]));
    out.col(static_cast<Index>(j)) = table.col(ids[j]);
  }
  return out;
}

template <typename Scalar>
void scatter_columns(MatrixX<Scalar>& table, std::span<const int> ids, const MatrixX<Scalar>& grads) {
  for (std::size_t j = 0; j < ids.size(); ++j) table.col(ids[j]) += grads.col(static_cast<Index>(j));
}

template <typename Scalar>
VectorX<Scalar> boost_weights(const UserHistory& history, Variant variant) {
  if (variant != Variant::PriorTech) return {};
  VectorX<Scalar> b(static_cast<Index>(history.technique_weights.size()));
  for (std::size_t i = 0; i < history.technique_weights.size(); ++i)
    b(static_cast<Index>(i)) = static_cast<Scalar>(history.technique_weights[i]);
  return b;
}

template <typename Scalar>
VectorX<Scalar> concat(std::initializer_list<const VectorX<Scalar>*> parts) {
  Index n = 0;
  for (const auto* p : parts) n += p->size();
  VectorX<Scalar> out(n);
  Index at = 0;
  for (const auto* p : parts) {
    out.segment(at, p->size()) = *p;
    at += p->size();
  }
  return out;
}

void check_target(std::span<const int> target, int max_length, int vocab_size) {
  if (target.size() < 2) throw ModelError("target must hold at least BOS and one token");
  if (static_cast<int>(target.size()) - 1 > max_length)
    throw ModelError("target of " + std::to_string(target.size() - 1) + " tokens exceeds max length " +
                     std::to_string(max_length));
  for (const int t : target)
    if (t < 0 || t >= vocab_size) throw ModelError("target token out of range: " + std::to_string(t));
}

}  // namespace

template <typename Scalar>
MatrixX<Scalar> encode_name(const ModelParameters<Scalar>& p, std::span<const int> tokens) {
  if (tokens.empty()) throw ModelError("recipe name must contain at least one token");
  return bigru_forward<Scalar>(p.name_encoder, gather_columns(p.vocab_embedding, tokens, "name token"), nullptr);
}

template <typename Scalar>
MatrixX<Scalar> encode_ingredients(const ModelParameters<Scalar>& p, std::span<const int> ingredients) {
  if (ingredients.empty()) throw ModelError("ingredient list must not be empty");
  return bigru_forward<Scalar>(p.ingredient_encoder,
                               gather_columns(p.ingredient_embedding, ingredients, "ingredient"), nullptr);
}

template <typename Scalar>
VectorX<Scalar> encode_calorie(const ModelParameters<Scalar>& p, CalorieLevel level) {
  const int i = static_cast<int>(level);
  if (i < 0 || i > 2) throw ModelError("unknown calorie level");
  return p.calorie_proj * p.calorie_embedding.col(i);
}

template <typename Scalar>
VectorX<Scalar> ingredient_context(const ModelParameters<Scalar>& p, const MatrixX<Scalar>& ingredient_states,
                                   const VectorX<Scalar>& query) {
  const MatrixX<Scalar> keys = p.ingredient_attention.key_proj * ingredient_states;
  return attend<Scalar>(p.ingredient_attention, keys, query, VectorX<Scalar>());
}

template <typename Scalar>
VectorX<Scalar> init_decoder(const ModelParameters<Scalar>& p, const MatrixX<Scalar>& name_states,
                             const MatrixX<Scalar>& ingredient_states, const VectorX<Scalar>& calorie_state) {
  const VectorX<Scalar> last_name = name_states.col(name_states.cols() - 1);
  const VectorX<Scalar> last_ingr = ingredient_states.col(ingredient_states.cols() - 1);
  const VectorX<Scalar> in = concat<Scalar>({&last_name, &last_ingr, &calorie_state});
  return p.init_w * in + p.init_b;
}

template <typename Scalar>
EncoderOutput<Scalar> encode(const RecipeModel<Scalar>& m, const EncodedInput& input) {
  EncoderOutput<Scalar> out;
  out.name_states = encode_name(m.params, input.name);
  out.ingredient_states = encode_ingredients(m.params, input.ingredients);
  out.calorie_state = encode_calorie(m.params, input.calorie);
  const VectorX<Scalar> h0 = init_decoder(m.params, out.name_states, out.ingredient_states, out.calorie_state);
  out.h0.assign(static_cast<std::size_t>(m.config.decoder_layers), h0);
  return out;
}

template <typename Scalar>
DecoderStepOutput<Scalar> decoder_step(const ModelParameters<Scalar>& p, int token,
                                       const VectorX<Scalar>& ingredient_ctx,
                                       const std::vector<VectorX<Scalar>>& h_prev) {
  const VectorX<Scalar> emb = p.vocab_embedding.col(token);
  VectorX<Scalar> x = concat<Scalar>({&emb, &ingredient_ctx});
  DecoderStepOutput<Scalar> out;
  for (std::size_t l = 0; l < p.decoder.size(); ++l) {
    out.h.push_back(gru_step<Scalar>(p.decoder[l], x, h_prev[l]));
    x = out.h.back();
  }
  out.output = out.h.back();
  return out;
}

template <typename Scalar>
MatrixX<Scalar> history_keys(const ModelParameters<Scalar>& p, const UserHistory& history, Variant variant) {
  switch (variant) {
    case Variant::EncDec: return {};
    case Variant::PriorRecipe: return gather_columns(p.recipe_embedding, history.recipes, "recipe");
    case Variant::PriorTech:
      if (history.techniques.size() != history.technique_weights.size())
        throw ModelError("technique ids and weights differ in length");
      return gather_columns(p.technique_embedding, history.techniques, "technique");
    case Variant::PriorName: {
      MatrixX<Scalar> keys = MatrixX<Scalar>::Zero(p.vocab_embedding.rows(),
                                                   static_cast<Index>(history.recipe_names.size()));
      for (std::size_t j = 0; j < history.recipe_names.size(); ++j) {
        const auto& name = history.recipe_names[j];
        if (name.empty()) continue;
        keys.col(static_cast<Index>(j)) =
            gather_columns(p.vocab_embedding, name, "name token").rowwise().mean();
      }
      return keys;
    }
  }
  return {};
}

template <typename Scalar>
VectorX<Scalar> prior_recipe_context(const ModelParameters<Scalar>& p, const UserHistory& history,
                                     const VectorX<Scalar>& query, RecipeRepresentation repr) {
  const Variant v = repr == RecipeRepresentation::RecipeTable ? Variant::PriorRecipe : Variant::PriorName;
  const MatrixX<Scalar> raw = history_keys(p, history, v);
  if (raw.cols() == 0) return VectorX<Scalar>::Zero(query.size());
  const MatrixX<Scalar> keys = p.user_attention.key_proj * raw;
  return attend<Scalar>(p.user_attention, keys, query, VectorX<Scalar>());
}

template <typename Scalar>
VectorX<Scalar> prior_technique_context(const ModelParameters<Scalar>& p, const UserHistory& history,
                                        const VectorX<Scalar>& query) {
  const MatrixX<Scalar> raw = history_keys(p, history, Variant::PriorTech);
  if (raw.cols() == 0) return VectorX<Scalar>::Zero(query.size());
  const MatrixX<Scalar> keys = p.user_attention.key_proj * raw;
  return attend<Scalar>(p.user_attention, keys, query, boost_weights<Scalar>(history, Variant::PriorTech));
}

template <typename Scalar>
VectorX<Scalar> fuse(const ModelParameters<Scalar>& p, int token, const VectorX<Scalar>& output,
                     const VectorX<Scalar>& ingredient_ctx, const VectorX<Scalar>& user_ctx) {
  const VectorX<Scalar> emb = p.vocab_embedding.col(token);
  const VectorX<Scalar> f = concat<Scalar>({&emb, &output, &ingredient_ctx, &user_ctx});
  return (p.fusion_w * f + p.fusion_b).cwiseMax(Scalar(0));
}

template <typename Scalar>
VectorX<Scalar> project_vocab(const ModelParameters<Scalar>& p, const VectorX<Scalar>& fused) {
  return softmax<Scalar>(p.output_w * fused + p.output_b);
}

template <typename Scalar>
DecoderSession<Scalar>::DecoderSession(const RecipeModel<Scalar>& model, const EncodedInput& input,
                                       const UserHistory& history)
    : model_(model) {
  const auto& p = model.params;
  const EncoderOutput<Scalar> enc = encode(model, input);
  ingredient_keys_ = p.ingredient_attention.key_proj * enc.ingredient_states;
  const MatrixX<Scalar> raw = history_keys(p, history, model.config.variant);
  if (raw.cols() > 0) {
    user_keys_ = p.user_attention.key_proj * raw;
    user_boost_ = boost_weights<Scalar>(history, model.config.variant);
  }
  h_ = enc.h0;
}

template <typename Scalar>
VectorX<Scalar> DecoderSession<Scalar>::step(int token) {
  const auto& p = model_.params;
  if (token < 0 || token >= p.vocab_embedding.cols())
    throw ModelError("token out of range: " + std::to_string(token));
  const VectorX<Scalar> a_i = attend<Scalar>(p.ingredient_attention, ingredient_keys_, h_.back(), VectorX<Scalar>());
  auto step = decoder_step(p, token, a_i, h_);
  h_ = std::move(step.h);
  const VectorX<Scalar> a_u = user_keys_.cols() > 0
                                  ? attend<Scalar>(p.user_attention, user_keys_, step.output, user_boost_)
                                  : VectorX<Scalar>::Zero(model_.config.hidden);
  const VectorX<Scalar> fused = fuse(p, token, step.output, a_i, a_u);
  return log_softmax<Scalar>(p.output_w * fused + p.output_b);
}

template <typename Scalar>
SequenceScore<Scalar> sequence_log_likelihood(const RecipeModel<Scalar>& m, const EncodedInput& input,
                                              const UserHistory& history, std::span<const int> target) {
  check_target(target, m.config.max_length, m.config.vocab_size);
  DecoderSession<Scalar> session(m, input, history);
  SequenceScore<Scalar> score;
  for (std::size_t t = 0; t + 1 < target.size(); ++t) {
    const VectorX<Scalar> logp = session.step(target[t]);
    const Scalar lp = logp(target[t + 1]);
    score.per_token.push_back(lp);
    score.total += lp;
  }
  return score;
}

namespace {

template <typename Scalar>
struct StepCache {
  int token = 0;
  AttentionCache<Scalar> ingredient_attention;
  std::vector<GruStepCache<Scalar>> gru;
  AttentionCache<Scalar> user_attention;
  VectorX<Scalar> fusion_in, fusion_pre, fused, probs;
};

}  // namespace

template <typename Scalar>
SequenceScore<Scalar> accumulate_gradient(const RecipeModel<Scalar>& m, const EncodedInput& input,
                                          const UserHistory& history, std::span<const int> target,
                                          ModelParameters<Scalar>& grad, Scalar weight) {
  using M = MatrixX<Scalar>;
  using V = VectorX<Scalar>;
  const auto& p = m.params;
  const auto& cfg = m.config;
  const Index h = cfg.hidden;
  const Index dv = cfg.vocab_dim;
  check_target(target, cfg.max_length, cfg.vocab_size);
  if (input.name.empty()) throw ModelError("recipe name must contain at least one token");
  if (input.ingredients.empty()) throw ModelError("ingredient list must not be empty");

  // Encoder.
  BiGruCache<Scalar> name_cache, ingr_cache;
  const M name_in = gather_columns(p.vocab_embedding, input.name, "name token");
  const M name_states = bigru_forward<Scalar>(p.name_encoder, name_in, &name_cache);
  const M ingr_in = gather_columns(p.ingredient_embedding, input.ingredients, "ingredient");
  const M ingr_states = bigru_forward<Scalar>(p.ingredient_encoder, ingr_in, &ingr_cache);
  const int level = static_cast<int>(input.calorie);
  const V cal_emb = p.calorie_embedding.col(level);
  const V cal_state = p.calorie_proj * cal_emb;
  const V last_name = name_states.col(name_states.cols() - 1);
  const V last_ingr = ingr_states.col(ingr_states.cols() - 1);
  const V init_in = concat<Scalar>({&last_name, &last_ingr, &cal_state});
  const V h0 = p.init_w * init_in + p.init_b;

  const M ingr_keys = p.ingredient_attention.key_proj * ingr_states;
  const M user_raw = history_keys(p, history, cfg.variant);
  const bool has_user = user_raw.cols() > 0;
  const M user_keys = has_user ? M(p.user_attention.key_proj * user_raw) : M();
  const V boost = has_user ? boost_weights<Scalar>(history, cfg.variant) : V();

  // Teacher-forced decoder.
  const std::size_t steps = target.size() - 1;
  std::vector<StepCache<Scalar>> caches(steps);
  std::vector<V> state(static_cast<std::size_t>(cfg.decoder_layers), h0);
  SequenceScore<Scalar> score;
  for (std::size_t t = 0; t < steps; ++t) {
    auto& c = caches[t];
    c.token = target[t];
    const V a_i = attend<Scalar>(p.ingredient_attention, ingr_keys, state.back(), V(), &c.ingredient_attention);
    const V emb = p.vocab_embedding.col(c.token);
    V x = concat<Scalar>({&emb, &a_i});
    c.gru.resize(p.decoder.size());
    for (std::size_t l = 0; l < p.decoder.size(); ++l) {
      state[l] = gru_step<Scalar>(p.decoder[l], x, state[l], &c.gru[l]);
      x = state[l];
    }
    const V& o = state.back();
    const V a_u = has_user ? attend<Scalar>(p.user_attention, user_keys, o, boost, &c.user_attention) : V::Zero(h);
    c.fusion_in = concat<Scalar>({&emb, &o, &a_i, &a_u});
    c.fusion_pre = p.fusion_w * c.fusion_in + p.fusion_b;
    c.fused = c.fusion_pre.cwiseMax(Scalar(0));
    const V logp = log_softmax<Scalar>(p.output_w * c.fused + p.output_b);
    const Scalar lp = logp(target[t + 1]);
    score.per_token.push_back(lp);
    score.total += lp;
    c.probs = logp.array().exp().matrix();
  }

  // Backward through time.
  M d_ingr_keys = M::Zero(ingr_keys.rows(), ingr_keys.cols());
  M d_user_keys = has_user ? M(M::Zero(user_keys.rows(), user_keys.cols())) : M();
  std::vector<V> dh(state.size(), V::Zero(h));
  V d_x, d_prev;
  for (std::size_t t = steps; t-- > 0;) {
    const auto& c = caches[t];
    V d_logits = weight * c.probs;
    d_logits(target[t + 1]) -= weight;
    grad.output_w.noalias() += d_logits * c.fused.transpose();
    grad.output_b += d_logits;
    const V d_fused = p.output_w.transpose() * d_logits;
    const V d_pre = d_fused.cwiseProduct((c.fusion_pre.array() > Scalar(0)).template cast<Scalar>().matrix());
    grad.fusion_w.noalias() += d_pre * c.fusion_in.transpose();
    grad.fusion_b += d_pre;
    const V d_in = p.fusion_w.transpose() * d_pre;
    V d_emb = d_in.head(dv);
    V d_o = d_in.segment(dv, h);
    V d_ai = d_in.segment(dv + h, h);
    if (has_user) attend_backward<Scalar>(p.user_attention, grad.user_attention, user_keys, c.user_attention,
                                          d_in.tail(h), d_user_keys, d_o);
    dh.back() += d_o;
    for (std::size_t l = p.decoder.size(); l-- > 0;) {
      gru_step_backward<Scalar>(p.decoder[l], grad.decoder[l], c.gru[l], dh[l], d_x, d_prev);
      dh[l] = d_prev;
      if (l > 0) {
        dh[l - 1] += d_x;
      } else {
        d_emb += d_x.head(dv);
        d_ai += d_x.tail(h);
      }
    }
    grad.vocab_embedding.col(c.token) += d_emb;
    V d_query = V::Zero(h);
    attend_backward<Scalar>(p.ingredient_attention, grad.ingredient_attention, ingr_keys, c.ingredient_attention,
                            d_ai, d_ingr_keys, d_query);
    dh.back() += d_query;
  }

  // Decoder initialization and encoder.
  V d_h0 = V::Zero(h);
  for (const auto& d : dh) d_h0 += d;
  grad.init_w.noalias() += d_h0 * init_in.transpose();
  grad.init_b += d_h0;
  const V d_init_in = p.init_w.transpose() * d_h0;

  M d_ingr_states = p.ingredient_attention.key_proj.transpose() * d_ingr_keys;
  grad.ingredient_attention.key_proj.noalias() += d_ingr_keys * ingr_states.transpose();
  d_ingr_states.col(d_ingr_states.cols() - 1) += d_init_in.segment(2 * h, 2 * h);
  M d_name_states = M::Zero(name_states.rows(), name_states.cols());
  d_name_states.col(d_name_states.cols() - 1) += d_init_in.head(2 * h);
  const V d_cal = d_init_in.tail(2 * h);
  grad.calorie_proj.noalias() += d_cal * cal_emb.transpose();
  grad.calorie_embedding.col(level) += p.calorie_proj.transpose() * d_cal;

  if (has_user) {
    grad.user_attention.key_proj.noalias() += d_user_keys * user_raw.transpose();
    const M d_raw = p.user_attention.key_proj.transpose() * d_user_keys;
    switch (cfg.variant) {
      case Variant::PriorRecipe: scatter_columns(grad.recipe_embedding, history.recipes, d_raw); break;
      case Variant::PriorTech: scatter_columns(grad.technique_embedding, history.techniques, d_raw); break;
      case Variant::PriorName:
        for (std::size_t j = 0; j < history.recipe_names.size(); ++j) {
          const auto& name = history.recipe_names[j];
          for (const int tok : name)
            grad.vocab_embedding.col(tok) += d_raw.col(static_cast<Index>(j)) / Scalar(name.size());
        }
        break;
      case Variant::EncDec: break;
    }
  }

  scatter_columns(grad.ingredient_embedding, input.ingredients,
                  bigru_backward<Scalar>(p.ingredient_encoder, grad.ingredient_encoder, ingr_cache, d_ingr_states));
  scatter_columns(grad.vocab_embedding, input.name,
                  bigru_backward<Scalar>(p.name_encoder, grad.name_encoder, name_cache, d_name_states));
  return score;
}

#define RECIPEGEN_INSTANTIATE(S)                                                                          \
  template struct ModelParameters<S>;                                                                     \
  template struct RecipeModel<S>;                                                                         \
  template class DecoderSession<S>;                                                                       \
  template MatrixX<S> encode_name(const ModelParameters<S>&, std::span<const int>);                       \
  template MatrixX<S> encode_ingredients(const ModelParameters<S>&, std::span<const int>);                \
  template VectorX<S> encode_calorie(const ModelParameters<S>&, CalorieLevel);                            \
  template VectorX<S> ingredient_context(const ModelParameters<S>&, const MatrixX<S>&, const VectorX<S>&); \
  template VectorX<S> init_decoder(const ModelParameters<S>&, const MatrixX<S>&, const MatrixX<S>&,        \
                                   const VectorX<S>&);                                                    \
  template EncoderOutput<S> encode(const RecipeModel<S>&, const EncodedInput&);                           \
  template DecoderStepOutput<S> decoder_step(const ModelParameters<S>&, int, const VectorX<S>&,           \
                                             const std::vector<VectorX<S>>&);                             \
  template MatrixX<S> history_keys(const ModelParameters<S>&, const UserHistory&, Variant);               \
  template VectorX<S> prior_recipe_context(const ModelParameters<S>&, const UserHistory&, const VectorX<S>&, \
                                           RecipeRepresentation);                                         \
  template VectorX<S> prior_technique_context(const ModelParameters<S>&, const UserHistory&,              \
                                              const VectorX<S>&);                                         \
  template VectorX<S> fuse(const ModelParameters<S>&, int, const VectorX<S>&, const VectorX<S>&,          \
                           const VectorX<S>&);                                                            \
  template VectorX<S> project_vocab(const ModelParameters<S>&, const VectorX<S>&);                        \
  template SequenceScore<S> sequence_log_likelihood(const RecipeModel<S>&, const EncodedInput&,           \
                                                    const UserHistory&, std::span<const int>);            \
  template SequenceScore<S> accumulate_gradient(const RecipeModel<S>&, const EncodedInput&,               \
                                                const UserHistory&, std::span<const int>,                 \
                                                ModelParameters<S>&, S);

RECIPEGEN_INSTANTIATE(float)
RECIPEGEN_INSTANTIATE(double)

#undef RECIPEGEN_INSTANTIATE

}  // namespace recipegen
