#pragma once

#include "recipegen/corpus.hpp"
#include "recipegen/linalg.hpp"
#include "recipegen/nn.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace recipegen {

/// Which user history (if any) the fusion layer attends over.
enum class Variant { EncDec, PriorTech, PriorRecipe, PriorName };

std::string to_string(Variant v);
Variant parse_variant(const std::string& s);

struct ModelConfig {
  int hidden = 256;
  int vocab_dim = 300;
  int ingredient_dim = 10;
  int recipe_dim = 50;
  int technique_dim = 50;
  int calorie_dim = 5;
  int history = 20;  // prior recipes attended over
  Variant variant = Variant::EncDec;
  int encoder_layers = 2;
  int decoder_layers = 2;
  int max_length = 256;  // predicted tokens per sequence

  // Embedding table sizes, fixed by the data.
  int vocab_size = 0;
  int ingredient_count = 0;
  int recipe_count = 0;
  int technique_count = 0;

  void validate() const;
  /// Width of a raw user-history key for the configured variant (0 for EncDec).
  int user_key_dim() const;
  bool operator==(const ModelConfig&) const = default;
};

/// Conditioning input after vocabulary lookup.
struct EncodedInput {
  std::vector<int> name;         // BPE ids
  std::vector<int> ingredients;  // ingredient table rows
  CalorieLevel calorie = CalorieLevel::Low;
};

/// A user profile resolved to table rows. Each variant reads only its part.
struct UserHistory {
  std::vector<int> recipes;                    // recipe table rows, most recent first
  std::vector<std::vector<int>> recipe_names;  // BPE ids of those recipes' names
  std::vector<int> techniques;                 // technique table rows
  std::vector<double> technique_weights;       // preference weight per technique
};

template <typename Scalar>
struct ModelParameters {
  using scalar_type = Scalar;

  MatrixX<Scalar> vocab_embedding;       // d_v x |V|
  MatrixX<Scalar> ingredient_embedding;  // d_i x |I|
  MatrixX<Scalar> calorie_embedding;     // d_c x 3
  MatrixX<Scalar> recipe_embedding;      // d_r x |R|   (prior_recipe only)
  MatrixX<Scalar> technique_embedding;   // d_x x |X|   (prior_tech only)
  std::vector<BiGruLayer<Scalar>> name_encoder;
  std::vector<BiGruLayer<Scalar>> ingredient_encoder;
  MatrixX<Scalar> calorie_proj;  // 2h x d_c
  AttentionHead<Scalar> ingredient_attention;
  AttentionHead<Scalar> user_attention;  // empty for EncDec
  MatrixX<Scalar> init_w;  // h x 6h
  VectorX<Scalar> init_b;
  std::vector<GruCell<Scalar>> decoder;
  MatrixX<Scalar> fusion_w;  // h x (d_v + 3h)
  VectorX<Scalar> fusion_b;
  MatrixX<Scalar> output_w;  // |V| x h
  VectorX<Scalar> output_b;

  /// Zero-filled parameters with the shapes implied by `config`.
  static ModelParameters zeros(const ModelConfig& config);

  /// Calls f(name, tensor) for every tensor in a fixed order. Bias tensors
  /// have names containing "bias".
  template <class F>
  void visit(F&& f) {
    visit_impl(*this, f);
  }
  template <class F>
  void visit(F&& f) const {
    visit_impl(*this, f);
  }

  void set_zero();
  std::size_t parameter_count() const;

 private:
  template <class Self, class F>
  static void visit_impl(Self& p, F& f) {
    f(std::string("embedding.vocab"), p.vocab_embedding);
    f(std::string("embedding.ingredient"), p.ingredient_embedding);
    f(std::string("embedding.calorie"), p.calorie_embedding);
    f(std::string("embedding.recipe"), p.recipe_embedding);
    f(std::string("embedding.technique"), p.technique_embedding);
    const auto bigru = [&f](const std::string& prefix, auto& layers) {
      for (std::size_t l = 0; l < layers.size(); ++l) {
        visit_gru(prefix + "." + std::to_string(l) + ".fwd", layers[l].forward, f);
        visit_gru(prefix + "." + std::to_string(l) + ".bwd", layers[l].backward, f);
      }
    };
    bigru("encoder.name", p.name_encoder);
    bigru("encoder.ingredient", p.ingredient_encoder);
    f(std::string("encoder.calorie_proj"), p.calorie_proj);
    visit_attention("attention.ingredient", p.ingredient_attention, f);
    visit_attention("attention.user", p.user_attention, f);
    f(std::string("decoder.init.weight"), p.init_w);
    f(std::string("decoder.init.bias"), p.init_b);
    for (std::size_t l = 0; l < p.decoder.size(); ++l)
      visit_gru("decoder.gru." + std::to_string(l), p.decoder[l], f);
    f(std::string("fusion.weight"), p.fusion_w);
    f(std::string("fusion.bias"), p.fusion_b);
    f(std::string("output.weight"), p.output_w);
    f(std::string("output.bias"), p.output_b);
  }
  template <class Cell, class F>
  static void visit_gru(const std::string& prefix, Cell& c, F& f) {
    f(prefix + ".w_input", c.w_input);
    f(prefix + ".w_hidden", c.w_hidden);
    f(prefix + ".bias_input", c.b_input);
    f(prefix + ".bias_hidden", c.b_hidden);
  }
  template <class Head, class F>
  static void visit_attention(const std::string& prefix, Head& h, F& f) {
    f(prefix + ".key_proj", h.key_proj);
    f(prefix + ".score_w", h.score_w);
    f(prefix + ".score_bias", h.score_b);
  }
};

template <typename Scalar>
struct RecipeModel {
  ModelConfig config;
  ModelParameters<Scalar> params;

  /// Uniform(-0.08, 0.08) weights and zero biases.
  static RecipeModel initialize(const ModelConfig& config, std::uint64_t seed);
};

template <typename Scalar>
struct EncoderOutput {
  MatrixX<Scalar> name_states;        // 2h x L_n, one column per position
  MatrixX<Scalar> ingredient_states;  // 2h x L_i
  VectorX<Scalar> calorie_state;      // 2h
  std::vector<VectorX<Scalar>> h0;    // one copy per decoder layer
};

template <typename Scalar>
struct DecoderStepOutput {
  std::vector<VectorX<Scalar>> h;  // per layer
  VectorX<Scalar> output;          // top layer
};

template <typename Scalar>
struct SequenceScore {
  Scalar total = 0;                // sum of log-probabilities
  std::vector<Scalar> per_token;   // one per predicted token
};

enum class RecipeRepresentation { RecipeTable, NameAverage };

template <typename Scalar>
MatrixX<Scalar> encode_name(const ModelParameters<Scalar>& p, std::span<const int> tokens);
template <typename Scalar>
MatrixX<Scalar> encode_ingredients(const ModelParameters<Scalar>& p, std::span<const int> ingredients);
template <typename Scalar>
VectorX<Scalar> encode_calorie(const ModelParameters<Scalar>& p, CalorieLevel level);

template <typename Scalar>
VectorX<Scalar> ingredient_context(const ModelParameters<Scalar>& p,
                                   const MatrixX<Scalar>& ingredient_states,
                                   const VectorX<Scalar>& query);
template <typename Scalar>
VectorX<Scalar> init_decoder(const ModelParameters<Scalar>& p, const MatrixX<Scalar>& name_states,
                             const MatrixX<Scalar>& ingredient_states,
                             const VectorX<Scalar>& calorie_state);
template <typename Scalar>
EncoderOutput<Scalar> encode(const RecipeModel<Scalar>& m, const EncodedInput& input);

template <typename Scalar>
DecoderStepOutput<Scalar> decoder_step(const ModelParameters<Scalar>& p, int token,
                                       const VectorX<Scalar>& ingredient_ctx,
                                       const std::vector<VectorX<Scalar>>& h_prev);

/// Raw (unprojected) history keys, one column per attended item.
template <typename Scalar>
MatrixX<Scalar> history_keys(const ModelParameters<Scalar>& p, const UserHistory& history,
                             Variant variant);

template <typename Scalar>
VectorX<Scalar> prior_recipe_context(const ModelParameters<Scalar>& p, const UserHistory& history,
                                     const VectorX<Scalar>& query, RecipeRepresentation repr);
template <typename Scalar>
VectorX<Scalar> prior_technique_context(const ModelParameters<Scalar>& p,
                                        const UserHistory& history, const VectorX<Scalar>& query);

template <typename Scalar>
VectorX<Scalar> fuse(const ModelParameters<Scalar>& p, int token, const VectorX<Scalar>& output,
                     const VectorX<Scalar>& ingredient_ctx, const VectorX<Scalar>& user_ctx);

/// Token distribution (probabilities) from the fused representation.
template <typename Scalar>
VectorX<Scalar> project_vocab(const ModelParameters<Scalar>& p, const VectorX<Scalar>& fused);

/// Incremental decoder over frozen parameters. Each call to `step` feeds one
/// token and returns log-probabilities for the next.
template <typename Scalar>
class DecoderSession {
 public:
  DecoderSession(const RecipeModel<Scalar>& model, const EncodedInput& input,
                 const UserHistory& history);

  VectorX<Scalar> step(int token);
  const std::vector<VectorX<Scalar>>& state() const { return h_; }

 private:
  const RecipeModel<Scalar>& model_;
  MatrixX<Scalar> ingredient_keys_;  // projected
  MatrixX<Scalar> user_keys_;        // projected; empty when no history
  VectorX<Scalar> user_boost_;
  std::vector<VectorX<Scalar>> h_;
};

/// Teacher-forced log-likelihood of `target` (BOS ... EOS).
template <typename Scalar>
SequenceScore<Scalar> sequence_log_likelihood(const RecipeModel<Scalar>& m, const EncodedInput& input,
                                              const UserHistory& history, std::span<const int> target);

/// Same forward pass as sequence_log_likelihood, then accumulates
/// weight * d(-log-likelihood)/d(params) into `grad`.
template <typename Scalar>
SequenceScore<Scalar> accumulate_gradient(const RecipeModel<Scalar>& m, const EncodedInput& input,
                                          const UserHistory& history, std::span<const int> target,
                                          ModelParameters<Scalar>& grad, Scalar weight);

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace recipegen
