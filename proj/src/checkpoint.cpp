#include "recipegen/checkpoint.hpp"

#include <json.hpp>

#include <bit>
#include <fstream>
#include <sstream>

namespace recipegen {

namespace {

using nlohmann::ordered_json;

constexpr const char* kMagic = "RECIPEGEN-CKPT 1\n";

static_assert(std::endian::native == std::endian::little, "checkpoints store little-endian data");

template <typename Scalar>
const char* scalar_name() {
  return sizeof(Scalar) == 4 ? "float32" : "float64";
}

ordered_json config_json(const ModelConfig& c) {
  ordered_json j;
  j["variant"] = to_string(c.variant);
  j["hidden"] = c.hidden;
  j["vocab_dim"] = c.vocab_dim;
  j["ingredient_dim"] = c.ingredient_dim;
  j["recipe_dim"] = c.recipe_dim;
  j["technique_dim"] = c.technique_dim;
  j["calorie_dim"] = c.calorie_dim;
  j["history"] = c.history;
  j["encoder_layers"] = c.encoder_layers;
  j["decoder_layers"] = c.decoder_layers;
  j["max_length"] = c.max_length;
  j["vocab_size"] = c.vocab_size;
  j["ingredient_count"] = c.ingredient_count;
  j["recipe_count"] = c.recipe_count;
  j["technique_count"] = c.technique_count;
  return j;
}

ModelConfig config_from(const ordered_json& j) {
  ModelConfig c;
  c.variant = parse_variant(j.at("variant").get<std::string>());
  c.hidden = j.at("hidden").get<int>();
  c.vocab_dim = j.at("vocab_dim").get<int>();
  c.ingredient_dim = j.at("ingredient_dim").get<int>();
  c.recipe_dim = j.at("recipe_dim").get<int>();
  c.technique_dim = j.at("technique_dim").get<int>();
  c.calorie_dim = j.at("calorie_dim").get<int>();
  c.history = j.at("history").get<int>();
  c.encoder_layers = j.at("encoder_layers").get<int>();
  c.decoder_layers = j.at("decoder_layers").get<int>();
  c.max_length = j.at("max_length").get<int>();
  c.vocab_size = j.at("vocab_size").get<int>();
  c.ingredient_count = j.at("ingredient_count").get<int>();
  c.recipe_count = j.at("recipe_count").get<int>();
  c.technique_count = j.at("technique_count").get<int>();
  return c;
}

std::vector<std::string> without_unknown(const Vocabulary& v) {
  return {v.items().begin() + 1, v.items().end()};
}

}  // namespace

template <typename Scalar>
void save_checkpoint(std::ostream& out, const RecipeModel<Scalar>& model, const FeatureSpace& space,
                     const CheckpointInfo& info) {
  ordered_json h;
  h["scalar"] = scalar_name<Scalar>();
  h["config"] = config_json(model.config);
  h["seed"] = info.seed;
  h["epoch"] = info.epoch;
  h["dev_perplexity"] = info.dev_perplexity;
  h["max_predictions"] = info.max_predictions;
  h["input_ingredients"] = space.input_ingredients;
  std::ostringstream bpe;
  space.bpe.save(bpe);
  h["bpe"] = bpe.str();
  h["bpe_fingerprint"] = space.bpe.fingerprint();
  h["ingredients"] = without_unknown(space.ingredients);
  h["recipes"] = without_unknown(space.recipes);
  h["techniques"] = without_unknown(space.techniques);
  ordered_json tensors = ordered_json::array();
  model.params.visit([&](const std::string& name, const auto& t) {
    tensors.push_back({{"name", name}, {"rows", t.rows()}, {"cols", t.cols()}});
  });
  h["tensors"] = tensors;

  const std::string header = h.dump();
  out << kMagic;
  std::uint64_t len = header.size();
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(len >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), 8);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  model.params.visit([&](const std::string&, const auto& t) {
    out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(sizeof(Scalar) * t.size()));
  });
  if (!out) throw CheckpointError("failed to write checkpoint");
}

template <typename Scalar>
void save_checkpoint(const std::string& path, const RecipeModel<Scalar>& model, const FeatureSpace& space,
                     const CheckpointInfo& info) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint: " + path);
  save_checkpoint(out, model, space, info);
}

template <typename Scalar>
Checkpoint<Scalar> load_checkpoint(std::istream& in) {
  std::string magic(std::char_traits<char>::length(kMagic), '\0');
  in.read(magic.data(), static_cast<std::streamsize>(magic.size()));
  if (!in || magic != kMagic) throw CheckpointError("not a recipegen checkpoint");
  unsigned char bytes[8];
  in.read(reinterpret_cast<char*>(bytes), 8);
  std::uint64_t len = 0;
  for (int i = 0; i < 8; ++i) len |= std::uint64_t(bytes[i]) << (8 * i);
  std::string header(len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(len));
  if (!in) throw CheckpointError("truncated checkpoint header");

  ordered_json h;
  try {
    h = ordered_json::parse(header);
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("bad checkpoint header: ") + e.what());
  }
  Checkpoint<Scalar> ck;
  try {
    if (h.at("scalar") != scalar_name<Scalar>())
      throw CheckpointError("checkpoint holds " + h.at("scalar").get<std::string>() + " weights, expected " +
                            scalar_name<Scalar>());
    ck.model.config = config_from(h.at("config"));
    ck.model.config.validate();
    ck.info.seed = h.at("seed").get<std::uint64_t>();
    ck.info.epoch = h.at("epoch").get<int>();
    ck.info.dev_perplexity = h.at("dev_perplexity").get<double>();
    ck.info.max_predictions = h.at("max_predictions").get<std::size_t>();
    ck.space.input_ingredients = h.at("input_ingredients").get<std::size_t>();
    std::istringstream bpe(h.at("bpe").get<std::string>());
    ck.space.bpe = BpeModel::load(bpe);
    if (ck.space.bpe.fingerprint() != h.at("bpe_fingerprint").get<std::string>())
      throw CheckpointError("BPE fingerprint mismatch");
    ck.space.ingredients = Vocabulary(h.at("ingredients").get<std::vector<std::string>>());
    ck.space.recipes = Vocabulary(h.at("recipes").get<std::vector<std::string>>());
    ck.space.techniques = Vocabulary(h.at("techniques").get<std::vector<std::string>>());
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("bad checkpoint header: ") + e.what());
  }
  ModelConfig sized = ck.model.config;
  ck.space.size_config(sized);
  if (!(sized == ck.model.config)) throw CheckpointError("vocabularies disagree with the stored config");

  ck.model.params = ModelParameters<Scalar>::zeros(ck.model.config);
  const auto& tensors = h.at("tensors");
  std::size_t k = 0;
  ck.model.params.visit([&](const std::string& name, auto& t) {
    if (k >= tensors.size()) throw CheckpointError("checkpoint lacks tensor " + name);
    const auto& d = tensors[k++];
    if (d.at("name") != name || d.at("rows").get<Index>() != t.rows() || d.at("cols").get<Index>() != t.cols())
      throw CheckpointError("tensor " + name + " does not match the stored layout");
    in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(sizeof(Scalar) * t.size()));
    if (!in) throw CheckpointError("truncated data for tensor " + name);
  });
  if (k != tensors.size()) throw CheckpointError("checkpoint has unexpected extra tensors");
  return ck;
}

template <typename Scalar>
Checkpoint<Scalar> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path);
  return load_checkpoint<Scalar>(in);
}

#define RECIPEGEN_INSTANTIATE(S)                                                                                \
  template void save_checkpoint(std::ostream&, const RecipeModel<S>&, const FeatureSpace&, const CheckpointInfo&); \
  template void save_checkpoint(const std::string&, const RecipeModel<S>&, const FeatureSpace&,                 \
                                const CheckpointInfo&);                                                         \
  template Checkpoint<S> load_checkpoint<S>(std::istream&);                                                     \
  template Checkpoint<S> load_checkpoint<S>(const std::string&);

RECIPEGEN_INSTANTIATE(float)
RECIPEGEN_INSTANTIATE(double)

}  // namespace recipegen
