#pragma once

#include "recipegen/features.hpp"
#include "recipegen/model.hpp"

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>

namespace recipegen {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Run facts stored next to the weights.
struct CheckpointInfo {
  std::uint64_t seed = 0;
  int epoch = 0;                 // epoch the weights come from
  double dev_perplexity = 0.0;
  std::size_t max_predictions = 256;
};

template <typename Scalar>
struct Checkpoint {
  RecipeModel<Scalar> model;
  FeatureSpace space;
  CheckpointInfo info;
};

/// Layout: the magic line "RECIPEGEN-CKPT 1", an 8-byte little-endian header
/// length, a JSON header (config, tensor names and shapes, vocabularies, BPE
/// model and fingerprint, scalar type, run info), then every tensor's raw
/// column-major data in visit order.
template <typename Scalar>
void save_checkpoint(std::ostream& out, const RecipeModel<Scalar>& model, const FeatureSpace& space,
                     const CheckpointInfo& info);
template <typename Scalar>
void save_checkpoint(const std::string& path, const RecipeModel<Scalar>& model, const FeatureSpace& space,
                     const CheckpointInfo& info);

/// Throws CheckpointError on a bad magic, a scalar type other than Scalar,
/// shape disagreements, a BPE fingerprint mismatch or truncated data.
template <typename Scalar>
Checkpoint<Scalar> load_checkpoint(std::istream& in);
template <typename Scalar>
Checkpoint<Scalar> load_checkpoint(const std::string& path);

}  // namespace recipegen
