#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "fedprint/matrix.hpp"

namespace fedprint {

// One fully connected layer: weight is out x in, bias has out entries.
struct LayerParams {
  Matrix weight;
  std::vector<double> bias;

  bool operator==(const LayerParams&) const = default;
};

// Ordered per-layer weights and biases of a feedforward model. This is the
// unit exchanged between clients and the server, and the thing checkpoints
// store. Layer dimensions are implied by the weight shapes.
struct ParamSet {
  std::vector<LayerParams> layers;

  bool operator==(const ParamSet&) const = default;

  // [input dim, hidden dims..., output dim]
  std::vector<std::size_t> layer_dims() const;

  // Number of hidden layers (activation tap points), layers.size() - 1.
  std::size_t num_hidden() const { return layers.empty() ? 0 : layers.size() - 1; }

  bool same_dims(const ParamSet& other) const;
  bool finite() const;
};

// Random initialization: weights uniform in +-sqrt(1/fan_in), biases zero.
// Deterministic given the seed. layer_dims needs at least two entries, all >= 1.
ParamSet init_params(const std::vector<std::size_t>& layer_dims, std::uint64_t seed);

// Checkpoint file format: magic "FPRINT1\n", then the layer count as a
// decimal line, then per layer a "rows cols" decimal line followed by
// rows*cols row-major weight values and rows bias values, all little-endian
// IEEE 754 binary64. load(save(p)) == p bit-exactly.
void save_checkpoint(const ParamSet& params, const std::filesystem::path& path);
ParamSet load_checkpoint(const std::filesystem::path& path);

}  // namespace fedprint
