#pragma once

#include <cstdint>
#include <vector>

#include "fedprint/matrix.hpp"
#include "fedprint/params.hpp"

namespace fedprint {

// Local SGD settings. Epochs default follows the per-client schedule used
// throughout: 20 epochs on the local set.
struct TrainConfig {
  int epochs = 20;
  double learning_rate = 0.05;
  int batch_size = 32;
  std::uint64_t seed = 0;

  // Throws config_error on epochs < 1, learning_rate <= 0 or batch_size < 1.
  void validate() const;

  bool operator==(const TrainConfig&) const = default;
};

// Post-ReLU outputs of every hidden layer, one frames x width matrix per
// layer. per_layer[0] is hidden layer h=1.
struct ActivationTrace {
  std::vector<Matrix> per_layer;
};

struct ForwardResult {
  Matrix logits;
  ActivationTrace trace;
};

// Full forward pass with activation taps. Pure function of its inputs;
// frames.cols must equal the model input dim.
ForwardResult forward(const ParamSet& params, const Matrix& frames);

// Forward pass without storing the trace (same arithmetic).
Matrix forward_logits(const ParamSet& params, const Matrix& frames);

struct LossGrad {
  double loss = 0.0;
  ParamSet grad;
};

// Mean softmax cross-entropy over frames plus its gradient, same shape as
// params. Labels must lie in [0, output dim).
LossGrad loss_and_grad(const ParamSet& params, const Matrix& frames,
                       const std::vector<int>& labels);

// Plain SGD: full shuffle per epoch, last partial batch kept, params updated
// after every batch. Returns the trained copy; `start` is not modified.
// Deterministic given cfg.seed.
ParamSet train_local(const ParamSet& start, const Matrix& frames,
                     const std::vector<int>& labels, const TrainConfig& cfg);

}  // namespace fedprint
