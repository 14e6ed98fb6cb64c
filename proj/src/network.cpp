#include "fedprint/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fedprint/errors.hpp"
#include "fedprint/rng.hpp"

namespace fedprint {

namespace {

void check_input(const ParamSet& params, const Matrix& frames) {
  if (params.layers.empty()) throw shape_error("forward: empty parameter set");
  if (frames.cols != params.layers.front().weight.cols) {
    throw shape_error("forward: frame dim " + std::to_string(frames.cols) +
                      " != model input dim " +
                      std::to_string(params.layers.front().weight.cols));
  }
}

// z = x * W^T + b, row per frame.
Matrix affine(const Matrix& x, const LayerParams& layer) {
  const std::size_t n = x.rows;
  const std::size_t out = layer.weight.rows;
  const std::size_t in = layer.weight.cols;
  Matrix z(n, out);
  for (std::size_t f = 0; f < n; ++f) {
    const double* xf = x.row(f);
    double* zf = z.row(f);
    for (std::size_t o = 0; o < out; ++o) {
      const double* w = layer.weight.row(o);
      double acc = layer.bias[o];
      for (std::size_t i = 0; i < in; ++i) acc += w[i] * xf[i];
      zf[o] = acc;
    }
  }
  return z;
}

void relu_inplace(Matrix& z) {
  for (double& v : z.data) v = v > 0.0 ? v : 0.0;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw config_error("TrainConfig: epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw config_error("TrainConfig: learning_rate must be > 0");
  if (batch_size < 1) throw config_error("TrainConfig: batch_size must be >= 1");
}

ForwardResult forward(const ParamSet& params, const Matrix& frames) {
  check_input(params, frames);
  ForwardResult out;
  out.trace.per_layer.reserve(params.num_hidden());
  Matrix h = frames;
  for (std::size_t l = 0; l + 1 < params.layers.size(); ++l) {
    Matrix z = affine(h, params.layers[l]);
    relu_inplace(z);
    out.trace.per_layer.push_back(z);
    h = std::move(z);
  }
  out.logits = affine(h, params.layers.back());
  return out;
}

Matrix forward_logits(const ParamSet& params, const Matrix& frames) {
  check_input(params, frames);
  Matrix h = frames;
  for (std::size_t l = 0; l + 1 < params.layers.size(); ++l) {
    Matrix z = affine(h, params.layers[l]);
    relu_inplace(z);
    h = std::move(z);
  }
  return affine(h, params.layers.back());
}

LossGrad loss_and_grad(const ParamSet& params, const Matrix& frames,
                       const std::vector<int>& labels) {
  if (frames.rows == 0) throw data_error("loss_and_grad: no frames");
  if (labels.size() != frames.rows) {
    throw data_error("loss_and_grad: label count != frame count");
  }
  check_input(params, frames);
  const int num_classes = static_cast<int>(params.layers.back().weight.rows);
  for (int l : labels) {
    if (l < 0 || l >= num_classes) {
      throw data_error("loss_and_grad: label " + std::to_string(l) +
                       " outside [0, " + std::to_string(num_classes) + ")");
    }
  }

  const std::size_t n = frames.rows;
  ForwardResult fwd = forward(params, frames);

  // Softmax cross-entropy; delta starts as d(loss)/d(logits).
  double loss = 0.0;
  Matrix delta = fwd.logits;
  for (std::size_t f = 0; f < n; ++f) {
    double* row = delta.row(f);
    const std::size_t c = delta.cols;
    double peak = row[0];
    for (std::size_t j = 1; j < c; ++j) peak = std::max(peak, row[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      row[j] = std::exp(row[j] - peak);
      sum += row[j];
    }
    const double log_sum = std::log(sum);
    const double logit_true = std::log(row[labels[f]]);  // logit - peak
    loss += log_sum - logit_true;
    const double inv = 1.0 / sum;
    for (std::size_t j = 0; j < c; ++j) row[j] *= inv / static_cast<double>(n);
    row[labels[f]] -= 1.0 / static_cast<double>(n);
  }
  loss /= static_cast<double>(n);

  LossGrad result;
  result.loss = loss;
  result.grad.layers.resize(params.layers.size());

  // Backward pass, deepest layer first.
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    const Matrix& input =
        l == 0 ? frames : fwd.trace.per_layer[l - 1];
    const LayerParams& layer = params.layers[l];
    LayerParams& g = result.grad.layers[l];
    g.weight = Matrix(layer.weight.rows, layer.weight.cols);
    g.bias.assign(layer.bias.size(), 0.0);

    for (std::size_t f = 0; f < n; ++f) {
      const double* df = delta.row(f);
      const double* xf = input.row(f);
      for (std::size_t o = 0; o < layer.weight.rows; ++o) {
        const double d = df[o];
        if (d == 0.0) continue;
        g.bias[o] += d;
        double* gw = g.weight.row(o);
        for (std::size_t i = 0; i < layer.weight.cols; ++i) gw[i] += d * xf[i];
      }
    }

    if (l > 0) {
      // Propagate through the layer and the ReLU of its input.
      Matrix next(n, layer.weight.cols);
      for (std::size_t f = 0; f < n; ++f) {
        const double* df = delta.row(f);
        double* nf = next.row(f);
        for (std::size_t o = 0; o < layer.weight.rows; ++o) {
          const double d = df[o];
          if (d == 0.0) continue;
          const double* w = layer.weight.row(o);
          for (std::size_t i = 0; i < layer.weight.cols; ++i) nf[i] += d * w[i];
        }
        const double* act = input.row(f);
        for (std::size_t i = 0; i < layer.weight.cols; ++i) {
          if (act[i] <= 0.0) nf[i] = 0.0;
        }
      }
      delta = std::move(next);
    }
  }
  return result;
}

ParamSet train_local(const ParamSet& start, const Matrix& frames,
                     const std::vector<int>& labels, const TrainConfig& cfg) {
  cfg.validate();
  if (frames.rows == 0) throw data_error("train_local: empty training data");
  if (labels.size() != frames.rows) {
    throw data_error("train_local: label count != frame count");
  }
  check_input(start, frames);

  const std::size_t n = frames.rows;
  const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);
  Rng rng(cfg.seed);
  ParamSet params = start;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Matrix batch_frames;
  std::vector<int> batch_labels;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t pos = 0; pos < n; pos += batch) {
      const std::size_t count = std::min(batch, n - pos);
      batch_frames = Matrix(count, frames.cols);
      batch_labels.resize(count);
      for (std::size_t b = 0; b < count; ++b) {
        const std::size_t src = order[pos + b];
        std::copy(frames.row(src), frames.row(src) + frames.cols,
                  batch_frames.row(b));
        batch_labels[b] = labels[src];
      }
      LossGrad lg = loss_and_grad(params, batch_frames, batch_labels);
      for (std::size_t l = 0; l < params.layers.size(); ++l) {
        LayerParams& layer = params.layers[l];
        const LayerParams& g = lg.grad.layers[l];
        for (std::size_t i = 0; i < layer.weight.data.size(); ++i) {
          layer.weight.data[i] -= cfg.learning_rate * g.weight.data[i];
        }
        for (std::size_t i = 0; i < layer.bias.size(); ++i) {
          layer.bias[i] -= cfg.learning_rate * g.bias[i];
        }
      }
    }
  }
  return params;
}

}  // namespace fedprint
