#pragma once

#include <cstdint>
#include <iosfwd>
#include <variant>
#include <vector>

#include "ensdiv/mat.hpp"
#include "ensdiv/rng.hpp"

namespace ensdiv {

/// Fully connected net: ReLU on hidden layers, identity on the output layer,
/// so forward emits raw scores and any normalization happens downstream.
struct MlpConfig {
  std::vector<std::size_t> layer_sizes;  // input, hidden..., output

  void validate() const;
  std::size_t input_size() const { return layer_sizes.front(); }
  std::size_t output_size() const { return layer_sizes.back(); }
  std::size_t num_layers() const { return layer_sizes.size() - 1; }
};

struct MlpParams {
  std::vector<Mat> weights;                 // layer l: (out x in)
  std::vector<std::vector<double>> biases;  // layer l: out

  std::size_t num_layers() const { return weights.size(); }
};

using MlpGrads = MlpParams;

/// Per-batch cache from a forward pass, consumed by mlp_backward.
struct ForwardTrace {
  Mat input;
  std::vector<Mat> pre_acts;     // one per layer
  std::vector<Mat> hidden_acts;  // relu(pre_acts[l]) for hidden layers only
};

/// He-normal weights (std = sqrt(2/fan_in)), zero biases.
MlpParams init_mlp(const MlpConfig& config, Rng& rng);

std::pair<Mat, ForwardTrace> mlp_forward(const MlpParams& params, const Mat& x);

/// Gradients of sum(grad_scores * scores) over the batch with respect to
/// every parameter. ReLU subgradient at 0 is taken as 0.
MlpGrads mlp_backward(const MlpParams& params, const ForwardTrace& trace, const Mat& grad_scores);

MlpGrads zero_grads(const MlpParams& params);
void accumulate_grads(MlpGrads& into, const MlpGrads& g, double factor = 1.0);

struct SgdMomentum {
  double lr = 0.01;
  double momentum = 0.9;
};

struct Adam {
  double lr = 0.001;
  double b1 = 0.9;
  double b2 = 0.999;
  double eps = 1e-8;
};

using Optimizer = std::variant<SgdMomentum, Adam>;

double optimizer_lr(const Optimizer& opt);
Optimizer with_lr(const Optimizer& opt, double lr);

struct OptState {
  std::vector<Mat> w_m, w_v;  // SGD uses w_m as velocity; Adam uses both
  std::vector<std::vector<double>> b_m, b_v;
  long step = 0;
};

OptState init_opt_state(const MlpParams& params);

/// One optimizer step. Weight decay (if nonzero) is added to the gradient
/// before the update.
void apply_update(MlpParams& params, const MlpGrads& grads, OptState& state, const Optimizer& opt,
                  double weight_decay = 0.0);

void save_mlp(std::ostream& os, const MlpParams& params);
MlpParams load_mlp(std::istream& is);

}  // namespace ensdiv
