#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tailfuse/data.hpp"
#include "tailfuse/loss.hpp"
#include "tailfuse/eval.hpp"
#include "tailfuse/schedule.hpp"

namespace tailfuse {

struct DenseLayer {
  int in_dim = 0;
  int out_dim = 0;
  std::vector<double> weights;  ///< row-major, out_dim x in_dim
  std::vector<double> bias;     ///< out_dim
};

/// One modality's encoder + classifier stack. Encoder layers apply GELU;
/// the head produces logits.
struct PathwayModel {
  std::vector<DenseLayer> encoder;
  DenseLayer head;
  bool frozen_encoder = false;

  int input_dim() const {
    return encoder.empty() ? head.in_dim : encoder.front().in_dim;
  }
  int num_classes() const { return head.out_dim; }
  std::size_t num_parameters() const;
};

/// Exact Gaussian-error linear unit, x * Phi(x) with Phi from erf.
double gelu(double x);
double gelu_derivative(double x);

/// dims[0] is the input width; the remaining entries are hidden widths.
/// Weights are drawn uniformly within the fan-in/fan-out bound
/// sqrt(6 / (d_in + d_out)); biases start at zero. Deterministic in seed.
PathwayModel init_model(const std::vector<int>& dims, int num_classes,
                        std::uint64_t seed);

struct ForwardResult {
  std::vector<double> logits;
  ProbVector probs;
};
ForwardResult forward(const PathwayModel& model,
                      std::span<const double> features);

struct TensorGrads {
  std::vector<double> weights;
  std::vector<double> bias;
};
struct ModelGrads {
  std::vector<TensorGrads> encoder;
  TensorGrads head;
};

struct TrainSample {
  std::span<const double> features;
  int label = 0;
};

struct BackwardResult {
  ModelGrads grads;
  double mean_loss = 0.0;
  LossStats stats;
};

/// Gradients of the batch-mean focal loss w.r.t. every trainable parameter.
/// Encoder gradients are zeroed when the encoder is frozen.
BackwardResult backward(const PathwayModel& model,
                        std::span<const TrainSample> batch, double gamma,
                        FocalForm form = FocalForm::ground_truth);

struct AdamWConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

struct TensorMoments {
  std::vector<double> m_weights, v_weights, m_bias, v_bias;
};

struct OptimizerState {
  AdamWConfig hyper;
  std::int64_t step = 0;
  std::vector<TensorMoments> encoder;
  TensorMoments head;

  static OptimizerState init(const PathwayModel& model, AdamWConfig hyper);
};

/// One decoupled-weight-decay adaptive step: the decay w -= lr*wd*w is applied
/// separately from the bias-corrected moment update. Frozen encoder tensors
/// are skipped entirely. Throws NumericError on non-finite gradients.
void adamw_step(OptimizerState& state, PathwayModel& model,
                const ModelGrads& grads);

struct EpochRecord {
  int epoch = 0;
  double gamma = 0.0;
  double mean_train_loss = 0.0;
  std::optional<double> val_top1;
};

struct TrainTrace {
  std::vector<EpochRecord> records;
  std::uint64_t clamp_events = 0;
  std::uint64_t singular_grad_events = 0;
};

struct TrainConfig {
  int batch_size = 32;
  AdamWConfig optimizer;
  LossKind loss = LossKind::focal;
  FocalForm focal_form = FocalForm::ground_truth;
  bool merge_train_val = false;
  std::uint64_t seed = 0;  ///< run seed; shuffle substreams derive from it
};

struct TrainResult {
  PathwayModel model;
  TrainTrace trace;
};

/// Epoch-driven loop: per epoch recompute gamma, shuffle the train split with
/// a per-epoch substream of the run seed, and take one optimizer step per
/// mini-batch. CE runs use gamma = 0 throughout.
TrainResult train(PathwayModel model, const Dataset& data, Modality modality,
                  const GammaSchedule& schedule, const TrainConfig& config);

/// Class-probability rows for every sample of `split`, ordered as in the
/// dataset, with ids and true labels carried through.
PredictionTable predict(const PathwayModel& model, const Dataset& data,
                        Modality modality, Split split);

/// Versioned JSON checkpoint: dims, class count, parameters, fingerprint.
void save_checkpoint(const PathwayModel& model, const std::string& path,
                     const std::string& fingerprint);
struct LoadedCheckpoint {
  PathwayModel model;
  std::string fingerprint;
};
LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace tailfuse
