#include "tailfuse/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "tailfuse/errors.hpp"
#include "text_io.hpp"

namespace tailfuse {

using nlohmann::json;

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

// out = W x + b
void affine(const DenseLayer& layer, std::span<const double> x,
            std::vector<double>& out) {
  out.resize(static_cast<std::size_t>(layer.out_dim));
  for (int r = 0; r < layer.out_dim; ++r) {
    const double* row =
        layer.weights.data() + static_cast<std::size_t>(r) * layer.in_dim;
    double acc = layer.bias[static_cast<std::size_t>(r)];
    for (int c = 0; c < layer.in_dim; ++c) acc += row[c] * x[static_cast<std::size_t>(c)];
    out[static_cast<std::size_t>(r)] = acc;
  }
}

}  // namespace

std::size_t PathwayModel::num_parameters() const {
  std::size_t n = head.weights.size() + head.bias.size();
  for (const auto& l : encoder) n += l.weights.size() + l.bias.size();
  return n;
}

double gelu(double x) {
  return x * 0.5 * (1.0 + std::erf(x * kInvSqrt2));
}

double gelu_derivative(double x) {
  const double phi_cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
  const double phi_pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
  return phi_cdf + x * phi_pdf;
}

namespace {

DenseLayer init_layer(int in_dim, int out_dim, Rng& rng) {
  DenseLayer layer;
  layer.in_dim = in_dim;
  layer.out_dim = out_dim;
  layer.weights.resize(static_cast<std::size_t>(in_dim) *
                       static_cast<std::size_t>(out_dim));
  layer.bias.assign(static_cast<std::size_t>(out_dim), 0.0);
  const double bound = std::sqrt(6.0 / (in_dim + out_dim));
  for (double& w : layer.weights) w = rng.next_uniform(-bound, bound);
  return layer;
}

}  // namespace

PathwayModel init_model(const std::vector<int>& dims, int num_classes,
                        std::uint64_t seed) {
  if (dims.empty()) throw ConfigError("model needs at least an input width");
  if (num_classes < 2) throw ConfigError("model needs num_classes >= 2");
  for (int d : dims) {
    if (d < 1) throw ConfigError("model dimensions must be positive");
  }
  Rng rng = make_stream(seed, "init");
  PathwayModel model;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    model.encoder.push_back(init_layer(dims[i], dims[i + 1], rng));
  }
  model.head = init_layer(dims.back(), num_classes, rng);
  return model;
}

ForwardResult forward(const PathwayModel& model,
                      std::span<const double> features) {
  if (static_cast<int>(features.size()) != model.input_dim()) {
    throw ShapeError("feature width " + std::to_string(features.size()) +
                     " does not match model input " +
                     std::to_string(model.input_dim()));
  }
  std::vector<double> activ(features.begin(), features.end());
  std::vector<double> next;
  for (const DenseLayer& layer : model.encoder) {
    affine(layer, activ, next);
    for (double& v : next) v = gelu(v);
    activ.swap(next);
  }
  ForwardResult out;
  affine(model.head, activ, out.logits);
  out.probs = ProbVector{softmax(out.logits)};
  return out;
}

namespace {

TensorGrads zero_like(const DenseLayer& layer) {
  TensorGrads g;
  g.weights.assign(layer.weights.size(), 0.0);
  g.bias.assign(layer.bias.size(), 0.0);
  return g;
}

}  // namespace

BackwardResult backward(const PathwayModel& model,
                        std::span<const TrainSample> batch, double gamma,
                        FocalForm form) {
  if (batch.empty()) throw ConfigError("backward over an empty batch");

  BackwardResult result;
  for (const auto& layer : model.encoder) {
    result.grads.encoder.push_back(zero_like(layer));
  }
  result.grads.head = zero_like(model.head);

  const std::size_t depth = model.encoder.size();
  std::vector<std::vector<double>> pre(depth);    // pre-activation per layer
  std::vector<std::vector<double>> post(depth + 1);  // post[0] = input

  double loss_sum = 0.0;
  for (const TrainSample& sample : batch) {
    if (static_cast<int>(sample.features.size()) != model.input_dim()) {
      throw ShapeError("feature width mismatch in batch");
    }
    post[0].assign(sample.features.begin(), sample.features.end());
    for (std::size_t l = 0; l < depth; ++l) {
      affine(model.encoder[l], post[l], pre[l]);
      post[l + 1].resize(pre[l].size());
      for (std::size_t k = 0; k < pre[l].size(); ++k) {
        post[l + 1][k] = gelu(pre[l][k]);
      }
    }
    std::vector<double> logits;
    affine(model.head, post[depth], logits);
    const ProbVector probs{softmax(logits)};
    const Label label{sample.label};
    loss_sum += focal_loss_form(probs, label, gamma, form, &result.stats);

    std::vector<double> dlogits =
        loss_grad_logits(logits, label, gamma, form, &result.stats);

    // Head: dW += outer(dlogits, last activation), db += dlogits.
    for (int r = 0; r < model.head.out_dim; ++r) {
      const double d = dlogits[static_cast<std::size_t>(r)];
      double* grad_row = result.grads.head.weights.data() +
                         static_cast<std::size_t>(r) * model.head.in_dim;
      const double* act = post[depth].data();
      for (int c = 0; c < model.head.in_dim; ++c) grad_row[c] += d * act[c];
      result.grads.head.bias[static_cast<std::size_t>(r)] += d;
    }

    if (model.frozen_encoder || depth == 0) continue;

    // Propagate into the encoder stack.
    std::vector<double> dpost(static_cast<std::size_t>(model.head.in_dim), 0.0);
    for (int r = 0; r < model.head.out_dim; ++r) {
      const double d = dlogits[static_cast<std::size_t>(r)];
      const double* row = model.head.weights.data() +
                          static_cast<std::size_t>(r) * model.head.in_dim;
      for (int c = 0; c < model.head.in_dim; ++c) {
        dpost[static_cast<std::size_t>(c)] += d * row[c];
      }
    }
    for (std::size_t l = depth; l-- > 0;) {
      const DenseLayer& layer = model.encoder[l];
      std::vector<double> dz(static_cast<std::size_t>(layer.out_dim));
      for (int k = 0; k < layer.out_dim; ++k) {
        dz[static_cast<std::size_t>(k)] =
            dpost[static_cast<std::size_t>(k)] *
            gelu_derivative(pre[l][static_cast<std::size_t>(k)]);
      }
      TensorGrads& grads = result.grads.encoder[l];
      for (int r = 0; r < layer.out_dim; ++r) {
        const double d = dz[static_cast<std::size_t>(r)];
        double* grad_row =
            grads.weights.data() + static_cast<std::size_t>(r) * layer.in_dim;
        const double* act = post[l].data();
        for (int c = 0; c < layer.in_dim; ++c) grad_row[c] += d * act[c];
        grads.bias[static_cast<std::size_t>(r)] += d;
      }
      if (l == 0) break;  // no gradient needed past the input
      std::vector<double> dprev(static_cast<std::size_t>(layer.in_dim), 0.0);
      for (int r = 0; r < layer.out_dim; ++r) {
        const double d = dz[static_cast<std::size_t>(r)];
        const double* row =
            layer.weights.data() + static_cast<std::size_t>(r) * layer.in_dim;
        for (int c = 0; c < layer.in_dim; ++c) {
          dprev[static_cast<std::size_t>(c)] += d * row[c];
        }
      }
      dpost.swap(dprev);
    }
  }

  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  auto scale = [inv_batch](TensorGrads& g) {
    for (double& v : g.weights) v *= inv_batch;
    for (double& v : g.bias) v *= inv_batch;
  };
  for (auto& g : result.grads.encoder) scale(g);
  scale(result.grads.head);
  result.mean_loss = loss_sum * inv_batch;
  return result;
}

OptimizerState OptimizerState::init(const PathwayModel& model,
                                    AdamWConfig hyper) {
  OptimizerState state;
  state.hyper = hyper;
  auto moments_like = [](const DenseLayer& layer) {
    TensorMoments m;
    m.m_weights.assign(layer.weights.size(), 0.0);
    m.v_weights.assign(layer.weights.size(), 0.0);
    m.m_bias.assign(layer.bias.size(), 0.0);
    m.v_bias.assign(layer.bias.size(), 0.0);
    return m;
  };
  for (const auto& layer : model.encoder) {
    state.encoder.push_back(moments_like(layer));
  }
  state.head = moments_like(model.head);
  return state;
}

namespace {

void adamw_tensor(std::vector<double>& params, const std::vector<double>& grads,
                  std::vector<double>& m, std::vector<double>& v,
                  const AdamWConfig& h, double bias1, double bias2) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    if (!std::isfinite(g)) {
      throw NumericError("non-finite gradient encountered; aborting run");
    }
    if (h.weight_decay != 0.0) {
      params[i] -= h.lr * h.weight_decay * params[i];
    }
    m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g;
    v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g * g;
    const double m_hat = m[i] / bias1;
    const double v_hat = v[i] / bias2;
    params[i] -= h.lr * m_hat / (std::sqrt(v_hat) + h.eps);
  }
}

}  // namespace

void adamw_step(OptimizerState& state, PathwayModel& model,
                const ModelGrads& grads) {
  if (grads.encoder.size() != model.encoder.size()) {
    throw ShapeError("gradient/model layer count mismatch");
  }
  state.step += 1;
  const double bias1 =
      1.0 - std::pow(state.hyper.beta1, static_cast<double>(state.step));
  const double bias2 =
      1.0 - std::pow(state.hyper.beta2, static_cast<double>(state.step));
  if (!model.frozen_encoder) {
    for (std::size_t l = 0; l < model.encoder.size(); ++l) {
      adamw_tensor(model.encoder[l].weights, grads.encoder[l].weights,
                   state.encoder[l].m_weights, state.encoder[l].v_weights,
                   state.hyper, bias1, bias2);
      adamw_tensor(model.encoder[l].bias, grads.encoder[l].bias,
                   state.encoder[l].m_bias, state.encoder[l].v_bias,
                   state.hyper, bias1, bias2);
    }
  }
  adamw_tensor(model.head.weights, grads.head.weights, state.head.m_weights,
               state.head.v_weights, state.hyper, bias1, bias2);
  adamw_tensor(model.head.bias, grads.head.bias, state.head.m_bias,
               state.head.v_bias, state.hyper, bias1, bias2);
}

namespace {

double top1_on(const PathwayModel& model, const Dataset& data,
               Modality modality, const std::vector<std::size_t>& indices) {
  std::int64_t hits = 0;
  for (std::size_t i : indices) {
    const Sample& s = data.samples[i];
    const ForwardResult out = forward(model, s.features(modality));
    if (argmax_lowest(out.probs.values) == s.label) ++hits;
  }
  return 100.0 * static_cast<double>(hits) /
         static_cast<double>(indices.size());
}

}  // namespace

TrainResult train(PathwayModel model, const Dataset& data, Modality modality,
                  const GammaSchedule& schedule, const TrainConfig& config) {
  schedule.validate();
  if (config.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!data.has(modality)) {
    throw ConfigError("dataset lacks the " + to_string(modality) +
                      " modality");
  }
  if (data.feature_dim != model.input_dim()) {
    throw ShapeError("dataset feature width does not match model input");
  }
  if (data.num_classes != model.num_classes()) {
    throw ShapeError("dataset class count does not match model head");
  }

  std::vector<std::size_t> train_idx = data.split_indices(Split::train);
  if (config.merge_train_val) {
    for (std::size_t i : data.split_indices(Split::val)) {
      train_idx.push_back(i);
    }
    std::sort(train_idx.begin(), train_idx.end());
  }
  if (train_idx.empty()) throw ConfigError("train split is empty");
  const std::vector<std::size_t> val_idx =
      config.merge_train_val ? std::vector<std::size_t>{}
                             : data.split_indices(Split::val);

  OptimizerState opt = OptimizerState::init(model, config.optimizer);
  TrainResult result;
  result.trace.records.reserve(
      static_cast<std::size_t>(schedule.total_epochs));

  std::vector<TrainSample> batch;
  batch.reserve(static_cast<std::size_t>(config.batch_size));
  for (int epoch = 0; epoch < schedule.total_epochs; ++epoch) {
    const double gamma =
        config.loss == LossKind::ce ? 0.0 : gamma_at(schedule, epoch);

    std::vector<std::size_t> order = train_idx;
    Rng shuffle_rng = make_stream(config.seed, "shuffle",
                                  static_cast<std::uint64_t>(epoch));
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t begin = 0; begin < order.size();
         begin += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end =
          std::min(order.size(), begin + static_cast<std::size_t>(config.batch_size));
      batch.clear();
      for (std::size_t i = begin; i < end; ++i) {
        const Sample& s = data.samples[order[i]];
        batch.push_back(TrainSample{s.features(modality), s.label});
      }
      BackwardResult back = backward(model, batch, gamma, config.focal_form);
      adamw_step(opt, model, back.grads);
      loss_sum += back.mean_loss * static_cast<double>(batch.size());
      seen += batch.size();
      result.trace.clamp_events += back.stats.clamped;
      result.trace.singular_grad_events += back.stats.singular_grad;
    }

    EpochRecord record;
    record.epoch = epoch;
    record.gamma = gamma;
    record.mean_train_loss = loss_sum / static_cast<double>(seen);
    if (!val_idx.empty()) {
      record.val_top1 = top1_on(model, data, modality, val_idx);
    }
    result.trace.records.push_back(record);
  }

  result.model = std::move(model);
  return result;
}

PredictionTable predict(const PathwayModel& model, const Dataset& data,
                        Modality modality, Split split) {
  PredictionTable table;
  table.num_classes = model.num_classes();
  for (const Sample& s : data.samples) {
    if (s.split != split) continue;
    const ForwardResult out = forward(model, s.features(modality));
    table.rows.push_back(PredictionRow{s.id, s.label, out.probs.values});
  }
  return table;
}

// ---------------------------------------------------------------------------
// Checkpoint I/O
// ---------------------------------------------------------------------------

namespace {

constexpr int kCheckpointVersion = 1;

json layer_to_json(const DenseLayer& layer) {
  return json{{"in_dim", layer.in_dim},
              {"out_dim", layer.out_dim},
              {"weights", layer.weights},
              {"bias", layer.bias}};
}

DenseLayer layer_from_json(const json& j) {
  DenseLayer layer;
  layer.in_dim = j.at("in_dim").get<int>();
  layer.out_dim = j.at("out_dim").get<int>();
  layer.weights = j.at("weights").get<std::vector<double>>();
  layer.bias = j.at("bias").get<std::vector<double>>();
  if (static_cast<int>(layer.weights.size()) != layer.in_dim * layer.out_dim ||
      static_cast<int>(layer.bias.size()) != layer.out_dim) {
    throw DataError("checkpoint layer has inconsistent shapes");
  }
  return layer;
}

}  // namespace

void save_checkpoint(const PathwayModel& model, const std::string& path,
                     const std::string& fingerprint) {
  json encoder = json::array();
  for (const auto& layer : model.encoder) encoder.push_back(layer_to_json(layer));
  const json j{{"version", kCheckpointVersion},
               {"fingerprint", fingerprint},
               {"frozen_encoder", model.frozen_encoder},
               {"encoder", std::move(encoder)},
               {"head", layer_to_json(model.head)}};
  detail::write_file(path, j.dump(2) + "\n");
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  const json j = json::parse(detail::read_file(path));
  if (j.at("version").get<int>() != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version in " + path);
  }
  LoadedCheckpoint out;
  out.fingerprint = j.at("fingerprint").get<std::string>();
  out.model.frozen_encoder = j.at("frozen_encoder").get<bool>();
  for (const auto& layer : j.at("encoder")) {
    out.model.encoder.push_back(layer_from_json(layer));
  }
  out.model.head = layer_from_json(j.at("head"));
  return out;
}

}  // namespace tailfuse
