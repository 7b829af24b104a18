#include "feddist/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "feddist/rng.hpp"

namespace feddist {

namespace {

constexpr double kLogClamp = 1e-12;

struct LayerDims {
  std::size_t in;
  std::size_t out;
};

std::vector<LayerDims> layer_dims(const Architecture& arch) {
  std::vector<LayerDims> dims;
  std::size_t in = arch.input_dim;
  for (std::size_t width : arch.hidden) {
    dims.push_back({in, width});
    in = width;
  }
  dims.push_back({in, arch.classes});
  return dims;
}

double activate(double z, Activation act) {
  return act == Activation::kTanh ? std::tanh(z) : (z > 0.0 ? z : 0.0);
}

// derivative expressed via pre-activation z and activation a = act(z)
double activate_grad(double z, double a, Activation act) {
  return act == Activation::kTanh ? 1.0 - a * a : (z > 0.0 ? 1.0 : 0.0);
}

std::vector<double> softmax(const std::vector<double>& logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    sum += out[i];
  }
  for (double& x : out) x /= sum;
  return out;
}

// Forward pass keeping pre-activations and activations per layer for the
// backward sweep. activations[0] is the input; logits are not activated.
struct ForwardTrace {
  std::vector<std::vector<double>> pre;   // z per layer
  std::vector<std::vector<double>> act;   // act[0] = x, act[l] = a_l
  std::vector<double> probs;
};

ForwardTrace forward_trace(const ModelParams& params,
                           std::span<const double> x) {
  const auto dims = layer_dims(params.arch);
  ForwardTrace tr;
  tr.act.emplace_back(x.begin(), x.end());
  std::size_t offset = 0;
  for (std::size_t l = 0; l < dims.size(); ++l) {
    const auto [in, out] = dims[l];
    const double* w = params.values.data() + offset;
    const double* b = w + in * out;
    const std::vector<double>& prev = tr.act.back();
    std::vector<double> z(out);
    for (std::size_t i = 0; i < out; ++i) {
      double acc = b[i];
      const double* row = w + i * in;
      for (std::size_t j = 0; j < in; ++j) acc += row[j] * prev[j];
      z[i] = acc;
    }
    const bool last = (l + 1 == dims.size());
    std::vector<double> a(out);
    if (last) {
      a = z;  // logits stay linear; softmax applied below
    } else {
      for (std::size_t i = 0; i < out; ++i) a[i] = activate(z[i], params.arch.activation);
    }
    tr.pre.push_back(std::move(z));
    tr.act.push_back(std::move(a));
    offset += in * out + out;
  }
  tr.probs = softmax(tr.act.back());
  return tr;
}

// Backward sweep from a gradient w.r.t. the logits; accumulates the
// parameter gradient into grad_out (same layout as the parameter vector).
void backward_from_logits(const ModelParams& params, const ForwardTrace& tr,
                          std::vector<double> delta,
                          std::vector<double>& grad_out) {
  const auto dims = layer_dims(params.arch);
  std::vector<std::size_t> offsets(dims.size());
  std::size_t offset = 0;
  for (std::size_t l = 0; l < dims.size(); ++l) {
    offsets[l] = offset;
    offset += dims[l].in * dims[l].out + dims[l].out;
  }
  for (std::size_t li = dims.size(); li-- > 0;) {
    const auto [in, out] = dims[li];
    const std::vector<double>& input = tr.act[li];
    double* gw = grad_out.data() + offsets[li];
    double* gb = gw + in * out;
    for (std::size_t i = 0; i < out; ++i) {
      const double d = delta[i];
      double* row = gw + i * in;
      for (std::size_t j = 0; j < in; ++j) row[j] += d * input[j];
      gb[i] += d;
    }
    if (li == 0) break;
    const double* w = params.values.data() + offsets[li];
    std::vector<double> prev_delta(in, 0.0);
    for (std::size_t i = 0; i < out; ++i) {
      const double d = delta[i];
      const double* row = w + i * in;
      for (std::size_t j = 0; j < in; ++j) prev_delta[j] += row[j] * d;
    }
    const std::vector<double>& z = tr.pre[li - 1];
    const std::vector<double>& a = tr.act[li];
    for (std::size_t j = 0; j < in; ++j) {
      prev_delta[j] *= activate_grad(z[j], a[j], params.arch.activation);
    }
    delta = std::move(prev_delta);
  }
}

// dL/dlogits for one example
std::vector<double> logit_delta(const ForwardTrace& tr, const ProbVector& target,
                                LossKind kind) {
  const std::size_t c = tr.probs.size();
  std::vector<double> delta(c);
  if (kind == LossKind::kCel) {
    // CEL with softmax collapses to h - y at the logits
    for (std::size_t i = 0; i < c; ++i) delta[i] = tr.probs[i] - target[i];
  } else {
    // MSE: pull (h - y) back through the softmax Jacobian
    double dot = 0.0;
    for (std::size_t i = 0; i < c; ++i) dot += (tr.probs[i] - target[i]) * tr.probs[i];
    for (std::size_t j = 0; j < c; ++j) {
      delta[j] = tr.probs[j] * ((tr.probs[j] - target[j]) - dot);
    }
  }
  return delta;
}

double lr_at_epoch(const TrainSchedule& s, std::size_t epoch) {
  if (s.decay == TrainSchedule::Decay::kOwnEpochs) {
    return s.learning_rate *
           (1.0 - static_cast<double>(epoch) / static_cast<double>(s.epochs));
  }
  const std::size_t global = s.epoch_offset + epoch;
  const double budget = static_cast<double>(
      std::max<std::size_t>(s.global_epoch_budget, 1));
  return s.learning_rate * std::max(0.0, 1.0 - static_cast<double>(global) / budget);
}

}  // namespace

std::size_t Architecture::param_count() const {
  std::size_t count = 0;
  std::size_t in = input_dim;
  for (std::size_t width : hidden) {
    count += in * width + width;
    in = width;
  }
  count += in * classes + classes;
  return count;
}

void Architecture::check() const {
  if (input_dim < 1) throw std::invalid_argument("architecture: input_dim >= 1");
  if (classes < 2) throw std::invalid_argument("architecture: classes >= 2");
  for (std::size_t w : hidden) {
    if (w < 1) throw std::invalid_argument("architecture: hidden widths >= 1");
  }
}

void ModelParams::check() const {
  arch.check();
  if (values.size() != arch.param_count()) {
    throw std::invalid_argument("model params: length does not match architecture");
  }
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("model params: non-finite entry");
    }
  }
}

void TrainSchedule::check() const {
  if (epochs < 1) throw std::invalid_argument("schedule: epochs >= 1");
  if (batch_size < 1) throw std::invalid_argument("schedule: batch_size >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("schedule: lr > 0");
  if (momentum < 0.0 || momentum >= 1.0) {
    throw std::invalid_argument("schedule: momentum in [0, 1)");
  }
  if (weight_decay < 0.0) throw std::invalid_argument("schedule: weight_decay >= 0");
  if (decay == Decay::kGlobalBudget && global_epoch_budget == 0) {
    throw std::invalid_argument("schedule: global budget required for global decay");
  }
}

ModelParams init(const Architecture& arch, std::uint64_t seed) {
  arch.check();
  Rng rng(derive_seed(seed, {0x1217}));
  ModelParams params{arch, std::vector<double>(arch.param_count(), 0.0)};
  std::size_t offset = 0;
  for (const auto [in, out] : layer_dims(arch)) {
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    for (std::size_t i = 0; i < in * out; ++i) {
      params.values[offset + i] = rng.uniform(-limit, limit);
    }
    // biases stay zero
    offset += in * out + out;
  }
  return params;
}

ProbVector forward(const ModelParams& params, std::span<const double> x) {
  if (x.size() != params.arch.input_dim) {
    throw DimensionMismatchError("forward: input dimension mismatch");
  }
  return ProbVector::validate(forward_trace(params, x).probs);
}

double loss(const ModelParams& params, std::span<const double> x,
            const ProbVector& target, LossKind kind) {
  const ForwardTrace tr = forward_trace(params, x);
  if (target.size() != tr.probs.size()) {
    throw DimensionMismatchError("loss: target dimension mismatch");
  }
  if (kind == LossKind::kCel) {
    double acc = 0.0;
    for (std::size_t i = 0; i < tr.probs.size(); ++i) {
      acc -= target[i] * std::log(std::max(tr.probs[i], kLogClamp));
    }
    return acc;
  }
  double sq = 0.0;
  for (std::size_t i = 0; i < tr.probs.size(); ++i) {
    const double d = tr.probs[i] - target[i];
    sq += d * d;
  }
  return 0.5 * sq;
}

std::vector<double> grad(const ModelParams& params,
                         std::span<const SoftExample> batch, LossKind kind) {
  if (batch.empty()) throw EmptyInputError("grad: empty batch");
  std::vector<double> g(params.values.size(), 0.0);
  for (const SoftExample& ex : batch) {
    const ForwardTrace tr = forward_trace(params, ex.features);
    backward_from_logits(params, tr, logit_delta(tr, ex.target, kind), g);
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (double& x : g) x *= inv;
  return g;
}

Matrix jacobian(const ModelParams& params, std::span<const double> x,
                JacobianOf of, std::size_t param_limit) {
  const std::size_t p = params.values.size();
  if (p > param_limit) {
    throw ArchTooLargeError("jacobian: parameter count exceeds limit");
  }
  const ForwardTrace tr = forward_trace(params, x);
  const std::size_t c = params.arch.classes;
  Matrix jac(c, p);
  std::vector<double> row(p, 0.0);
  for (std::size_t i = 0; i < c; ++i) {
    std::fill(row.begin(), row.end(), 0.0);
    std::vector<double> delta(c, 0.0);
    if (of == JacobianOf::kLogits) {
      delta[i] = 1.0;
    } else {
      // row i of the softmax Jacobian: h_i * (e_i - h)
      for (std::size_t j = 0; j < c; ++j) {
        delta[j] = tr.probs[i] * ((i == j ? 1.0 : 0.0) - tr.probs[j]);
      }
    }
    backward_from_logits(params, tr, std::move(delta), row);
    for (std::size_t j = 0; j < p; ++j) jac.at(i, j) = row[j];
  }
  return jac;
}

ModelParams train(ModelParams params, std::span<const SoftExample> dataset,
                  const TrainSchedule& schedule, std::uint64_t seed) {
  params.check();
  schedule.check();
  if (dataset.empty()) throw EmptyInputError("train: empty dataset");

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> velocity(params.values.size(), 0.0);
  std::vector<SoftExample> batch;

  for (std::size_t epoch = 0; epoch < schedule.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(seed, {0x5f17, epoch}));
    shuffle_rng.shuffle(order);
    const double lr = lr_at_epoch(schedule, epoch);
    for (std::size_t start = 0; start < order.size();
         start += schedule.batch_size) {
      const std::size_t end = std::min(order.size(), start + schedule.batch_size);
      batch.clear();
      for (std::size_t k = start; k < end; ++k) batch.push_back(dataset[order[k]]);
      std::vector<double> g = grad(params, batch, schedule.loss);
      for (std::size_t i = 0; i < params.values.size(); ++i) {
        const double step = g[i] + schedule.weight_decay * params.values[i];
        velocity[i] = schedule.momentum * velocity[i] + step;
        params.values[i] -= lr * velocity[i];
        if (!std::isfinite(params.values[i])) {
          throw NonFiniteLossError("training diverged: non-finite parameter");
        }
      }
    }
  }
  return params;
}

}  // namespace feddist
