#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "alol/dataset.hpp"
#include "alol/errors.hpp"
#include "alol/metrics.hpp"
#include "alol/rng.hpp"

namespace alol {

enum class LearnerFamily { LinearSoftmax, Mlp };

constexpr std::string_view to_string(LearnerFamily f) noexcept {
  return f == LearnerFamily::LinearSoftmax ? "linear_softmax" : "mlp";
}

inline constexpr std::size_t kBatchSize = 8;

/// Architecture and optimizer settings. Sequence payloads are classified per
/// token with shared parameters.
struct LearnerSpec {
  LearnerFamily family = LearnerFamily::LinearSoftmax;
  std::size_t input_dim = 1;
  std::size_t class_count = 2;
  std::size_t hidden_dim = 16;  // Mlp only
  double learning_rate = 0.1;
  std::size_t max_epochs = 200;
  std::size_t patience = 5;
  /// Early stopping is not consulted before this many epochs.
  std::size_t min_epochs = 0;
  double stop_epsilon = 1e-4;
  double init_scale = 0.1;
  /// Step size for epoch e (1-based) is learning_rate / (1 + lr_decay * (e - 1)).
  double lr_decay = 0.0;
  /// L2 penalty added to every parameter's gradient.
  double weight_decay = 0.0;
  /// Half-width of the uniform jitter applied to the starting parameters of
  /// a fine-tune. Zero means fine-tuning differs across seeds only through
  /// shuffle order.
  double finetune_perturbation = 0.0;
  /// Early-stopping signal measured on the eval examples after each epoch.
  MetricKind stop_metric = MetricKind::Accuracy;
  /// Use -loss(eval) instead of stop_metric as the early-stopping signal.
  bool stop_on_eval_loss = false;

  void validate() const {
    auto fail = [](const std::string& what) { throw Error(ErrorKind::Schema, "learner: " + what); };
    if (input_dim < 1 || class_count < 1) fail("input_dim and class_count must be >= 1");
    if (family == LearnerFamily::Mlp && hidden_dim < 1) fail("hidden_dim must be >= 1");
    if (!(learning_rate > 0.0)) fail("learning_rate must be > 0");
    if (max_epochs < 1) fail("max_epochs must be >= 1");
    if (min_epochs > max_epochs) fail("min_epochs must not exceed max_epochs");
    if (patience < 1) fail("patience must be >= 1");
    if (!(stop_epsilon > 0.0)) fail("stop_epsilon must be > 0");
    if (!(init_scale > 0.0)) fail("init_scale must be > 0");
    if (lr_decay < 0.0) fail("lr_decay must be >= 0");
    if (weight_decay < 0.0) fail("weight_decay must be >= 0");
    if (finetune_perturbation < 0.0) fail("finetune_perturbation must be >= 0");
  }

  friend bool operator==(const LearnerSpec&, const LearnerSpec&) = default;
};

constexpr std::size_t parameter_count(const LearnerSpec& s) noexcept {
  if (s.family == LearnerFamily::LinearSoftmax) return s.class_count * (s.input_dim + 1);
  return s.hidden_dim * (s.input_dim + 1) + s.class_count * (s.hidden_dim + 1);
}

/// Parameter snapshot. Treated as an immutable value once returned.
struct ModelState {
  LearnerSpec spec;
  std::vector<double> parameters;
  std::vector<std::uint64_t> seed_lineage;
  std::size_t epochs_run = 0;
};

/// FNV-1a over the little-endian bytes of the parameter vector.
inline std::uint64_t fingerprint(std::span<const double> params) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : params) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xFF;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

inline std::string fingerprint_hex(std::uint64_t h) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::uint64_t parse_fingerprint_hex(const std::string& text) {
  std::size_t used = 0;
  std::uint64_t h = 0;
  try {
    h = std::stoull(text, &used, 16);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || text.empty()) {
    throw Error(ErrorKind::Schema, "bad fingerprint '" + text + "'");
  }
  return h;
}

inline void write_parameters(const ModelState& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path);
  for (double v : model.parameters) {
    const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    char bytes[8];
    for (int b = 0; b < 8; ++b) bytes[b] = static_cast<char>((bits >> (8 * b)) & 0xFF);
    out.write(bytes, 8);
  }
}

inline std::vector<double> read_parameters(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path);
  std::vector<double> params;
  unsigned char bytes[8];
  while (in.read(reinterpret_cast<char*>(bytes), 8)) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
    params.push_back(std::bit_cast<double>(bits));
  }
  return params;
}

/// Records per-epoch eval scores and signals when `patience` consecutive
/// epochs failed to beat the best score by at least `epsilon`.
class EarlyStopping {
 public:
  EarlyStopping(std::size_t patience, double epsilon) : patience_(patience), epsilon_(epsilon) {}

  bool update(double score) {
    ++epochs_;
    if (epochs_ == 1 || score >= best_ + epsilon_) {
      best_ = std::max(best_, score);
      stale_ = 0;
    } else {
      ++stale_;
    }
    return stale_ >= patience_;
  }

  double best() const noexcept { return best_; }
  std::size_t epochs() const noexcept { return epochs_; }

 private:
  std::size_t patience_;
  double epsilon_;
  double best_ = -std::numeric_limits<double>::infinity();
  std::size_t stale_ = 0;
  std::size_t epochs_ = 0;
};

namespace detail {

struct Instance {
  const double* x;
  int y;
};

inline void check_dims(const LearnerSpec& spec, std::span<const Example* const> examples) {
  for (const Example* ex : examples) {
    for (std::size_t t = 0; t < ex->tokens.size(); ++t) {
      if (ex->tokens[t].size() != spec.input_dim) {
        throw Error(ErrorKind::SpecMismatch,
                    "example " + std::to_string(ex->id) + " has dimension " +
                        std::to_string(ex->tokens[t].size()) + ", learner expects " +
                        std::to_string(spec.input_dim));
      }
      if (t < ex->labels.size() &&
          static_cast<std::size_t>(ex->labels[t]) >= spec.class_count) {
        throw Error(ErrorKind::SpecMismatch, "example " + std::to_string(ex->id) +
                                                 " has label beyond class_count");
      }
    }
  }
}

inline std::vector<Instance> flatten(std::span<const Example* const> examples) {
  std::vector<Instance> out;
  for (const Example* ex : examples) {
    for (std::size_t t = 0; t < ex->tokens.size(); ++t) {
      out.push_back({ex->tokens[t].data(), ex->labels[t]});
    }
  }
  return out;
}

/// Forward/backward passes over a flat parameter vector.
///
/// LinearSoftmax layout: W[C][D], b[C].
/// Mlp layout: W1[H][D], b1[H], W2[C][H], b2[C], tanh hidden units.
class Network {
 public:
  explicit Network(const LearnerSpec& spec)
      : spec_(spec), hidden_(spec.hidden_dim), probs_(spec.class_count),
        delta_(spec.hidden_dim) {}

  /// Writes softmax probabilities for x into probs().
  void forward(std::span<const double> params, const double* x) {
    const std::size_t D = spec_.input_dim, C = spec_.class_count;
    if (spec_.family == LearnerFamily::LinearSoftmax) {
      const double* W = params.data();
      const double* b = W + C * D;
      for (std::size_t c = 0; c < C; ++c) {
        double z = b[c];
        for (std::size_t d = 0; d < D; ++d) z += W[c * D + d] * x[d];
        probs_[c] = z;
      }
    } else {
      const std::size_t H = spec_.hidden_dim;
      const double* W1 = params.data();
      const double* b1 = W1 + H * D;
      const double* W2 = b1 + H;
      const double* b2 = W2 + C * H;
      for (std::size_t h = 0; h < H; ++h) {
        double z = b1[h];
        for (std::size_t d = 0; d < D; ++d) z += W1[h * D + d] * x[d];
        hidden_[h] = std::tanh(z);
      }
      for (std::size_t c = 0; c < C; ++c) {
        double z = b2[c];
        for (std::size_t h = 0; h < H; ++h) z += W2[c * H + h] * hidden_[h];
        probs_[c] = z;
      }
    }
    softmax_in_place(probs_);
  }

  /// Adds d(-log p_y)/d(params) to grad and returns -log p_y.
  double accumulate(std::span<const double> params, const Instance& in, std::span<double> grad) {
    forward(params, in.x);
    const std::size_t D = spec_.input_dim, C = spec_.class_count;
    const double loss = -std::log(std::max(probs_[static_cast<std::size_t>(in.y)],
                                           std::numeric_limits<double>::min()));
    // probs_ becomes dLoss/dlogits.
    probs_[static_cast<std::size_t>(in.y)] -= 1.0;
    if (spec_.family == LearnerFamily::LinearSoftmax) {
      double* gW = grad.data();
      double* gb = gW + C * D;
      for (std::size_t c = 0; c < C; ++c) {
        const double g = probs_[c];
        for (std::size_t d = 0; d < D; ++d) gW[c * D + d] += g * in.x[d];
        gb[c] += g;
      }
    } else {
      const std::size_t H = spec_.hidden_dim;
      const double* W2 = params.data() + H * D + H;
      double* gW1 = grad.data();
      double* gb1 = gW1 + H * D;
      double* gW2 = gb1 + H;
      double* gb2 = gW2 + C * H;
      std::fill(delta_.begin(), delta_.end(), 0.0);
      for (std::size_t c = 0; c < C; ++c) {
        const double g = probs_[c];
        for (std::size_t h = 0; h < H; ++h) {
          gW2[c * H + h] += g * hidden_[h];
          delta_[h] += g * W2[c * H + h];
        }
        gb2[c] += g;
      }
      for (std::size_t h = 0; h < H; ++h) {
        const double g = delta_[h] * (1.0 - hidden_[h] * hidden_[h]);
        for (std::size_t d = 0; d < D; ++d) gW1[h * D + d] += g * in.x[d];
        gb1[h] += g;
      }
    }
    return loss;
  }

  const std::vector<double>& probs() const noexcept { return probs_; }

  int argmax() const noexcept {
    return static_cast<int>(std::max_element(probs_.begin(), probs_.end()) - probs_.begin());
  }

  static void softmax_in_place(std::vector<double>& z) {
    const double m = *std::max_element(z.begin(), z.end());
    double sum = 0;
    for (double& v : z) {
      v = std::exp(v - m);
      sum += v;
    }
    for (double& v : z) v /= sum;
  }

 private:
  const LearnerSpec& spec_;
  std::vector<double> hidden_;
  std::vector<double> probs_;
  std::vector<double> delta_;
};

inline double evaluate_params(const LearnerSpec& spec, std::span<const double> params,
                              std::span<const Example* const> examples, MetricKind metric) {
  if (examples.empty()) throw Error(ErrorKind::EmptyEval, "no examples to evaluate");
  Network net(spec);
  std::vector<LabelSeq> preds, golds;
  preds.reserve(examples.size());
  golds.reserve(examples.size());
  for (const Example* ex : examples) {
    LabelSeq p(ex->tokens.size());
    for (std::size_t t = 0; t < ex->tokens.size(); ++t) {
      net.forward(params, ex->tokens[t].data());
      p[t] = net.argmax();
    }
    preds.push_back(std::move(p));
    golds.push_back(ex->labels);
  }
  return score(preds, golds, metric);
}

inline double mean_loss(const LearnerSpec& spec, std::span<const double> params,
                        std::span<const Example* const> examples) {
  Network net(spec);
  double total = 0;
  std::size_t count = 0;
  for (const Example* ex : examples) {
    for (std::size_t t = 0; t < ex->tokens.size(); ++t) {
      net.forward(params, ex->tokens[t].data());
      total -= std::log(std::max(net.probs()[static_cast<std::size_t>(ex->labels[t])],
                                 std::numeric_limits<double>::min()));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

/// Plain mini-batch SGD with early stopping on the eval metric. Returns the
/// number of epochs run.
inline std::size_t run_sgd(const LearnerSpec& spec, std::vector<double>& params,
                           std::span<const Example* const> train,
                           std::span<const Example* const> eval, SplitMix64& shuffle_rng) {
  const std::vector<Instance> data = flatten(train);
  std::vector<std::size_t> order(data.size());
  std::vector<double> grad(params.size());
  Network net(spec);
  EarlyStopping stopper(spec.patience, spec.stop_epsilon);
  std::size_t epoch = 0;
  while (epoch < spec.max_epochs) {
    ++epoch;
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(order.begin(), order.end(), shuffle_rng);
    const double step =
        spec.learning_rate / (1.0 + spec.lr_decay * static_cast<double>(epoch - 1));
    for (std::size_t start = 0; start < order.size(); start += kBatchSize) {
      const std::size_t stop = std::min(order.size(), start + kBatchSize);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t k = start; k < stop; ++k) net.accumulate(params, data[order[k]], grad);
      const double inv = 1.0 / static_cast<double>(stop - start);
      for (std::size_t p = 0; p < params.size(); ++p) {
        params[p] -= step * (grad[p] * inv + spec.weight_decay * params[p]);
      }
    }
    if (eval.empty()) continue;
    const double signal = spec.stop_on_eval_loss ? -mean_loss(spec, params, eval)
                                                 : evaluate_params(spec, params, eval, spec.stop_metric);
    if (stopper.update(signal) && epoch >= spec.min_epochs) break;
  }
  return epoch;
}

}  // namespace detail

/// Seeded initialization followed by SGD on `labeled`. An empty labeled set
/// returns the initialization untouched.
inline ModelState train(const LearnerSpec& spec, std::span<const Example* const> labeled,
                        std::span<const Example* const> eval, std::uint64_t seed) {
  spec.validate();
  detail::check_dims(spec, labeled);
  detail::check_dims(spec, eval);
  const std::uint64_t init_seed = derive_seed(seed, 0, 0, 0, Purpose::Init);
  const std::uint64_t shuffle_seed = derive_seed(seed, 0, 0, 0, Purpose::Shuffle);

  ModelState model{spec, std::vector<double>(parameter_count(spec)), {init_seed, shuffle_seed}, 0};
  SplitMix64 init_rng(init_seed);
  for (double& p : model.parameters) p = init_rng.uniform(-spec.init_scale, spec.init_scale);
  if (labeled.empty()) return model;

  SplitMix64 shuffle_rng(shuffle_seed);
  model.epochs_run = detail::run_sgd(spec, model.parameters, labeled, eval, shuffle_rng);
  return model;
}

/// Continues SGD from base.parameters (optionally jittered) on `examples`.
inline ModelState fine_tune(const ModelState& base, std::span<const Example* const> examples,
                            std::span<const Example* const> eval, std::uint64_t seed) {
  if (examples.empty()) throw Error(ErrorKind::EmptyFineTune, "fine-tune needs examples");
  const LearnerSpec& spec = base.spec;
  detail::check_dims(spec, examples);
  detail::check_dims(spec, eval);
  const std::uint64_t init_seed = derive_seed(seed, 0, 0, 0, Purpose::Init);
  const std::uint64_t shuffle_seed = derive_seed(seed, 0, 0, 0, Purpose::Shuffle);

  ModelState model{spec, base.parameters, base.seed_lineage, 0};
  model.seed_lineage.push_back(init_seed);
  model.seed_lineage.push_back(shuffle_seed);
  if (spec.finetune_perturbation > 0.0) {
    SplitMix64 init_rng(init_seed);
    for (double& p : model.parameters) {
      p += init_rng.uniform(-spec.finetune_perturbation, spec.finetune_perturbation);
    }
  }
  SplitMix64 shuffle_rng(shuffle_seed);
  model.epochs_run = detail::run_sgd(spec, model.parameters, examples, eval, shuffle_rng);
  return model;
}

/// One softmax distribution per token.
inline std::vector<std::vector<double>> predict_distribution(const ModelState& model,
                                                             const Example& example) {
  const Example* ref = &example;
  detail::check_dims(model.spec, std::span<const Example* const>(&ref, 1));
  detail::Network net(model.spec);
  std::vector<std::vector<double>> out;
  out.reserve(example.tokens.size());
  for (const auto& tok : example.tokens) {
    net.forward(model.parameters, tok.data());
    out.push_back(net.probs());
  }
  return out;
}

inline double evaluate(const ModelState& model, std::span<const Example* const> examples,
                       MetricKind metric) {
  detail::check_dims(model.spec, examples);
  return detail::evaluate_params(model.spec, model.parameters, examples, metric);
}

/// Mean token-level cross-entropy and its gradient at `params`.
inline std::pair<double, std::vector<double>> loss_and_gradient(
    const LearnerSpec& spec, std::span<const double> params,
    std::span<const Example* const> examples) {
  if (examples.empty()) throw Error(ErrorKind::EmptyEval, "no examples for loss");
  if (params.size() != parameter_count(spec)) {
    throw Error(ErrorKind::SpecMismatch, "parameter vector has wrong length");
  }
  detail::check_dims(spec, examples);
  detail::Network net(spec);
  std::vector<double> grad(params.size(), 0.0);
  double total = 0;
  const auto data = detail::flatten(examples);
  for (const auto& in : data) total += net.accumulate(params, in, grad);
  const double inv = 1.0 / static_cast<double>(data.size());
  for (double& g : grad) g *= inv;
  return {total * inv, std::move(grad)};
}

inline double loss(const ModelState& model, std::span<const Example* const> examples) {
  return loss_and_gradient(model.spec, model.parameters, examples).first;
}

}  // namespace alol
