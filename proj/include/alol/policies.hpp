#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "alol/dataset.hpp"
#include "alol/errors.hpp"
#include "alol/learners.hpp"
#include "alol/metrics.hpp"
#include "alol/parallel.hpp"
#include "alol/pool.hpp"
#include "alol/rng.hpp"

namespace alol {

enum class PolicyType { Random, Longest, Uncertainty, Oracle, EpsilonGreedy, OracleSwitch, LossOracle };

/// How each candidate model is built before scoring.
enum class TrainingMode {
  FineTuneUnion,           // fine_tune(base, S_lab + C_j)
  FineTuneCandidateOnly,   // fine_tune(base, C_j)
  IndependentFromScratch,  // train(spec, S_lab + C_j) from a fresh init
};

constexpr std::string_view to_string(TrainingMode m) noexcept {
  switch (m) {
    case TrainingMode::FineTuneUnion: return "finetune_union";
    case TrainingMode::FineTuneCandidateOnly: return "finetune_candidate_only";
    case TrainingMode::IndependentFromScratch: return "independent_from_scratch";
  }
  return "finetune_union";
}

struct PolicyKind {
  PolicyType type = PolicyType::Random;
  double p = 0.0;      // EpsilonGreedy exploration probability
  std::size_t b = 0;   // OracleSwitch: oracle for iterations 1..b
  TrainingMode training_mode = TrainingMode::FineTuneUnion;

  /// True when the policy can consult the oracle evaluator.
  bool uses_oracle() const noexcept {
    return type == PolicyType::Oracle || type == PolicyType::EpsilonGreedy ||
           type == PolicyType::OracleSwitch || type == PolicyType::LossOracle;
  }

  friend bool operator==(const PolicyKind&, const PolicyKind&) = default;
};

inline std::string policy_name(const PolicyKind& k) {
  switch (k.type) {
    case PolicyType::Random: return "random";
    case PolicyType::Longest: return "longest";
    case PolicyType::Uncertainty: return "uncertainty";
    case PolicyType::Oracle: return "oracle";
    case PolicyType::LossOracle: return "loss_oracle";
    case PolicyType::EpsilonGreedy: {
      char buf[64];
      std::snprintf(buf, sizeof buf, "epsilon_greedy_%g", k.p);
      return buf;
    }
    case PolicyType::OracleSwitch: return "oracle_switch_" + std::to_string(k.b);
  }
  return "random";
}

enum class Branch { Exploit, Explore };

struct SelectionOutcome {
  std::size_t chosen_index = 0;
  std::optional<std::vector<double>> scores;
  std::optional<Branch> branch;  // EpsilonGreedy only
};

/// Lowest index attaining the maximum.
inline std::size_t lowest_argmax(std::span<const double> scores) {
  if (scores.empty()) throw Error(ErrorKind::Alignment, "argmax over no scores");
  std::size_t best = 0;
  for (std::size_t j = 1; j < scores.size(); ++j) {
    if (scores[j] > scores[best]) best = j;
  }
  return best;
}

inline SelectionOutcome select_from_scores(std::vector<double> scores) {
  SelectionOutcome out;
  out.chosen_index = lowest_argmax(scores);
  out.scores = std::move(scores);
  return out;
}

inline SelectionOutcome select_random(std::size_t K, std::uint64_t seed) {
  if (K < 1) throw Error(ErrorKind::Alignment, "select_random needs K >= 1");
  SplitMix64 rng(seed);
  return {static_cast<std::size_t>(rng.uniform_below(K)), std::nullopt, std::nullopt};
}

inline SelectionOutcome select_longest(std::span<const CandidateSet> candidates,
                                       const Dataset& data) {
  std::vector<double> scores;
  scores.reserve(candidates.size());
  for (const auto& set : candidates) {
    double total = 0;
    for (ExampleId id : set.ids) total += static_cast<double>(data.at(id).token_count());
    scores.push_back(set.ids.empty() ? 0.0 : total / static_cast<double>(set.ids.size()));
  }
  return select_from_scores(std::move(scores));
}

/// Scores each set by the mean per-token predictive entropy of `model`.
/// Never reads gold labels of the candidates.
inline SelectionOutcome select_uncertainty(const ModelState& model,
                                           std::span<const CandidateSet> candidates,
                                           const Dataset& data) {
  std::vector<double> scores;
  scores.reserve(candidates.size());
  for (const auto& set : candidates) {
    std::vector<std::vector<double>> dists;
    for (ExampleId id : set.ids) {
      auto per_token = predict_distribution(model, data.at(id));
      for (auto& d : per_token) dists.push_back(std::move(d));
    }
    scores.push_back(mean_entropy(dists));
  }
  return select_from_scores(std::move(scores));
}

enum class OracleObjective { Metric, NegativeLoss };

/// Everything an oracle evaluator may look at for one iteration.
struct OracleContext {
  std::size_t iteration = 0;
  const Dataset* dataset = nullptr;
  const PoolState* pool = nullptr;
  const LearnerSpec* learner = nullptr;
  const ModelState* base = nullptr;  // unused for IndependentFromScratch
  std::span<const CandidateSet> candidates;
  TrainingMode mode = TrainingMode::FineTuneUnion;
  MetricKind metric = MetricKind::Accuracy;
  OracleObjective objective = OracleObjective::Metric;
};

/// Produces one score per candidate; seeds[j] drives candidate j's training.
using OracleEvaluator =
    std::function<std::vector<double>(const OracleContext&, std::span<const std::uint64_t>)>;

/// Builds candidate j's model per ctx.mode and scores it on the eval set.
inline double score_candidate(const OracleContext& ctx, std::size_t j, std::uint64_t seed) {
  const Dataset& data = *ctx.dataset;
  const CandidateSet& set = ctx.candidates[j];
  ExampleRefs train_set;
  if (ctx.mode != TrainingMode::FineTuneCandidateOnly) train_set = data.gather(ctx.pool->labeled);
  for (ExampleId id : set.ids) train_set.push_back(&data.at(id));
  const ExampleRefs eval = data.gather(ctx.pool->eval);

  ModelState model;
  if (ctx.mode == TrainingMode::IndependentFromScratch) {
    model = train(*ctx.learner, train_set, eval, seed);
  } else {
    if (ctx.base == nullptr) {
      throw Error(ErrorKind::SpecMismatch, "fine-tuning mode requires a base model");
    }
    model = fine_tune(*ctx.base, train_set, eval, seed);
  }
  if (ctx.objective == OracleObjective::NegativeLoss) return -loss(model, eval);
  return evaluate(model, eval, ctx.metric);
}

/// The real oracle: K independent fine-tunes, fanned out over `jobs` threads
/// and gathered by candidate index.
inline OracleEvaluator make_fine_tune_evaluator(std::size_t jobs) {
  return [jobs](const OracleContext& ctx, std::span<const std::uint64_t> seeds) {
    std::vector<double> scores(ctx.candidates.size());
    parallel_for(ctx.candidates.size(), jobs,
                 [&](std::size_t j) { scores[j] = score_candidate(ctx, j, seeds[j]); });
    return scores;
  };
}

inline void check_oracle_request(const OracleContext& ctx, std::span<const std::uint64_t> seeds) {
  if (ctx.candidates.empty()) throw Error(ErrorKind::Alignment, "oracle needs candidates");
  if (seeds.size() != ctx.candidates.size()) {
    throw Error(ErrorKind::Alignment, "one seed per candidate required");
  }
  if (ctx.pool->eval.empty()) throw Error(ErrorKind::EmptyEval, "oracle needs a non-empty eval set");
  for (const auto& set : ctx.candidates) {
    for (ExampleId id : set.ids) {
      if (!contains_sorted(ctx.pool->unlabeled, id)) {
        throw Error(ErrorKind::StaleCandidate,
                    "candidate " + std::to_string(set.candidate_index) + " references id " +
                        std::to_string(id) + " outside the unlabeled pool");
      }
    }
  }
}

inline SelectionOutcome select_oracle(const OracleContext& ctx,
                                      std::span<const std::uint64_t> seeds,
                                      const OracleEvaluator& evaluator) {
  check_oracle_request(ctx, seeds);
  std::vector<double> scores = evaluator(ctx, seeds);
  if (scores.size() != ctx.candidates.size()) {
    throw Error(ErrorKind::Alignment, "evaluator returned the wrong number of scores");
  }
  return select_from_scores(std::move(scores));
}

/// Oracle on -loss(eval): the lowest-loss candidate wins.
inline SelectionOutcome select_loss_oracle(OracleContext ctx,
                                           std::span<const std::uint64_t> seeds,
                                           const OracleEvaluator& evaluator) {
  ctx.objective = OracleObjective::NegativeLoss;
  return select_oracle(ctx, seeds, evaluator);
}

/// With probability p picks a uniform candidate without calling `exploit`;
/// otherwise returns exploit(). Both draws come from one stream of `seed`.
template <class ExploitFn>
SelectionOutcome select_epsilon_greedy(double p, ExploitFn&& exploit, std::size_t K,
                                       std::uint64_t seed) {
  if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorKind::Schema, "epsilon p must lie in [0, 1]");
  if (K < 1) throw Error(ErrorKind::Alignment, "select_epsilon_greedy needs K >= 1");
  SplitMix64 rng(seed);
  if (rng.uniform01() < p) {
    return {static_cast<std::size_t>(rng.uniform_below(K)), std::nullopt, Branch::Explore};
  }
  SelectionOutcome out = exploit();
  out.branch = Branch::Exploit;
  return out;
}

}  // namespace alol
