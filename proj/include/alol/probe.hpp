#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "alol/dataset.hpp"
#include "alol/engine.hpp"
#include "alol/errors.hpp"
#include "alol/learners.hpp"
#include "alol/policies.hpp"
#include "alol/pool.hpp"
#include "alol/rng.hpp"

namespace alol {

struct MrrConfig {
  std::size_t iterations = 1;  // B
  std::size_t candidates = 5;  // K
  std::size_t set_size = 1;    // L
  LearnerSpec learner;
  MetricKind selection_metric = MetricKind::Accuracy;
  std::size_t window = 10;
  std::pair<std::uint64_t, std::uint64_t> seed_pair{1, 2};
  TrainingMode training_mode = TrainingMode::FineTuneUnion;
  PartitionSizes partition;

  void validate() const {
    auto fail = [](const std::string& what) { throw Error(ErrorKind::Schema, what); };
    if (iterations < 1) fail("iterations must be >= 1");
    if (candidates < 1) fail("candidates must be >= 1");
    if (set_size < 1) fail("set_size must be >= 1");
    if (window < 1) fail("window must be >= 1");
    learner.validate();
  }
};

/// Iterations [start, end] (1-based, inclusive).
struct MrrWindow {
  std::size_t start = 0;
  std::size_t end = 0;
  double mrr = 0.0;
};

struct MrrReport {
  std::vector<MrrWindow> windows;
  double overall = 0.0;
  std::vector<std::size_t> ranks;
  double baseline = 0.0;
  bool truncated = false;
};

/// 1 + number of candidates scoring strictly above the reference; ties go
/// to the reference.
inline std::size_t rank_of(std::size_t reference, std::span<const double> scores) {
  if (reference >= scores.size()) {
    throw Error(ErrorKind::Alignment, "reference index outside the score list");
  }
  std::size_t rank = 1;
  for (double s : scores) rank += s > scores[reference];
  return rank;
}

/// Expected reciprocal rank of a uniformly placed reference: H_K / K.
inline double random_mrr_baseline(std::size_t K) {
  if (K < 1) throw Error(ErrorKind::Alignment, "K must be >= 1");
  double h = 0;
  for (std::size_t r = K; r >= 1; --r) h += 1.0 / static_cast<double>(r);
  return h / static_cast<double>(K);
}

/// Non-overlapping windows; a trailing partial window keeps its real extent.
inline std::vector<MrrWindow> windowed_mrr(std::span<const std::size_t> ranks,
                                           std::size_t window) {
  std::vector<MrrWindow> out;
  for (std::size_t start = 0; start < ranks.size(); start += window) {
    const std::size_t end = std::min(ranks.size(), start + window);
    double sum = 0;
    for (std::size_t k = start; k < end; ++k) sum += 1.0 / static_cast<double>(ranks[k]);
    out.push_back({start + 1, end, sum / static_cast<double>(end - start)});
  }
  return out;
}

inline double mean_windowed_mrr(const MrrReport& report) {
  if (report.windows.empty()) return 0.0;
  double sum = 0;
  for (const auto& w : report.windows) sum += w.mrr;
  return sum / static_cast<double>(report.windows.size());
}

struct ProbeOptions {
  std::size_t jobs = 1;
  OracleEvaluator evaluator;  // empty: real fine-tuning oracle
};

/// Runs the oracle simulation driven by seed_pair.first and, in every
/// iteration, re-scores the same candidate sets from the same base model
/// under seed_pair.second. Records the rank of the first run's choice.
inline MrrReport run_mrr_probe(const MrrConfig& config, const Dataset& data,
                               const ProbeOptions& options = {}) {
  config.validate();
  detail::check_learner_matches(config.learner, data);
  const OracleEvaluator evaluator =
      options.evaluator ? options.evaluator : make_fine_tune_evaluator(options.jobs);
  const auto [seed1, seed2] = config.seed_pair;
  const std::size_t K = config.candidates;

  MrrReport report;
  report.baseline = random_mrr_baseline(K);
  PoolState pool = split_dataset(data, config.partition, derive_seed(seed1, 0, 0, 0, Purpose::Split));
  const ExampleRefs eval = data.gather(pool.eval);

  for (std::size_t i = 1; i <= config.iterations; ++i) {
    if (pool.unlabeled.size() < config.set_size) {
      report.truncated = true;
      break;
    }
    try {
      const std::vector<CandidateSet> candidates = sample_candidates(
          pool, K, config.set_size, derive_seed(seed1, i, 0, 0, Purpose::Sampling));
      std::optional<ModelState> base;
      OracleContext ctx;
      ctx.iteration = i;
      ctx.dataset = &data;
      ctx.pool = &pool;
      ctx.learner = &config.learner;
      ctx.candidates = candidates;
      ctx.mode = config.training_mode;
      ctx.metric = config.selection_metric;
      if (config.training_mode != TrainingMode::IndependentFromScratch) {
        base = train(config.learner, data.gather(pool.labeled), eval,
                     derive_seed(seed1, i, kBaseModelSlot, 0, Purpose::Init));
        ctx.base = &*base;
      }
      const auto seeds1 = detail::candidate_seeds(seed1, i, K);
      const auto seeds2 = detail::candidate_seeds(seed2, i, K);
      const SelectionOutcome reference = select_oracle(ctx, seeds1, evaluator);
      const SelectionOutcome second = select_oracle(ctx, seeds2, evaluator);
      report.ranks.push_back(rank_of(reference.chosen_index, *second.scores));
      pool = commit_selection(pool, candidates[reference.chosen_index]);
    } catch (const Error& e) {
      throw detail::with_context(e, "iteration " + std::to_string(i));
    }
  }

  report.windows = windowed_mrr(report.ranks, config.window);
  double sum = 0;
  for (std::size_t r : report.ranks) sum += 1.0 / static_cast<double>(r);
  report.overall = report.ranks.empty() ? 0.0 : sum / static_cast<double>(report.ranks.size());
  return report;
}

}  // namespace alol
