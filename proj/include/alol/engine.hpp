#pragma once

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "alol/dataset.hpp"
#include "alol/errors.hpp"
#include "alol/learners.hpp"
#include "alol/metrics.hpp"
#include "alol/policies.hpp"
#include "alol/pool.hpp"
#include "alol/rng.hpp"

namespace alol {

struct SimulationConfig {
  std::size_t iterations = 1;      // B
  std::size_t candidates = 5;      // K
  std::size_t set_size = 1;        // L
  PolicyKind policy;
  LearnerSpec learner;
  MetricKind selection_metric = MetricKind::Accuracy;
  MetricKind report_metric = MetricKind::Accuracy;
  std::uint64_t master_seed = 0;
  std::size_t checkpoint_every = 10;
  PartitionSizes partition;

  void validate() const {
    auto fail = [](const std::string& what) { throw Error(ErrorKind::Schema, what); };
    if (iterations < 1) fail("iterations must be >= 1");
    if (candidates < 1) fail("candidates must be >= 1");
    if (set_size < 1) fail("set_size must be >= 1");
    if (checkpoint_every < 1) fail("checkpoint_every must be >= 1");
    if (policy.type == PolicyType::EpsilonGreedy && !(policy.p >= 0.0 && policy.p <= 1.0)) {
      fail("epsilon_greedy p must lie in [0, 1]");
    }
    if (policy.type == PolicyType::OracleSwitch && policy.b > iterations) {
      fail("oracle_switch b must not exceed iterations");
    }
    learner.validate();
  }
};

struct CurvePoint {
  std::size_t labeled_size = 0;
  double metric = 0.0;

  friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

struct IterationRecord {
  std::size_t iteration = 0;  // 1-based
  std::vector<std::vector<ExampleId>> candidate_ids;
  std::optional<std::vector<double>> scores;            // oracle scores s^i_j
  std::optional<std::vector<double>> heuristic_scores;  // Longest / Uncertainty surrogates
  std::size_t chosen_index = 0;
  std::optional<Branch> branch;
  std::size_t labeled_size_after = 0;
  std::optional<double> checkpoint;
  std::optional<std::uint64_t> base_fingerprint;

  friend bool operator==(const IterationRecord&, const IterationRecord&) = default;
};

struct RunLog {
  SimulationConfig config;
  PoolState initial_pool;
  std::vector<IterationRecord> records;
  std::vector<CurvePoint> curve;  // includes the pre-loop point
  bool truncated = false;
  std::uint64_t final_fingerprint = 0;
};

struct RunOptions {
  std::size_t jobs = 1;
  bool log_oracle_scores = false;
  OracleEvaluator evaluator;  // empty: real fine-tuning oracle
};

namespace detail {

inline void check_learner_matches(const LearnerSpec& spec, const Dataset& data) {
  if (data.input_dim() != spec.input_dim) {
    throw Error(ErrorKind::SpecMismatch, "dataset dimension " + std::to_string(data.input_dim()) +
                                             " but learner input_dim " +
                                             std::to_string(spec.input_dim));
  }
  if (data.class_count() > spec.class_count) {
    throw Error(ErrorKind::SpecMismatch, "dataset has " + std::to_string(data.class_count()) +
                                             " classes but learner class_count " +
                                             std::to_string(spec.class_count));
  }
}

inline Error with_context(const Error& e, const std::string& where) {
  std::string msg = e.what();
  const std::string prefix = std::string(to_string(e.kind())) + ": ";
  if (msg.rfind(prefix, 0) == 0) msg = msg.substr(prefix.size());
  return Error(e.kind(), where + ": " + msg);
}

inline std::vector<std::uint64_t> candidate_seeds(std::uint64_t master, std::size_t iteration,
                                                  std::size_t K) {
  std::vector<std::uint64_t> seeds(K);
  for (std::size_t j = 0; j < K; ++j) seeds[j] = derive_seed(master, iteration, j, 0, Purpose::Init);
  return seeds;
}

}  // namespace detail

/// Simulates pool-based active learning for config.iterations rounds: train
/// on S_lab, sample K candidate sets, let the policy choose one, commit it.
/// Deterministic in (config, dataset); `jobs` only changes wall time.
inline RunLog run_simulation(const SimulationConfig& config, const Dataset& data,
                             const RunOptions& options = {}) {
  config.validate();
  detail::check_learner_matches(config.learner, data);
  const OracleEvaluator evaluator =
      options.evaluator ? options.evaluator : make_fine_tune_evaluator(options.jobs);
  const std::uint64_t master = config.master_seed;
  const std::size_t K = config.candidates;
  const TrainingMode mode = config.policy.training_mode;

  RunLog log;
  log.config = config;
  PoolState pool = split_dataset(data, config.partition, derive_seed(master, 0, 0, 0, Purpose::Split));
  log.initial_pool = pool;
  const ExampleRefs eval = data.gather(pool.eval);
  const ExampleRefs report = data.gather(pool.report);

  auto checkpoint = [&](std::size_t iteration) -> std::optional<double> {
    if (report.empty()) return std::nullopt;
    const ModelState model =
        train(config.learner, data.gather(pool.labeled), eval,
              derive_seed(master, iteration, kCheckpointSlot, 0, Purpose::Init));
    const double value = evaluate(model, report, config.report_metric);
    log.curve.push_back({pool.labeled.size(), value});
    return value;
  };
  checkpoint(0);

  for (std::size_t i = 1; i <= config.iterations; ++i) {
    if (pool.unlabeled.size() < config.set_size) {
      log.truncated = true;
      break;
    }
    try {
      const std::vector<CandidateSet> candidates =
          sample_candidates(pool, K, config.set_size, derive_seed(master, i, 0, 0, Purpose::Sampling));
      const std::uint64_t draw_seed = derive_seed(master, i, 0, 0, Purpose::PolicyDraw);
      const std::vector<std::uint64_t> seeds = detail::candidate_seeds(master, i, K);

      std::optional<ModelState> base;
      auto get_base = [&]() -> const ModelState& {
        if (!base) {
          base = train(config.learner, data.gather(pool.labeled), eval,
                       derive_seed(master, i, kBaseModelSlot, 0, Purpose::Init));
        }
        return *base;
      };
      auto make_context = [&] {
        OracleContext ctx;
        ctx.iteration = i;
        ctx.dataset = &data;
        ctx.pool = &pool;
        ctx.learner = &config.learner;
        ctx.candidates = candidates;
        ctx.mode = mode;
        ctx.metric = config.selection_metric;
        if (mode != TrainingMode::IndependentFromScratch) ctx.base = &get_base();
        return ctx;
      };
      auto oracle = [&] { return select_oracle(make_context(), seeds, evaluator); };

      SelectionOutcome outcome;
      switch (config.policy.type) {
        case PolicyType::Random:
          outcome = select_random(K, draw_seed);
          break;
        case PolicyType::Longest:
          outcome = select_longest(candidates, data);
          break;
        case PolicyType::Uncertainty:
          outcome = select_uncertainty(get_base(), candidates, data);
          break;
        case PolicyType::Oracle:
          outcome = oracle();
          break;
        case PolicyType::LossOracle:
          outcome = select_loss_oracle(make_context(), seeds, evaluator);
          break;
        case PolicyType::EpsilonGreedy:
          outcome = select_epsilon_greedy(config.policy.p, oracle, K, draw_seed);
          break;
        case PolicyType::OracleSwitch:
          outcome = i <= config.policy.b ? oracle() : select_random(K, draw_seed);
          break;
      }

      IterationRecord rec;
      rec.iteration = i;
      for (const auto& c : candidates) rec.candidate_ids.push_back(c.ids);
      rec.chosen_index = outcome.chosen_index;
      rec.branch = outcome.branch;
      if (config.policy.uses_oracle()) {
        rec.scores = outcome.scores;
      } else {
        rec.heuristic_scores = outcome.scores;
      }
      if (options.log_oracle_scores && !rec.scores) {
        rec.scores = oracle().scores;
      }
      if (base) rec.base_fingerprint = fingerprint(base->parameters);

      pool = commit_selection(pool, candidates[outcome.chosen_index]);
      rec.labeled_size_after = pool.labeled.size();
      if (i % config.checkpoint_every == 0) rec.checkpoint = checkpoint(i);
      log.records.push_back(std::move(rec));
    } catch (const Error& e) {
      throw detail::with_context(e, "iteration " + std::to_string(i));
    }
  }

  const ModelState final_model =
      train(config.learner, data.gather(pool.labeled), eval,
            derive_seed(master, config.iterations + 1, kFinalModelSlot, 0, Purpose::Init));
  log.final_fingerprint = fingerprint(final_model.parameters);
  return log;
}

/// One training example for a learned selection policy: the state before
/// iteration `iteration`, the scored candidates, and the oracle's label.
struct PolicyTrainingExample {
  std::size_t iteration = 0;
  std::vector<ExampleId> labeled_ids;
  std::size_t unlabeled_count = 0;
  std::optional<std::uint64_t> base_fingerprint;
  std::vector<std::vector<ExampleId>> candidate_ids;
  std::vector<double> scores;
  std::size_t chosen_index = 0;

  friend bool operator==(const PolicyTrainingExample&, const PolicyTrainingExample&) = default;
};

/// Replays the log and returns one example per iteration that carries
/// oracle scores.
inline std::vector<PolicyTrainingExample> policy_training_examples(const RunLog& log) {
  std::vector<PolicyTrainingExample> out;
  std::vector<ExampleId> labeled = log.initial_pool.labeled;
  std::size_t unlabeled = log.initial_pool.unlabeled.size();
  for (const auto& rec : log.records) {
    if (rec.scores) {
      out.push_back({rec.iteration, labeled, unlabeled, rec.base_fingerprint, rec.candidate_ids,
                     *rec.scores, rec.chosen_index});
    }
    const auto& chosen = rec.candidate_ids.at(rec.chosen_index);
    labeled.insert(labeled.end(), chosen.begin(), chosen.end());
    std::sort(labeled.begin(), labeled.end());
    unlabeled -= chosen.size();
  }
  if (out.empty()) {
    throw Error(ErrorKind::MissingScores, "run log carries no oracle scores");
  }
  return out;
}

inline nlohmann::json to_json(const PolicyTrainingExample& ex) {
  nlohmann::json j;
  j["iteration"] = ex.iteration;
  j["labeled_ids"] = ex.labeled_ids;
  j["unlabeled_count"] = ex.unlabeled_count;
  j["base_fingerprint"] =
      ex.base_fingerprint ? nlohmann::json(fingerprint_hex(*ex.base_fingerprint)) : nlohmann::json();
  j["candidate_ids"] = ex.candidate_ids;
  j["scores"] = ex.scores;
  j["chosen_index"] = ex.chosen_index;
  return j;
}

inline void emit_policy_training_examples(const RunLog& log, const std::string& path) {
  const auto examples = policy_training_examples(log);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path);
  for (const auto& ex : examples) out << to_json(ex).dump() << '\n';
}

inline std::vector<PolicyTrainingExample> read_policy_training_examples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path);
  std::vector<PolicyTrainingExample> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      PolicyTrainingExample ex;
      ex.iteration = j.at("iteration").get<std::size_t>();
      ex.labeled_ids = j.at("labeled_ids").get<std::vector<ExampleId>>();
      ex.unlabeled_count = j.at("unlabeled_count").get<std::size_t>();
      if (!j.at("base_fingerprint").is_null()) {
        ex.base_fingerprint = parse_fingerprint_hex(j.at("base_fingerprint").get<std::string>());
      }
      ex.candidate_ids = j.at("candidate_ids").get<std::vector<std::vector<ExampleId>>>();
      ex.scores = j.at("scores").get<std::vector<double>>();
      ex.chosen_index = j.at("chosen_index").get<std::size_t>();
      out.push_back(std::move(ex));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::Schema, path + ": " + e.what());
    }
  }
  return out;
}

struct RelativePoint {
  std::size_t labeled_size = 0;
  double percent = 0.0;
};

/// 100 * (policy - random) / random at each shared checkpoint.
inline std::vector<RelativePoint> relative_improvement(std::span<const CurvePoint> policy,
                                                       std::span<const CurvePoint> random) {
  if (policy.size() != random.size()) {
    throw Error(ErrorKind::Alignment, "curves have different numbers of checkpoints");
  }
  std::vector<RelativePoint> out;
  out.reserve(policy.size());
  for (std::size_t k = 0; k < policy.size(); ++k) {
    if (policy[k].labeled_size != random[k].labeled_size) {
      throw Error(ErrorKind::Alignment, "checkpoint grids differ at position " + std::to_string(k));
    }
    if (random[k].metric == 0.0) {
      throw Error(ErrorKind::UndefinedPoint, "random score is zero at labeled size " +
                                                 std::to_string(random[k].labeled_size));
    }
    out.push_back({policy[k].labeled_size,
                   100.0 * (policy[k].metric - random[k].metric) / random[k].metric});
  }
  return out;
}

/// Pointwise mean over repeats, restricted to the checkpoints every repeat
/// reached (truncated runs shorten the result).
inline std::vector<CurvePoint> mean_curve(std::span<const std::vector<CurvePoint>> curves) {
  if (curves.empty()) return {};
  std::size_t len = curves.front().size();
  for (const auto& c : curves) len = std::min(len, c.size());
  std::vector<CurvePoint> out(len);
  for (std::size_t k = 0; k < len; ++k) {
    out[k].labeled_size = curves.front()[k].labeled_size;
    double sum = 0;
    for (const auto& c : curves) {
      if (c[k].labeled_size != out[k].labeled_size) {
        throw Error(ErrorKind::Alignment, "repeat curves use different checkpoint grids");
      }
      sum += c[k].metric;
    }
    out[k].metric = sum / static_cast<double>(curves.size());
  }
  return out;
}

}  // namespace alol
