#pragma once

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "alol/datagen.hpp"
#include "alol/engine.hpp"
#include "alol/errors.hpp"
#include "alol/probe.hpp"

namespace alol {

using nlohmann::json;

/// "%.9g": nine significant digits, '.' decimal separator.
inline std::string format_sig9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

namespace detail {

/// Strict reader over one JSON object: every key must be consumed.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw Error(ErrorKind::Schema, where_ + ": expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <class T>
  T required(const std::string& key) {
    if (!j_.contains(key)) throw Error(ErrorKind::Schema, where_ + ": missing key '" + key + "'");
    return convert<T>(key);
  }

  template <class T>
  T optional(const std::string& key, T fallback) {
    if (!j_.contains(key)) return fallback;
    return convert<T>(key);
  }

  const json& raw(const std::string& key) {
    if (!j_.contains(key)) throw Error(ErrorKind::Schema, where_ + ": missing key '" + key + "'");
    seen_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.contains(item.key())) {
        throw Error(ErrorKind::Schema, where_ + ": unknown key '" + item.key() + "'");
      }
    }
  }

 private:
  template <class T>
  T convert(const std::string& key) {
    seen_.insert(key);
    const json& v = j_.at(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw Error(ErrorKind::Schema, where_ + ": '" + key + "' must be a boolean");
    } else if constexpr (std::is_unsigned_v<T>) {
      if (!v.is_number_unsigned()) {
        throw Error(ErrorKind::Schema, where_ + ": '" + key + "' must be a non-negative integer");
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw Error(ErrorKind::Schema, where_ + ": '" + key + "' must be a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw Error(ErrorKind::Schema, where_ + ": '" + key + "' must be a string");
    }
    try {
      return v.get<T>();
    } catch (const json::exception& e) {
      throw Error(ErrorKind::Schema, where_ + ": '" + key + "': " + e.what());
    }
  }

  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

[[noreturn]] inline void bad_enum(const std::string& where, const std::string& value) {
  throw Error(ErrorKind::Schema, where + ": unrecognized value '" + value + "'");
}

}  // namespace detail

inline MetricKind parse_metric(const std::string& s) {
  for (MetricKind k : {MetricKind::Accuracy, MetricKind::MacroF1, MetricKind::TokenF1,
                       MetricKind::ExactMatch}) {
    if (s == to_string(k)) return k;
  }
  detail::bad_enum("metric", s);
}

inline TrainingMode parse_training_mode(const std::string& s) {
  for (TrainingMode m : {TrainingMode::FineTuneUnion, TrainingMode::FineTuneCandidateOnly,
                         TrainingMode::IndependentFromScratch}) {
    if (s == to_string(m)) return m;
  }
  detail::bad_enum("training_mode", s);
}

inline LearnerFamily parse_family(const std::string& s) {
  if (s == "linear_softmax") return LearnerFamily::LinearSoftmax;
  if (s == "mlp") return LearnerFamily::Mlp;
  detail::bad_enum("learner.family", s);
}

// ---- learner ---------------------------------------------------------------

inline json to_json(const LearnerSpec& s) {
  return json{{"family", to_string(s.family)},
              {"input_dim", s.input_dim},
              {"class_count", s.class_count},
              {"hidden_dim", s.hidden_dim},
              {"learning_rate", s.learning_rate},
              {"max_epochs", s.max_epochs},
              {"patience", s.patience},
              {"min_epochs", s.min_epochs},
              {"stop_epsilon", s.stop_epsilon},
              {"init_scale", s.init_scale},
              {"lr_decay", s.lr_decay},
              {"weight_decay", s.weight_decay},
              {"finetune_perturbation", s.finetune_perturbation},
              {"stop_metric", to_string(s.stop_metric)},
              {"stop_on_eval_loss", s.stop_on_eval_loss}};
}

inline LearnerSpec learner_from_json(const json& j) {
  detail::ObjectReader r(j, "learner");
  LearnerSpec s;
  s.family = parse_family(r.required<std::string>("family"));
  s.input_dim = r.required<std::size_t>("input_dim");
  s.class_count = r.required<std::size_t>("class_count");
  s.hidden_dim = r.optional<std::size_t>("hidden_dim", s.hidden_dim);
  s.learning_rate = r.optional<double>("learning_rate", s.learning_rate);
  s.max_epochs = r.optional<std::size_t>("max_epochs", s.max_epochs);
  s.patience = r.optional<std::size_t>("patience", s.patience);
  s.min_epochs = r.optional<std::size_t>("min_epochs", s.min_epochs);
  s.stop_epsilon = r.optional<double>("stop_epsilon", s.stop_epsilon);
  s.init_scale = r.optional<double>("init_scale", s.init_scale);
  s.lr_decay = r.optional<double>("lr_decay", s.lr_decay);
  s.weight_decay = r.optional<double>("weight_decay", s.weight_decay);
  s.finetune_perturbation = r.optional<double>("finetune_perturbation", s.finetune_perturbation);
  s.stop_metric = parse_metric(r.optional<std::string>("stop_metric", "accuracy"));
  s.stop_on_eval_loss = r.optional<bool>("stop_on_eval_loss", false);
  r.finish();
  s.validate();
  return s;
}

// ---- partition / policy ----------------------------------------------------

inline json to_json(const PartitionSizes& p) {
  return json{{"labeled", p.labeled}, {"unlabeled", p.unlabeled}, {"eval", p.eval}, {"report", p.report}};
}

inline PartitionSizes partition_from_json(const json& j) {
  detail::ObjectReader r(j, "partition");
  PartitionSizes p;
  p.labeled = r.required<std::size_t>("labeled");
  p.unlabeled = r.required<std::size_t>("unlabeled");
  p.eval = r.required<std::size_t>("eval");
  p.report = r.optional<std::size_t>("report", 0);
  r.finish();
  return p;
}

inline json to_json(const PolicyKind& k) {
  json j{{"kind", [&] {
            switch (k.type) {
              case PolicyType::Random: return "random";
              case PolicyType::Longest: return "longest";
              case PolicyType::Uncertainty: return "uncertainty";
              case PolicyType::Oracle: return "oracle";
              case PolicyType::EpsilonGreedy: return "epsilon_greedy";
              case PolicyType::OracleSwitch: return "oracle_switch";
              case PolicyType::LossOracle: return "loss_oracle";
            }
            return "random";
          }()}};
  if (k.type == PolicyType::EpsilonGreedy) j["p"] = k.p;
  if (k.type == PolicyType::OracleSwitch) j["b"] = k.b;
  return j;
}

inline PolicyKind policy_from_json(const json& j) {
  detail::ObjectReader r(j, "policy");
  PolicyKind k;
  const auto kind = r.required<std::string>("kind");
  if (kind == "random") k.type = PolicyType::Random;
  else if (kind == "longest") k.type = PolicyType::Longest;
  else if (kind == "uncertainty") k.type = PolicyType::Uncertainty;
  else if (kind == "oracle") k.type = PolicyType::Oracle;
  else if (kind == "loss_oracle") k.type = PolicyType::LossOracle;
  else if (kind == "epsilon_greedy") {
    k.type = PolicyType::EpsilonGreedy;
    k.p = r.required<double>("p");
  } else if (kind == "oracle_switch") {
    k.type = PolicyType::OracleSwitch;
    k.b = r.required<std::size_t>("b");
  } else {
    detail::bad_enum("policy.kind", kind);
  }
  r.finish();
  return k;
}

// ---- experiment files ------------------------------------------------------

/// Parsed experiment document. `dataset` is as written in the file.
struct SimulateExperiment {
  SimulationConfig config;
  std::string dataset;
  std::size_t repeats = 1;
};

struct ProbeExperiment {
  MrrConfig config;
  std::string dataset;
};

inline json parse_json_text(const std::string& text, const std::string& where) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Schema, where + ": " + e.what());
  }
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_json_text(ss.str(), path);
}

inline std::string experiment_command(const json& j) {
  if (!j.is_object() || !j.contains("command") || !j.at("command").is_string()) {
    throw Error(ErrorKind::Schema, "experiment file needs a string 'command'");
  }
  return j.at("command").get<std::string>();
}

inline json to_json(const GenSpec& s) {
  json j{{"command", "gen_data"},
         {"kind", s.kind == GenKind::GaussianClusters ? "gaussian_clusters" : "token_tagging"},
         {"n", s.n},
         {"input_dim", s.input_dim},
         {"class_count", s.class_count},
         {"cluster_separation", s.cluster_separation},
         {"noise_fraction", s.noise_fraction},
         {"seed", s.seed}};
  if (s.kind == GenKind::TokenTagging) j["seq_len_range"] = {s.min_len, s.max_len};
  return j;
}

inline GenSpec gen_spec_from_json(const json& j) {
  detail::ObjectReader r(j, "gen_data");
  if (r.required<std::string>("command") != "gen_data") {
    throw Error(ErrorKind::Schema, "expected command 'gen_data'");
  }
  GenSpec s;
  const auto kind = r.required<std::string>("kind");
  if (kind == "gaussian_clusters") s.kind = GenKind::GaussianClusters;
  else if (kind == "token_tagging") s.kind = GenKind::TokenTagging;
  else detail::bad_enum("kind", kind);
  s.n = r.required<std::size_t>("n");
  s.input_dim = r.required<std::size_t>("input_dim");
  s.class_count = r.required<std::size_t>("class_count");
  s.cluster_separation = r.required<double>("cluster_separation");
  s.noise_fraction = r.optional<double>("noise_fraction", 0.0);
  s.seed = r.optional<std::uint64_t>("seed", 0);
  if (r.has("seq_len_range")) {
    const auto range = r.optional<std::vector<std::size_t>>("seq_len_range", {});
    if (range.size() != 2) throw Error(ErrorKind::Schema, "seq_len_range needs [min, max]");
    s.min_len = range[0];
    s.max_len = range[1];
  } else if (s.kind == GenKind::TokenTagging) {
    throw Error(ErrorKind::Schema, "token_tagging needs seq_len_range");
  }
  r.finish();
  try {
    s.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::Schema, e.what());
  }
  return s;
}

inline json to_json(const SimulationConfig& c) {
  return json{{"iterations", c.iterations},
              {"candidates", c.candidates},
              {"set_size", c.set_size},
              {"policy", to_json(c.policy)},
              {"training_mode", to_string(c.policy.training_mode)},
              {"learner", to_json(c.learner)},
              {"selection_metric", to_string(c.selection_metric)},
              {"report_metric", to_string(c.report_metric)},
              {"master_seed", c.master_seed},
              {"checkpoint_every", c.checkpoint_every},
              {"partition", to_json(c.partition)}};
}

inline SimulateExperiment simulate_from_json(const json& j) {
  detail::ObjectReader r(j, "simulate");
  if (r.required<std::string>("command") != "simulate") {
    throw Error(ErrorKind::Schema, "expected command 'simulate'");
  }
  SimulateExperiment e;
  SimulationConfig& c = e.config;
  e.dataset = r.required<std::string>("dataset");
  e.repeats = r.optional<std::size_t>("repeats", 1);
  if (e.repeats < 1) throw Error(ErrorKind::Schema, "repeats must be >= 1");
  c.iterations = r.required<std::size_t>("iterations");
  c.candidates = r.required<std::size_t>("candidates");
  c.set_size = r.required<std::size_t>("set_size");
  c.policy = policy_from_json(r.raw("policy"));
  c.policy.training_mode = parse_training_mode(r.optional<std::string>("training_mode", "finetune_union"));
  c.learner = learner_from_json(r.raw("learner"));
  c.selection_metric = parse_metric(r.optional<std::string>("selection_metric", "accuracy"));
  c.report_metric = parse_metric(r.optional<std::string>("report_metric", "accuracy"));
  c.master_seed = r.optional<std::uint64_t>("master_seed", 0);
  c.checkpoint_every = r.optional<std::size_t>("checkpoint_every", 10);
  c.partition = partition_from_json(r.raw("partition"));
  r.finish();
  c.validate();
  return e;
}

inline json to_json(const MrrConfig& c) {
  return json{{"iterations", c.iterations},
              {"candidates", c.candidates},
              {"set_size", c.set_size},
              {"learner", to_json(c.learner)},
              {"selection_metric", to_string(c.selection_metric)},
              {"window", c.window},
              {"seed_pair", {c.seed_pair.first, c.seed_pair.second}},
              {"training_mode", to_string(c.training_mode)},
              {"partition", to_json(c.partition)}};
}

inline ProbeExperiment probe_from_json(const json& j) {
  detail::ObjectReader r(j, "probe_mrr");
  if (r.required<std::string>("command") != "probe_mrr") {
    throw Error(ErrorKind::Schema, "expected command 'probe_mrr'");
  }
  ProbeExperiment e;
  MrrConfig& c = e.config;
  e.dataset = r.required<std::string>("dataset");
  c.iterations = r.required<std::size_t>("iterations");
  c.candidates = r.required<std::size_t>("candidates");
  c.set_size = r.required<std::size_t>("set_size");
  c.learner = learner_from_json(r.raw("learner"));
  c.selection_metric = parse_metric(r.optional<std::string>("selection_metric", "accuracy"));
  c.window = r.optional<std::size_t>("window", 10);
  const auto seeds = r.required<std::vector<std::uint64_t>>("seed_pair");
  if (seeds.size() != 2) throw Error(ErrorKind::Schema, "seed_pair needs two seeds");
  c.seed_pair = {seeds[0], seeds[1]};
  c.training_mode = parse_training_mode(r.optional<std::string>("training_mode", "finetune_union"));
  c.partition = partition_from_json(r.raw("partition"));
  r.finish();
  c.validate();
  return e;
}

// ---- run logs --------------------------------------------------------------

inline json to_json(const PoolState& p) {
  return json{{"labeled", p.labeled}, {"unlabeled", p.unlabeled}, {"eval", p.eval}, {"report", p.report}};
}

inline json to_json(const IterationRecord& r) {
  json j{{"iteration", r.iteration},
         {"candidate_ids", r.candidate_ids},
         {"chosen_index", r.chosen_index},
         {"labeled_size_after", r.labeled_size_after}};
  j["scores"] = r.scores ? json(*r.scores) : json();
  j["heuristic_scores"] = r.heuristic_scores ? json(*r.heuristic_scores) : json();
  j["branch"] = r.branch ? json(*r.branch == Branch::Explore ? "explore" : "exploit") : json();
  j["checkpoint"] = r.checkpoint ? json(*r.checkpoint) : json();
  j["base_fingerprint"] = r.base_fingerprint ? json(fingerprint_hex(*r.base_fingerprint)) : json();
  return j;
}

inline json to_json(const RunLog& log) {
  json records = json::array();
  for (const auto& r : log.records) records.push_back(to_json(r));
  json curve = json::array();
  for (const auto& p : log.curve) curve.push_back({{"labeled_size", p.labeled_size}, {"metric", p.metric}});
  return json{{"config", to_json(log.config)},
              {"initial_pool", to_json(log.initial_pool)},
              {"records", records},
              {"curve", curve},
              {"truncated", log.truncated},
              {"final_fingerprint", fingerprint_hex(log.final_fingerprint)}};
}

// ---- CSV -------------------------------------------------------------------

struct CurveFile {
  std::string policy;
  std::string seed;
  std::vector<CurvePoint> points;
};

inline void write_curve_csv(std::ostream& out, std::span<const CurvePoint> curve,
                            const std::string& policy, const std::string& seed) {
  out << "labeled_size,metric,policy,seed\n";
  for (const auto& p : curve) {
    out << p.labeled_size << ',' << format_sig9(p.metric) << ',' << policy << ',' << seed << '\n';
  }
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline CurveFile read_curve_csv(std::istream& in, const std::string& where) {
  CurveFile file;
  std::string line;
  if (!std::getline(in, line) || line != "labeled_size,metric,policy,seed") {
    throw Error(ErrorKind::Schema, where + ": expected header labeled_size,metric,policy,seed");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 4) throw Error(ErrorKind::Schema, where + ": malformed row '" + line + "'");
    CurvePoint p;
    try {
      p.labeled_size = std::stoull(cells[0]);
      p.metric = std::stod(cells[1]);
    } catch (const std::exception&) {
      throw Error(ErrorKind::Schema, where + ": malformed row '" + line + "'");
    }
    file.policy = cells[2];
    file.seed = cells[3];
    file.points.push_back(p);
  }
  return file;
}

inline CurveFile read_curve_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
  return read_curve_csv(in, path);
}

inline void write_mrr_csv(std::ostream& out, const MrrReport& report) {
  out << "window_start,window_end,mrr,baseline\n";
  for (const auto& w : report.windows) {
    out << w.start << ',' << w.end << ',' << format_sig9(w.mrr) << ',' << format_sig9(report.baseline)
        << '\n';
  }
}

inline json to_json(const MrrReport& report) {
  json windows = json::array();
  for (const auto& w : report.windows) {
    windows.push_back({{"window_start", w.start}, {"window_end", w.end}, {"mrr", w.mrr}});
  }
  return json{{"overall_mrr", report.overall},
              {"mean_windowed_mrr", mean_windowed_mrr(report)},
              {"baseline", report.baseline},
              {"windows", windows},
              {"ranks", report.ranks},
              {"truncated", report.truncated}};
}

}  // namespace alol
