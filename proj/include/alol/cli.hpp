#pragma once

#include <algorithm>
#include <cstdlib>
#include <optional>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "alol/datagen.hpp"
#include "alol/engine.hpp"
#include "alol/errors.hpp"
#include "alol/io.hpp"
#include "alol/probe.hpp"

namespace alol::cli {

namespace fs = std::filesystem;

/// Stable process exit codes.
enum ExitCode : int { kOk = 0, kRuntime = 1, kSchema = 2, kOverwrite = 3, kAlignment = 4 };

struct Options {
  std::string config;
  std::string out;
  std::size_t jobs = 1;
  bool force = false;
  bool log_oracle_scores = false;
};

inline int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::Schema:
    case ErrorKind::Generation:
      return kSchema;
    case ErrorKind::Alignment:
    case ErrorKind::UndefinedPoint:
      return kAlignment;
    default:
      return kRuntime;
  }
}

/// Runs `body`, mapping library errors to exit codes and messages on `err`.
template <class Body>
int guarded(std::ostream& err, Body&& body) {
  try {
    return body();
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntime;
  }
}

namespace detail {

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << text;
}

/// Creates `dir`; returns false when it holds files and `force` is off.
inline bool prepare_out_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir) && !fs::is_empty(dir) && !force) return false;
  fs::create_directories(dir);
  return true;
}

inline fs::path resolve_dataset(const std::string& config_path, const std::string& dataset) {
  const fs::path p(dataset);
  if (p.is_absolute()) return p;
  return fs::path(config_path).parent_path() / p;
}

inline std::optional<std::uint64_t> seed_override() {
  const char* env = std::getenv("ALOL_SEED_OVERRIDE");
  if (env == nullptr || *env == '\0') return std::nullopt;
  try {
    std::size_t used = 0;
    const auto v = std::stoull(env, &used, 0);
    if (used != std::string(env).size()) throw std::invalid_argument(env);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorKind::Schema, std::string("ALOL_SEED_OVERRIDE is not an integer: ") + env);
  }
}

}  // namespace detail

/// Seed used by repeat r: the master seed itself for r = 0.
inline std::uint64_t repeat_seed(std::uint64_t master, std::size_t r) {
  return r == 0 ? master : derive_seed(master, 0, 0, r, Purpose::Split);
}

/// `<out>` plus `<stem>.provenance.jsonl` next to it.
inline int cmd_gen_data(const Options& opt, std::ostream& err) {
  return guarded(err, [&] {
    const GenSpec spec = gen_spec_from_json(read_json_file(opt.config));
    const fs::path out(opt.out);
    fs::path sidecar = out;
    sidecar.replace_extension();
    sidecar += ".provenance.jsonl";
    if (!opt.force && (fs::exists(out) || fs::exists(sidecar))) {
      err << "error: " << out.string() << " exists (use --force)\n";
      return int{kOverwrite};
    }
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    const GeneratedData gen = generate(spec);
    std::ostringstream data, prov;
    write_jsonl(data, gen.dataset);
    write_provenance_jsonl(prov, gen);
    detail::write_text(out, data.str());
    detail::write_text(sidecar, prov.str());
    return int{kOk};
  });
}

/// Per repeat: run_<r>.json, curve_<r>.csv and, when oracle scores exist,
/// policy_examples_<r>.jsonl. Then mean_curve.csv and summary.json.
inline int cmd_simulate(const Options& opt, std::ostream& err) {
  return guarded(err, [&] {
    SimulateExperiment exp = simulate_from_json(read_json_file(opt.config));
    if (auto s = detail::seed_override()) exp.config.master_seed = *s;
    const Dataset data = load_jsonl(detail::resolve_dataset(opt.config, exp.dataset).string());
    const fs::path dir(opt.out);
    if (!detail::prepare_out_dir(dir, opt.force)) {
      err << "error: " << dir.string() << " is not empty (use --force)\n";
      return int{kOverwrite};
    }
    const std::string policy = policy_name(exp.config.policy);
    RunOptions run_opts;
    run_opts.jobs = opt.jobs;
    run_opts.log_oracle_scores = opt.log_oracle_scores;

    std::vector<std::vector<CurvePoint>> curves;
    json summary_runs = json::array();
    bool any_truncated = false;
    for (std::size_t r = 0; r < exp.repeats; ++r) {
      SimulationConfig cfg = exp.config;
      cfg.master_seed = repeat_seed(exp.config.master_seed, r);
      const RunLog log = run_simulation(cfg, data, run_opts);
      const std::string tag = std::to_string(r);
      detail::write_text(dir / ("run_" + tag + ".json"), to_json(log).dump(1) + "\n");
      std::ostringstream csv;
      write_curve_csv(csv, log.curve, policy, std::to_string(cfg.master_seed));
      detail::write_text(dir / ("curve_" + tag + ".csv"), csv.str());
      const bool has_scores = std::any_of(log.records.begin(), log.records.end(),
                                          [](const auto& rec) { return rec.scores.has_value(); });
      if (has_scores) {
        emit_policy_training_examples(log, (dir / ("policy_examples_" + tag + ".jsonl")).string());
      }
      any_truncated = any_truncated || log.truncated;
      summary_runs.push_back({{"repeat", r},
                              {"master_seed", cfg.master_seed},
                              {"iterations_run", log.records.size()},
                              {"truncated", log.truncated},
                              {"final_fingerprint", fingerprint_hex(log.final_fingerprint)}});
      curves.push_back(log.curve);
    }
    const auto mean = mean_curve(curves);
    std::ostringstream csv;
    write_curve_csv(csv, mean, policy, std::to_string(exp.config.master_seed));
    detail::write_text(dir / "mean_curve.csv", csv.str());
    const json summary{{"policy", policy},
                       {"repeats", exp.repeats},
                       {"truncated", any_truncated},
                       {"runs", summary_runs},
                       {"config", to_json(exp.config)}};
    detail::write_text(dir / "summary.json", summary.dump(1) + "\n");
    if (any_truncated) err << "note: pool exhausted, at least one run was truncated\n";
    return int{kOk};
  });
}

/// mrr.csv (window rows) and mrr_summary.json.
inline int cmd_probe_mrr(const Options& opt, std::ostream& err) {
  return guarded(err, [&] {
    const ProbeExperiment exp = probe_from_json(read_json_file(opt.config));
    const Dataset data = load_jsonl(detail::resolve_dataset(opt.config, exp.dataset).string());
    const fs::path dir(opt.out);
    if (!detail::prepare_out_dir(dir, opt.force)) {
      err << "error: " << dir.string() << " is not empty (use --force)\n";
      return int{kOverwrite};
    }
    ProbeOptions probe_opts;
    probe_opts.jobs = opt.jobs;
    const MrrReport report = run_mrr_probe(exp.config, data, probe_opts);
    std::ostringstream csv;
    write_mrr_csv(csv, report);
    detail::write_text(dir / "mrr.csv", csv.str());
    json summary = to_json(report);
    summary["config"] = to_json(exp.config);
    detail::write_text(dir / "mrr_summary.json", summary.dump(1) + "\n");
    return int{kOk};
  });
}

/// Relative improvement of each curve over the baseline curve, one percent
/// column per input: `labeled_size,<policy>,...`.
inline int cmd_report(const std::vector<std::string>& curve_paths, const std::string& baseline_path,
                      const std::string& out_path, bool force, std::ostream& err) {
  return guarded(err, [&] {
    if (curve_paths.empty()) throw Error(ErrorKind::Schema, "report needs at least one curve");
    if (!force && fs::exists(out_path)) {
      err << "error: " << out_path << " exists (use --force)\n";
      return int{kOverwrite};
    }
    const CurveFile baseline = read_curve_csv(baseline_path);
    std::vector<std::string> names;
    std::vector<std::vector<RelativePoint>> columns;
    for (const auto& path : curve_paths) {
      const CurveFile curve = read_curve_csv(path);
      names.push_back(curve.policy);
      columns.push_back(relative_improvement(curve.points, baseline.points));
    }
    std::ostringstream csv;
    csv << "labeled_size";
    for (const auto& n : names) csv << ',' << n;
    csv << '\n';
    for (std::size_t k = 0; k < baseline.points.size(); ++k) {
      csv << baseline.points[k].labeled_size;
      for (const auto& col : columns) csv << ',' << format_sig9(col[k].percent);
      csv << '\n';
    }
    const fs::path out(out_path);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    detail::write_text(out, csv.str());
    return int{kOk};
  });
}

}  // namespace alol::cli
