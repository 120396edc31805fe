#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "test_support.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

int run(const std::string& args) {
  const std::string cmd = std::string(ALOL_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void dump(const fs::path& p, const json& j) { std::ofstream(p) << j.dump(2); }

struct CliFixture : ::testing::Test {
  fs::path dir = alol::testing::temp_dir("cli");

  fs::path make_data() {
    dump(dir / "gen.json", {{"command", "gen_data"},
                            {"kind", "gaussian_clusters"},
                            {"n", 80},
                            {"input_dim", 2},
                            {"class_count", 2},
                            {"cluster_separation", 3.0},
                            {"noise_fraction", 0.1},
                            {"seed", 4}});
    EXPECT_EQ(run("gen-data --config " + (dir / "gen.json").string() + " --out " +
                  (dir / "data.jsonl").string()),
              0);
    return dir / "data.jsonl";
  }

  json simulate_config(const std::string& policy) {
    return {{"command", "simulate"},
            {"dataset", "data.jsonl"},
            {"repeats", 3},
            {"iterations", 6},
            {"candidates", 3},
            {"set_size", 2},
            {"policy", {{"kind", policy}}},
            {"learner",
             {{"family", "linear_softmax"}, {"input_dim", 2}, {"class_count", 2}, {"max_epochs", 10}}},
            {"master_seed", 21},
            {"checkpoint_every", 2},
            {"partition", {{"labeled", 4}, {"unlabeled", 40}, {"eval", 16}, {"report", 20}}}};
  }

  fs::path write_config(const std::string& name, const json& j) {
    dump(dir / name, j);
    return dir / name;
  }
};

TEST_F(CliFixture, GenDataWritesDataAndSidecarAndRefusesOverwrite) {
  const auto data = make_data();
  EXPECT_TRUE(fs::exists(data));
  EXPECT_TRUE(fs::exists(dir / "data.provenance.jsonl"));
  EXPECT_EQ(run("gen-data --config " + (dir / "gen.json").string() + " --out " + data.string()), 3);
  const std::string before = slurp(data);
  EXPECT_EQ(run("gen-data --force --config " + (dir / "gen.json").string() + " --out " + data.string()), 0);
  EXPECT_EQ(slurp(data), before);
}

TEST_F(CliFixture, SimulateWritesPerRepeatOutputs) {
  make_data();
  const auto cfg = write_config("sim.json", simulate_config("oracle"));
  const fs::path out = dir / "out";
  ASSERT_EQ(run("simulate --config " + cfg.string() + " --out " + out.string()), 0);
  for (int r = 0; r < 3; ++r) {
    const std::string t = std::to_string(r);
    EXPECT_TRUE(fs::exists(out / ("run_" + t + ".json")));
    EXPECT_TRUE(fs::exists(out / ("curve_" + t + ".csv")));
    EXPECT_TRUE(fs::exists(out / ("policy_examples_" + t + ".jsonl")));
  }
  EXPECT_TRUE(fs::exists(out / "mean_curve.csv"));
  const json summary = json::parse(slurp(out / "summary.json"));
  EXPECT_EQ(summary.at("runs").size(), 3u);
  const std::string curve = slurp(out / "curve_0.csv");
  EXPECT_EQ(curve.substr(0, curve.find('\n')), "labeled_size,metric,policy,seed");
  EXPECT_EQ(run("simulate --config " + cfg.string() + " --out " + out.string()), 3);
}

TEST_F(CliFixture, SimulateIsByteIdenticalAcrossRunsAndJobs) {
  make_data();
  const auto cfg = write_config("sim.json", simulate_config("oracle"));
  ASSERT_EQ(run("simulate --config " + cfg.string() + " --out " + (dir / "a").string()), 0);
  ASSERT_EQ(run("simulate --jobs 4 --config " + cfg.string() + " --out " + (dir / "b").string()), 0);
  for (const auto& name : {"run_0.json", "run_2.json", "curve_1.csv", "mean_curve.csv",
                           "policy_examples_0.jsonl", "summary.json"}) {
    EXPECT_EQ(slurp(dir / "a" / name), slurp(dir / "b" / name)) << name;
  }
}

TEST_F(CliFixture, RandomRunWritesNoPolicyExamples) {
  make_data();
  const auto cfg = write_config("sim.json", simulate_config("random"));
  ASSERT_EQ(run("simulate --config " + cfg.string() + " --out " + (dir / "r").string()), 0);
  EXPECT_FALSE(fs::exists(dir / "r" / "policy_examples_0.jsonl"));
  ASSERT_EQ(run("simulate --log-oracle-scores --config " + cfg.string() + " --out " +
                (dir / "r2").string()),
            0);
  EXPECT_TRUE(fs::exists(dir / "r2" / "policy_examples_0.jsonl"));
  EXPECT_EQ(slurp(dir / "r" / "mean_curve.csv"), slurp(dir / "r2" / "mean_curve.csv"));
}

TEST_F(CliFixture, SchemaErrorsExitTwo) {
  make_data();
  json bad = simulate_config("oracle");
  bad["surprise"] = 1;
  EXPECT_EQ(run("simulate --config " + write_config("bad.json", bad).string() + " --out " +
                (dir / "x").string()),
            2);
  bad = simulate_config("nonsense");
  EXPECT_EQ(run("simulate --config " + write_config("bad2.json", bad).string() + " --out " +
                (dir / "y").string()),
            2);
  EXPECT_EQ(run("simulate --bogus-flag"), 2);
}

TEST_F(CliFixture, ReportComputesRelativeImprovementAndChecksAlignment) {
  std::ofstream(dir / "base.csv") << "labeled_size,metric,policy,seed\n10,0.5,random,1\n20,0.483,random,1\n";
  std::ofstream(dir / "pol.csv") << "labeled_size,metric,policy,seed\n10,0.55,oracle,1\n20,0.529,oracle,1\n";
  std::ofstream(dir / "short.csv") << "labeled_size,metric,policy,seed\n10,0.55,oracle,1\n";
  const fs::path out = dir / "rel.csv";
  ASSERT_EQ(run("report " + (dir / "pol.csv").string() + " --baseline " + (dir / "base.csv").string() +
                " --out " + out.string()),
            0);
  std::istringstream rows(slurp(out));
  std::string header, r1, r2;
  std::getline(rows, header);
  std::getline(rows, r1);
  std::getline(rows, r2);
  EXPECT_EQ(header, "labeled_size,oracle");
  EXPECT_NEAR(std::stod(r1.substr(r1.find(',') + 1)), 10.0, 1e-6);
  EXPECT_NEAR(std::stod(r2.substr(r2.find(',') + 1)), 100.0 * (0.529 - 0.483) / 0.483, 1e-6);
  EXPECT_EQ(run("report " + (dir / "short.csv").string() + " --baseline " +
                (dir / "base.csv").string() + " --out " + (dir / "rel2.csv").string()),
            4);
}

TEST_F(CliFixture, ProbeWritesWindowCsv) {
  make_data();
  const json cfg{{"command", "probe_mrr"},
                 {"dataset", "data.jsonl"},
                 {"iterations", 6},
                 {"candidates", 3},
                 {"set_size", 1},
                 {"window", 3},
                 {"seed_pair", {5, 5}},
                 {"learner",
                  {{"family", "linear_softmax"}, {"input_dim", 2}, {"class_count", 2}, {"max_epochs", 10}}},
                 {"partition", {{"labeled", 4}, {"unlabeled", 40}, {"eval", 16}}}};
  const fs::path out = dir / "probe";
  ASSERT_EQ(run("probe-mrr --config " + write_config("probe.json", cfg).string() + " --out " +
                out.string()),
            0);
  std::istringstream rows(slurp(out / "mrr.csv"));
  std::string header, line;
  std::getline(rows, header);
  EXPECT_EQ(header, "window_start,window_end,mrr,baseline");
  int n = 0;
  while (std::getline(rows, line)) {
    ++n;
    EXPECT_NE(line.find(",1,"), std::string::npos) << line;
  }
  EXPECT_EQ(n, 2);
}

}  // namespace
