#include <gtest/gtest.h>
#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>

#include "test_util.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kFixture = fs::path(AMLGRAPH_FIXTURE_DIR) / "synth";

struct Run {
  int code = -1;
  std::string out, err;
};

// Runs the CLI with `args`, capturing both streams into files under `dir`.
Run cli(const std::string& args, const fs::path& dir) {
  const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = std::string("'") + AMLGRAPH_CLI + "' " + args + " > '" + out.string() + "' 2> '" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = test_util::read(out);
  r.err = test_util::read(err);
  return r;
}

std::string data() { return "--data-dir '" + kFixture.string() + "'"; }

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

std::string first_tx() {
  std::ifstream in(kFixture / "elliptic_txs_classes.csv");
  std::string line;
  std::getline(in, line);
  std::getline(in, line);
  return line.substr(0, line.find(','));
}

const char* kQuickModels =
    " --epochs 12 --n-trees 6 --rounds 6 --mlp-epochs 20 --logreg-epochs 60 --svc-epochs 30";

}  // namespace

TEST(Cli, IngestCountsMatchManifest) {
  const auto dir = test_util::fresh_dir("ingest");
  const auto r = cli("ingest " + data(), dir);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto m = nlohmann::json::parse(test_util::read(kFixture / "manifest.json"));
  EXPECT_NE(r.out.find("raw_nodes=" + m["raw_nodes"].dump() + " raw_edges=" + m["raw_edges"].dump()), std::string::npos);
  EXPECT_NE(r.out.find("nodes=" + m["nodes"].dump() + " edges=" + m["edges"].dump() + "\n"), std::string::npos);
  EXPECT_NE(r.out.find("illicit=" + m["illicit"].dump() + " licit=" + m["licit"].dump()), std::string::npos);
  EXPECT_NE(r.out.find("local=16 aggregated=8"), std::string::npos);
}

TEST(Cli, BundleIsDeterministicAndUsable) {
  const auto dir = test_util::fresh_dir("bundle");
  ASSERT_EQ(cli("ingest " + data() + " --out '" + (dir / "a.bin").string() + "'", dir).code, 0);
  ASSERT_EQ(cli("ingest " + data() + " --out '" + (dir / "b.bin").string() + "'", dir).code, 0);
  EXPECT_EQ(test_util::read(dir / "a.bin"), test_util::read(dir / "b.bin"));
  const auto r = cli("train --bundle '" + (dir / "a.bin").string() + "' --model decision_tree --out-dir '" +
                         (dir / "tree").string() + "'",
                     dir);
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir / "tree" / "report.csv"));
}

TEST(Cli, MissingInputFailsWithoutWriting) {
  const auto dir = test_util::fresh_dir("missing");
  const auto r = cli("train --data-dir '" + (dir / "nowhere").string() + "' --model logreg --out-dir '" +
                         (dir / "out").string() + "'",
                     dir);
  EXPECT_EQ(r.code, 1);
  EXPECT_TRUE(r.err.starts_with("error: ")) << r.err;
  EXPECT_FALSE(fs::exists(dir / "out"));
}

TEST(Cli, TrainIsReproducibleForFixedSeed) {
  const auto dir = test_util::fresh_dir("train");
  for (const char* run : {"a", "b"}) {
    const auto r = cli("train " + data() + " --model gcn --epochs 10 --seed 3 --out-dir '" + (dir / run).string() + "'", dir);
    ASSERT_EQ(r.code, 0) << r.err;
  }
  for (const char* f : {"report.csv", "history.csv", "model.ckpt"}) {
    EXPECT_EQ(test_util::read(dir / "a" / f), test_util::read(dir / "b" / f)) << f;
  }
  EXPECT_EQ(lines(test_util::read(dir / "a" / "history.csv")), 11u);
  EXPECT_EQ(lines(test_util::read(dir / "a" / "report.csv")), 2u);
}

TEST(Cli, EvalReproducesTrainReport) {
  const auto dir = test_util::fresh_dir("eval");
  ASSERT_EQ(cli("train " + data() + " --model knn --seed 9 --out-dir '" + dir.string() + "'", dir).code, 0);
  const auto r = cli("eval " + data() + " --checkpoint '" + (dir / "model.ckpt").string() + "' --seed 9 --out '" +
                         (dir / "eval.csv").string() + "'",
                     dir);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(test_util::read(dir / "eval.csv"), test_util::read(dir / "report.csv"));
}

TEST(Cli, BenchResultsAreByteIdentical) {
  const auto dir = test_util::fresh_dir("bench");
  const auto a = cli("bench " + data() + kQuickModels + " --jobs 1 --out-dir '" + (dir / "a").string() + "'", dir);
  ASSERT_EQ(a.code, 0) << a.err;
  const auto b = cli("bench " + data() + kQuickModels + " --jobs 4 --out-dir '" + (dir / "b").string() + "'", dir);
  ASSERT_EQ(b.code, 0) << b.err;
  const auto csv = test_util::read(dir / "a" / "results.csv");
  EXPECT_EQ(csv, test_util::read(dir / "b" / "results.csv"));
  EXPECT_EQ(test_util::read(dir / "a" / "tables.md"), test_util::read(dir / "b" / "tables.md"));
  EXPECT_EQ(lines(csv), 17u);
  EXPECT_EQ(lines(test_util::read(dir / "a" / "timings.csv")), 17u);
}

TEST(Cli, BenchModelSubset) {
  const auto dir = test_util::fresh_dir("subset");
  auto r = cli("bench " + data() + " --models knn,svc --out-dir '" + dir.string() + "'", dir);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(lines(test_util::read(dir / "results.csv")), 5u);
  r = cli("bench " + data() + " --models knn,xgboost --out-dir '" + (dir / "x").string() + "'", dir);
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("xgboost"), std::string::npos);
}

TEST(Cli, ExportDepthZeroIsSingleNode) {
  const auto dir = test_util::fresh_dir("export0");
  const auto r = cli("export " + data() + " --tx " + first_tx() + " --depth 0 --out '" + (dir / "g.dot").string() + "'", dir);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("members=1 edges=0"), std::string::npos);
  const auto dot = test_util::read(dir / "g.dot");
  EXPECT_EQ(dot.find("->"), std::string::npos);
  EXPECT_NE(dot.find(first_tx()), std::string::npos);
}

TEST(Cli, ExportTruthVersusPredicted) {
  const auto dir = test_util::fresh_dir("export2");
  ASSERT_EQ(cli("train " + data() + " --model decision_tree --out-dir '" + dir.string() + "'", dir).code, 0);
  const std::string common = "export " + data() + " --tx " + first_tx() + " --depth 2 ";
  ASSERT_EQ(cli(common + "--out '" + (dir / "truth.dot").string() + "'", dir).code, 0);
  ASSERT_EQ(cli(common + "--out '" + (dir / "again.dot").string() + "'", dir).code, 0);
  ASSERT_EQ(cli(common + "--annotations predicted --checkpoint '" + (dir / "model.ckpt").string() + "' --out '" +
                    (dir / "pred.dot").string() + "'",
                dir)
                .code,
            0);
  const auto truth = test_util::read(dir / "truth.dot"), pred = test_util::read(dir / "pred.dot");
  EXPECT_EQ(truth, test_util::read(dir / "again.dot"));
  std::istringstream a(truth), b(pred);
  std::string la, lb;
  std::size_t n = 0;
  while (std::getline(a, la)) {
    ASSERT_TRUE(std::getline(b, lb));
    if (la != lb) {
      EXPECT_NE(la.find("fillcolor"), std::string::npos) << la;
    }
    ++n;
  }
  EXPECT_FALSE(std::getline(b, lb));
  EXPECT_GT(n, 3u);

  const auto g = cli(common + "--out '" + (dir / "g.graphml").string() + "'", dir);
  ASSERT_EQ(g.code, 0) << g.err;
  EXPECT_TRUE(test_util::read(dir / "g.graphml").starts_with("<?xml"));
}

TEST(Cli, ExportRejectsBadRequests) {
  const auto dir = test_util::fresh_dir("exportbad");
  auto r = cli("export " + data() + " --tx nope --out '" + (dir / "g.dot").string() + "'", dir);
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("unknown transaction 'nope'"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir / "g.dot"));
  r = cli("export " + data() + " --tx " + first_tx() + " --annotations predicted --out '" + (dir / "g.dot").string() + "'",
          dir);
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("--checkpoint"), std::string::npos);
}

TEST(Cli, ConfigFileLosesToExplicitFlags) {
  const auto dir = test_util::fresh_dir("config");
  test_util::write(dir / "cfg.json", R"({"model": "gcn", "epochs": 3, "hidden": 8, "batch-norm": false})");
  auto r = cli("train " + data() + " --config '" + (dir / "cfg.json").string() + "' --out-dir '" + (dir / "a").string() + "'",
               dir);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(lines(test_util::read(dir / "a" / "history.csv")), 4u);
  r = cli("train " + data() + " --config '" + (dir / "cfg.json").string() + "' --epochs 5 --out-dir '" +
              (dir / "b").string() + "'",
          dir);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(lines(test_util::read(dir / "b" / "history.csv")), 6u);
}

TEST(Cli, MalformedConfigIsAnError) {
  const auto dir = test_util::fresh_dir("badcfg");
  test_util::write(dir / "cfg.json", "[1, 2]");
  const auto r = cli("train " + data() + " --model knn --config '" + (dir / "cfg.json").string() + "' --out-dir '" +
                         (dir / "o").string() + "'",
                     dir);
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("flat JSON object"), std::string::npos);
  EXPECT_NE(cli("train " + data() + " --model knn --config '" + (dir / "none.json").string() + "'", dir).code, 0);
}

TEST(Cli, UsageErrorsExitNonzero) {
  const auto dir = test_util::fresh_dir("usage");
  EXPECT_NE(cli("", dir).code, 0);
  EXPECT_NE(cli("frobnicate", dir).code, 0);
  EXPECT_NE(cli("train " + data(), dir).code, 0);  // --model is required
  EXPECT_NE(cli("train " + data() + " --model xgboost --out-dir '" + dir.string() + "'", dir).code, 0);
}

TEST(Cli, SelftestPassesAndDetectsInjectedFault) {
  const auto dir = test_util::fresh_dir("self");
  auto r = cli("selftest", dir);
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
  EXPECT_NE(r.out.find("10/10 checks passed"), std::string::npos);
  r = cli("selftest --inject-fault", dir);
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("FAIL gradient"), std::string::npos);
}

TEST(Cli, SynthReproducesShippedFixture) {
  const auto dir = test_util::fresh_dir("synth");
  const auto r = cli("synth --out-dir '" + dir.string() + "'", dir);
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"elliptic_txs_features.csv", "elliptic_txs_classes.csv", "elliptic_txs_edgelist.csv", "manifest.json"}) {
    EXPECT_EQ(test_util::read(dir / f), test_util::read(kFixture / f)) << f;
  }
}
