#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sys/wait.h>

#include <json.hpp>

#include "affectlens/affectlens.hpp"
#include "support/generators.hpp"

using namespace affectlens;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kFixtures = AFFECTLENS_FIXTURES;

struct Result {
  int code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class Cli : public ::testing::Test {
 protected:
  Result run(const std::string& args) {
    const auto o = tmp / "stdout.txt", e = tmp / "stderr.txt";
    const std::string cmd = std::string("\"") + AFFECTLENS_CLI_PATH + "\" " + args + " > \"" + o.string() +
                            "\" 2> \"" + e.string() + "\"";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(o), slurp(e)};
  }
  std::string out(const std::string& name) { return (tmp / name).string(); }
  json read_json(const std::string& rel) { return json::parse(slurp(tmp / rel)); }

  std::string corpus = (kFixtures / "corpus").string();
  testgen::TempDir tmp;
};

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_F(Cli, ValidateCorpusAndBadBundle) {
  auto r = run("validate --corpus " + corpus);
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("27/27 bundles valid"), std::string::npos) << r.out;
  r = run("validate --bundle " + (kFixtures / "bad_bundle").string() + " --out " + out("v"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("RowSumViolation"), std::string::npos) << r.out;
  EXPECT_TRUE(fs::exists(tmp / "v" / "validation.json"));
}

TEST_F(Cli, FeaturesWritesCsvAndManifest) {
  const auto r = run("features --corpus " + corpus + " --out " + out("f"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto t = read_feature_csv(tmp / "f" / "features.csv");
  EXPECT_EQ(t.rows.size(), 27u);
  EXPECT_EQ(t.names, feature_names());
  const auto m = read_json("f/run_manifest.json");
  EXPECT_EQ(m["subcommand"], "features");
  EXPECT_EQ(m["config"]["d0"], "16");
  EXPECT_TRUE(m["libraries"].contains("eigen"));
  EXPECT_EQ(m["outputs"], json::array({"features.csv"}));
}

TEST_F(Cli, PredictAccuracyFromCsvMatchesCorpus) {
  ASSERT_EQ(run("features --corpus " + corpus + " --out " + out("f")).code, 0);
  auto r = run("predict-accuracy --features " + out("f/features.csv") + " --folds 3 --out " + out("a"));
  ASSERT_EQ(r.code, 0) << r.err;
  r = run("predict-accuracy --corpus " + corpus + " --folds 3 --out " + out("b"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(tmp / "a" / "cv_report.json"), slurp(tmp / "b" / "cv_report.json"));
  const auto j = read_json("a/cv_report.json");
  EXPECT_EQ(j["n"], 27);
  EXPECT_EQ(j["multivariate"]["fold_values"].size(), 3u);
  // header plus one row per feature
  EXPECT_EQ(count_lines(slurp(tmp / "a" / "univariate.csv")), 27u);
}

TEST_F(Cli, EmotionClassify) {
  const auto r = run("emotion-classify --corpus " + corpus + " --folds 3 --trees 30 --out " + out("c"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = read_json("c/emotion_report.json");
  EXPECT_EQ(j["n"], 27);
  EXPECT_EQ(j["confusion"].size(), kNumEmotions);
  EXPECT_EQ(count_lines(slurp(tmp / "c" / "predictions.csv")), 28u);
}

TEST_F(Cli, EmotionClassifyNeedsEnoughPerClass) {
  const auto r = run("emotion-classify --corpus " + corpus + " --folds 5 --out " + out("c"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("error: ClassTooSmall:"), std::string::npos) << r.err;
}

TEST_F(Cli, EffectSizes) {
  auto r = run("effect-sizes --corpus " + corpus + " --out " + out("e"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(count_lines(slurp(tmp / "e" / "effect_sizes.csv")), 1u + kNumEmotions);
  EXPECT_EQ(slurp(tmp / "e" / "effect_sizes.svg").rfind("<svg", 0), 0u);
  r = run("effect-sizes --corpus " + corpus + " --exclude-emotion neutral disgust --out " + out("x"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(count_lines(slurp(tmp / "x" / "effect_sizes.csv")), kNumEmotions - 1);
  r = run("effect-sizes --corpus " + corpus + " --exclude-emotion bored --out " + out("y"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("error: UnknownEmotionLabel:"), std::string::npos) << r.err;
}

TEST_F(Cli, AttnDiff) {
  const auto r = run("attn-diff --corpus " + corpus + " --out " + out("d"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(tmp / "d" / "attn_diff_summary.csv"));
  EXPECT_TRUE(fs::exists(tmp / "d" / "attn_diff.json"));
}

TEST_F(Cli, FitProjectAlign) {
  auto r = run("fit-subspace --corpus " + corpus + " --rank 2 --out " + out("s"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto subs = read_subspaces(tmp / "s");
  ASSERT_EQ(subs.size(), 3u);
  EXPECT_EQ(subs[0].subspace.rank(), 2u);
  EXPECT_EQ(subs[0].centroids.size(), kNumEmotions);

  Tensor<double> E({5, 4});
  Rng rng(1);
  for (double& v : E.data) v = rng.normal();
  npy::write(tmp / "e.npy", E);
  r = run("project --subspace " + out("s") + " --embeddings " + out("e.npy") + " --layer 1 --out " + out("p"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto P = npy::read<double>(tmp / "p" / "projected_L1.npy");
  EXPECT_EQ(P.shape, (std::vector<std::size_t>{5, 4}));

  r = run("align --a " + out("s") + " --b " + out("s") + " --layer 0 --pair happy,sad --out " + out("al"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = read_json("al/alignment.json");
  EXPECT_NEAR(j["stress"].get<double>(), 0.0, 1e-12);
  EXPECT_NEAR(j["mean_distortion"].get<double>(), 0.0, 1e-12);
  EXPECT_NEAR(j["pairs"][0]["cosine"].get<double>(), 1.0, 1e-12);

  r = run("fit-subspace --corpus " + corpus + " --rank 9 --out " + out("big"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("error: RankTooLarge:"), std::string::npos) << r.err;
}

TEST_F(Cli, DriftIdenticalAndDistinct) {
  auto r = run("drift --corpus " + (kFixtures / "drift_same").string() + " --out " + out("same"));
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = read_json("same/drift.json");
  EXPECT_EQ(j["L_pair"].get<double>(), 0.0);
  EXPECT_EQ(j["groups"], 2);

  r = run("drift --corpus " + (kFixtures / "drift").string() + " --out " + out("dist"));
  ASSERT_EQ(r.code, 0) << r.err;
  j = read_json("dist/drift.json");
  EXPECT_EQ(j["groups"], 4);
  EXPECT_EQ(j["variants"], 3);
  const double unprojected = j["L_pair"].get<double>();
  EXPECT_GT(unprojected, 0.0);

  // removing the emotion subspace removes most of the variant differences
  r = run("fit-subspace --corpus " + (kFixtures / "drift").string() + " --rank 2 --out " + out("s"));
  ASSERT_EQ(r.code, 0) << r.err;
  r = run("drift --corpus " + (kFixtures / "drift").string() + " --subspace " + out("s") + " --out " + out("proj"));
  ASSERT_EQ(r.code, 0) << r.err;
  j = read_json("proj/drift.json");
  EXPECT_TRUE(j["projected"].get<bool>());
  EXPECT_LT(j["L_pair"].get<double>(), unprojected);
}

TEST_F(Cli, SegmentAndSweep) {
  const auto scores = (kFixtures / "scores.jsonl").string();
  auto r = run("segment --scores " + scores + " --out " + out("g"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto summary = read_json("g/segment_summary.json");
  EXPECT_EQ(count_lines(slurp(tmp / "g" / "segments.jsonl")), summary["segments"].get<std::size_t>());

  r = run("sweep --scores " + scores + " --out " + out("w"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(count_lines(slurp(tmp / "w" / "sweep.csv")), 20u);

  r = run("segment --scores " + scores + " --threshold 1.5 --out " + out("bad"));
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("error: ConfigError:"), std::string::npos) << r.err;
  r = run("sweep --scores " + scores + " --grid 0.3,0.1 --out " + out("bad2"));
  EXPECT_EQ(r.code, 3);
}

TEST_F(Cli, QaFilter) {
  const auto r = run("qa-filter --input " + (kFixtures / "qa.jsonl").string() + " --out " + out("q"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto lines = slurp(tmp / "q" / "qa_filter.jsonl");
  EXPECT_EQ(count_lines(lines), 3u);
  const auto s = read_json("q/qa_summary.json");
  EXPECT_EQ(s["records"], 3);
}

TEST_F(Cli, ErrorsAndExitCodes) {
  auto r = run("features --corpus " + out("missing") + " --out " + out("f"));
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(r.err.rfind("error: MissingFile:", 0), 0u) << r.err;
  r = run("features --out " + out("f"));
  EXPECT_EQ(r.code, 3);
  r = run("no-such-command");
  EXPECT_EQ(r.code, 3);
  r = run("predict-accuracy --out " + out("p"));
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("error: ConfigError:"), std::string::npos) << r.err;
  std::ofstream(tmp / "broken.jsonl") << "{\"document_id\": \n";
  r = run("segment --scores " + out("broken.jsonl") + " --out " + out("b"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("error: ParseError:"), std::string::npos) << r.err;
  r = run("--help");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("emotion-classify"), std::string::npos);
}
