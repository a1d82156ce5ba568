#include <gtest/gtest.h>

#include <cstring>
#include <fstream>

#include "affectlens/affectlens.hpp"
#include "support/generators.hpp"

using namespace affectlens;
namespace fs = std::filesystem;

namespace {

AttentionBundle small_bundle() {
  Rng rng(5);
  SyntheticSpec spec;
  spec.layers = 2;
  spec.heads = 2;
  spec.seq_len = 4;
  return synthetic_bundle(rng, spec, "ex-1", Emotion::Sad, true);
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::ConfigError;
}

bool bits_equal(const std::vector<float>& a, const std::vector<float>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

}  // namespace

TEST(TensorStore, RoundTripShapes) {
  testgen::TempDir dir;
  const auto b = small_bundle();
  write_bundle(b, dir.path());
  const auto back = read_bundle(dir.path());
  ASSERT_EQ(back.attention.size(), 2u);
  EXPECT_EQ(back.attention[0].shape, (std::vector<std::size_t>{2, 4, 4}));
  EXPECT_EQ(back, b);
  EXPECT_FALSE(back.hidden.has_value());
}

TEST(TensorStore, ManifestFieldsAndLayout) {
  testgen::TempDir dir;
  auto b = small_bundle();
  b.manifest.variant_of = "ctx-7";
  write_bundle(b, dir.path());
  for (const char* f : {"manifest.json", "attn_L0.npy", "attn_L1.npy", "query_mask.npy", "task_mask.npy",
                        "context_mask.npy"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  EXPECT_FALSE(fs::exists(dir / "hidden_L0.npy"));
  std::ifstream in(dir / "manifest.json");
  const auto j = nlohmann::json::parse(in);
  EXPECT_EQ(j.at("schema_version"), 1);
  EXPECT_EQ(j.at("example_id"), "ex-1");
  EXPECT_EQ(j.at("num_layers"), 2);
  EXPECT_EQ(j.at("num_heads"), 2);
  EXPECT_EQ(j.at("seq_len"), 4);
  EXPECT_EQ(j.at("hidden_dim"), 0);
  EXPECT_EQ(j.at("emotion"), "sad");
  EXPECT_EQ(j.at("correct"), true);
  EXPECT_EQ(j.at("variant_of"), "ctx-7");
  EXPECT_EQ(j.at("file_table").at("attn_L1"), "attn_L1.npy");
  EXPECT_FALSE(j.at("file_table").contains("hidden_L0"));
}

TEST(TensorStore, HiddenStatesRoundTrip) {
  testgen::TempDir dir;
  Rng rng(8);
  SyntheticSpec spec;
  spec.hidden_dim = 3;
  const auto b = synthetic_bundle(rng, spec, "h", Emotion::Fear);
  write_bundle(b, dir.path());
  const auto back = read_bundle(dir.path());
  ASSERT_TRUE(back.hidden.has_value());
  EXPECT_EQ((*back.hidden)[1].shape, (std::vector<std::size_t>{8, 3}));
  EXPECT_TRUE(bits_equal((*back.hidden)[1].data, (*b.hidden)[1].data));
}

TEST(TensorStore, UnknownManifestFieldsIgnored) {
  testgen::TempDir dir;
  write_bundle(small_bundle(), dir.path());
  std::ifstream in(dir / "manifest.json");
  auto j = nlohmann::json::parse(in);
  in.close();
  j["extractor_notes"] = "extra";
  std::ofstream(dir / "manifest.json") << j.dump();
  EXPECT_EQ(read_bundle(dir.path()).manifest.example_id, "ex-1");
}

TEST(TensorStore, WrongTensorShape) {
  testgen::TempDir dir;
  write_bundle(small_bundle(), dir.path());
  npy::write(dir / "attn_L1.npy", Tensor<float>({2, 5, 5}, 0.2f));
  EXPECT_EQ(kind_of([&] { read_bundle(dir.path()); }), ErrorKind::ShapeMismatch);
}

TEST(TensorStore, MissingFile) {
  testgen::TempDir dir;
  write_bundle(small_bundle(), dir.path());
  fs::remove(dir / "task_mask.npy");
  EXPECT_EQ(kind_of([&] { read_bundle(dir.path()); }), ErrorKind::MissingFile);
  EXPECT_EQ(kind_of([&] { read_bundle(dir / "nope"); }), ErrorKind::MissingFile);
}

TEST(TensorStore, RowSumViolationOnRead) {
  testgen::TempDir dir;
  auto b = small_bundle();
  write_bundle(b, dir.path());
  auto A = b.attention[0];
  // scale query row 1 of head 0 to sum 0.8
  for (std::size_t j = 0; j < 4; ++j) A.data[(0 * 4 + 1) * 4 + j] *= 0.8f;
  npy::write(dir / "attn_L0.npy", A);
  try {
    read_bundle(dir.path());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::RowSumViolation);
    EXPECT_NE(e.detail().find("l=0,h=0,i=1"), std::string::npos) << e.detail();
  }
}

TEST(TensorStore, UnknownEmotionLabel) {
  testgen::TempDir dir;
  write_bundle(small_bundle(), dir.path());
  std::ifstream in(dir / "manifest.json");
  auto j = nlohmann::json::parse(in);
  in.close();
  j["emotion"] = "melancholy";
  std::ofstream(dir / "manifest.json") << j.dump();
  EXPECT_EQ(kind_of([&] { read_bundle(dir.path()); }), ErrorKind::UnknownEmotionLabel);
}

TEST(TensorStore, WriteRefusesInvalidBundle) {
  testgen::TempDir dir;
  auto b = small_bundle();
  b.attention[1].data[(1 * 4 + 0) * 4 + 0] += 0.5f;
  EXPECT_EQ(kind_of([&] { write_bundle(b, dir / "out"); }), ErrorKind::RowSumViolation);
  EXPECT_FALSE(fs::exists(dir / "out" / "manifest.json"));
}

TEST(Validate, ValidBundleEmptyReport) {
  const auto r = validate_bundle(small_bundle());
  EXPECT_TRUE(r.ok());
  EXPECT_TRUE(r.violations.empty());
}

TEST(Validate, NegativeEntryNamesCoordinate) {
  auto b = small_bundle();
  // (l=0, h=1, i=2, j=3); keep the row sum so only the sign is wrong
  auto& row = b.attention[0].data;
  const std::size_t base = (1 * 4 + 2) * 4;
  row[base + 3] = -0.05f;
  row[base + 0] += 0.05f;
  b.query_mask = {1, 1, 1, 1};
  const auto r = validate_bundle(b);
  ASSERT_FALSE(r.ok());
  bool named = false;
  for (const auto& v : r.violations) {
    named = named || v.location == "l=0,h=1,i=2,j=3";
  }
  EXPECT_TRUE(named) << r.summary();
}

TEST(Validate, NoValidQueries) {
  auto b = small_bundle();
  std::fill(b.query_mask.begin(), b.query_mask.end(), 0);
  std::fill(b.task_mask.begin(), b.task_mask.end(), 0);
  const auto r = validate_bundle(b);
  ASSERT_FALSE(r.ok());
  bool found = false;
  for (const auto& v : r.violations) found = found || v.message.find("no valid query positions") != std::string::npos;
  EXPECT_TRUE(found) << r.summary();
}

TEST(Validate, TotalOnGarbage) {
  AttentionBundle b;
  b.manifest.num_layers = 2;
  b.manifest.num_heads = 1;
  b.manifest.seq_len = 3;
  b.attention.push_back(Tensor<float>({1, 3, 3}, NAN));
  b.query_mask = {1, 1};
  const auto r = validate_bundle(b);
  EXPECT_FALSE(r.ok());
  EXPECT_GE(r.violations.size(), 2u);
}

TEST(Validate, TaskOutsideQueries) {
  auto b = small_bundle();
  b.task_mask[3] = 1;  // position 3 is masked padding
  EXPECT_FALSE(validate_bundle(b).ok());
}

TEST(Validate, MaskedRowsAreNotChecked) {
  auto b = small_bundle();
  // padding row 3 holds junk that sums to 2
  for (auto& A : b.attention)
    for (std::size_t j = 0; j < 4; ++j) A.data[(0 * 4 + 3) * 4 + j] = 0.5f;
  EXPECT_TRUE(validate_bundle(b).ok()) << validate_bundle(b).summary();
}

TEST(Corpus, IndexRoundTrip) {
  testgen::TempDir dir;
  Rng rng(2);
  std::vector<std::string> ids;
  for (int i = 0; i < 3; ++i) {
    const auto id = "c" + std::to_string(i);
    write_bundle(synthetic_bundle(rng, {}, id, Emotion::Happy), dir / id);
    ids.push_back(id);
  }
  write_corpus_index(dir.path(), ids);
  EXPECT_EQ(read_corpus_index(dir.path()), ids);
  const auto one = read_corpus(dir.path(), 1), many = read_corpus(dir.path(), 3);
  ASSERT_EQ(one.size(), 3u);
  EXPECT_EQ(one, many);
  EXPECT_EQ(one[2].manifest.example_id, "c2");
}

TEST(Corpus, RandomRoundTripBitExact) {
  testgen::TempDir dir;
  Rng rng(77);
  for (int n = 0; n < 25; ++n) {
    const auto b = testgen::random_bundle(rng, "r" + std::to_string(n), n % 2 == 0);
    ASSERT_TRUE(validate_bundle(b).ok()) << validate_bundle(b).summary();
    const auto p = dir / ("r" + std::to_string(n));
    write_bundle(b, p);
    const auto back = read_bundle(p);
    EXPECT_EQ(back.manifest, b.manifest);
    for (std::size_t l = 0; l < b.attention.size(); ++l) EXPECT_TRUE(bits_equal(back.attention[l].data, b.attention[l].data));
    EXPECT_EQ(back.query_mask, b.query_mask);
    EXPECT_EQ(back.context_mask, b.context_mask);
  }
}
