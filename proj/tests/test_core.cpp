#include <gtest/gtest.h>

#include <cstring>
#include <fstream>
#include <set>

#include "affectlens/affectlens.hpp"
#include "support/generators.hpp"

using namespace affectlens;

TEST(Error, CarriesKindAndDetail) {
  const Error e(ErrorKind::RowSumViolation, "layer 0 head 1 row 2");
  EXPECT_EQ(e.kind(), ErrorKind::RowSumViolation);
  EXPECT_EQ(e.detail(), "layer 0 head 1 row 2");
  EXPECT_STREQ(e.what(), "RowSumViolation: layer 0 head 1 row 2");
}

TEST(Emotion, NineLabelsRoundTrip) {
  ASSERT_EQ(kNumEmotions, 9u);
  for (Emotion e : kAllEmotions) EXPECT_EQ(parse_emotion(to_string(e)), e);
  EXPECT_EQ(parse_emotion("sarcastic"), Emotion::Sarcastic);
  EXPECT_EQ(index_of(Emotion::Neutral), 0u);
}

TEST(Emotion, UnknownLabelRaises) {
  try {
    parse_emotion("joy");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::UnknownEmotionLabel);
  }
  EXPECT_FALSE(try_parse_emotion("Happy").has_value());
}

TEST(Rng, SameSeedSameStream) {
  Rng a(42, 3), b(42, 3), c(42, 4);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    differs = differs || x != c.next_u64();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, UniformAndBelowRanges) {
  Rng r(7);
  double sum = 0;
  for (int i = 0; i < 20000; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
    ASSERT_LT(r.below(9), 9u);
  }
  EXPECT_NEAR(sum / 20000, 0.5, 0.01);
}

TEST(Rng, NormalMoments) {
  Rng r(11);
  double s = 0, s2 = 0;
  const int n = 50000;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    s += z;
    s2 += z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 0.02);
  EXPECT_NEAR(s2 / n, 1.0, 0.03);
}

TEST(Rng, ShuffleIsPermutation) {
  Rng r(1);
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  r.shuffle(std::span<int>(v));
  EXPECT_EQ(std::set<int>(v.begin(), v.end()).size(), 50u);
  EXPECT_FALSE(std::is_sorted(v.begin(), v.end()));
}

TEST(Parallel, ResultsIndependentOfThreads) {
  auto run = [](std::size_t threads) {
    std::vector<double> out(257);
    parallel_for(out.size(), threads, [&](std::size_t i) {
      Rng r(99, i);
      out[i] = r.normal();
    });
    return out;
  };
  const auto one = run(1);
  EXPECT_EQ(one, run(4));
  EXPECT_EQ(one, run(8));
}

TEST(Parallel, RethrowsLowestFailingIndex) {
  for (std::size_t threads : {1u, 3u}) {
    try {
      parallel_for(20, threads, [](std::size_t i) {
        if (i == 5 || i == 13) throw Error(ErrorKind::EmptyInput, std::to_string(i));
      });
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.detail(), "5");
    }
  }
}

TEST(Parallel, EnvironmentOverride) {
  ::setenv("AFFECTLENS_THREADS", "3", 1);
  EXPECT_EQ(resolve_thread_count(0), 3u);
  EXPECT_EQ(resolve_thread_count(5), 5u);
  ::unsetenv("AFFECTLENS_THREADS");
  EXPECT_GE(resolve_thread_count(0), 1u);
}

class Npy : public ::testing::Test {
 protected:
  testgen::TempDir dir;
};

TEST_F(Npy, FloatRoundTripBitExact) {
  Rng r(3);
  Tensor<float> t({2, 3, 4});
  for (auto& v : t.data) v = static_cast<float>(r.normal());
  t.data[0] = -0.0f;
  t.data[1] = 1e-42f;  // subnormal
  npy::write(dir / "a.npy", t);
  const auto back = npy::read<float>(dir / "a.npy");
  ASSERT_EQ(back.shape, t.shape);
  EXPECT_EQ(std::memcmp(back.data.data(), t.data.data(), t.data.size() * sizeof(float)), 0);
}

TEST_F(Npy, HeaderIsNumpyV1Aligned) {
  npy::write(dir / "m.npy", Tensor<std::uint8_t>({5}, {1, 0, 1, 1, 0}));
  std::ifstream in(dir / "m.npy", std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), {});
  ASSERT_GE(bytes.size(), 10u);
  EXPECT_EQ(bytes.substr(0, 6), "\x93NUMPY");
  EXPECT_EQ(bytes[6], 1);
  EXPECT_EQ(bytes[7], 0);
  const std::size_t hlen = static_cast<unsigned char>(bytes[8]) | (static_cast<unsigned char>(bytes[9]) << 8);
  EXPECT_EQ((10 + hlen) % 64, 0u);
  EXPECT_EQ(bytes[10 + hlen - 1], '\n');
  const auto header = bytes.substr(10, hlen);
  EXPECT_NE(header.find("'descr': '|u1'"), std::string::npos);
  EXPECT_NE(header.find("'fortran_order': False"), std::string::npos);
  EXPECT_NE(header.find("'shape': (5,)"), std::string::npos);
  EXPECT_EQ(bytes.size(), 10 + hlen + 5);
}

TEST_F(Npy, DoubleAndWidening) {
  Tensor<double> d({3}, {1.5, -2.25, 1e300});
  npy::write(dir / "d.npy", d);
  EXPECT_EQ(npy::read<double>(dir / "d.npy"), d);
  Tensor<float> f({2}, {0.1f, 0.2f});
  npy::write(dir / "f.npy", f);
  const auto w = npy::read<double>(dir / "f.npy");
  EXPECT_EQ(w.data[0], static_cast<double>(0.1f));
}

TEST_F(Npy, ScalarAndEmptyShapes) {
  npy::write(dir / "s.npy", Tensor<double>({}, {4.0}));
  EXPECT_EQ(npy::read<double>(dir / "s.npy").data, std::vector<double>{4.0});
  npy::write(dir / "e.npy", Tensor<float>({0, 3}));
  const auto e = npy::read<float>(dir / "e.npy");
  EXPECT_EQ(e.shape, (std::vector<std::size_t>{0, 3}));
}

TEST_F(Npy, ErrorsAreTyped) {
  auto kind_of = [](auto&& f) {
    try {
      f();
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::ConfigError;
  };
  EXPECT_EQ(kind_of([&] { npy::read<float>(dir / "missing.npy"); }), ErrorKind::MissingFile);
  {
    std::ofstream(dir / "junk.npy") << "not an npy file at all";
  }
  EXPECT_EQ(kind_of([&] { npy::read<float>(dir / "junk.npy"); }), ErrorKind::ParseError);
  npy::write(dir / "u.npy", Tensor<std::uint8_t>({2}, {1, 0}));
  EXPECT_EQ(kind_of([&] { npy::read<float>(dir / "u.npy"); }), ErrorKind::ParseError);
  // truncate the payload
  npy::write(dir / "t.npy", Tensor<float>({4}, {1, 2, 3, 4}));
  std::filesystem::resize_file(dir / "t.npy", std::filesystem::file_size(dir / "t.npy") - 4);
  EXPECT_EQ(kind_of([&] { npy::read<float>(dir / "t.npy"); }), ErrorKind::ShapeMismatch);
}

TEST(Tensor, ShapeChecked) {
  EXPECT_THROW(Tensor<float>({2, 2}, std::vector<float>{1, 2, 3}), Error);
  Tensor<float> t({2, 3});
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.dim(1), 3u);
  EXPECT_EQ(shape_to_string(t.shape), "[2,3]");
}
