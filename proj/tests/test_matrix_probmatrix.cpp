#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "ppu/probmatrix.hpp"
#include "support.hpp"

using namespace ppu;
using testing_support::random_probs;

TEST(Matrix, SelectRowsCopiesInOrder) {
  Matrix m(3, 2);
  for (std::size_t i = 0; i < 6; ++i) m.data[i] = static_cast<double>(i);
  const std::vector<std::size_t> idx{2, 0};
  const Matrix s = select_rows(m, idx);
  EXPECT_EQ(s.rows, 2u);
  EXPECT_EQ(s(0, 0), 4.0);
  EXPECT_EQ(s(1, 1), 1.0);
  const std::vector<std::size_t> bad{3};
  EXPECT_THROW(select_rows(m, bad), IndexError);
}

TEST(Matrix, BitwiseEqualSeesSignedZero) {
  Matrix a(1, 1, 0.0), b(1, 1, -0.0);
  EXPECT_TRUE(a == b);
  EXPECT_FALSE(bitwise_equal(a, b));
}

TEST(ProbMatrix, RejectsBadRows) {
  EXPECT_THROW(ProbMatrix(Matrix(1, 0)), ShapeError);
  Matrix neg(1, 2);
  neg(0, 0) = -0.1;
  neg(0, 1) = 1.1;
  EXPECT_THROW(ProbMatrix{neg}, InvalidProbabilities);
  Matrix off(1, 2, 0.4);
  EXPECT_THROW(ProbMatrix{off}, InvalidProbabilities);
  Matrix nan(1, 2, 0.5);
  nan(0, 0) = std::nan("");
  EXPECT_THROW(ProbMatrix{nan}, InvalidProbabilities);
  EXPECT_THROW(ProbMatrix(Matrix(2, 2, 0.5), {0}), ShapeError);
}

TEST(ProbMatrix, FloorsZerosAndKeepsRowsStochastic) {
  Matrix m(1, 3);
  m(0, 0) = 1.0;
  const ProbMatrix p(m);
  EXPECT_EQ(p(0, 1), kProbFloor);
  EXPECT_EQ(p(0, 2), kProbFloor);
  EXPECT_NEAR(p(0, 0) + p(0, 1) + p(0, 2), 1.0, 1e-15);
}

TEST(ProbMatrix, DefaultRegistryIsIdentity) {
  const ProbMatrix p(Matrix(3, 2, 0.5));
  EXPECT_EQ(p.registry(), (std::vector<std::size_t>{0, 1, 2}));
}

TEST(KlDiv, FrozenValues) {
  const std::vector<double> p{0.3, 0.7}, u{0.5, 0.5};
  EXPECT_NEAR(kl_div(p, u), 0.0822828785050518, 1e-15);
  const std::vector<double> e{1.0 - 1e-12, 1e-12};
  EXPECT_NEAR(kl_div(e, u), 0.693147180531314, 1e-13);
}

TEST(KlDiv, NonNegativeAndZeroOnDiagonal) {
  Rng rng(11);
  for (int t = 0; t < 1000; ++t) {
    const auto a = random_probs(1, 2 + t % 6, rng, 3.0);
    const auto b = random_probs(1, a.classes(), rng, 3.0);
    EXPECT_GE(kl_div(a.row(0), b.row(0)), 0.0);
    EXPECT_EQ(kl_div(a.row(0), a.row(0)), 0.0);
  }
}

TEST(KlDiv, ShapeMismatchThrows) {
  const std::vector<double> a{1.0}, b{0.5, 0.5};
  EXPECT_THROW(kl_div(a, b), ShapeError);
}

TEST(PseudoGenerate, UniformRowsAreExact) {
  const auto p = pseudo_generate(4, 5, PseudoScheme::uniform());
  for (double v : p.values().data) EXPECT_EQ(v, 0.2);
}

TEST(PseudoGenerate, RandomInstancesSatisfyInvariants) {
  Rng rng(3);
  std::uniform_int_distribution<std::size_t> nd(1, 40), kd(1, 12);
  for (std::uint64_t t = 0; t < 1000; ++t) {
    const std::size_t n = nd(rng), k = kd(rng);
    const auto scheme = t % 2 ? PseudoScheme::random_softmax(t) : PseudoScheme::uniform();
    const auto p = pseudo_generate(n, k, scheme);
    ASSERT_EQ(p.rows(), n);
    ASSERT_EQ(p.classes(), k);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (double v : p.row(i)) {
        ASSERT_GE(v, kProbFloor);
        ASSERT_LE(v, 1.0);
        s += v;
      }
      ASSERT_NEAR(s, 1.0, kRowSumTolerance);
    }
  }
}

TEST(PseudoGenerate, SeedDeterminesOutput) {
  const auto a = pseudo_generate(10, 4, PseudoScheme::random_softmax(9));
  const auto b = pseudo_generate(10, 4, PseudoScheme::random_softmax(9));
  const auto c = pseudo_generate(10, 4, PseudoScheme::random_softmax(10));
  EXPECT_TRUE(a == b);
  EXPECT_FALSE(a == c);
}

TEST(PseudoGenerate, SchemeSeedMismatchThrows) {
  PseudoScheme bad;
  bad.seed = 1;
  EXPECT_THROW(pseudo_generate(2, 2, bad), SpecError);
  PseudoScheme missing;
  missing.kind = PseudoScheme::Kind::RandomSoftmax;
  EXPECT_THROW(pseudo_generate(2, 2, missing), SpecError);
  EXPECT_THROW(pseudo_generate(0, 2, PseudoScheme::uniform()), ShapeError);
}

TEST(ClassMass, SumsToRowCountAndIsAdditiveOverConcat) {
  Rng rng(5);
  for (int t = 0; t < 200; ++t) {
    const std::size_t k = 2 + t % 5;
    const auto a = random_probs(1 + t % 7, k, rng);
    const auto b = random_probs(1 + t % 11, k, rng);
    const auto ma = class_mass(a), mb = class_mass(b), mab = class_mass(concat_rows(a, b));
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      EXPECT_NEAR(mab[j], ma[j] + mb[j], 1e-12);
      total += mab[j];
    }
    EXPECT_NEAR(total, static_cast<double>(a.rows() + b.rows()), 1e-9);
  }
}

TEST(ConcatRows, AppendsRegistries) {
  const ProbMatrix a(Matrix(2, 2, 0.5), {7, 8});
  const ProbMatrix b(Matrix(1, 2, 0.5), {3});
  EXPECT_EQ(concat_rows(a, b).registry(), (std::vector<std::size_t>{7, 8, 3}));
  EXPECT_THROW(concat_rows(a, ProbMatrix(Matrix(1, 3, 1.0 / 3))), ShapeError);
}

TEST(ReplaceRows, RoundTripIsBitwise) {
  Rng rng(8);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 3 + t % 9, k = 2 + t % 4;
    const auto q = random_probs(n, k, rng);
    auto idx = seeded_permutation(n, static_cast<std::uint64_t>(t));
    idx.resize(1 + t % n);
    const auto repl = random_probs(idx.size(), k, rng);
    const auto swapped = replace_rows(q, idx, repl);
    for (std::size_t j = 0; j < idx.size(); ++j) {
      ASSERT_TRUE(bitwise_equal(swapped.row(idx[j]), repl.row(j)));
    }
    // Put the original rows back.
    Matrix orig(idx.size(), k);
    for (std::size_t j = 0; j < idx.size(); ++j) std::copy(q.row(idx[j]).begin(), q.row(idx[j]).end(), orig.row(j).begin());
    const auto restored = replace_rows(swapped, idx, ProbMatrix(orig));
    ASSERT_TRUE(restored == q);
  }
}

TEST(ReplaceRows, RejectsBadIndices) {
  const ProbMatrix q(Matrix(3, 2, 0.5));
  const ProbMatrix one(Matrix(1, 2, 0.5));
  const ProbMatrix two(Matrix(2, 2, 0.5));
  const std::vector<std::size_t> out_of_range{3}, dup{1, 1}, pair{0, 1};
  EXPECT_THROW(replace_rows(q, out_of_range, one), IndexError);
  EXPECT_THROW(replace_rows(q, dup, two), IndexError);
  EXPECT_THROW(replace_rows(q, pair, one), ShapeError);
}

TEST(MatrixDump, RoundTrip) {
  Rng rng(1);
  const auto q = ProbMatrix(random_probs(6, 3, rng).values(), {5, 4, 3, 2, 1, 0});
  const auto path = (std::filesystem::temp_directory_path() / "ppu_dump_test.ppum").string();
  write_matrix_dump(path, q);
  EXPECT_TRUE(read_matrix_dump(path) == q);
  std::remove(path.c_str());
  EXPECT_THROW(read_matrix_dump(path), FormatError);
}
