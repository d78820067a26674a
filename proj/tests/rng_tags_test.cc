#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "atsen/error.h"
#include "atsen/rng.h"
#include "atsen/tags.h"

namespace atsen {
namespace {

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.uniform(), b.uniform());
}

TEST(Rng, UniformMatchesEngineBits) {
  std::mt19937_64 engine(9);
  Rng r(9);
  for (int i = 0; i < 20; ++i) {
    const double expect = static_cast<double>(engine() >> 11) / 9007199254740992.0;
    EXPECT_EQ(r.uniform(), expect);
  }
}

TEST(Rng, UniformInHalfOpenUnit) {
  Rng r(3);
  for (int i = 0; i < 10000; ++i) {
    double u = r.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

TEST(Rng, BelowCoversRange) {
  Rng r(5);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 1000; ++i) {
    auto v = r.below(7);
    ASSERT_LT(v, 7u);
    seen.insert(v);
  }
  EXPECT_EQ(seen.size(), 7u);
}

TEST(Rng, ShuffleIsPermutation) {
  Rng r(11);
  std::vector<int> v(50);
  for (int i = 0; i < 50; ++i) v[i] = i;
  auto w = v;
  r.shuffle(w);
  EXPECT_NE(v, w);
  std::sort(w.begin(), w.end());
  EXPECT_EQ(v, w);
}

TEST(Rng, DeriveSeedPureAndStreamSensitive) {
  EXPECT_EQ(derive_seed(1, "data"), derive_seed(1, "data"));
  EXPECT_NE(derive_seed(1, "data"), derive_seed(1, "corpus"));
  EXPECT_NE(derive_seed(1, "data"), derive_seed(2, "data"));
  EXPECT_NE(derive_seed(0, ""), 0u);
}

TEST(TagVocab, Layout) {
  TagVocab v({"PER", "LOC"});
  EXPECT_EQ(v.size(), 5);
  EXPECT_EQ(v.tag(0), "O");
  EXPECT_EQ(v.tag(1), "B-PER");
  EXPECT_EQ(v.tag(2), "I-PER");
  EXPECT_EQ(v.tag(3), "B-LOC");
  EXPECT_EQ(v.tag(4), "I-LOC");
  EXPECT_EQ(v.index("I-LOC"), 4);
  EXPECT_EQ(v.type_of(4), 1);
  EXPECT_EQ(v.type_of(0), -1);
  EXPECT_TRUE(v.is_begin(3));
  EXPECT_TRUE(v.is_inside(2));
  EXPECT_FALSE(v.find("B-ORG").has_value());
}

TEST(TagVocab, InferSortsTypes) {
  auto v = TagVocab::infer({"I-PER", "O", "B-LOC", "B-PER"});
  EXPECT_EQ(v.entity_types(), (std::vector<std::string>{"LOC", "PER"}));
}

TEST(TagVocab, Errors) {
  TagVocab v({"PER"});
  EXPECT_THROW(v.index("B-LOC"), SchemaError);
  EXPECT_THROW(v.index("X-PER"), SchemaError);
  EXPECT_THROW(split_tag("B-"), SchemaError);
  EXPECT_THROW(TagVocab({"PER", "PER"}), SchemaError);
  EXPECT_THROW(v.tag(7), InputError);
}

TEST(RepairBio, StrayInsideBecomesBegin) {
  TagVocab v({"PER", "LOC"});
  // O I-PER I-PER I-LOC
  TagSeq in = {0, 2, 2, 4};
  TagSeq want = {0, 1, 2, 3};
  EXPECT_EQ(repair_bio(in, v), want);
}

TEST(RepairBio, IdempotentOnRandomSequences) {
  TagVocab v({"PER", "LOC", "ORG"});
  Rng r(17);
  for (int trial = 0; trial < 500; ++trial) {
    TagSeq t(1 + r.below(12));
    for (int &x : t) x = static_cast<int>(r.below(v.size()));
    auto once = repair_bio(t, v);
    EXPECT_EQ(repair_bio(once, v), once);
    for (std::size_t i = 0; i < once.size(); ++i) {
      if (v.is_inside(once[i])) {
        ASSERT_GT(i, 0u);
        EXPECT_EQ(v.type_of(once[i - 1]), v.type_of(once[i]));
      }
    }
  }
}

}  // namespace
}  // namespace atsen
