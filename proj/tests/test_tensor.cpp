#include <gtest/gtest.h>

#include "mfdet/error.hpp"
#include "mfdet/tensor.hpp"

using namespace mfdet;

TEST(Tensor, SizeIsProductOfShape) {
  Tensor t({2, 3, 4});
  EXPECT_EQ(t.size(), 24u);
  EXPECT_EQ(t.rank(), 3u);
  EXPECT_EQ(t.dim(2), 4u);
  for (float v : t.data()) EXPECT_EQ(v, 0.0f);
}

TEST(Tensor, RejectsZeroDimensionsAndMismatchedData) {
  EXPECT_THROW(Tensor(Shape{2, 0}), ShapeError);
  EXPECT_THROW(Tensor(Shape{2, 2}, std::vector<float>(3)), ShapeError);
}

TEST(Tensor, GradBufferMatchesDataLength) {
  Tensor t({3, 5}, 1.0f);
  EXPECT_FALSE(t.requires_grad());
  EXPECT_THROW(t.grad(), ShapeError);
  t.enable_grad();
  EXPECT_EQ(t.grad().size(), t.size());
  t.grad()[4] = 2.0f;
  t.zero_grad();
  EXPECT_EQ(t.grad()[4], 0.0f);
}

TEST(Tensor, ReshapeKeepsElements) {
  Tensor t({2, 6}, std::vector<float>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11});
  const Tensor r = t.reshaped({3, 4});
  EXPECT_EQ(r.shape(), (Shape{3, 4}));
  EXPECT_EQ(r[7], 7.0f);
  EXPECT_THROW(t.reshaped({5, 2}), ShapeError);
  EXPECT_EQ(t.shape(), (Shape{2, 6}));
}

TEST(Tensor, NchwIndexing) {
  Tensor t({2, 3, 4, 5});
  t.at(1, 2, 3, 4) = 9.0f;
  EXPECT_EQ(t[t.size() - 1], 9.0f);
  t.at(0, 1, 0, 2) = 3.0f;
  EXPECT_EQ(t[1 * 20 + 2], 3.0f);
}

TEST(Tensor, IdenticalIsBitwise) {
  Tensor a({2}, std::vector<float>{0.0f, 1.0f});
  Tensor b({2}, std::vector<float>{-0.0f, 1.0f});
  EXPECT_FALSE(a.identical(b));
  EXPECT_EQ(max_abs_diff(a, b), 0.0f);
  EXPECT_TRUE(a.identical(a));
}
