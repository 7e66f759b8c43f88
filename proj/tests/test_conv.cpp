#include <gtest/gtest.h>

#include <random>

#include "mfdet/conv.hpp"
#include "mfdet/error.hpp"
#include "support.hpp"

using namespace mfdet;
using testing_support::random_tensor;

namespace {

ConvSpec spec(std::size_t cin, std::size_t cout, std::size_t k, std::size_t s, std::size_t p, std::size_t groups = 1) {
  return {cin, cout, k, k, s, p, groups, true};
}

}  // namespace

TEST(Conv, FirstLayerShapes) {
  // Shape inference only; a full 640x640 forward is exercised by the acceptance runner.
  EXPECT_EQ(conv_output_shape(spec(3, 32, 3, 2, 1), {1, 3, 640, 640}), (Shape{1, 32, 320, 320}));
  for (std::size_t n : {3, 5, 7, 9})
    EXPECT_EQ(conv_output_shape(spec(3 * n, 32 * n, 3, 2, 1, n), {1, 3 * n, 640, 640}), (Shape{1, 32 * n, 320, 320}));
  EXPECT_EQ(conv_weight_shape(spec(15, 160, 3, 2, 1, 5)), (Shape{160, 3, 3, 3}));
}

TEST(Conv, OutputShapeFormulaExhaustive) {
  std::mt19937_64 rng(3);
  for (std::size_t k : {1, 3})
    for (std::size_t s : {1, 2})
      for (std::size_t p : {0, 1})
        for (std::size_t h : {3, 4, 5, 8})
          for (std::size_t w : {3, 6, 7}) {
            const ConvSpec sp = spec(2, 3, k, s, p);
            const Tensor x = random_tensor({1, 2, h, w}, rng);
            const Tensor wt = random_tensor(conv_weight_shape(sp), rng);
            const Tensor b = random_tensor({3}, rng);
            const Tensor y = conv2d_forward(x, wt, &b, sp);
            EXPECT_EQ(y.shape(), (Shape{1, 3, (h + 2 * p - k) / s + 1, (w + 2 * p - k) / s + 1}))
                << "k=" << k << " s=" << s << " p=" << p << " h=" << h << " w=" << w;
          }
}

TEST(Conv, ZeroWeightsGiveZeroOutput) {
  std::mt19937_64 rng(1);
  const ConvSpec sp = spec(4, 6, 3, 2, 1, 2);
  const Tensor y = conv2d_forward(random_tensor({2, 4, 9, 9}, rng), Tensor(conv_weight_shape(sp)), nullptr,
                                  ConvSpec{4, 6, 3, 3, 2, 1, 2, false});
  for (float v : y.data()) EXPECT_EQ(v, 0.0f);
}

TEST(Conv, OnesKernelHandExample) {
  const ConvSpec sp{1, 1, 2, 2, 1, 0, 1, false};
  const Tensor y = conv2d_forward(Tensor({1, 1, 3, 3}, 1.0f), Tensor({1, 1, 2, 2}, 1.0f), nullptr, sp);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 2, 2}));
  for (float v : y.data()) EXPECT_EQ(v, 4.0f);
}

TEST(Conv, ShapeErrorsNameTheDimension) {
  const ConvSpec sp = spec(3, 8, 3, 1, 1);
  const Tensor w(conv_weight_shape(sp));
  const Tensor b({8});
  try {
    conv2d_forward(Tensor({1, 4, 5, 5}), w, &b, sp);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("channel"), std::string::npos) << e.what();
  }
  EXPECT_THROW(conv2d_forward(Tensor({1, 3, 5, 5}), Tensor({8, 3, 3, 2}), &b, sp), ShapeError);
  EXPECT_THROW(conv2d_forward(Tensor({1, 3, 5, 5}), w, nullptr, sp), ShapeError);
  EXPECT_THROW(validate(spec(4, 6, 3, 1, 1, 4)), ShapeError);
}

TEST(Conv, DirectMatchesIm2col) {
  std::mt19937_64 rng(7);
  for (std::size_t groups : {1, 2, 3})
    for (std::size_t s : {1, 2})
      for (std::size_t p : {0, 1}) {
        const ConvSpec sp = spec(3 * groups, 2 * groups, 3, s, p, groups);
        const Tensor x = random_tensor({2, 3 * groups, 11, 9}, rng);
        const Tensor w = random_tensor(conv_weight_shape(sp), rng);
        const Tensor b = random_tensor({2 * groups}, rng);
        const Tensor a = conv2d_forward(x, w, &b, sp, ConvAlgorithm::Direct);
        const Tensor c = conv2d_forward(x, w, &b, sp, ConvAlgorithm::Im2col);
        EXPECT_LT(max_abs_diff(a, c), 1e-5f);
      }
}

TEST(Conv, LargeGemmMatchesDirect) {
  // Wide enough to go through the vectorised tiles and their remainders.
  std::mt19937_64 rng(8);
  const ConvSpec sp = spec(13, 19, 3, 1, 1);
  const Tensor x = random_tensor({1, 13, 21, 23}, rng);
  const Tensor w = random_tensor(conv_weight_shape(sp), rng);
  const Tensor b = random_tensor({19}, rng);
  EXPECT_LT(max_abs_diff(conv2d_forward(x, w, &b, sp, ConvAlgorithm::Direct), conv2d_forward(x, w, &b, sp)), 1e-4f);
}

TEST(Conv, GroupedEqualsIndependentSlices) {
  std::mt19937_64 rng(11);
  const std::size_t n = 3, cin = 3, cout = 4;
  const ConvSpec grouped = spec(cin * n, cout * n, 3, 2, 1, n);
  const ConvSpec single = spec(cin, cout, 3, 2, 1);
  const Tensor x = random_tensor({2, cin * n, 10, 10}, rng);
  const Tensor w = random_tensor(conv_weight_shape(grouped), rng);
  const Tensor b = random_tensor({cout * n}, rng);
  const Tensor y = conv2d_forward(x, w, &b, grouped);

  for (std::size_t g = 0; g < n; ++g) {
    Tensor xs({2, cin, 10, 10});
    for (std::size_t bi = 0; bi < 2; ++bi)
      for (std::size_t c = 0; c < cin; ++c)
        for (std::size_t i = 0; i < 10; ++i)
          for (std::size_t j = 0; j < 10; ++j) xs.at(bi, c, i, j) = x.at(bi, g * cin + c, i, j);
    Tensor ws(conv_weight_shape(single));
    std::copy(w.raw() + g * ws.size(), w.raw() + (g + 1) * ws.size(), ws.raw());
    Tensor bs({cout});
    std::copy(b.raw() + g * cout, b.raw() + (g + 1) * cout, bs.raw());
    const Tensor ys = conv2d_forward(xs, ws, &bs, single);
    for (std::size_t bi = 0; bi < 2; ++bi)
      for (std::size_t c = 0; c < cout; ++c)
        for (std::size_t i = 0; i < ys.dim(2); ++i)
          for (std::size_t j = 0; j < ys.dim(3); ++j)
            EXPECT_NEAR(y.at(bi, g * cout + c, i, j), ys.at(bi, c, i, j), 1e-6f);
  }
}

TEST(ConvBackward, ZeroUpstreamGivesZeroGradients) {
  std::mt19937_64 rng(2);
  const ConvSpec sp = spec(2, 4, 3, 1, 1, 2);
  const Tensor x = random_tensor({1, 2, 5, 5}, rng);
  const Tensor w = random_tensor(conv_weight_shape(sp), rng);
  const auto g = conv2d_backward(Tensor({1, 4, 5, 5}), x, w, sp);
  for (const Tensor* t : {&g.input, &g.weight, &g.bias})
    for (float v : t->data()) EXPECT_EQ(v, 0.0f);
}

TEST(ConvBackward, ScalarChainRule) {
  const ConvSpec sp{1, 1, 1, 1, 1, 0, 1, true};
  const Tensor x({1, 1, 1, 1}, 3.0f);
  const Tensor w({1, 1, 1, 1}, -2.0f);
  const auto g = conv2d_backward(Tensor({1, 1, 1, 1}, 0.5f), x, w, sp);
  EXPECT_FLOAT_EQ(g.weight[0], 1.5f);
  EXPECT_FLOAT_EQ(g.bias[0], 0.5f);
  EXPECT_FLOAT_EQ(g.input[0], -1.0f);
}

TEST(ConvBackward, RejectsWrongUpstreamShape) {
  const ConvSpec sp = spec(1, 1, 3, 1, 0);
  EXPECT_THROW(conv2d_backward(Tensor({1, 1, 4, 4}), Tensor({1, 1, 5, 5}), Tensor({1, 1, 3, 3}), sp), ShapeError);
}

TEST(ConvBackward, MatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  for (std::size_t groups : {1, 2})
    for (std::size_t s : {1, 2})
      for (std::size_t p : {0, 1}) {
        const ConvSpec sp = spec(2 * groups, 2 * groups, 3, s, p, groups);
        Tensor x = random_tensor({1, 2 * groups, 6, 5}, rng);
        Tensor w = random_tensor(conv_weight_shape(sp), rng);
        Tensor b = random_tensor({2 * groups}, rng);
        const Shape out = conv_output_shape(sp, x.shape());
        const Tensor proj = random_tensor(out, rng);
        auto loss = [&] { return testing_support::project(conv2d_forward(x, w, &b, sp), proj); };
        const auto g = conv2d_backward(proj, x, w, sp);
        for (auto [t, grad] : {std::pair{&x, &g.input}, {&w, &g.weight}, {&b, &g.bias}}) {
          const auto r = testing_support::check_gradient(*t, testing_support::to_double(grad->data()), loss);
          EXPECT_LT(r.max_rel_error, 1e-2) << "groups=" << groups << " s=" << s << " p=" << p;
        }
      }
}

TEST(Conv, Deterministic) {
  std::mt19937_64 rng(9);
  const ConvSpec sp = spec(6, 8, 3, 2, 1, 2);
  const Tensor x = random_tensor({2, 6, 17, 17}, rng);
  const Tensor w = random_tensor(conv_weight_shape(sp), rng);
  const Tensor b = random_tensor({8}, rng);
  EXPECT_TRUE(conv2d_forward(x, w, &b, sp).identical(conv2d_forward(x, w, &b, sp)));
}
