#include <gtest/gtest.h>

#include "test_util.hpp"
#include "vimonet/translators.hpp"

namespace vimonet::translators {
namespace {

using vimonet::testing::central_difference;
using vimonet::testing::rel_err;

TEST(Motion, IdentityWeightsPassInputThrough) {
  Rng rng(1);
  MotionTranslatorParams p{Mat::Identity(6, 6), Vec::Zero(6)};
  Mat x = normal_matrix(4, 6, rng, 1.0);
  EXPECT_EQ(translate_motion(x, p).tokens, x);
}

TEST(Motion, BiasOnly) {
  Rng rng(1);
  MotionTranslatorParams p{Mat::Zero(5, 3), Vec::LinSpaced(5, -1, 1)};
  auto y = translate_motion(normal_matrix(7, 3, rng, 1.0), p).tokens;
  ASSERT_EQ(y.rows(), 7);
  for (int r = 0; r < 7; ++r) EXPECT_EQ(y.row(r), p.b.transpose());
}

TEST(Motion, MatchesDotProductLoop) {
  Rng rng(2);
  auto p = MotionTranslatorParams::init(9, 5, rng);
  p.b = normal_matrix(9, 1, rng, 1.0);
  Mat x = normal_matrix(6, 5, rng, 1.0);
  Mat y = translate_motion(x, p).tokens;
  for (int k = 0; k < 6; ++k)
    for (int o = 0; o < 9; ++o) {
      double acc = p.b(o);
      for (int i = 0; i < 5; ++i) acc += p.W(o, i) * x(k, i);
      EXPECT_LT(rel_err(y(k, o), acc, 1e-12), 1e-6);
    }
}

TEST(Motion, ShapeMismatch) {
  Rng rng(2);
  auto p = MotionTranslatorParams::init(8, 5, rng);
  EXPECT_THROW(translate_motion(Mat::Zero(3, 4), p), ContractError);
}

TEST(Video, ZeroInputZeroOutput) {
  Rng rng(3);
  auto p = VideoTranslatorParams::init(8, 6, 8, rng);
  EXPECT_TRUE(translate_video(Mat::Zero(4, 6), p).tokens.isZero(0.0));
}

TEST(Video, IdentityActivationCollapsesToAffineMap) {
  Rng rng(4);
  auto p = VideoTranslatorParams::init(6, 5, 7, rng, Activation::identity);
  p.b1 = normal_matrix(7, 1, rng, 1.0);
  p.b2 = normal_matrix(6, 1, rng, 1.0);
  Mat x = normal_matrix(3, 5, rng, 1.0);
  // Compose by hand: W = W2 W1, b = W2 b1 + b2.
  Mat W = Mat::Zero(6, 5);
  Vec b = p.b2;
  for (int o = 0; o < 6; ++o)
    for (int h = 0; h < 7; ++h) {
      b(o) += p.W2(o, h) * p.b1(h);
      for (int i = 0; i < 5; ++i) W(o, i) += p.W2(o, h) * p.W1(h, i);
    }
  Mat y = translate_video(x, p).tokens;
  for (int k = 0; k < 3; ++k)
    for (int o = 0; o < 6; ++o) {
      double acc = b(o);
      for (int i = 0; i < 5; ++i) acc += W(o, i) * x(k, i);
      EXPECT_LT(rel_err(y(k, o), acc, 1e-12), 1e-9);
    }
}

TEST(Video, MatchesTwoLoopOracle) {
  Rng rng(5);
  auto p = VideoTranslatorParams::init(8, 6, 10, rng);
  p.b1 = normal_matrix(10, 1, rng, 0.5);
  p.b2 = normal_matrix(8, 1, rng, 0.5);
  Mat x = normal_matrix(4, 6, rng, 1.0);
  Mat y = translate_video(x, p).tokens;
  for (int k = 0; k < 4; ++k) {
    std::vector<double> hidden(10);
    for (int h = 0; h < 10; ++h) {
      double u = p.b1(h);
      for (int i = 0; i < 6; ++i) u += p.W1(h, i) * x(k, i);
      hidden[h] = 0.5 * u * (1.0 + std::erf(u / std::sqrt(2.0)));
    }
    for (int o = 0; o < 8; ++o) {
      double acc = p.b2(o);
      for (int h = 0; h < 10; ++h) acc += p.W2(o, h) * hidden[h];
      EXPECT_LT(rel_err(y(k, o), acc, 1e-12), 1e-6);
    }
  }
}

TEST(Video, HiddenWidthContract) {
  Rng rng(1);
  EXPECT_THROW(VideoTranslatorParams::init(16, 4, 7, rng), ContractError);
  EXPECT_NO_THROW(VideoTranslatorParams::init(16, 4, 8, rng));
}

TEST(Structure, MotionHasOneAffineMapVideoHasTwo) {
  Rng rng(1);
  auto m = inventory(MotionTranslatorParams::init(8, 4, rng));
  auto v = inventory(VideoTranslatorParams::init(8, 4, 8, rng));
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m[0].name, "W");
  EXPECT_EQ(m[0].shape, (std::vector<Eigen::Index>{8, 4}));
  ASSERT_EQ(v.size(), 4u);
  EXPECT_EQ(v[0].shape, (std::vector<Eigen::Index>{8, 4}));
  EXPECT_EQ(v[2].shape, (std::vector<Eigen::Index>{8, 8}));
}

TEST(Structure, TokenCountPreserved) {
  Rng rng(1);
  auto mp = MotionTranslatorParams::init(8, 4, rng);
  auto vp = VideoTranslatorParams::init(8, 4, 8, rng);
  for (int k = 1; k < 12; ++k) {
    EXPECT_EQ(translate_motion(Mat::Ones(k, 4), mp).count(), k);
    EXPECT_EQ(translate_video(Mat::Ones(k, 4), vp).count(), k);
  }
}

TEST(Gelu, GradMatchesFiniteDifference) {
  for (double u = -4; u <= 4; u += 0.25) {
    double x = u;
    double num = central_difference(&x, [&] { return gelu(x); });
    EXPECT_LT(rel_err(gelu_grad(u), num), 1e-7) << u;
  }
}

TEST(Grads, ZeroUpstreamGivesZeroGradients) {
  Rng rng(6);
  auto mp = MotionTranslatorParams::init(8, 4, rng);
  auto vp = VideoTranslatorParams::init(8, 4, 8, rng);
  Mat x = normal_matrix(3, 4, rng, 1.0);
  auto mg = MotionTranslatorParams::zeros_like(mp);
  auto vg = VideoTranslatorParams::zeros_like(vp);
  motion_backward(x, mp, Mat::Zero(3, 8), mg);
  video_backward(x, vp, Mat::Zero(3, 8), vg);
  mg.for_each([](auto, const auto& t) { EXPECT_TRUE(t.isZero(0.0)); });
  vg.for_each([](auto, const auto& t) { EXPECT_TRUE(t.isZero(0.0)); });
}

// Loss = sum(upstream .* y), so dL/dy = upstream.
template <class P, class Fwd, class Bwd>
void check_translator(P& p, Mat& x, const Mat& upstream, Fwd fwd, Bwd bwd) {
  auto loss = [&] { return fwd(x, p).cwiseProduct(upstream).sum(); };
  auto grads = P::zeros_like(p);
  Mat dx = bwd(x, p, upstream, grads);
  std::vector<double> analytic;
  grads.for_each([&](auto, const auto& t) { analytic.insert(analytic.end(), t.data(), t.data() + t.size()); });
  std::size_t k = 0;
  p.for_each([&](auto, auto& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      double num = central_difference(t.data() + i, loss);
      EXPECT_LT(rel_err(analytic[k++], num), 1e-4);
    }
  });
  EXPECT_EQ(k, analytic.size());
  for (Eigen::Index i = 0; i < x.size(); ++i)
    EXPECT_LT(rel_err(dx.data()[i], central_difference(x.data() + i, loss)), 1e-4);
}

TEST(Grads, LinearTranslatorFiniteDifferences) {
  Rng rng(7);
  auto p = MotionTranslatorParams::init(4, 4, rng);
  p.b = normal_matrix(4, 1, rng, 1.0);
  Mat x = normal_matrix(3, 4, rng, 1.0);
  Mat up = normal_matrix(3, 4, rng, 1.0);
  check_translator(
      p, x, up, [](const Mat& xx, const MotionTranslatorParams& pp) { return translate_motion(xx, pp).tokens; },
      [](const Mat& xx, const MotionTranslatorParams& pp, const Mat& u, MotionTranslatorParams& g) {
        return motion_backward(xx, pp, u, g);
      });
  // dL/dW is the upstream/input outer product summed over tokens.
  auto g = MotionTranslatorParams::zeros_like(p);
  motion_backward(x, p, up, g);
  for (int o = 0; o < 4; ++o)
    for (int i = 0; i < 4; ++i) {
      double acc = 0;
      for (int k = 0; k < 3; ++k) acc += up(k, o) * x(k, i);
      EXPECT_NEAR(g.W(o, i), acc, 1e-12);
    }
}

TEST(Grads, MlpTranslatorFiniteDifferences) {
  Rng rng(8);
  for (auto act : {Activation::gelu, Activation::identity}) {
    auto p = VideoTranslatorParams::init(4, 4, 4, rng, act);
    p.b1 = normal_matrix(4, 1, rng, 0.5);
    p.b2 = normal_matrix(4, 1, rng, 0.5);
    Mat x = normal_matrix(3, 4, rng, 1.0);
    Mat up = normal_matrix(3, 4, rng, 1.0);
    check_translator(
        p, x, up, [](const Mat& xx, const VideoTranslatorParams& pp) { return translate_video(xx, pp).tokens; },
        [](const Mat& xx, const VideoTranslatorParams& pp, const Mat& u, VideoTranslatorParams& g) {
          return video_backward(xx, pp, u, g);
        });
  }
}

TEST(Activation, ParseNames) {
  EXPECT_EQ(parse_activation("gelu"), Activation::gelu);
  EXPECT_EQ(parse_activation(to_string(Activation::identity)), Activation::identity);
  EXPECT_THROW(parse_activation("relu"), ContractError);
}

}  // namespace
}  // namespace vimonet::translators
