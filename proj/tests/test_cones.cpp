#include "fixtures.hpp"
#include "gmy/cones.hpp"
#include "gmy/random.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace gmy;
using gmy::testing::kLambdaMinus;

namespace {

SplittingFrame axis_frame() {
  SplittingFrame f;
  f.e_cu = Vec2(1.0, 0.0);
  f.e_s = Vec2(0.0, 1.0);
  return f;
}

// power iteration on the constant matrix, independent of the library
Vec2 cat_unstable_oracle() {
  Mat2 a;
  a << 2, 1, 1, 1;
  Vec2 v(1.0, 0.0);
  for (int i = 0; i < 200; ++i) v = (a * v).normalized();
  return v;
}

double sin_angle(const Vec2& a, const Vec2& b) {
  return std::abs(a(0) * b(1) - a(1) * b(0)) / (a.norm() * b.norm());
}

}  // namespace

TEST(Cones, BoundaryVectorIsInside) {
  EXPECT_TRUE(in_cone({{}, Vec2(1.0, 1.0)}, axis_frame(), {1.0}, ConeKind::cu));
  EXPECT_FALSE(in_cone({{}, Vec2(0.0, 1.0)}, axis_frame(), {10.0}, ConeKind::cu));
  EXPECT_TRUE(in_cone({{}, Vec2(0.0, 1.0)}, axis_frame(), {0.1}, ConeKind::s));
}

TEST(Cones, ZeroVectorRejected) {
  EXPECT_THROW(in_cone({{}, Vec2::Zero()}, axis_frame(), {1.0}, ConeKind::cu), ParameterError);
}

TEST(Cones, DegenerateFrameRejected) {
  SplittingFrame f = axis_frame();
  f.e_s = Vec2(1.0, 1e-6).normalized();
  EXPECT_THROW(in_cone({{}, Vec2(1.0, 0.0)}, f, {1.0}, ConeKind::cu), NumericalError);
}

TEST(Cones, CatUnstableDirectionInEveryCone) {
  auto cat = make_system("cat");
  auto frame = estimate_splitting(*cat, {0.3, 0.2});
  for (double a : {1e-3, 0.1, 1.0})
    EXPECT_TRUE(in_cone({{}, cat_unstable_oracle()}, frame, {a}, ConeKind::cu));
}

TEST(Cones, CatSplittingMatchesEigenvectors) {
  auto cat = make_system("cat");
  Vec2 u = cat_unstable_oracle();
  Vec2 s(-u(1), u(0));  // symmetric matrix: eigenvectors orthogonal
  for (const auto& p : random_points(2, 20)) {
    auto f = estimate_splitting(*cat, p, {60, 1e-10, 1e-3});
    EXPECT_TRUE(f.converged);
    EXPECT_LT(sin_angle(f.e_cu, u), 1e-12);
    EXPECT_LT(sin_angle(f.e_s, s), 1e-12);
    EXPECT_NEAR(f.e_cu.norm(), 1.0, 1e-15);
    EXPECT_GE(f.residual, 0.0);
  }
  // slope of the unstable line is (sqrt5 - 1)/2
  EXPECT_NEAR(u(1) / u(0), (std::sqrt(5.0) - 1.0) / 2.0, 1e-14);
}

TEST(Cones, MpSkewStableIsVertical) {
  auto mp = make_system("mp_skew");
  for (const auto& p : random_points(4, 20)) {
    auto f = estimate_splitting(*mp, p);
    EXPECT_EQ(f.e_s(0), 0.0);
    EXPECT_EQ(std::abs(f.e_s(1)), 1.0);
  }
}

TEST(Cones, PerturbedCatAtZeroIsCat) {
  auto cat = make_system("cat");
  auto pc = make_system("perturbed_cat", {{"epsilon", 0.0}});
  for (const auto& p : random_points(9, 10)) {
    auto a = estimate_splitting(*cat, p), b = estimate_splitting(*pc, p);
    EXPECT_LT(sin_angle(a.e_cu, b.e_cu), 1e-12);
    EXPECT_LT(sin_angle(a.e_s, b.e_s), 1e-12);
  }
}

TEST(Cones, GraphTransformOnCat) {
  auto cat = make_system("cat");
  auto f = estimate_splitting(*cat, {0.1, 0.6});
  EXPECT_EQ(graph_transform_step(*cat, f, 0.0), 0.0);
  for (double mu : {0.5, -2.0, 1e-3})
    EXPECT_NEAR(graph_transform_step(*cat, f, mu), mu * kLambdaMinus * kLambdaMinus, 1e-12 * std::abs(mu));
}

TEST(Cones, GraphTransformZeroSlopeOnMpSkew) {
  auto mp = make_system("mp_skew");
  for (const auto& p : random_points(12, 20)) {
    auto f = estimate_splitting(*mp, p);
    EXPECT_NEAR(graph_transform_step(*mp, f, 0.0), 0.0, 1e-15);
  }
}

TEST(Cones, CatDominationCertificate) {
  auto cat = make_system("cat");
  auto frames = sample_frames(*cat, 500);
  auto cert = check_domination(*cat, frames);
  EXPECT_TRUE(cert.valid);
  EXPECT_NEAR(cert.lambda_hat, (7.0 - 3.0 * std::sqrt(5.0)) / 2.0, 1e-9);
  EXPECT_NEAR(cert.lambda_s_hat, kLambdaMinus, 1e-9);
  EXPECT_EQ(cert.sample_count, 500u);
}

TEST(Cones, MpSkewDominationCertificate) {
  auto mp = make_system("mp_skew", {{"alpha", 0.5}, {"lambda_s", 0.25}});
  auto frames = sample_frames(*mp, 2000);
  auto cert = check_domination(*mp, frames);
  EXPECT_TRUE(cert.valid);
  EXPECT_NEAR(cert.lambda_s_hat, 0.25, 1e-12);
  EXPECT_LT(cert.lambda_hat, 1.0);
  // oracle: 0.25 times the largest base inverse derivative over the samples
  double worst = 0.0;
  for (const auto& f : frames) {
    Mat2 d = mp->derivative(f.base);
    Vec2 img = d * f.e_cu;
    worst = std::max(worst, 0.25 / img.norm());
  }
  EXPECT_NEAR(cert.lambda_hat, worst, 1e-9);
}

TEST(Cones, UnconvergedFramesInvalidateCertificate) {
  auto cat = make_system("cat");
  auto frames = sample_frames(*cat, 10);
  frames[3].converged = false;
  EXPECT_FALSE(check_domination(*cat, frames).valid);
}

TEST(Cones, ConeForwardInvariance) {
  for (const char* name : {"cat", "mp_skew"}) {
    auto s = make_system(name);
    auto frames = sample_frames(*s, 1000);
    auto cert = check_domination(*s, frames);
    const double a = 1.0;
    std::mt19937_64 rng(stream_seed(7, 0));
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (const auto& f : frames) {
      // mp_skew is not injective: E^cu at f(x) depends on the history, so
      // carry the frame along the orbit instead of re-estimating it
      auto g = s->invertible() ? estimate_splitting(*s, s->apply(f.base)) : image_frame(*s, f);
      Mat2 d = s->derivative(f.base);
      for (int k = 0; k < 100; ++k) {
        // random vector in C_a^cu(x)
        double c_cu = U(rng) < 0 ? -1.0 : 1.0, c_s = a * U(rng);
        Vec2 v = c_s * f.e_s + c_cu * f.e_cu;
        ASSERT_TRUE(in_cone({f.base, v}, f, {a}, ConeKind::cu));
        EXPECT_TRUE(in_cone({g.base, d * v}, g, {cert.lambda_hat * a * (1 + 1e-9)}, ConeKind::cu)) << name;
      }
    }
  }
}

TEST(Cones, SplittingInvarianceOnCat) {
  auto cat = make_system("cat");
  for (const auto& p : random_points(13, 200)) {
    auto f = estimate_splitting(*cat, p);
    auto g = estimate_splitting(*cat, cat->apply(p));
    EXPECT_LT(sin_angle(cat->derivative(p) * f.e_cu, g.e_cu), 1e-8);
  }
}

TEST(Cones, SplittingInvarianceOnMpSkew) {
  // on the invertible branch point x = f(b(x)) the estimate at x must be the
  // push of the estimate at its chosen preimage b(x)
  auto mp = make_system("mp_skew");
  for (const auto& p : random_points(14, 200)) {
    Point b = mp->backward_step(p);
    auto f = estimate_splitting(*mp, b);
    auto g = estimate_splitting(*mp, p);
    ASSERT_TRUE(f.converged && g.converged);
    EXPECT_LT(sin_angle(mp->derivative(b) * f.e_cu, g.e_cu), 1e-8);
    EXPECT_LT(sin_angle(mp->derivative(b) * f.e_s, g.e_s), 1e-15);
  }
}

TEST(Cones, GraphTransformContracts) {
  auto mp = make_system("mp_skew");
  auto frames = sample_frames(*mp, 300);
  auto cert = check_domination(*mp, frames);
  for (const auto& f : frames) {
    double out = graph_transform_step(*mp, f, 1.0);
    EXPECT_LE(std::abs(out), cert.lambda_hat * (1 + 1e-9));
  }
}
