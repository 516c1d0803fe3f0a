#include "fixtures.hpp"
#include "gmy/hyperbolic_times.hpp"
#include "gmy/leaf.hpp"
#include "gmy/partition.hpp"
#include "gmy/random.hpp"

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include <cmath>

using namespace gmy;
using gmy::testing::kLambdaMinus;
using gmy::testing::kPhi;

namespace {

const double kLambdaPlus = kPhi * kPhi;

Vec2 cat_eigvec(bool unstable) {
  Mat2 a;
  a << 2, 1, 1, 1;
  Eigen::SelfAdjointEigenSolver<Mat2> es(a);  // ascending eigenvalues
  Vec2 v = es.eigenvectors().col(unstable ? 1 : 0);
  return v(0) < 0 ? Vec2(-v) : v;
}

// polyline length of f^n over [a,b] of a straight base segment, by brute force
double brute_image_length(const System& s, const Point& o, const Vec2& dir, double a, double b, std::size_t n,
                          std::size_t m = 20000) {
  auto img = [&](double t) {
    Point p = translate(o, t * dir);
    for (std::size_t k = 0; k < n; ++k) p = s.apply(p);
    return p;
  };
  double len = 0.0;
  Point prev = img(a);
  for (std::size_t i = 1; i <= m; ++i) {
    Point q = img(a + (b - a) * double(i) / double(m));
    len += torus_distance(prev, q);
    prev = q;
  }
  return len;
}

// an mp_skew point on the line y = 0.3 for which n is a sigma-hyperbolic time
Point mp_anchor(const System& mp, std::size_t n, double sigma) {
  for (const auto& p : random_points(77, 400)) {
    Point x(0.55 + 0.4 * p.x, 0.3);
    auto log = contraction_log(mp, x, n);
    if (is_hyperbolic_time(log.values, n, sigma)) return x;
  }
  throw std::runtime_error("no anchor");
}

// whether some image f^k(V_n), k < n, contains x = 0 or x = 1/2, where the
// base derivative jumps
bool straddles_branch_point(const System& s, const PreDisk& pd) {
  const int m = 200;
  std::vector<Point> pts;
  for (int i = 0; i <= m; ++i) pts.push_back(pd.curve.at(s, pd.lo + (pd.hi - pd.lo) * i / m));
  for (std::size_t k = 0; k < pd.n; ++k) {
    for (int i = 0; i < m; ++i) {
      double a = pts[i].x, b = pts[i + 1].x;
      if (std::abs(a - b) > 0.5) return true;          // wrapped through 0
      if ((a < 0.5) != (b < 0.5)) return true;
    }
    for (auto& p : pts) p = s.apply(p);
  }
  return false;
}

struct MpPreDisk {
  PreDisk pd;
  bool straddles;
};

MpPreDisk mp_predisk(const System& mp, bool want_straddle) {
  for (const auto& p : random_points(78, 2000)) {
    Point x(0.55 + 0.4 * p.x, 0.3);
    auto log = contraction_log(mp, x, 10);
    if (!is_hyperbolic_time(log.values, 10, 0.8)) continue;
    auto d = segment_disk(mp, x, {1.0, 0.0}, 0.03, 1e-4);
    auto pd = hyperbolic_predisk(mp, d, d.center_index, 10, 0.01);
    if (straddles_branch_point(mp, pd) == want_straddle) return {pd, want_straddle};
  }
  throw std::runtime_error("no pre-disk");
}

}  // namespace

TEST(Leaf, CatUnstableSegmentStretches) {
  auto cat = make_system("cat");
  Vec2 u = cat_eigvec(true);
  auto d = segment_disk(*cat, {0.2, 0.3}, u, 0.01, 1e-4);
  auto d1 = iterate_disk(*cat, d, 1);
  EXPECT_NEAR(d1.length(), kLambdaPlus * d.length(), 1e-12);
  EXPECT_NEAR(d.length(), 0.02, 1e-14);
  EXPECT_LE(d1.max_gap, 1e-4 * (1 + 1e-12));
}

TEST(Leaf, ZeroStepsIsIdentity) {
  auto mp = make_system("mp_skew");
  auto d = segment_disk(*mp, {0.6, 0.3}, {1.0, 0.0}, 0.05, 1e-3);
  auto d0 = iterate_disk(*mp, d, 0);
  EXPECT_EQ(d0.samples, d.samples);
  EXPECT_EQ(d0.params, d.params);
}

TEST(Leaf, MpSkewHorizontalSegmentSpread) {
  auto mp = make_system("mp_skew", {{"alpha", 0.5}, {"lambda_s", 0.25}});
  auto d = segment_disk(*mp, {0.62, 0.3}, {1.0, 0.0}, 0.05, 1e-4);
  auto d1 = iterate_disk(*mp, d, 1);
  // oracle: direct evaluation on 1000 samples
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i <= 1000; ++i) {
    Point q = mp->apply({0.57 + 0.1 * i / 1000.0, 0.3});
    lo = std::min(lo, q.y);
    hi = std::max(hi, q.y);
  }
  double dlo = 1.0, dhi = 0.0;
  for (const auto& q : d1.samples) {
    dlo = std::min(dlo, q.y);
    dhi = std::max(dhi, q.y);
  }
  EXPECT_NEAR(dlo, lo, 1e-6);
  EXPECT_NEAR(dhi, hi, 1e-6);
  // coupling variation bound: (1 - lambda_s) * max|c'| * width
  EXPECT_LE(dhi - dlo, 0.75 * (M_PI / 2.0) * 0.1 + 1e-12);
}

TEST(Leaf, RefinementBudget) {
  auto cat = make_system("cat");
  Curve c{{0.1, 0.1}, cat_eigvec(true), 4};
  EXPECT_THROW(make_disk(*cat, c, -0.1, 0.1, 1e-6, 1000), BudgetExceeded);
}

TEST(Leaf, ConeCoherenceAfterIterationCat) {
  auto cat = make_system("cat");
  auto frames = sample_frames(*cat, 100);
  auto cert = check_domination(*cat, frames);
  // a segment tilted off E^u, inside the cone of width 1
  Vec2 dir = (cat_eigvec(true) + 0.5 * cat_eigvec(false)).normalized();
  auto d = segment_disk(*cat, {0.3, 0.4}, dir, 0.02, 1e-3);
  double a = 0.5 * (1 + 1e-9);
  for (std::size_t k = 1; k <= 3; ++k) {
    a *= cert.lambda_hat;
    auto img = iterate_disk(*cat, d, k);
    auto cc = disk_cone_check(*cat, img, {a + 1e-9});
    EXPECT_GT(cc.checked, 0u);
    EXPECT_EQ(cc.violations, 0u) << k;
  }
}

TEST(Leaf, ConeCoherenceAfterIterationMpSkew) {
  // the estimated E^cu of the endomorphism depends on the history, so use the
  // fixed axis cone |v_y| <= 2 |v_x|, which Df maps into itself
  auto mp = make_system("mp_skew");
  auto d = segment_disk(*mp, {0.7, 0.4}, {1.0, 0.0}, 0.02, 1e-3);
  for (std::size_t k = 1; k <= 4; ++k) {
    auto img = iterate_disk(*mp, d, k);
    for (std::size_t i = 1; i + 1 < img.size(); ++i) {
      auto [p, t] = img.curve.tangent_at(*mp, img.params[i]);
      EXPECT_LE(std::abs(t(1)), 2.0 * std::abs(t(0))) << k;
    }
  }
}

TEST(Leaf, CatPreDiskRadii) {
  auto cat = make_system("cat");
  auto d = segment_disk(*cat, {0.4, 0.6}, cat_eigvec(true), 0.02, 1e-4);
  auto pd = hyperbolic_predisk(*cat, d, d.center_index, 3, 0.05);
  const double r = 0.05 * std::pow(kLambdaMinus, 3);
  EXPECT_NEAR(pd.anchor_t - pd.lo, r, 1e-3 * r);
  EXPECT_NEAR(pd.hi - pd.anchor_t, r, 1e-3 * r);
  EXPECT_NEAR(pd.anchor_t - pd.plus_lo, 2 * r, 2e-3 * r);
  EXPECT_NEAR(pd.plus_hi - pd.anchor_t, 2 * r, 2e-3 * r);
  EXPECT_NEAR(r, 2.787e-3, 1e-6);
}

TEST(Leaf, PreDiskInsufficientDisk) {
  auto cat = make_system("cat");
  auto d = segment_disk(*cat, {0.4, 0.6}, cat_eigvec(true), 1e-3, 1e-5);
  EXPECT_THROW(hyperbolic_predisk(*cat, d, d.center_index, 1, 0.05), NumericalError);
}

TEST(Leaf, MpSkewPreDiskAgainstForwardIteration) {
  auto mp = make_system("mp_skew");
  const double sigma = 0.8, delta1 = 0.01;
  const std::size_t n = 10;
  Point x = mp_anchor(*mp, n, sigma);
  auto d = segment_disk(*mp, x, {1.0, 0.0}, 0.03, 1e-4);
  auto pd = hyperbolic_predisk(*mp, d, d.center_index, n, delta1);
  double left = pd.anchor_t - pd.lo, right = pd.hi - pd.anchor_t;
  // at a sigma-hyperbolic time the backward contraction caps each side
  for (double r : {left, right}) {
    EXPECT_GT(r, 0.0);
    EXPECT_LE(r, delta1 * std::pow(sigma, n) * (1 + 1e-3));
  }
  // oracle: polyline length of the n-th image of each half
  EXPECT_NEAR(brute_image_length(*mp, d.curve.origin, d.curve.dir, pd.lo, pd.anchor_t, n), delta1, 2e-3 * delta1);
  EXPECT_NEAR(brute_image_length(*mp, d.curve.origin, d.curve.dir, pd.anchor_t, pd.hi, n), delta1, 2e-3 * delta1);
  // nesting and diameter decay
  EXPECT_LE(pd.plus_lo, pd.lo);
  EXPECT_GE(pd.plus_hi, pd.hi);
  EXPECT_LE(pd.length(), 2 * delta1 * std::pow(sigma, n) / (1 - 1e-3));
}

TEST(Leaf, BackwardContractionCat) {
  auto cat = make_system("cat");
  auto d = segment_disk(*cat, {0.4, 0.6}, cat_eigvec(true), 0.02, 1e-4);
  auto pd = hyperbolic_predisk(*cat, d, d.center_index, 4, 0.05);
  auto rep = backward_contraction_report(*cat, pd, 0.4);
  EXPECT_TRUE(rep.pass);
  EXPECT_NEAR(rep.worst_ratio, kLambdaMinus / std::pow(0.4, 0.75), 1e-6);

  auto pd0 = hyperbolic_predisk(*cat, d, d.center_index, 0, 0.005);
  auto rep0 = backward_contraction_report(*cat, pd0, 0.4);
  EXPECT_TRUE(rep0.pass);
}

TEST(Leaf, BackwardContractionMpSkew) {
  auto mp = make_system("mp_skew");
  Point x = mp_anchor(*mp, 10, 0.8);
  auto d = segment_disk(*mp, x, {1.0, 0.0}, 0.03, 1e-4);
  auto pd = hyperbolic_predisk(*mp, d, d.center_index, 10, 0.01);
  auto rep = backward_contraction_report(*mp, pd, 0.8);
  EXPECT_TRUE(rep.pass) << rep.worst_ratio;
  EXPECT_GT(rep.pairs, 0u);
}

TEST(Leaf, UnstableJacobianCat) {
  auto cat = make_system("cat");
  auto d = segment_disk(*cat, {0.4, 0.6}, cat_eigvec(true), 0.02, 1e-4);
  for (std::size_t n : {0u, 1u, 5u})
    EXPECT_NEAR(unstable_jacobian(*cat, d, 0.013, n), std::pow(kLambdaPlus, double(n)),
                1e-10 * std::pow(kLambdaPlus, double(n)));
}

TEST(Leaf, UnstableJacobianMpSkewRightBranch) {
  auto mp = make_system("mp_skew");
  // start near the top of the right branch so three steps stay on it: 0.9 -> 0.8 -> 0.6
  auto d = segment_disk(*mp, {0.9, 0.2}, {1.0, 0.0}, 0.01, 1e-4);
  double arc = d.arc_params[d.center_index];
  // oracle: multiply per-step stretches of the pushed tangent
  Point p(0.9, 0.2);
  Vec2 t(1.0, 0.0);
  double prod = 1.0;
  for (int j = 0; j < 3; ++j) {
    Vec2 w = mp->derivative(p) * t;
    prod *= w.norm() / t.norm();
    t = w.normalized();
    p = mp->apply(p);
  }
  EXPECT_NEAR(unstable_jacobian(*mp, d, arc, 3), prod, 1e-9 * prod);
}

TEST(Leaf, DistortionCatIsZero) {
  auto cat = make_system("cat");
  auto d = segment_disk(*cat, {0.4, 0.6}, cat_eigvec(true), 0.02, 1e-4);
  auto pd = hyperbolic_predisk(*cat, d, d.center_index, 3, 0.05);
  auto rep = distortion_report(*cat, pd);
  EXPECT_LT(rep.c1, 1e-9);
  EXPECT_TRUE(rep.pass);
}

TEST(Leaf, DistortionMpSkewStableUnderResampling) {
  auto mp = make_system("mp_skew");
  auto pd = mp_predisk(*mp, false).pd;
  auto a = distortion_report(*mp, pd, 17), b = distortion_report(*mp, pd, 33);
  EXPECT_TRUE(std::isfinite(a.c1));
  EXPECT_GT(a.c1, 0.0);
  EXPECT_NEAR(b.c1, a.c1, 0.1 * a.c1);
  EXPECT_TRUE(a.pass);
}

TEST(Leaf, DistortionFailsAcrossDerivativeJump) {
  // mp_skew's base derivative jumps at 1/2; a pre-disk whose image crosses it
  // has no distortion bound, and the report must say so
  auto mp = make_system("mp_skew");
  auto pd = mp_predisk(*mp, true).pd;
  auto a = distortion_report(*mp, pd, 17);
  EXPECT_FALSE(a.pass);
  EXPECT_GT(a.c1_refined, 1.5 * a.c1);
}

TEST(Leaf, StableLeafMpSkewIsClippedFibre) {
  auto mp = make_system("mp_skew");
  auto leaf = stable_leaf(*mp, {0.3, 0.4}, 0.1);
  ASSERT_TRUE(leaf.straight());
  EXPECT_NEAR(torus_distance(leaf.end_lo(), {0.3, 0.3}), 0.0, 1e-14);
  EXPECT_NEAR(torus_distance(leaf.end_hi(), {0.3, 0.5}), 0.0, 1e-14);
  auto edge = stable_leaf(*mp, {0.3, 0.05}, 0.1);
  EXPECT_NEAR(edge.extent_lo, 0.05, 1e-14);
  EXPECT_NEAR(edge.extent_hi, 0.1, 1e-14);
}

TEST(Leaf, StableLeafCatDirection) {
  auto cat = make_system("cat");
  auto leaf = stable_leaf(*cat, {0.0, 0.0}, 0.1);
  ASSERT_TRUE(leaf.straight());
  Vec2 s = cat_eigvec(false);
  Vec2 d = *leaf.direction;
  EXPECT_LT(std::abs(d(0) * s(1) - d(1) * s(0)), 1e-14);
  EXPECT_NEAR(s(1) / s(0), -kPhi, 1e-12);
  // forward contraction of two leaf points
  Point a = leaf.point_at(-0.03), b = leaf.point_at(0.05);
  double d0 = torus_distance(a, b);
  for (int k = 0; k < 10; ++k) {
    a = cat->apply(a);
    b = cat->apply(b);
  }
  EXPECT_NEAR(torus_distance(a, b), std::pow(kLambdaMinus, 10) * d0, 1e-12);
}

TEST(Leaf, StableLeafPerturbedCatContracts) {
  auto pc = make_system("perturbed_cat", {{"epsilon", 0.1}});
  Point x(0.37, 0.61);
  auto leaf = stable_leaf(*pc, x, 0.05);
  // the leaf is accurate to ~1e-8 and forward iteration amplifies that error
  // by lambda_+^n, so the contraction rate is fitted on the first few steps
  for (double s : {-0.05, 0.02, 0.05}) {
    Point p = leaf.point_at(s), q = x;
    double d0 = torus_distance(p, q);
    for (int k = 0; k < 6; ++k) {
      p = pc->apply(p);
      q = pc->apply(q);
    }
    double beta = std::pow(torus_distance(p, q) / d0, 1.0 / 6.0);
    EXPECT_LT(beta, 0.6) << s;
  }
  // a transverse displacement of the same size grows instead
  Point p(x.x + 1e-3, x.y), q = x;
  for (int k = 0; k < 6; ++k) {
    p = pc->apply(p);
    q = pc->apply(q);
  }
  EXPECT_GT(torus_distance(p, q), 1e-3);
}

TEST(Leaf, CrossingOfBaseDiskIsIdentity) {
  auto mp = make_system("mp_skew");
  Curve base{{0.6, 0.3}, {1.0, 0.0}, 0};
  auto disk = make_disk(*mp, base, -0.02, 0.02, 1e-4);
  Cylinder cyl(*mp, base, -0.02, 0.02, 0.01);
  auto cr = u_cross_project(*mp, disk, cyl);
  ASSERT_TRUE(cr);
  EXPECT_EQ(cr->count, 1u);
  EXPECT_LT(cr->first.coverage_defect, 1e-3);
  for (const auto& [u, t] : cr->first.projection) EXPECT_NEAR(u, t, 1e-9);
}

TEST(Leaf, DisjointDiskDoesNotCross) {
  auto mp = make_system("mp_skew");
  Curve base{{0.6, 0.3}, {1.0, 0.0}, 0};
  Cylinder cyl(*mp, base, -0.02, 0.02, 0.01);
  auto far = segment_disk(*mp, {0.6, 0.8}, {1.0, 0.0}, 0.05, 1e-4);
  EXPECT_FALSE(u_cross_project(*mp, far, cyl));
}

TEST(Leaf, LongImageCurveCrosses) {
  auto mp = make_system("mp_skew");
  Curve base{{0.6, 0.3}, {1.0, 0.0}, 0};
  Cylinder cyl(*mp, base, -0.01, 0.01, 0.25);
  auto d = segment_disk(*mp, {0.7, 0.5}, {1.0, 0.0}, 0.02, 1e-3);
  bool crossed = false;
  for (std::size_t k = 1; k <= 8 && !crossed; ++k) {
    auto img = iterate_disk(*mp, d, k);
    if (img.length() > 1.0) crossed = u_cross_project(*mp, img, cyl).has_value();
  }
  EXPECT_TRUE(crossed);
}

TEST(Leaf, CrossingGrowsUnderIteration) {
  for (const char* name : {"cat", "mp_skew"}) {
    auto s = make_system(name);
    const double delta1 = 0.05, K0 = max_derivative_norm(*s);
    const std::size_t N0 = 2;
    Point c = std::string(name) == "cat" ? Point(0.3, 0.3) : Point(0.7, 0.3);
    Vec2 dir = std::string(name) == "cat" ? cat_eigvec(true) : Vec2(1.0, 0.0);
    Curve curve{c, dir, 0};
    const double bound = std::pow(K0, -double(N0)) * delta1 / std::pow(2.0, double(N0));
    for (std::size_t m = 0; m <= N0; ++m) {
      EXPECT_GE(image_arc_length(*s, curve, -delta1 / 2, 0.0, m), bound) << name << m;
      EXPECT_GE(image_arc_length(*s, curve, 0.0, delta1 / 2, m), bound) << name << m;
    }
  }
}
