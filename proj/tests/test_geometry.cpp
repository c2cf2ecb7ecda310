#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "dirmax/field.hpp"
#include "dirmax/geometry.hpp"
#include "dirmax/rng.hpp"

using namespace dirmax;
using Eigen::Vector2d;

namespace {

const Box kSym{{-1, -1}, {1, 1}};

// Independent intersection oracle: clip b's corner polygon against a's four
// half-planes (Sutherland-Hodgman, inclusive). Nonempty survivor set means
// the closed rectangles meet.
bool clip_intersects(const OrientedRect& a, const OrientedRect& b) {
  const Vector2d bx = (b.L / 2) * b.axis(), bp = (b.W / 2) * b.perp();
  std::vector<Vector2d> poly = {b.center + bx + bp, b.center - bx + bp,
                                b.center - bx - bp, b.center + bx - bp};
  struct HalfPlane {
    Vector2d n;
    double c;  // keep points with n . p <= c
  };
  const HalfPlane planes[4] = {
      {a.axis(), a.axis().dot(a.center) + a.L / 2},
      {-a.axis(), -a.axis().dot(a.center) + a.L / 2},
      {a.perp(), a.perp().dot(a.center) + a.W / 2},
      {-a.perp(), -a.perp().dot(a.center) + a.W / 2},
  };
  const double tol = 1e-12;
  for (const HalfPlane& hp : planes) {
    std::vector<Vector2d> next;
    const std::size_t n = poly.size();
    for (std::size_t k = 0; k < n; ++k) {
      const Vector2d& p = poly[k];
      const Vector2d& q = poly[(k + 1) % n];
      const double dp = hp.n.dot(p) - hp.c;
      const double dq = hp.n.dot(q) - hp.c;
      if (dp <= tol) next.push_back(p);
      if ((dp < -tol && dq > tol) || (dp > tol && dq < -tol))
        next.push_back(p + (dp / (dp - dq)) * (q - p));
    }
    poly = std::move(next);
    if (poly.empty()) return false;
  }
  return true;
}

OrientedRect random_rect(Rng& rng) {
  const Vector2d c(rng.uniform(-1, 1), rng.uniform(-1, 1));
  const double L = rng.uniform(0.1, 1.0);
  const double W = L * rng.uniform(0.1, 1.0);
  return make_rect(c, rng.uniform(0, M_PI), L, W);
}

bool masks_equal(const RasterMask& a, const RasterMask& b) {
  return a.count() == b.count() && a.is_subset_of(b) && b.is_subset_of(a);
}

}  // namespace

TEST_CASE("make_rect: validation and angle reduction") {
  CHECK_THROWS_AS(make_rect({0, 0}, 0, 1, 2), std::invalid_argument);
  CHECK_THROWS_AS(make_rect({0, 0}, 0, 0, 0), std::invalid_argument);
  CHECK_THROWS_AS(make_rect({0, 0}, 0, 1, -1), std::invalid_argument);
  CHECK(make_rect({0, 0}, M_PI + 0.3, 1, 1).alpha ==
        doctest::Approx(0.3).epsilon(1e-12));
  CHECK(make_rect({0, 0}, -0.2, 1, 1).alpha ==
        doctest::Approx(M_PI - 0.2).epsilon(1e-12));
  const OrientedRect r = make_rect({1, 2}, 0.4, 3, 1.5);
  CHECK(r.area() == doctest::Approx(4.5).epsilon(1e-15));
  CHECK(r.eccentricity() == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("corners match the frame expansion") {
  const Vector2d c(0.3, -0.2);
  const OrientedRect r = make_rect(c, M_PI / 6, 2, 1);
  const Vector2d ax = r.axis(), pp = r.perp();
  std::vector<Vector2d> expected = {c + ax + 0.5 * pp, c + ax - 0.5 * pp,
                                    c - ax + 0.5 * pp, c - ax - 0.5 * pp};
  for (const Vector2d& corner : r.corners()) {
    bool matched = false;
    for (const Vector2d& e : expected)
      if ((corner - e).norm() < 1e-14) matched = true;
    CHECK(matched);
    // Closed rectangle: the corner lies inside up to one-ulp reconstruction
    // rounding, so probe a hair inward of it.
    CHECK(r.contains_point(c + (1 - 1e-12) * (corner - c)));
  }
}

TEST_CASE("contains_point: unit square") {
  const OrientedRect r = make_rect({0, 0}, 0, 1, 1);
  CHECK(r.contains_point({0, 0}));
  CHECK(r.contains_point({0.5, 0.5}));  // boundary is inside
  CHECK_FALSE(r.contains_point({0.5 + 1e-9, 0}));
  CHECK_FALSE(r.contains_point({0, -0.6}));
}

TEST_CASE("dilate: scaling and exact composition") {
  const OrientedRect r = make_rect({0.1, 0.2}, M_PI / 6, 2, 1);
  const OrientedRect d = dilate(r, 2);
  CHECK(d.L == 4.0);
  CHECK(d.W == 2.0);
  CHECK(d.alpha == r.alpha);
  CHECK(d.center == r.center);
  const OrientedRect ab = dilate(dilate(r, 2), 3);
  const OrientedRect once = dilate(r, 6);
  CHECK(ab.L == once.L);
  CHECK(ab.W == once.W);
  CHECK_THROWS_AS(dilate(r, 0.5), std::invalid_argument);
}

TEST_CASE("rect_contains") {
  const OrientedRect r = make_rect({0.2, -0.1}, 0.7, 1, 0.4);
  CHECK(rect_contains(r, r));  // closed: own corners count
  CHECK(rect_contains(r, make_rect(r.center, r.alpha, 0.5, 0.2)));
  CHECK(rect_contains(dilate(r, 1.5), r));
  CHECK_FALSE(
      rect_contains(r, make_rect(r.center + Vector2d(2, 0), r.alpha, 1, 0.4)));
}

TEST_CASE("rects_intersect: touching counts, disjoint does not") {
  const OrientedRect a = make_rect({0, 0}, 0, 1, 1);
  CHECK(rects_intersect(a, make_rect({1.0, 0}, 0, 1, 1)));  // shared edge
  CHECK_FALSE(rects_intersect(a, make_rect({1.01, 0}, 0, 1, 1)));
  CHECK_FALSE(rects_intersect(a, make_rect({0, 5}, 1.2, 1, 0.3)));
}

TEST_CASE("rects_intersect agrees with the clipping oracle on 10^4 pairs") {
  Rng rng(2026);
  int intersecting = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const OrientedRect a = random_rect(rng);
    const OrientedRect b = random_rect(rng);
    const bool sat = rects_intersect(a, b);
    CHECK(sat == clip_intersects(a, b));
    CHECK(sat == rects_intersect(b, a));
    if (sat) ++intersecting;
    if (rect_contains(a, b)) CHECK(sat);  // containment implies intersection
  }
  CHECK(intersecting > 1000);  // the sweep exercises both outcomes
  CHECK(intersecting < 9000);
}

TEST_CASE("line_angle") {
  CHECK(line_angle({1, 0}, 0) == 0.0);
  CHECK(line_angle({1, 0}, M_PI / 2) == doctest::Approx(M_PI / 2).epsilon(1e-12));
  CHECK(line_angle({-1, 0}, 0) == 0.0);  // direction sign ignored
  CHECK(line_angle({1, 1}, 0) == doctest::Approx(M_PI / 4).epsilon(1e-12));
  CHECK(line_angle({2, 0}, M_PI) == doctest::Approx(0).epsilon(1e-12));
  CHECK_THROWS_AS(line_angle({0, 0}, 0.3), std::invalid_argument);

  Rng rng(7);
  for (int trial = 0; trial < 2000; ++trial) {
    const double beta = rng.uniform(0, 2 * M_PI);
    const double alpha = rng.uniform(0, M_PI);
    const double got =
        line_angle({std::cos(beta), std::sin(beta)}, alpha);
    double d = std::fmod(std::abs(beta - alpha), M_PI);
    d = std::min(d, M_PI - d);
    CHECK(got == doctest::Approx(d).epsilon(1e-9));
    CHECK(got >= 0);
    CHECK(got <= M_PI / 2 + 1e-15);
  }
}

TEST_CASE("GridSpec basics") {
  const GridSpec g{{-1, -1}, 0.5, 4, 3};
  CHECK(g.cell_center(0, 0) == Vector2d(-0.75, -0.75));
  CHECK(g.cell_center(2, 3) == Vector2d(0.75, 0.25));
  CHECK(g.diameter() == doctest::Approx(2.5).epsilon(1e-15));
  CHECK(g.same_as(g));
  GridSpec other = g;
  other.h = 0.25;
  CHECK_FALSE(g.same_as(other));
}

TEST_CASE("RasterMask set algebra") {
  const GridSpec g{{0, 0}, 0.5, 4, 3};
  RasterMask a = RasterMask::empty(g);
  CHECK(a.count() == 0);
  CHECK(a.measure() == 0.0);
  CHECK(!a.first_set_cell().has_value());

  a.set(1, 2);
  a.set(0, 0);
  a.set(1, 2);  // idempotent
  CHECK(a.count() == 2);
  CHECK(a.test(1, 2));
  CHECK(a.test(0, 0));
  CHECK_FALSE(a.test(2, 3));
  CHECK(a.measure() == doctest::Approx(2 * 0.25).epsilon(1e-15));
  CHECK(a.first_set_cell().value() == std::pair<int, int>(0, 0));

  RasterMask b = RasterMask::empty(g);
  b.set(1, 2);
  b.set(2, 3);
  CHECK(b.first_set_cell().value() == std::pair<int, int>(1, 2));

  const RasterMask meet = a & b;
  CHECK(meet.count() == 1);
  CHECK(meet.test(1, 2));
  const RasterMask join = a | b;
  CHECK(join.count() == 3);
  CHECK(a.intersects(b));
  CHECK(a.is_subset_of(join));
  CHECK(b.is_subset_of(join));
  CHECK(meet.is_subset_of(a));
  CHECK_FALSE(join.is_subset_of(a));

  RasterMask c = RasterMask::empty(g);
  c |= a;
  c |= b;
  CHECK(masks_equal(c, join));

  RasterMask d = RasterMask::empty(g);
  d.set(2, 0);
  CHECK_FALSE(d.intersects(a));
}

TEST_CASE("rasterize: exact axis-aligned case") {
  const GridSpec g{{0, 0}, 1.0 / 16, 16, 16};
  const OrientedRect r = make_rect({0.5, 0.5}, 0, 0.5, 0.25);
  const RasterMask m = rasterize(r, g);
  CHECK(m.count() == 32);  // 8 columns x 4 rows of centers
  CHECK(m.measure() == doctest::Approx(r.area()).epsilon(1e-15));
  for (int i = 0; i < 16; ++i)
    for (int j = 0; j < 16; ++j)
      CHECK(m.test(i, j) == r.contains_point(g.cell_center(i, j)));

  // A rectangle outside the grid window rasterizes to nothing.
  CHECK(rasterize(make_rect({5, 5}, 0.3, 1, 0.5), g).count() == 0);
}

TEST_CASE("rasterize: perimeter error bound on random rectangles") {
  const GridSpec g{{-2, -2}, 4.0 / 128, 128, 128};
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const Vector2d c(rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8));
    const double L = rng.uniform(0.3, 1.2);
    const double W = L * rng.uniform(0.15, 0.9);
    const OrientedRect r = make_rect(c, rng.uniform(0, M_PI), L, W);
    const double err = std::abs(rasterize(r, g).measure() - r.area());
    CHECK(err <= 4 * g.h * (r.L + r.W));
  }
}

TEST_CASE("population: constant fields") {
  const GridSpec g{{0, 0}, 1.0 / 64, 64, 64};
  const Box box{{-2, -2}, {3, 3}};
  const OrientedRect r = make_rect({0.5, 0.5}, 0, 0.5, 0.125);

  // Field parallel to the axis: V(R) is the full raster of R.
  const PopulationResult along =
      population(FieldSpec::constant({1, 0}, box), r, g);
  CHECK(masks_equal(along.mask, rasterize(r, g)));
  CHECK(along.mask.count() > 0);
  CHECK(along.excluded_zero_v == 0);

  // Field orthogonal to the axis: line angle pi/2 exceeds any W/(2L).
  const PopulationResult across =
      population(FieldSpec::constant({0, 1}, box), r, g);
  CHECK(across.mask.count() == 0);

  CHECK_THROWS_AS(
      population(FieldSpec::constant({1, 0}, box), make_rect({0.5, 0.5}, 0, 1, 1), g),
      std::invalid_argument);
}

TEST_CASE("population: rotation field matches per-cell brute force") {
  const GridSpec g{{-1, -1}, 2.0 / 64, 64, 64};
  const FieldSpec field = FieldSpec::rotation(kSym);
  const Vector2d c(0.5, 0.3);
  const double alpha = std::atan2(0.5, -0.3);  // align with v(c)
  const OrientedRect r = make_rect(c, alpha, 0.4, 0.1);

  const PopulationResult got = population(field, r, g);
  RasterMask expected = RasterMask::empty(g);
  const double threshold = r.W / (2 * r.L);
  for (int i = 0; i < g.ny; ++i)
    for (int j = 0; j < g.nx; ++j) {
      const Vector2d p = g.cell_center(i, j);
      if (!r.contains_point(p)) continue;
      const Vector2d v = evaluate(field, p);
      if (v.norm() == 0) continue;
      if (line_angle(v, r.alpha) < threshold) expected.set(i, j);
    }
  CHECK(got.mask.count() > 0);
  CHECK(masks_equal(got.mask, expected));
  CHECK(got.excluded_zero_v == 0);
}

TEST_CASE("population: zero-direction cells are tallied") {
  const GridSpec g{{-1, -1}, 0.4, 5, 5};  // center cell sits exactly on (0,0)
  const FieldSpec field = FieldSpec::rotation(kSym);
  const PopulationResult res =
      population(field, make_rect({0, 0}, 0, 1.2, 0.6), g);
  CHECK(res.excluded_zero_v == 1);
  CHECK(res.mask.count() == 0);  // remaining centers point orthogonally
}

TEST_CASE("population is monotone in the width") {
  const GridSpec g{{-1, -1}, 2.0 / 64, 64, 64};
  const FieldSpec field = FieldSpec::rotation(kSym);
  const Vector2d c(0.5, 0);
  const RasterMask narrow =
      population(field, make_rect(c, M_PI / 2, 0.8, 0.1), g).mask;
  const RasterMask wide =
      population(field, make_rect(c, M_PI / 2, 0.8, 0.2), g).mask;
  CHECK(narrow.count() > 0);
  CHECK(narrow.is_subset_of(wide));
  CHECK(wide.count() > narrow.count());
}

TEST_CASE("bourgain_rectangle: rotation and shear closed forms") {
  const FieldSpec rot = FieldSpec::rotation(kSym);
  const BourgainRect br = bourgain_rectangle(rot, {0.6, 0.8}, 0.5, 512);
  CHECK_FALSE(br.degenerate);
  CHECK(br.base == Vector2d(0.6, 0.8));
  CHECK(br.eps == 0.5);
  CHECK(br.L == doctest::Approx(1.0).epsilon(1e-12));       // 2 eps |v|
  CHECK(br.delta == doctest::Approx(0.25).epsilon(1e-12));  // eps sup_w / |v|
  CHECK((br.direction - Vector2d(-0.8, 0.6)).norm() < 1e-12);
  const OrientedRect r = br.rect();
  CHECK(r.center == br.base);
  CHECK(r.L == br.L);
  CHECK(r.W == doctest::Approx(2 * br.delta).epsilon(1e-15));
  const double cross =
      r.axis().x() * br.direction.y() - r.axis().y() * br.direction.x();
  CHECK(std::abs(cross) < 1e-12);  // axis parallel to the field line

  const FieldSpec sh = FieldSpec::shear_monomial(2, kSym);
  const BourgainRect bs = bourgain_rectangle(sh, {0, 0.3}, 0.5, 512);
  CHECK(bs.L == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(bs.delta == doctest::Approx(0.125).epsilon(1e-12));

  const BourgainRect bc =
      bourgain_rectangle(FieldSpec::constant({1, 0}, kSym), {0.2, 0.1}, 0.25, 64);
  CHECK(bc.degenerate);
  CHECK_THROWS_AS(bc.rect(), std::logic_error);
  CHECK_THROWS_AS(bourgain_rectangle(rot, {0, 0}, 0.25, 64),
                  std::invalid_argument);  // v(0,0) = 0 has no direction
}

TEST_CASE("omega_partition: rotation annuli closed form") {
  const GridSpec g{{-1, -1}, 2.0 / 32, 32, 32};
  const FieldSpec field = FieldSpec::rotation(kSym);
  const double eps = 0.25;
  const OmegaPartition part = omega_partition(field, eps, g, 128);

  CHECK(part.degenerate.count() == 0);
  RasterMask seen = RasterMask::empty(g);
  int binned = 0;
  for (const auto& [s, mask] : part.bins) {
    CHECK_FALSE(seen.intersects(mask));  // bins pairwise disjoint
    seen |= mask;
    binned += mask.count();
  }
  CHECK(binned == 32 * 32);  // every cell assigned exactly once

  // delta(x) = eps^2 |x| for the rotation field; bin from the dyadic binade.
  for (int i = 0; i < 32; ++i)
    for (int j = 0; j < 32; ++j) {
      const double d = eps * eps * g.cell_center(i, j).norm();
      const double lg = std::log2(d);
      if (std::abs(lg - std::round(lg)) < 1e-6) continue;  // binade boundary
      int exp;
      std::frexp(d, &exp);
      const int s = -exp;
      REQUIRE(part.bins.count(s) == 1);
      CHECK(part.bins.at(s).test(i, j));
    }
}

TEST_CASE("omega_partition: constant field fully degenerate") {
  const GridSpec g{{-1, -1}, 2.0 / 16, 16, 16};
  const OmegaPartition part =
      omega_partition(FieldSpec::constant({1, 0}, kSym), 0.25, g, 64);
  CHECK(part.bins.empty());
  CHECK(part.degenerate.count() == 16 * 16);
}

TEST_CASE("omega_partition: centers outside the domain box are skipped") {
  // Grid columns j >= 32 have centers with x > 1, outside the domain.
  const GridSpec g{{-1, -1}, 1.0 / 16, 40, 8};
  const FieldSpec field = FieldSpec::rotation(kSym);
  const OmegaPartition part = omega_partition(field, 0.25, g, 64);
  int total = part.degenerate.count();
  for (const auto& [s, mask] : part.bins) total += mask.count();
  CHECK(total == 32 * 8);
  for (const auto& [s, mask] : part.bins)
    for (int i = 0; i < g.ny; ++i)
      for (int j = 32; j < g.nx; ++j) CHECK_FALSE(mask.test(i, j));
}

TEST_CASE("omega_prime: single-cell bin equals one doubled rectangle") {
  const GridSpec g{{0.65, 0.4}, 0.2, 2, 1};
  const FieldSpec field = FieldSpec::rotation(kSym);
  const double eps = 0.25;
  // Centers (0.75, 0.5) and (0.95, 0.5): delta = eps^2 |x| puts them in
  // bins s = 4 and s = 3 respectively.
  const OmegaPartition part = omega_partition(field, eps, g, 128);
  REQUIRE(part.bins.count(3) == 1);
  REQUIRE(part.bins.count(4) == 1);
  CHECK(part.bins.at(3).count() == 1);
  CHECK(part.bins.at(3).test(0, 1));
  CHECK(part.bins.at(4).count() == 1);
  CHECK(part.bins.at(4).test(0, 0));

  const RasterMask prime = omega_prime(field, eps, 3, g, 128);
  const BourgainRect br = bourgain_rectangle(field, g.cell_center(0, 1), eps, 128);
  CHECK(masks_equal(prime, rasterize(dilate(br.rect(), 2), g)));
  CHECK(part.bins.at(3).is_subset_of(prime));

  CHECK_THROWS_AS(omega_prime(field, eps, -999, g, 128), std::invalid_argument);
}

TEST_CASE("omega_prime contains its bin for every rotation bin") {
  const GridSpec g{{-1, -1}, 2.0 / 32, 32, 32};
  const FieldSpec field = FieldSpec::rotation(kSym);
  const double eps = 0.25;
  const OmegaPartition part = omega_partition(field, eps, g, 128);
  REQUIRE(!part.bins.empty());
  for (const auto& [s, mask] : part.bins) {
    const RasterMask prime = omega_prime(field, eps, s, g, 128);
    CHECK(mask.is_subset_of(prime));
    CHECK(prime.measure() >= mask.measure());
  }
}

TEST_CASE("omega_prime: coverage ratio stable under grid refinement") {
  const FieldSpec field = FieldSpec::rotation(kSym);
  const double eps = 0.25;
  const int s = 3;  // |x| in [1, 2): the corner annulus
  double ratio[2] = {0, 0};
  const int sizes[2] = {32, 64};
  for (int k = 0; k < 2; ++k) {
    const int n = sizes[k];
    const GridSpec g{{-1, -1}, 2.0 / n, n, n};
    const OmegaPartition part = omega_partition(field, eps, g, 128);
    REQUIRE(part.bins.count(s) == 1);
    const double bin_measure = part.bins.at(s).measure();
    REQUIRE(bin_measure > 0);
    ratio[k] = omega_prime(field, eps, s, g, 128).measure() / bin_measure;
    CHECK(ratio[k] >= 1.0);
  }
  CHECK(std::abs(ratio[0] - ratio[1]) <= 0.05 * ratio[1]);
}
