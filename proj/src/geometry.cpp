#include "dirmax/geometry.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

#include "dirmax/angular.hpp"

namespace dirmax {

std::array<Eigen::Vector2d, 4> OrientedRect::corners() const {
  Eigen::Vector2d e = 0.5 * L * axis(), n = 0.5 * W * perp();
  return {center + e + n, center + e - n, center - e - n, center - e + n};
}

bool OrientedRect::contains_point(const Eigen::Vector2d& p) const {
  Eigen::Vector2d d = p - center;
  return std::abs(d.dot(axis())) <= 0.5 * L && std::abs(d.dot(perp())) <= 0.5 * W;
}

OrientedRect make_rect(const Eigen::Vector2d& center, double alpha, double L,
                       double W) {
  if (!(L > 0) || !(W > 0) || W > L)
    throw std::invalid_argument("rectangle needs 0 < W <= L");
  double a = std::fmod(alpha, M_PI);
  if (a < 0) a += M_PI;
  if (a == M_PI) a = 0;
  return {center, a, L, W};
}

OrientedRect dilate(const OrientedRect& rect, double factor) {
  if (!(factor >= 1)) throw std::invalid_argument("dilation factor must be >= 1");
  return {rect.center, rect.alpha, factor * rect.L, factor * rect.W};
}

bool rect_contains(const OrientedRect& a, const OrientedRect& b) {
  for (const Eigen::Vector2d& c : b.corners())
    if (!a.contains_point(c)) return false;
  return true;
}

bool rects_intersect(const OrientedRect& a, const OrientedRect& b) {
  const Eigen::Vector2d axes[4] = {a.axis(), a.perp(), b.axis(), b.perp()};
  Eigen::Vector2d d = b.center - a.center;
  for (const Eigen::Vector2d& n : axes) {
    double ra = 0.5 * a.L * std::abs(a.axis().dot(n)) +
                0.5 * a.W * std::abs(a.perp().dot(n));
    double rb = 0.5 * b.L * std::abs(b.axis().dot(n)) +
                0.5 * b.W * std::abs(b.perp().dot(n));
    if (std::abs(d.dot(n)) > ra + rb) return false;
  }
  return true;
}

double line_angle(const Eigen::Vector2d& v, double alpha) {
  double norm = v.norm();
  if (!(norm > 0)) throw std::invalid_argument("line_angle needs v != 0");
  Eigen::Vector2d u = v / norm;
  Eigen::Vector2d e(std::cos(alpha), std::sin(alpha));
  double c = std::abs(u.x() * e.y() - u.y() * e.x());
  double d = std::abs(u.dot(e));
  return std::atan2(std::min(c, 1.0), d);
}

RasterMask RasterMask::empty(const GridSpec& grid) {
  RasterMask m;
  m.grid = grid;
  m.words.assign((static_cast<std::size_t>(grid.nx) * grid.ny + 63) / 64, 0);
  return m;
}

void RasterMask::set(int i, int j) {
  std::size_t bit = static_cast<std::size_t>(i) * grid.nx + j;
  words[bit / 64] |= std::uint64_t{1} << (bit % 64);
}

bool RasterMask::test(int i, int j) const {
  std::size_t bit = static_cast<std::size_t>(i) * grid.nx + j;
  return (words[bit / 64] >> (bit % 64)) & 1;
}

int RasterMask::count() const {
  int n = 0;
  for (std::uint64_t w : words) n += std::popcount(w);
  return n;
}

namespace {
void require_same_grid(const RasterMask& a, const RasterMask& b) {
  if (!a.grid.same_as(b.grid))
    throw std::invalid_argument("mask set algebra needs the identical grid");
}
}  // namespace

bool RasterMask::intersects(const RasterMask& o) const {
  require_same_grid(*this, o);
  for (std::size_t k = 0; k < words.size(); ++k)
    if (words[k] & o.words[k]) return true;
  return false;
}

bool RasterMask::is_subset_of(const RasterMask& o) const {
  require_same_grid(*this, o);
  for (std::size_t k = 0; k < words.size(); ++k)
    if (words[k] & ~o.words[k]) return false;
  return true;
}

std::optional<std::pair<int, int>> RasterMask::first_set_cell() const {
  for (std::size_t k = 0; k < words.size(); ++k)
    if (words[k]) {
      std::size_t bit = 64 * k + std::countr_zero(words[k]);
      return std::pair<int, int>{static_cast<int>(bit / grid.nx),
                                 static_cast<int>(bit % grid.nx)};
    }
  return std::nullopt;
}

RasterMask RasterMask::operator&(const RasterMask& o) const {
  require_same_grid(*this, o);
  RasterMask out = *this;
  for (std::size_t k = 0; k < words.size(); ++k) out.words[k] &= o.words[k];
  return out;
}

RasterMask RasterMask::operator|(const RasterMask& o) const {
  RasterMask out = *this;
  out |= o;
  return out;
}

RasterMask& RasterMask::operator|=(const RasterMask& o) {
  require_same_grid(*this, o);
  for (std::size_t k = 0; k < words.size(); ++k) words[k] |= o.words[k];
  return *this;
}

namespace {

// Row/column index window of cells whose centers might lie in the rectangle.
struct CellWindow {
  int i_lo, i_hi, j_lo, j_hi;  // inclusive; empty when i_lo > i_hi
};

CellWindow cell_window(const OrientedRect& rect, const GridSpec& grid) {
  double ex = 0.5 * rect.L * std::abs(std::cos(rect.alpha)) +
              0.5 * rect.W * std::abs(std::sin(rect.alpha));
  double ey = 0.5 * rect.L * std::abs(std::sin(rect.alpha)) +
              0.5 * rect.W * std::abs(std::cos(rect.alpha));
  auto clampi = [](double v, int n) {
    return std::clamp(static_cast<int>(std::floor(v)), 0, n - 1);
  };
  CellWindow w;
  w.j_lo = clampi((rect.center.x() - ex - grid.origin.x()) / grid.h - 0.5, grid.nx);
  w.j_hi = clampi((rect.center.x() + ex - grid.origin.x()) / grid.h + 0.5, grid.nx);
  w.i_lo = clampi((rect.center.y() - ey - grid.origin.y()) / grid.h - 0.5, grid.ny);
  w.i_hi = clampi((rect.center.y() + ey - grid.origin.y()) / grid.h + 0.5, grid.ny);
  return w;
}

}  // namespace

RasterMask rasterize(const OrientedRect& rect, const GridSpec& grid) {
  RasterMask mask = RasterMask::empty(grid);
  CellWindow w = cell_window(rect, grid);
  for (int i = w.i_lo; i <= w.i_hi; ++i)
    for (int j = w.j_lo; j <= w.j_hi; ++j)
      if (rect.contains_point(grid.cell_center(i, j))) mask.set(i, j);
  return mask;
}

PopulationResult population(const FieldSpec& field, const OrientedRect& rect,
                            const GridSpec& grid) {
  if (!(rect.W < rect.L))
    throw std::invalid_argument("population needs W/L < 1");
  PopulationResult out{RasterMask::empty(grid), 0};
  double threshold = rect.W / (2 * rect.L);
  CellWindow w = cell_window(rect, grid);
  for (int i = w.i_lo; i <= w.i_hi; ++i)
    for (int j = w.j_lo; j <= w.j_hi; ++j) {
      Eigen::Vector2d c = grid.cell_center(i, j);
      if (!rect.contains_point(c)) continue;
      Eigen::Vector2d v = evaluate(field, c);
      if (v.norm() == 0) {
        ++out.excluded_zero_v;
        continue;
      }
      if (line_angle(v, rect.alpha) < threshold) out.mask.set(i, j);
    }
  return out;
}

OrientedRect BourgainRect::rect() const {
  if (degenerate)
    throw std::logic_error("degenerate Bourgain rectangle has no extent");
  return make_rect(base, std::atan2(direction.y(), direction.x()), L, 2 * delta);
}

BourgainRect bourgain_rectangle(const FieldSpec& field,
                                const Eigen::Vector2d& x, double eps, int N_t) {
  Eigen::Vector2d v = evaluate(field, x);
  double norm = v.norm();
  if (!(norm > 0))
    throw std::invalid_argument("Bourgain rectangle: v(x) = 0 has no direction");
  AngularProfile pr = angular_profile(field, x, eps, N_t);
  BourgainRect r;
  r.base = x;
  r.eps = eps;
  r.direction = v / norm;
  r.L = 2 * eps * norm;
  r.delta = eps * pr.sup_w / norm;
  r.degenerate = pr.sup_w == 0;
  return r;
}

OmegaPartition omega_partition(const FieldSpec& field, double eps,
                               const GridSpec& grid, int N_t) {
  OmegaPartition part;
  part.degenerate = RasterMask::empty(grid);
  for (int i = 0; i < grid.ny; ++i)
    for (int j = 0; j < grid.nx; ++j) {
      Eigen::Vector2d c = grid.cell_center(i, j);
      if (!field.domain.contains(c)) continue;
      Eigen::Vector2d v = evaluate(field, c);
      if (v.norm() == 0) {
        part.degenerate.set(i, j);
        continue;
      }
      BourgainRect r = bourgain_rectangle(field, c, eps, N_t);
      if (r.degenerate) {
        part.degenerate.set(i, j);
        continue;
      }
      int exp;
      std::frexp(r.delta, &exp);  // delta in [2^{exp-1}, 2^{exp}) => s = -exp
      int s = -exp;
      auto [it, inserted] = part.bins.try_emplace(s, RasterMask::empty(grid));
      it->second.set(i, j);
    }
  return part;
}

RasterMask omega_prime(const FieldSpec& field, double eps, int s,
                       const GridSpec& grid, int N_t) {
  OmegaPartition part = omega_partition(field, eps, grid, N_t);
  auto it = part.bins.find(s);
  if (it == part.bins.end())
    throw std::invalid_argument("omega_prime: bin s is empty");
  RasterMask out = RasterMask::empty(grid);
  for (int i = 0; i < grid.ny; ++i)
    for (int j = 0; j < grid.nx; ++j) {
      if (!it->second.test(i, j)) continue;
      BourgainRect r = bourgain_rectangle(field, grid.cell_center(i, j), eps, N_t);
      out |= rasterize(dilate(r.rect(), 2), grid);
    }
  return out;
}

}  // namespace dirmax
