#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "dirmax/field.hpp"

namespace dirmax {

/// Rectangle with center, long-axis angle alpha in [0, pi), length L >= width W.
struct OrientedRect {
  Eigen::Vector2d center{0, 0};
  double alpha = 0;
  double L = 1;
  double W = 1;

  Eigen::Vector2d axis() const { return {std::cos(alpha), std::sin(alpha)}; }
  Eigen::Vector2d perp() const { return {-std::sin(alpha), std::cos(alpha)}; }
  double area() const { return L * W; }
  double eccentricity() const { return W / L; }
  std::array<Eigen::Vector2d, 4> corners() const;
  bool contains_point(const Eigen::Vector2d& p) const;  // closed rectangle
};

/// Validating constructor: L > 0, W > 0, W <= L; alpha reduced mod pi.
OrientedRect make_rect(const Eigen::Vector2d& center, double alpha, double L,
                       double W);

/// Same center, alpha and eccentricity; L and W scaled by factor >= 1.
OrientedRect dilate(const OrientedRect& rect, double factor);

/// All four corners of b inside closed a.
bool rect_contains(const OrientedRect& a, const OrientedRect& b);

/// Separating-axis test over the four edge normals; exact for convex
/// rectangles (closed: touching counts as intersecting).
bool rects_intersect(const OrientedRect& a, const OrientedRect& b);

/// Unsigned line angle in [0, pi/2] between a nonzero vector and the line of
/// direction alpha (the direction sign of v is ignored).
double line_angle(const Eigen::Vector2d& v, double alpha);

/// Uniform cell grid: cell (i, j) covers origin + h*[j, j+1] x h*[i, i+1],
/// with center origin + h*(j + 1/2, i + 1/2). Row-major indexing i*nx + j.
struct GridSpec {
  Eigen::Vector2d origin{0, 0};
  double h = 1;
  int nx = 1, ny = 1;

  Eigen::Vector2d cell_center(int i, int j) const {
    return origin + h * Eigen::Vector2d(j + 0.5, i + 0.5);
  }
  double diameter() const { return std::hypot(nx * h, ny * h); }
  bool same_as(const GridSpec& o) const {
    return origin == o.origin && h == o.h && nx == o.nx && ny == o.ny;
  }
};

/// Bit set of grid cells; measure is cell count times h^2. Set algebra is
/// only defined between masks over the identical grid.
struct RasterMask {
  GridSpec grid;
  std::vector<std::uint64_t> words;

  static RasterMask empty(const GridSpec& grid);
  void set(int i, int j);
  bool test(int i, int j) const;
  int count() const;
  double measure() const { return count() * grid.h * grid.h; }
  bool intersects(const RasterMask& o) const;
  bool is_subset_of(const RasterMask& o) const;
  std::optional<std::pair<int, int>> first_set_cell() const;  // row-major
  RasterMask operator&(const RasterMask& o) const;
  RasterMask operator|(const RasterMask& o) const;
  RasterMask& operator|=(const RasterMask& o);
};

/// Cells whose centers lie in the closed rectangle.
RasterMask rasterize(const OrientedRect& rect, const GridSpec& grid);

/// Population V(R): cells with center in R whose field direction deviates
/// from R's long axis by a line angle < W/(2L). Cells where v vanishes are
/// excluded and tallied.
struct PopulationResult {
  RasterMask mask;
  int excluded_zero_v = 0;
};
PopulationResult population(const FieldSpec& field, const OrientedRect& rect,
                            const GridSpec& grid);

/// The rectangle of one base point: length 2 eps |v(x)| along v(x), half-width
/// delta = eps sup_w / |v(x)|; degenerate (zero width) when sup_w = 0.
struct BourgainRect {
  Eigen::Vector2d base{0, 0};
  double eps = 0;
  Eigen::Vector2d direction{1, 0};  // v(x)/|v(x)|
  double L = 0;
  double delta = 0;
  bool degenerate = true;

  OrientedRect rect() const;  // requires !degenerate
};

BourgainRect bourgain_rectangle(const FieldSpec& field,
                                const Eigen::Vector2d& x, double eps, int N_t);

/// Dyadic-width partition: cell (center) x belongs to bin s iff
/// 2^{-s-1} <= delta(R_{x,eps}) < 2^{-s}. Cells with v = 0 or sup_w = 0 go to
/// `degenerate`; cells whose centers lie outside the field's domain box are
/// not part of the partition at all.
struct OmegaPartition {
  std::map<int, RasterMask> bins;
  RasterMask degenerate;
};

OmegaPartition omega_partition(const FieldSpec& field, double eps,
                               const GridSpec& grid, int N_t);

/// Union of the rasterized doubled rectangles R'_{x,eps} over the cells of
/// bin s; contains the bin itself.
RasterMask omega_prime(const FieldSpec& field, double eps, int s,
                       const GridSpec& grid, int N_t);

}  // namespace dirmax
