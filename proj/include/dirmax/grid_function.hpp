#pragma once

#include <Eigen/Dense>

#include "dirmax/geometry.hpp"

namespace dirmax {

/// Scalar function sampled at the cell centers of a GridSpec.
/// values(i, j) belongs to the center of cell (row i, col j).
struct GridFunction {
  GridSpec grid;
  Eigen::ArrayXXd values;  // ny rows, nx cols

  static GridFunction zeros(const GridSpec& grid);
  static GridFunction constant(const GridSpec& grid, double value);

  double h() const { return grid.h; }
  double cell_area() const { return grid.h * grid.h; }

  double l1() const { return cell_area() * values.abs().sum(); }
  double l2() const { return std::sqrt(cell_area() * values.square().sum()); }
  double linf() const {
    return values.size() ? values.abs().maxCoeff() : 0.0;
  }

  /// Bilinear interpolation between cell centers, zero outside: the function
  /// fades linearly to 0 across the boundary half-cell ring.
  double interpolate(const Eigen::Vector2d& p) const;
};

}  // namespace dirmax
