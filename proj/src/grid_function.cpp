#include "dirmax/grid_function.hpp"

#include <cmath>
#include <stdexcept>

namespace dirmax {

GridFunction GridFunction::zeros(const GridSpec& grid) {
  if (grid.nx < 1 || grid.ny < 1 || !(grid.h > 0))
    throw std::invalid_argument("grid needs positive dimensions and spacing");
  GridFunction f;
  f.grid = grid;
  f.values = Eigen::ArrayXXd::Zero(grid.ny, grid.nx);
  return f;
}

GridFunction GridFunction::constant(const GridSpec& grid, double value) {
  GridFunction f = zeros(grid);
  f.values.setConstant(value);
  return f;
}

double GridFunction::interpolate(const Eigen::Vector2d& p) const {
  // Coordinates in units of the center lattice: center (i, j) sits at (j, i).
  double fx = (p.x() - grid.origin.x()) / grid.h - 0.5;
  double fy = (p.y() - grid.origin.y()) / grid.h - 0.5;
  int j0 = static_cast<int>(std::floor(fx));
  int i0 = static_cast<int>(std::floor(fy));
  double a = fx - j0, b = fy - i0;
  auto at = [&](int i, int j) -> double {
    if (i < 0 || j < 0 || i >= grid.ny || j >= grid.nx) return 0.0;
    return values(i, j);
  };
  return (1 - b) * ((1 - a) * at(i0, j0) + a * at(i0, j0 + 1)) +
         b * ((1 - a) * at(i0 + 1, j0) + a * at(i0 + 1, j0 + 1));
}

}  // namespace dirmax
