#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace dirmax {

/// Closed axis-aligned box in the plane.
struct Box {
  Eigen::Vector2d lo{0, 0};
  Eigen::Vector2d hi{1, 1};

  double width() const { return hi.x() - lo.x(); }
  double height() const { return hi.y() - lo.y(); }
  double diameter() const { return (hi - lo).norm(); }
  Box expanded(double m) const {
    return {lo - Eigen::Vector2d(m, m), hi + Eigen::Vector2d(m, m)};
  }
  bool contains(const Eigen::Vector2d& p) const {
    return p.x() >= lo.x() && p.x() <= hi.x() && p.y() >= lo.y() &&
           p.y() <= hi.y();
  }
};

/// Lattice of sampled vectors covering a field's padded box; evaluation is
/// bilinear between nodes.
struct SampledGrid {
  Eigen::Vector2d origin{0, 0};
  double spacing = 1;
  Eigen::ArrayXXd vx, vy;  // node (i, j) at origin + (j*spacing, i*spacing)
};

enum class FieldKind { Constant, Rotation, ShearMonomial, ShearFlat, GridSampled };

/// A planar vector field v on a box domain, defined on the box expanded by
/// `margin` on every side (the "padded box"). Kinds:
///   Constant        v(x) = v0
///   Rotation        v(x) = (-x2, x1)
///   ShearMonomial   v(x) = (1, x1^k),                      k >= 1
///   ShearFlat       v(x) = (1, sgn(x1) * e^{-1/|x1|^gamma}), 0 < gamma < 1,
///                   with the limit value 0 at x1 = 0
///   GridSampled     bilinear interpolation of SampledGrid
struct FieldSpec {
  FieldKind kind = FieldKind::Constant;
  std::string label;
  Box domain;
  double margin = 0;  // > 0; default set by the factories to 0.25 * diameter

  Eigen::Vector2d v0{1, 0};  // Constant
  int monomial_k = 2;        // ShearMonomial
  double flat_gamma = 0.5;   // ShearFlat
  SampledGrid samples;       // GridSampled

  Box padded() const { return domain.expanded(margin); }

  static FieldSpec constant(const Eigen::Vector2d& v0, Box domain,
                            double margin = -1);
  static FieldSpec rotation(Box domain, double margin = -1);
  static FieldSpec shear_monomial(int k, Box domain, double margin = -1);
  static FieldSpec shear_flat(double gamma, Box domain, double margin = -1);
  static FieldSpec grid_sampled(SampledGrid samples, Box domain,
                                double margin = -1);
};

/// Scale bookkeeping for a field: B bounds the C^1 size over the domain box,
/// sup_v the pointwise norm, and epsilon0 the default admissible scale
/// (epsilon0 * sup_v <= margin and epsilon0 <= 1/(100*max(B,1))).
struct FieldBounds {
  double B = 0;
  double sup_v = 0;
  double epsilon0 = 0;
};

/// Evaluates v at p. Throws std::domain_error outside the padded box.
Eigen::Vector2d evaluate(const FieldSpec& field, const Eigen::Vector2d& p);

/// Samples |v| and a central-difference Jacobian on a (resolution+1)^2 grid
/// over the domain box; spacing is max box extent / resolution.
/// Requires resolution >= 16.
FieldBounds estimate_bounds(const FieldSpec& field, int resolution = 64);

/// True iff the segment {x + t v(x) : |t| <= eps} stays in the padded box.
bool segment_safe(const FieldSpec& field, const Eigen::Vector2d& x, double eps);

/// Loads a GridSampled field from CSV with header x,y,vx,vy; the points must
/// form a complete uniform lattice.
FieldSpec load_field_csv(const std::string& path, const std::string& label);

/// The built-in audit fields: constant, rotation, shear2 (monomial k=2),
/// flat (gamma=0.5), noise (seeded grid_sampled perturbation of (1,0)).
std::vector<FieldSpec> builtin_catalog(std::uint64_t noise_seed = 2026);

/// Nine audit base points per field, chosen inside the domain away from
/// degeneracies of the kind (origin for rotation).
std::vector<Eigen::Vector2d> catalog_base_points(const FieldSpec& field);

}  // namespace dirmax
