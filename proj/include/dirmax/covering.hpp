#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "dirmax/field.hpp"
#include "dirmax/geometry.hpp"
#include "dirmax/grid_function.hpp"

namespace dirmax {

/// One admissible rectangle of a covering instance, with its population mask
/// and the mean of |f| over that mask.
struct FamilyMember {
  OrientedRect rect;
  RasterMask V;
  double mean_over_V = 0;
};

/// Input of the covering argument. Invariants (checked by validate):
/// every member has |V| >= delta * L * W (raster measure vs exact area),
/// theta <= W/L < 2*theta, a nonempty V, and mean_over_V > lambda.
struct AdmissibleFamily {
  FieldSpec field;
  GridSpec grid;
  GridFunction f;
  double delta = 0.5;
  double theta = 0.01;
  double lambda = 0;
  std::vector<FamilyMember> members;
};

/// Throws std::invalid_argument naming the first offending member index.
void validate_admissible(const AdmissibleFamily& family);

/// Greedy maximal disjoint selection: members visited in (L desc, |V| desc,
/// index asc) order; a member is selected iff its V-mask is raster-disjoint
/// from all previously selected V-masks. blocker[i] is the selected index
/// whose V-mask met member i's (its length is >= member i's by the visiting
/// order), or -1 for selected members.
struct GreedyResult {
  std::vector<int> selected;  // in selection order
  std::vector<int> blocker;   // per member
};

GreedyResult greedy_disjoint(const AdmissibleFamily& family);

/// Evidence of the pairwise containment lemma for an unselected member r0
/// against its blocker ri, sharing the raster cell z0 (center in both
/// V-masks, L0 <= Li, both in the theta class):
///   (i)   phi0 <= phi1 + phi2     (line angles at v(z0); RP^1 triangle
///                                  inequality, checked with an fp slack)
///   (ii)  phi0 < 2 theta <= 2 W_i/L_i
///   (iii) W0 cos phi0 + L0 sin phi0 <= 4 W_i   and
///         L0 cos phi0 + W0 sin phi0 <= 2 L0
///   (iv)  R0 contained in dilate(Ri, 10)       (exact corner test)
struct ContainmentEvidence {
  int member = -1;
  int blocker = -1;
  int z0_row = 0, z0_col = 0;
  double phi0 = 0, phi1 = 0, phi2 = 0;
  bool angle_triangle = false;   // (i)
  bool angle_class = false;      // (ii)
  bool proj_short = false;       // (iii) first
  bool proj_long = false;        // (iii) second
  bool contained_10 = false;     // (iv)
  double slack = 0;              // corner margin inside the 10-fold dilation
  bool low_margin = false;       // z0 center within 2h of either boundary
  bool pass = false;
};

ContainmentEvidence containment_lemma_check(const AdmissibleFamily& family,
                                            int r0, int ri);

/// The five-number measure chain and its four inequalities, raster measures
/// on the left of each step and exact areas for |R|:
///   |K| <= sum |R'_i| <= 100 sum |R_i| <= (100/delta) sum |V_i|
///       <= (100/(delta lambda)) ||f||_1
struct ChainNumbers {
  double K = 0;
  double sumRp = 0;
  double sumR100 = 0;
  double sumV_over_delta = 0;
  double bound = 0;
  bool holds01 = false, holds12 = false, holds23 = false, holds34 = false;
};

struct CoveringCertificate {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::vector<int> selected;
  ChainNumbers chain;
  std::vector<ContainmentEvidence> pair_evidence;  // one per unselected member
  bool cover_exact = false;  // every V-mask inside the union of 10-fold rasters
  bool pass = false;
};

/// Runs the full argument: greedy selection, per-member containment evidence,
/// exact raster cover check, and the measure chain. Each chain step is
/// measure-theoretically forced for a valid family on a grid fine enough to
/// resolve the rectangles (see generate_random_family), so a failed
/// certificate indicates an implementation bug, not an unlucky input.
CoveringCertificate covering_certificate(const AdmissibleFamily& family,
                                         std::uint64_t seed,
                                         std::uint64_t config_hash);

/// Raster resolvability margin of one rectangle on one grid: the chain's
/// second step is forced per member when
///   (min(10L, diam) + sqrt(2) h) * (10W + sqrt(2) h) <= 100 L W,
/// since cells whose centers lie in R' fit inside R' inflated by half a cell
/// diagonal and clipped to the grid box. Returns bound minus left side
/// (nonnegative means forced).
double resolvability_margin(const OrientedRect& rect, const GridSpec& grid);

struct FamilyGenConfig {
  int grid_n = 256;
  int max_members = 64;
  double delta = 0.5;
  double theta = 0.005;
  std::uint64_t seed = 1;
};

/// Seeded random admissible family on the unit square: a constant field with
/// uniform random direction, members with L in [0.25, 0.5], W/L in
/// [theta, 1.9 theta), centers in [0.3, 0.7]^2 and axes within 0.8 * W/(2L)
/// of the field direction (so V(R) is the full raster of R), f iid uniform
/// on [0,1], and lambda = 0.98 * (smallest member mean). Members failing
/// delta-admissibility (with a 2% headroom) or the resolvability margin are
/// redrawn.
AdmissibleFamily generate_random_family(const FamilyGenConfig& config);

}  // namespace dirmax
