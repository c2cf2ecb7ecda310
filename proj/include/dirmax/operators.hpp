#pragma once

#include <Eigen/Dense>
#include <limits>
#include <utility>
#include <vector>

#include "dirmax/angular.hpp"
#include "dirmax/field.hpp"
#include "dirmax/geometry.hpp"
#include "dirmax/grid_function.hpp"

namespace dirmax {

/// Directional average (1/eps) * integral_{-eps}^{eps} f(x + t v(x)) dt,
/// composite trapezoid on N_t + 1 nodes, f zero-extended outside its grid.
/// The 1/eps normalization makes f == 1 average to 2.
double average_A(const FieldSpec& field, const GridFunction& f,
                 const Eigen::Vector2d& x, double eps, int N_t);

/// M_v f = sup over eps in eps_set of |A_eps f|, times the indicator of the
/// field's domain box. Cell-parallel; results are worker-count independent.
GridFunction maximal_Mv(const FieldSpec& field, const GridFunction& f,
                        const GridSpec& grid,
                        const std::vector<double>& eps_set, int N_t,
                        int workers = 1);

/// Dyadic scales eps_ref * 2^{-k}, k = 0..K.
std::vector<double> dyadic_eps_set(double eps_ref, int K);

/// Enumerated finite candidate family for the rectangular maximal operators.
/// Widths follow the rule: ThetaClass uses {theta*L, 1.5*theta*L} (so
/// theta <= W/L < 2*theta); WClass uses {w, 1.5*w} (so w <= W < 2*w).
enum class WidthRule { ThetaClass, WClass };

struct FamilyParams {
  WidthRule rule = WidthRule::ThetaClass;
  int center_stride = 16;  // candidate centers every stride-th cell center
  int n_alpha = 4;         // orientations k*pi/n_alpha
  std::vector<double> lengths;
  double theta = 0.01;  // ThetaClass eccentricity band
  double w = 0.01;      // WClass width band
  double delta = 0.5;   // population density threshold
  double max_L = std::numeric_limits<double>::infinity();  // WClass cap 1/(100B)
  double max_W = std::numeric_limits<double>::infinity();  // WClass cap B/100
};

struct Candidate {
  OrientedRect rect;
  RasterMask R_cells;  // raster of rect
  RasterMask V;        // population mask
  bool delta_admissible = false;  // |V| >= delta * |R| (raster vs exact area)
};

struct CandidateFamily {
  FamilyParams params;
  GridSpec grid;
  std::vector<Candidate> members;
};

/// Enumerates candidates over the stride sub-grid of centers, the n_alpha
/// orientations, the length set and the rule's two widths; candidates not
/// fitting the grid box or exceeding the caps are skipped.
CandidateFamily enumerate_family(const FieldSpec& field, const GridSpec& grid,
                                 const FamilyParams& params);

struct MaximalResult {
  GridFunction M;
  int admissible_count = 0;  // zero function (with caller warning) when 0
};

/// Lacey-Li style operator: sup over delta-admissible members of
/// chi_R(x) * (raster mean of |f| over R). Family must be WClass and satisfy
/// the caps W < max_W, L < max_L.
MaximalResult laceyli_maximal(const CandidateFamily& family,
                              const GridFunction& f);

/// Population-averaged operator: sup over delta-admissible members of
/// chi_{V(R)}(x) * (raster mean of |f| over V(R)). Family must be ThetaClass
/// with theta < 1/100.
MaximalResult tilde_maximal(const CandidateFamily& family,
                            const GridFunction& f);

/// max over lambda of lambda * |{Mf > lambda}| / ||f||_1 (raster measure).
/// Requires ||f||_1 > 0.
double weak_type_ratio(const GridFunction& Mf, const GridFunction& f,
                       const Eigen::VectorXd& lambda_grid);

/// Log-spaced lambdas bracketing the positive range of Mf (empty when Mf <= 0).
Eigen::VectorXd default_lambda_grid(const GridFunction& Mf, int n = 64);

/// Sharp dyadic frequency split on the n x n lattice (n a power of two).
/// Signed modes k in (-n/2, n/2]; the DC block holds k = 0 and band T holds
/// T^2 <= |k|^2 < 4T^2 for dyadic T = 1 .. n/2. Exact lattice partition.
struct BandDecomposition {
  GridFunction dc;
  std::vector<std::pair<int, GridFunction>> bands;  // (T, f_T)
};

BandDecomposition lp_decompose(const GridFunction& f);

/// chi_mask convolved with the band-limited bump psi_{1/T}: multiplies the
/// mask's spectrum by exp(1 - 1/(1 - rho^2)) at rho = |k|/T (zero for
/// rho >= 1, one at rho = 0). Output spectrum lives in (mask spectrum)
/// intersected with |k| < T. Requires T >= 1 and a power-of-two grid.
GridFunction mollified_cutoff(const RasterMask& mask, double T);

/// Measurement record of the single-scale inequality's two sides; asserts
/// nothing (the continuum statement hides implicit constants).
struct SingleScaleRecord {
  bool skipped = false;  // degenerate rectangle
  double Tdelta = 0;
  double lhs = 0;       // L2 norm of A_eps f_T over the rectangle's raster
  double factor = 0;    // bound_factor(regime, T*delta, C)
  double rhs_core = 0;  // L2 norm of f_T * (chi_{R'} conv psi_{1/T})
  double ratio = 0;     // lhs / (factor * rhs_core), 0 when rhs vanishes
};

SingleScaleRecord single_scale_audit(const FieldSpec& field,
                                     const GridFunction& f_T,
                                     const BourgainRect& rect, double T,
                                     const DecayShape& regime, double C,
                                     int N_t);

/// Weighted square-sum scaffold: lhs = sum_j weight(j) sum_s ||f_{2^{s+j}}||^2
/// over j = 1..J and all s >= 0 with 2^{s+j} <= n/2; rhs = (sum_j weight(j))
/// * ||f||^2. Each inner sum collects each band at most once, so lhs <= rhs
/// is forced by Plancherel. Weights: LogPoly j^{-p} (p <= 1 is flagged
/// divergent: no uniform constant exists), ExpLog exp(-sigma (j log 2)^c1).
struct ScaleSumRecord {
  bool divergent = false;
  double lhs = 0;
  double weight_sum = 0;
  double f_norm2 = 0;  // ||f||_2^2
  double rhs = 0;
  bool holds = false;
};

ScaleSumRecord scale_sum_audit(const GridFunction& f, const DecayShape& weights,
                               int J);

}  // namespace dirmax
