#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "dirmax/field.hpp"

namespace dirmax {

/// Sample layout of an angular profile on [-eps, eps]:
///   Nodes        N_t + 1 endpoint nodes (N_t even, t = 0 sampled), trapezoid
///                quadrature weights;
///   CellCenters  N_t midpoints of the N_t equal cells, uniform weights.
/// The midpoint layout never samples t = 0, where w vanishes identically and
/// the dual integrals diverge; it also makes counting weight equal quadrature
/// weight, so the Markov transfer below is an exact Chebyshev statement.
enum class ProfileLayout { Nodes, CellCenters };

/// Sampled angular variation w_x(t) = |det[v(x + t v(x)), v(x)]| on [-eps, eps].
struct AngularProfile {
  std::string field_label;
  Eigen::Vector2d x{0, 0};
  Eigen::Vector2d v_at_x{0, 0};
  double eps = 0;
  ProfileLayout layout = ProfileLayout::Nodes;
  Eigen::VectorXd t_samples;
  Eigen::VectorXd w_values;
  double sup_w = 0;
  double argmax_t = 0;

  /// Number of cells N_t (samples - 1 for Nodes, samples for CellCenters).
  int n_cells() const {
    int n = static_cast<int>(t_samples.size());
    return layout == ProfileLayout::Nodes ? n - 1 : n;
  }
  /// Weight of one sample in sublevel counting: 2 eps / N_t.
  double count_weight() const { return 2 * eps / n_cells(); }
  /// Quadrature weight of sample i (trapezoid resp. midpoint rule).
  double quad_weight(int i) const {
    double u = count_weight();
    if (layout == ProfileLayout::Nodes &&
        (i == 0 || i + 1 == static_cast<int>(t_samples.size())))
      return u / 2;
    return u;
  }
  bool degenerate() const { return sup_w == 0; }
};

/// w_x(t) for a single t. Throws std::domain_error if x + t v(x) leaves the
/// padded box.
double angular_variation(const FieldSpec& field, const Eigen::Vector2d& x,
                         double t);

/// Endpoint-node profile (N_t >= 64 even). The canonical layout.
AngularProfile angular_profile(const FieldSpec& field, const Eigen::Vector2d& x,
                               double eps, int N_t);

/// Midpoint profile (N_t >= 64 even); used by the integral-side audits.
AngularProfile angular_profile_cells(const FieldSpec& field,
                                     const Eigen::Vector2d& x, double eps,
                                     int N_t);

/// Distribution data of a profile: sorted w values plus the counting step.
struct SublevelCurve {
  double eps = 0;
  double sup_w = 0;
  double step = 0;  // count_weight of the source profile
  Eigen::VectorXd sorted_w;

  static SublevelCurve from_profile(const AngularProfile& profile);
  /// |{t : w(t) < tau * sup_w}| = step * #{i : w_i < tau*sup_w}. Zero for
  /// degenerate profiles: nothing is below tau * 0.
  double measure(double tau) const;
};

/// Convenience: SublevelCurve::from_profile(profile).measure(tau).
double sublevel_measure(const AngularProfile& profile, double tau);

/// The decay-shape hierarchy. One parameter set serves both directions:
/// envelope(tau) bounds sublevel measures, integrand(r) is the dual integral
/// kernel at r = w/sup_w, and Chebyshev links the two with the same exponents.
enum class DecayKind { Power, ExpLog, LogPoly, IterLog };

struct DecayShape {
  DecayKind kind = DecayKind::Power;
  double expo = 1;   // Power: tau^expo   /  integrand r^{-expo}
  double sigma = 1;  // ExpLog strength
  double c1 = 1;     // ExpLog log-power
  double p = 2;      // LogPoly / IterLog power (the dual integral's q)
  int depth = 2;     // IterLog nesting (2 = log log)

  static DecayShape power(double expo);
  static DecayShape explog(double sigma, double c1);
  static DecayShape logpoly(double p);
  static DecayShape iterlog(double p, int depth = 2);

  /// Decay envelope at tau in (0,1):
  ///   Power    tau^expo
  ///   ExpLog   exp(-sigma (log 1/tau)^c1)
  ///   LogPoly  (log 1/tau)^{-p}
  ///   IterLog  [l_1 l_2 ... l_{depth-1} l_depth^p]^{-1}, l_1 = log 1/tau,
  ///            l_{k+1} = log l_k
  /// Returns +infinity where an inner log is not positive (vacuous bound).
  double envelope(double tau) const;

  /// Dual integrand at ratio r = w/sup in (0, 1]:
  ///   Power    r^{-expo}
  ///   ExpLog   exp(sigma (-log r)^c1)
  ///   LogPoly  (-log r)^p
  /// IterLog has no integral form; throws std::invalid_argument.
  double integrand(double r) const;

  std::string label() const;
};

/// Log-spaced tau samples over [1e-9, 1 - 1e-6] (endpoints included).
Eigen::VectorXd default_tau_grid(int n = 64);

/// Odd-numerator grid tau = (2m+1)/n_cells, m = 0..count-1. On this grid the
/// counting measure of w(t) = c|t| sublevel sets is bit-exactly 2*tau*eps.
Eigen::VectorXd aligned_tau_grid(int n_cells, int count);

struct DecayWitness {
  std::string field_label;
  Eigen::Vector2d x{0, 0};
  double eps = 0;
  double tau = 0;
  double ratio = 0;
};

struct DecayReport {
  DecayShape shape;
  double C_min = 0;
  std::vector<DecayWitness> witnesses;
  Eigen::VectorXd tau_grid;
};

/// Smallest C with sublevel_measure(tau) <= C * envelope(tau) * eps over all
/// profiles and grid taus; equivalently the max of measure/(envelope * eps).
/// Degenerate profiles are rejected (std::invalid_argument naming the index).
DecayReport fit_decay_constant(const std::vector<AngularProfile>& profiles,
                               const DecayShape& shape,
                               const Eigen::VectorXd& tau_grid);

/// Smallest C with measure(tau) <= C (log 1/tau)^{-p} eps for EVERY tau in
/// (0,1), not only grid points: the supremum over the profile's own jump
/// thresholds. This is the constant under which layer_cake_reverse is a
/// theorem for the discrete profile.
double exact_logpoly_constant(const AngularProfile& profile, double p);

struct IntegralValue {
  bool diverged = false;
  double value = 0;
};

/// (1/2eps) * integral over [-eps,eps] of integrand(w(t)/sup_w), by the
/// layout's quadrature rule. Any w sample equal to 0 makes the integrand
/// infinite: flagged as diverged, never clipped. Degenerate profile:
/// std::invalid_argument.
IntegralValue integral_condition(const AngularProfile& profile,
                                 const DecayShape& shape);

struct TauCheck {
  double tau = 0;
  double measure = 0;
  double bound = 0;
  bool holds = false;
};

struct MarkovRecord {
  double A = 0;
  std::vector<TauCheck> checks;
  bool all_hold = false;
};

/// Chebyshev transfer: asserts measure(tau) <= 2 eps A envelope(tau) on the
/// grid, with A a finite integral_condition value for the same shape. Exact
/// on the sampled profile (zero tolerance) when layout weights match counting
/// weights, i.e. for CellCenters profiles.
MarkovRecord markov_transfer(const AngularProfile& profile,
                             const DecayShape& shape, double A,
                             const Eigen::VectorXd& tau_grid);

struct LayerCakeRecord {
  double integral = 0;
  double bound = 0;
  bool holds = false;
  bool diverged = false;
};

/// Reverse transfer: with (C, p) certifying the logpoly sublevel bound,
/// checks integral_condition(logpoly(q)) <= C^{q/p} * p/(p-q), the closed
/// form of integral_0^inf q L^{q-1} min(1, C L^{-p}) dL. Requires 1 < q < p.
LayerCakeRecord layer_cake_reverse(const AngularProfile& profile, double p,
                                   double q, double C);

struct DoublingRecord {
  double sup_2eps = 0;
  double sup_eps = 0;
  double tau0 = 0;
  bool pass = false;
};

/// Doubling audit: tau0 = exp(-(2C)^{1/p}) (so C (log 1/tau0)^{-p} = 1/2) and
/// pass iff sup over [-2eps, 2eps] <= sup over [-eps, eps] / tau0. Both sups
/// vanishing passes (ratio conventionally 1); only the inner vanishing fails.
DoublingRecord doubling_check(const FieldSpec& field, const Eigen::Vector2d& x,
                              double eps, double C, double p, int N_t);

struct KernelSplitRow {
  double tau = 0;
  double lhs = 0;
  double term1 = 0;
  double term2 = 0;
  bool holds = false;
};

struct KernelSplitRecord {
  double a = 0;       // eps * T / v0_norm
  double Tdelta = 0;  // a * sup_w = T * (eps sup_w / v0_norm)
  double lhs = 0;
  std::vector<KernelSplitRow> rows;
  bool all_hold = false;
};

/// Kernel split: lhs = quadrature of (1 + a w(t))^{-2} over [-eps, eps] with
/// a = eps T / v0_norm; per tau, term1 = sublevel_measure(tau) and
/// term2 = eps (a tau sup_w)^{-2}; records whether lhs <= term1 + term2.
/// Requires the regime T delta = a sup_w > 1 and sup_w > 0 (std::domain_error).
KernelSplitRecord kernel_split_audit(const AngularProfile& profile, double T,
                                     double v0_norm,
                                     const Eigen::VectorXd& tau_grid);

/// Root of the regime's balancing equation, via bisection in L = log 1/tau:
///   ExpLog   exp(-sigma L^c1) = (tau Tdelta)^{-2}
///   LogPoly  L^{-p} = (tau Tdelta)^{-2}
/// i.e. F(L) = 2 log Tdelta - 2L - {sigma L^c1 | p log L} = 0, strictly
/// decreasing with a unique root. Requires Tdelta > 1 + 1e-9; Power/IterLog
/// shapes are rejected (std::invalid_argument).
double balance_tau(const DecayShape& regime, double Tdelta);

/// |left - right| of the defining equation at tau, for residual audits.
double balance_residual(const DecayShape& regime, double Tdelta, double tau);

/// Single-scale decay factor of the regime at Tdelta > 1:
///   LogPoly  (log(C * Tdelta))^{-p}   (C from the caller's audit)
///   ExpLog   exp(-sigma (log Tdelta)^c1)
double bound_factor(const DecayShape& regime, double Tdelta, double C = 1);

}  // namespace dirmax
