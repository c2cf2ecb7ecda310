#include "dirmax/angular.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dirmax {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double cross2(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return a.x() * b.y() - a.y() * b.x();
}

void check_profile_args(double eps, int N_t) {
  if (!(eps > 0)) throw std::invalid_argument("eps must be positive");
  if (N_t < 64 || N_t % 2 != 0)
    throw std::invalid_argument("N_t must be even and >= 64");
}

AngularProfile build_profile(const FieldSpec& field, const Eigen::Vector2d& x,
                             double eps, const Eigen::VectorXd& t,
                             ProfileLayout layout) {
  AngularProfile pr;
  pr.field_label = field.label;
  pr.x = x;
  pr.v_at_x = evaluate(field, x);
  pr.eps = eps;
  pr.layout = layout;
  pr.t_samples = t;
  pr.w_values.resize(t.size());
  for (int i = 0; i < t.size(); ++i)
    pr.w_values[i] =
        std::abs(cross2(evaluate(field, x + t[i] * pr.v_at_x), pr.v_at_x));
  pr.sup_w = 0;
  pr.argmax_t = t[0];
  for (int i = 0; i < t.size(); ++i)
    if (pr.w_values[i] > pr.sup_w) {
      pr.sup_w = pr.w_values[i];
      pr.argmax_t = t[i];
    }
  return pr;
}

}  // namespace

double angular_variation(const FieldSpec& field, const Eigen::Vector2d& x,
                         double t) {
  Eigen::Vector2d v = evaluate(field, x);
  return std::abs(cross2(evaluate(field, x + t * v), v));
}

AngularProfile angular_profile(const FieldSpec& field, const Eigen::Vector2d& x,
                               double eps, int N_t) {
  check_profile_args(eps, N_t);
  double step = 2 * eps / N_t;
  Eigen::VectorXd t(N_t + 1);
  // Integer multiples of the step keep t = 0 an exact sample.
  for (int i = 0; i <= N_t; ++i) t[i] = (i - N_t / 2) * step;
  return build_profile(field, x, eps, t, ProfileLayout::Nodes);
}

AngularProfile angular_profile_cells(const FieldSpec& field,
                                     const Eigen::Vector2d& x, double eps,
                                     int N_t) {
  check_profile_args(eps, N_t);
  double step = 2 * eps / N_t;
  Eigen::VectorXd t(N_t);
  // Half-integer multiples of the step: symmetric, never hits t = 0.
  for (int i = 0; i < N_t; ++i) t[i] = (i + 0.5 - N_t / 2) * step;
  return build_profile(field, x, eps, t, ProfileLayout::CellCenters);
}

SublevelCurve SublevelCurve::from_profile(const AngularProfile& profile) {
  SublevelCurve c;
  c.eps = profile.eps;
  c.sup_w = profile.sup_w;
  c.step = profile.count_weight();
  c.sorted_w = profile.w_values;
  std::sort(c.sorted_w.begin(), c.sorted_w.end());
  return c;
}

double SublevelCurve::measure(double tau) const {
  if (!(tau > 0 && tau < 1)) throw std::invalid_argument("tau must be in (0,1)");
  if (sup_w == 0) return 0;  // w < tau * 0 is impossible
  double threshold = tau * sup_w;
  auto it = std::lower_bound(sorted_w.begin(), sorted_w.end(), threshold);
  return step * static_cast<double>(it - sorted_w.begin());
}

double sublevel_measure(const AngularProfile& profile, double tau) {
  return SublevelCurve::from_profile(profile).measure(tau);
}

DecayShape DecayShape::power(double expo) {
  if (!(expo > 0)) throw std::invalid_argument("power exponent must be > 0");
  DecayShape s;
  s.kind = DecayKind::Power;
  s.expo = expo;
  return s;
}

DecayShape DecayShape::explog(double sigma, double c1) {
  if (!(sigma > 0) || !(c1 > 0))
    throw std::invalid_argument("explog needs sigma > 0 and c1 > 0");
  DecayShape s;
  s.kind = DecayKind::ExpLog;
  s.sigma = sigma;
  s.c1 = c1;
  return s;
}

DecayShape DecayShape::logpoly(double p) {
  if (!(p > 0)) throw std::invalid_argument("logpoly needs p > 0");
  DecayShape s;
  s.kind = DecayKind::LogPoly;
  s.p = p;
  return s;
}

DecayShape DecayShape::iterlog(double p, int depth) {
  if (!(p > 0) || depth < 2)
    throw std::invalid_argument("iterlog needs p > 0 and depth >= 2");
  DecayShape s;
  s.kind = DecayKind::IterLog;
  s.p = p;
  s.depth = depth;
  return s;
}

double DecayShape::envelope(double tau) const {
  if (!(tau > 0 && tau < 1)) throw std::invalid_argument("tau must be in (0,1)");
  double L = std::log(1 / tau);
  switch (kind) {
    case DecayKind::Power:
      return std::pow(tau, expo);
    case DecayKind::ExpLog:
      return std::exp(-sigma * std::pow(L, c1));
    case DecayKind::LogPoly:
      return std::pow(L, -p);
    case DecayKind::IterLog: {
      double prod = 1, level = L;
      for (int d = 2; d <= depth; ++d) {
        prod *= level;
        level = std::log(level);
        if (!(level > 0)) return kInf;  // vacuous outside the nested-log domain
      }
      return 1 / (prod * std::pow(level, p));
    }
  }
  throw std::logic_error("unreachable decay kind");
}

double DecayShape::integrand(double r) const {
  if (!(r > 0 && r <= 1))
    throw std::invalid_argument("integrand ratio must be in (0,1]");
  switch (kind) {
    case DecayKind::Power:
      return std::pow(r, -expo);
    case DecayKind::ExpLog:
      return std::exp(sigma * std::pow(-std::log(r), c1));
    case DecayKind::LogPoly:
      return std::pow(-std::log(r), p);
    case DecayKind::IterLog:
      throw std::invalid_argument("iterlog has no integral form");
  }
  throw std::logic_error("unreachable decay kind");
}

std::string DecayShape::label() const {
  auto fmt = [](double v) {
    std::string s = std::to_string(v);
    s.erase(s.find_last_not_of('0') + 1);
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
  };
  switch (kind) {
    case DecayKind::Power:
      return "power(" + fmt(expo) + ")";
    case DecayKind::ExpLog:
      return "explog(" + fmt(sigma) + "," + fmt(c1) + ")";
    case DecayKind::LogPoly:
      return "logpoly(" + fmt(p) + ")";
    case DecayKind::IterLog:
      return "iterlog(" + fmt(p) + ",depth=" + std::to_string(depth) + ")";
  }
  return "unknown";
}

Eigen::VectorXd default_tau_grid(int n) {
  if (n < 2) throw std::invalid_argument("tau grid needs >= 2 points");
  double lo = std::log(1e-9), hi = std::log(1 - 1e-6);
  Eigen::VectorXd g(n);
  for (int i = 0; i < n; ++i)
    g[i] = std::exp(lo + (hi - lo) * i / (n - 1));
  return g;
}

Eigen::VectorXd aligned_tau_grid(int n_cells, int count) {
  if (count < 1 || 2 * count - 1 >= n_cells)
    throw std::invalid_argument("aligned grid: need 2*count-1 < n_cells");
  Eigen::VectorXd g(count);
  for (int m = 0; m < count; ++m)
    g[m] = static_cast<double>(2 * m + 1) / n_cells;
  return g;
}

DecayReport fit_decay_constant(const std::vector<AngularProfile>& profiles,
                               const DecayShape& shape,
                               const Eigen::VectorXd& tau_grid) {
  if (profiles.empty()) throw std::invalid_argument("no profiles to fit");
  if (tau_grid.size() < 32)
    throw std::invalid_argument("tau grid needs >= 32 points");
  for (int i = 0; i < tau_grid.size(); ++i)
    if (!(tau_grid[i] > 0 && tau_grid[i] <= 1 - 1e-6 + 1e-12))
      throw std::invalid_argument("tau grid must lie in (0, 1 - 1e-6]");
  for (std::size_t k = 0; k < profiles.size(); ++k)
    if (profiles[k].degenerate())
      throw std::invalid_argument("degenerate profile at index " +
                                  std::to_string(k));

  DecayReport report;
  report.shape = shape;
  report.tau_grid = tau_grid;
  report.C_min = 0;
  for (const AngularProfile& pr : profiles) {
    SublevelCurve curve = SublevelCurve::from_profile(pr);
    for (int i = 0; i < tau_grid.size(); ++i) {
      double tau = tau_grid[i];
      double ratio = curve.measure(tau) / (shape.envelope(tau) * pr.eps);
      if (ratio > report.C_min) report.C_min = ratio;
    }
  }
  for (const AngularProfile& pr : profiles) {
    SublevelCurve curve = SublevelCurve::from_profile(pr);
    for (int i = 0; i < tau_grid.size(); ++i) {
      double tau = tau_grid[i];
      double ratio = curve.measure(tau) / (shape.envelope(tau) * pr.eps);
      if (ratio >= report.C_min * (1 - 1e-9) &&
          report.witnesses.size() < 8)
        report.witnesses.push_back({pr.field_label, pr.x, pr.eps, tau, ratio});
    }
  }
  return report;
}

double exact_logpoly_constant(const AngularProfile& profile, double p) {
  if (profile.degenerate()) throw std::invalid_argument("degenerate profile");
  if (!(p > 0)) throw std::invalid_argument("p must be > 0");
  // m(tau) = step * #{w_i < tau sup} is a right-continuous step function with
  // jumps at the distinct ratios r = w_i/sup < 1; on (r_k, r_{k+1}] the
  // product m(tau) (log 1/tau)^p is largest as tau -> r_k from above, where
  // m = step * #{w_i <= r_k sup}. A zero sample keeps m positive as tau -> 0
  // while the envelope vanishes, so no finite constant works.
  if ((profile.w_values.array() == 0).any())
    return std::numeric_limits<double>::infinity();
  Eigen::VectorXd sorted = profile.w_values;
  std::sort(sorted.begin(), sorted.end());
  double step = profile.count_weight();
  double best = 0;
  int n = static_cast<int>(sorted.size());
  for (int k = 0; k < n; ++k) {
    if (k + 1 < n && sorted[k + 1] == sorted[k]) continue;  // last tie only
    double r = sorted[k] / profile.sup_w;
    if (!(r > 0 && r < 1)) continue;
    double value = step * (k + 1) * std::pow(std::log(1 / r), p) / profile.eps;
    best = std::max(best, value);
  }
  return best;
}

IntegralValue integral_condition(const AngularProfile& profile,
                                 const DecayShape& shape) {
  if (profile.degenerate()) throw std::invalid_argument("degenerate profile");
  IntegralValue out;
  double sum = 0;
  for (int i = 0; i < profile.w_values.size(); ++i) {
    if (profile.w_values[i] == 0) {
      out.diverged = true;  // the integrand is +infinity there
      return out;
    }
    sum += profile.quad_weight(i) *
           shape.integrand(profile.w_values[i] / profile.sup_w);
  }
  out.value = sum / (2 * profile.eps);
  return out;
}

MarkovRecord markov_transfer(const AngularProfile& profile,
                             const DecayShape& shape, double A,
                             const Eigen::VectorXd& tau_grid) {
  if (!std::isfinite(A) || A < 0)
    throw std::invalid_argument("A must be a finite integral value");
  MarkovRecord rec;
  rec.A = A;
  rec.all_hold = true;
  SublevelCurve curve = SublevelCurve::from_profile(profile);
  for (int i = 0; i < tau_grid.size(); ++i) {
    TauCheck c;
    c.tau = tau_grid[i];
    c.measure = curve.measure(c.tau);
    c.bound = 2 * profile.eps * A * shape.envelope(c.tau);
    c.holds = c.measure <= c.bound;
    rec.all_hold = rec.all_hold && c.holds;
    rec.checks.push_back(c);
  }
  return rec;
}

LayerCakeRecord layer_cake_reverse(const AngularProfile& profile, double p,
                                   double q, double C) {
  if (!(q > 1 && q < p))
    throw std::invalid_argument("layer cake requires 1 < q < p");
  if (!(C >= 0)) throw std::invalid_argument("C must be >= 0");
  LayerCakeRecord rec;
  IntegralValue iv = integral_condition(profile, DecayShape::logpoly(q));
  rec.diverged = iv.diverged;
  rec.bound = std::pow(C, q / p) * p / (p - q);
  if (!iv.diverged) {
    rec.integral = iv.value;
    rec.holds = rec.integral <= rec.bound;
  }
  return rec;
}

DoublingRecord doubling_check(const FieldSpec& field, const Eigen::Vector2d& x,
                              double eps, double C, double p, int N_t) {
  if (!(C > 0) || !(p > 0))
    throw std::invalid_argument("doubling needs C > 0 and p > 0");
  DoublingRecord rec;
  rec.sup_eps = angular_profile(field, x, eps, N_t).sup_w;
  rec.sup_2eps = angular_profile(field, x, 2 * eps, N_t).sup_w;
  rec.tau0 = std::exp(-std::pow(2 * C, 1 / p));
  if (rec.sup_eps == 0)
    rec.pass = rec.sup_2eps == 0;  // ratio conventionally 1
  else
    rec.pass = rec.sup_2eps <= rec.sup_eps / rec.tau0;
  return rec;
}

KernelSplitRecord kernel_split_audit(const AngularProfile& profile, double T,
                                     double v0_norm,
                                     const Eigen::VectorXd& tau_grid) {
  if (!(v0_norm > 0)) throw std::invalid_argument("v0_norm must be positive");
  if (profile.degenerate())
    throw std::domain_error("kernel split needs sup_w > 0");
  KernelSplitRecord rec;
  rec.a = profile.eps * T / v0_norm;
  rec.Tdelta = rec.a * profile.sup_w;
  if (!(rec.Tdelta > 1))
    throw std::domain_error("kernel split regime requires T*delta > 1");
  double lhs = 0;
  for (int i = 0; i < profile.w_values.size(); ++i) {
    double d = 1 + rec.a * profile.w_values[i];
    lhs += profile.quad_weight(i) / (d * d);
  }
  rec.lhs = lhs;
  rec.all_hold = true;
  SublevelCurve curve = SublevelCurve::from_profile(profile);
  for (int i = 0; i < tau_grid.size(); ++i) {
    KernelSplitRow row;
    row.tau = tau_grid[i];
    row.lhs = lhs;
    row.term1 = curve.measure(row.tau);
    double s = rec.a * row.tau * profile.sup_w;
    row.term2 = profile.eps / (s * s);
    row.holds = row.lhs <= row.term1 + row.term2;
    rec.all_hold = rec.all_hold && row.holds;
    rec.rows.push_back(row);
  }
  return rec;
}

namespace {

// F(L) = 2 log Tdelta - 2L - {p log L  or  sigma L^c1}; strictly decreasing
// on (0, inf) with F(0+) > 0, so the balancing root is unique.
double balance_F(const DecayShape& regime, double logTd, double L) {
  double penalty = regime.kind == DecayKind::LogPoly
                       ? regime.p * std::log(L)
                       : regime.sigma * std::pow(L, regime.c1);
  return 2 * logTd - 2 * L - penalty;
}

}  // namespace

double balance_tau(const DecayShape& regime, double Tdelta) {
  if (regime.kind != DecayKind::LogPoly && regime.kind != DecayKind::ExpLog)
    throw std::invalid_argument("balance_tau handles logpoly/explog regimes");
  if (!(Tdelta > 1 + 1e-9))
    throw std::domain_error("balance regime requires Tdelta > 1");
  double logTd = std::log(Tdelta);
  double lo = 1e-300, hi = std::max(2.0, 2 * logTd);
  while (balance_F(regime, logTd, hi) > 0) {
    hi *= 2;
    if (hi > 1e300) throw std::domain_error("balance root out of range");
  }
  if (balance_F(regime, logTd, lo) < 0)
    throw std::domain_error("balance root out of range");
  for (int iter = 0; iter < 400 && hi - lo > 0; ++iter) {
    double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (balance_F(regime, logTd, mid) >= 0 ? lo : hi) = mid;
  }
  return std::exp(-0.5 * (lo + hi));
}

double balance_residual(const DecayShape& regime, double Tdelta, double tau) {
  double left = regime.envelope(tau);
  double right = 1 / ((tau * Tdelta) * (tau * Tdelta));
  return std::abs(left - right);
}

double bound_factor(const DecayShape& regime, double Tdelta, double C) {
  if (!(Tdelta > 1)) throw std::domain_error("bound_factor requires Tdelta > 1");
  switch (regime.kind) {
    case DecayKind::LogPoly: {
      double l = std::log(C * Tdelta);
      if (!(l > 0)) throw std::domain_error("log(C*Tdelta) must be positive");
      return std::pow(l, -regime.p);
    }
    case DecayKind::ExpLog:
      return std::exp(-regime.sigma * std::pow(std::log(Tdelta), regime.c1));
    default:
      throw std::invalid_argument("bound_factor handles logpoly/explog regimes");
  }
}

}  // namespace dirmax
