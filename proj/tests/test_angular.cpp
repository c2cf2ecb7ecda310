#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <stdexcept>

#include "dirmax/angular.hpp"
#include "dirmax/field.hpp"

using namespace dirmax;
using Eigen::Vector2d;

namespace {

const Box kSym{{-1, -1}, {1, 1}};

FieldSpec rotation_field() { return FieldSpec::rotation(kSym); }
FieldSpec shear2_field() { return FieldSpec::shear_monomial(2, kSym); }

// w = |t| profile: rotation field at |x| = 1.
AngularProfile abs_t_profile(double eps, int N_t, bool cells) {
  const FieldSpec f = rotation_field();
  const Vector2d x(0.6, 0.8);
  return cells ? angular_profile_cells(f, x, eps, N_t)
               : angular_profile(f, x, eps, N_t);
}

// Hand-built profile with constant w == 1 on midpoint samples.
AngularProfile constant_w_profile(double eps = 1, int N_t = 64) {
  AngularProfile p;
  p.field_label = "manual";
  p.x = {0, 0};
  p.v_at_x = {1, 0};
  p.eps = eps;
  p.layout = ProfileLayout::CellCenters;
  p.t_samples.resize(N_t);
  p.w_values.resize(N_t);
  const double step = 2 * eps / N_t;
  for (int i = 0; i < N_t; ++i) {
    p.t_samples[i] = (i + 0.5 - N_t / 2.0) * step;
    p.w_values[i] = 1.0;
  }
  p.sup_w = 1.0;
  p.argmax_t = p.t_samples[0];
  return p;
}

constexpr double kGamma25 = 1.32934038817913702;   // Gamma(2.5)
constexpr double kGamma29 = 1.82735508062403610;   // Gamma(2.9)
constexpr double k8OverE2 = 1.08268226589290154;   // 8 e^{-2}

}  // namespace

TEST_CASE("angular_variation closed forms at single points") {
  const FieldSpec rot = rotation_field();
  const Vector2d xr(0.6, 0.8);
  const double n2 = xr.squaredNorm();
  for (double t : {-0.4, -0.1, 0.05, 0.3})
    CHECK(angular_variation(rot, xr, t) ==
          doctest::Approx(std::abs(t) * n2).epsilon(1e-12));

  const FieldSpec sh = shear2_field();
  const Vector2d xs(0.3, -0.2);
  auto g = [](double s) { return s * s; };
  for (double t : {-0.2, 0.1, 0.25})
    CHECK(angular_variation(sh, xs, t) ==
          doctest::Approx(std::abs(g(xs.x() + t) - g(xs.x()))).epsilon(1e-12));

  const FieldSpec fl = FieldSpec::shear_flat(0.5, kSym);
  const Vector2d xf(0.4, 0.1);
  auto gf = [](double s) {
    return s == 0 ? 0.0
                  : std::copysign(std::exp(-1 / std::sqrt(std::abs(s))), s);
  };
  for (double t : {-0.3, 0.2})
    CHECK(angular_variation(fl, xf, t) ==
          doctest::Approx(std::abs(gf(xf.x() + t) - gf(xf.x())))
              .epsilon(1e-12));
}

TEST_CASE("node profile: structural zero at t = 0, sup at the endpoints") {
  const AngularProfile p = abs_t_profile(0.5, 512, false);
  REQUIRE(p.t_samples.size() == 513);
  CHECK(p.layout == ProfileLayout::Nodes);
  CHECK(p.t_samples[256] == 0.0);
  CHECK(p.w_values[256] == 0.0);  // det[v(x), v(x)] cancels exactly
  CHECK(p.sup_w == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(std::abs(p.argmax_t) == 0.5);
  CHECK(p.sup_w == std::max(p.w_values[0], p.w_values[512]));
  CHECK(p.n_cells() == 512);
  CHECK(p.count_weight() == doctest::Approx(1.0 / 512).epsilon(1e-15));
  CHECK(p.quad_weight(0) == p.count_weight() / 2);
  CHECK(p.quad_weight(5) == p.count_weight());
}

TEST_CASE("midpoint profile never samples t = 0") {
  const AngularProfile p = abs_t_profile(0.5, 512, true);
  REQUIRE(p.t_samples.size() == 512);
  CHECK(p.layout == ProfileLayout::CellCenters);
  for (int i = 0; i < 512; ++i) {
    CHECK(p.t_samples[i] != 0.0);
    CHECK(p.w_values[i] > 0.0);
  }
  CHECK_FALSE(p.degenerate());
}

TEST_CASE("constant field profile is degenerate") {
  const FieldSpec c = FieldSpec::constant({1, 0}, kSym);
  const AngularProfile p = angular_profile(c, {0.2, 0.1}, 0.25, 64);
  CHECK(p.sup_w == 0.0);
  CHECK(p.degenerate());
  CHECK(sublevel_measure(p, 0.5) == 0.0);
}

TEST_CASE("sublevel oracles: w = |t| and w = t^2 on midpoint samples") {
  // w = |t|, eps = 1, tau = 1/4: the analytic 2*tau*eps = 0.5, exact on the
  // midpoint grid (128 of 512 cells, weight 2/512).
  const AngularProfile p1 = abs_t_profile(1.0, 512, true);
  CHECK(sublevel_measure(p1, 0.25) == 0.5);

  // w = t^2, eps = 1, tau = 1/4: analytic 2*sqrt(tau)*eps = 1, exact count.
  const AngularProfile p2 =
      angular_profile_cells(shear2_field(), {0, 0.3}, 1.0, 512);
  for (int i = 0; i < 512; ++i)
    CHECK(p2.w_values[i] ==
          doctest::Approx(p2.t_samples[i] * p2.t_samples[i]).epsilon(1e-12));
  CHECK(sublevel_measure(p2, 0.25) == 1.0);

  // Constant positive w: nothing lies strictly below tau * sup for tau < 1.
  const AngularProfile pc = constant_w_profile();
  CHECK(sublevel_measure(pc, 0.999) == 0.0);
  CHECK(sublevel_measure(pc, 0.01) == 0.0);
}

TEST_CASE("sublevel curve: monotone, bounded by 2 eps, strict threshold") {
  const AngularProfile p = abs_t_profile(0.5, 512, true);
  const SublevelCurve curve = SublevelCurve::from_profile(p);
  const Eigen::VectorXd taus = default_tau_grid(64);
  double prev = 0;
  for (int k = 0; k < taus.size(); ++k) {
    const double m = curve.measure(taus[k]);
    CHECK(m >= prev);
    CHECK(m <= 2 * p.eps);
    prev = m;
  }
  CHECK_THROWS_AS(curve.measure(0.0), std::invalid_argument);
  CHECK_THROWS_AS(curve.measure(1.0), std::invalid_argument);
}

TEST_CASE("tau grids") {
  const Eigen::VectorXd d = default_tau_grid(64);
  REQUIRE(d.size() == 64);
  CHECK(d[0] == doctest::Approx(1e-9).epsilon(1e-12));
  CHECK(d[63] <= 1 - 1e-6 + 1e-12);
  for (int i = 1; i < 64; ++i) CHECK(d[i] > d[i - 1]);

  const Eigen::VectorXd a = aligned_tau_grid(512, 64);
  REQUIRE(a.size() == 64);
  CHECK(a[0] == 1.0 / 512);
  CHECK(a[63] == 127.0 / 512);
  for (int i = 1; i < 64; ++i) CHECK(a[i] > a[i - 1]);
  CHECK_THROWS_AS(aligned_tau_grid(64, 64), std::invalid_argument);
}

TEST_CASE("fit_decay_constant: power(1) on w = |t| is exactly 2") {
  // Endpoint nodes + aligned tau grid: counts and measures are exact dyadic
  // arithmetic, so the ratio is bit-exact.
  const AngularProfile p = abs_t_profile(0.5, 512, false);
  const DecayReport rep =
      fit_decay_constant({p}, DecayShape::power(1), aligned_tau_grid(512, 64));
  CHECK(rep.C_min == 2.0);
  REQUIRE(!rep.witnesses.empty());
  CHECK(rep.witnesses.size() <= 8);
  for (const DecayWitness& w : rep.witnesses) {
    CHECK(w.ratio == 2.0);
    CHECK(w.eps == 0.5);
  }
}

TEST_CASE("fit_decay_constant: logpoly(2) near the analytic 8 e^{-2}") {
  const AngularProfile p = abs_t_profile(0.5, 512, true);
  const DecayReport rep = fit_decay_constant({p}, DecayShape::logpoly(2),
                                             default_tau_grid(256));
  CHECK(rep.C_min > 0.97 * k8OverE2);
  CHECK(rep.C_min < 1.03 * k8OverE2);

  const double exact = exact_logpoly_constant(p, 2);
  CHECK(exact >= rep.C_min);  // grid max cannot exceed the all-tau sup
  CHECK(exact == doctest::Approx(k8OverE2).epsilon(0.02));
}

TEST_CASE("fit_decay_constant: degenerate input rejected with its index") {
  const FieldSpec c = FieldSpec::constant({1, 0}, kSym);
  const AngularProfile good = abs_t_profile(0.5, 512, false);
  const AngularProfile bad = angular_profile(c, {0.2, 0.1}, 0.25, 64);
  try {
    fit_decay_constant({good, bad}, DecayShape::power(1),
                       default_tau_grid(64));
    FAIL("expected invalid_argument");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("1") != std::string::npos);
  }
}

TEST_CASE("fit_decay_constant: constant positive w gives C_min = 0") {
  const AngularProfile pc = constant_w_profile();
  for (const DecayShape& s :
       {DecayShape::power(1), DecayShape::explog(1, 1), DecayShape::logpoly(2),
        DecayShape::iterlog(2, 2)}) {
    const DecayReport rep = fit_decay_constant({pc}, s, default_tau_grid(64));
    CHECK(rep.C_min == 0.0);
  }
}

TEST_CASE("exact_logpoly_constant: a zero sample forces +infinity") {
  const AngularProfile nodes = abs_t_profile(0.5, 512, false);  // w(0) = 0
  CHECK(std::isinf(exact_logpoly_constant(nodes, 2)));
  const AngularProfile cells = abs_t_profile(0.5, 512, true);
  CHECK(std::isfinite(exact_logpoly_constant(cells, 2)));
}

TEST_CASE("integral_condition oracles on w = |t|") {
  const AngularProfile p = abs_t_profile(1.0, 1 << 14, true);

  const IntegralValue lp1 = integral_condition(p, DecayShape::logpoly(1));
  REQUIRE_FALSE(lp1.diverged);
  CHECK(lp1.value == doctest::Approx(1.0).epsilon(1e-3));

  const IntegralValue pw = integral_condition(p, DecayShape::power(0.5));
  REQUIRE_FALSE(pw.diverged);
  CHECK(pw.value == doctest::Approx(2.0).epsilon(2e-2));

  // A zero sample (node layout includes t = 0) flags divergence.
  const AngularProfile nodes = abs_t_profile(1.0, 512, false);
  CHECK(integral_condition(nodes, DecayShape::logpoly(1)).diverged);

  // Constant positive w: log 1 = 0 everywhere.
  const IntegralValue cz =
      integral_condition(constant_w_profile(), DecayShape::logpoly(3));
  CHECK_FALSE(cz.diverged);
  CHECK(cz.value == 0.0);

  // Degenerate profile is a first-class error.
  const FieldSpec c = FieldSpec::constant({1, 0}, kSym);
  const AngularProfile dg = angular_profile(c, {0.2, 0.1}, 0.25, 64);
  CHECK_THROWS_AS(integral_condition(dg, DecayShape::logpoly(1)),
                  std::invalid_argument);
  // Iterated-log shapes have no integral form.
  CHECK_THROWS_AS(integral_condition(p, DecayShape::iterlog(2, 2)),
                  std::invalid_argument);
}

TEST_CASE("markov_transfer: exact on midpoint samples") {
  const AngularProfile p = abs_t_profile(1.0, 4096, true);
  const DecayShape shape = DecayShape::logpoly(1);
  const IntegralValue A = integral_condition(p, shape);
  REQUIRE_FALSE(A.diverged);

  const MarkovRecord rec =
      markov_transfer(p, shape, A.value, default_tau_grid(64));
  CHECK(rec.all_hold);
  CHECK(rec.A == A.value);
  for (const TauCheck& c : rec.checks) {
    CHECK(c.holds);
    CHECK(c.measure <= c.bound);
  }

  // Spot value: measure at tau = 1/e is about 2/e against bound 2*A.
  const double m = sublevel_measure(p, std::exp(-1.0));
  CHECK(m == doctest::Approx(2.0 / std::exp(1.0)).epsilon(0.01));
  CHECK(m <= 2 * p.eps * A.value * shape.envelope(std::exp(-1.0)));

  CHECK_THROWS_AS(markov_transfer(p, shape,
                                  std::numeric_limits<double>::infinity(),
                                  default_tau_grid(64)),
                  std::invalid_argument);
}

TEST_CASE("layer_cake_reverse: Gamma-value integrals against the bound") {
  const AngularProfile p = abs_t_profile(1.0, 1 << 14, true);
  const double C = exact_logpoly_constant(p, 2);

  const LayerCakeRecord r15 = layer_cake_reverse(p, 2, 1.5, C);
  CHECK_FALSE(r15.diverged);
  CHECK(r15.holds);
  CHECK(r15.integral == doctest::Approx(kGamma25).epsilon(0.01));
  CHECK(r15.bound ==
        doctest::Approx(std::pow(C, 0.75) * 4.0).epsilon(1e-12));

  const LayerCakeRecord r19 = layer_cake_reverse(p, 2, 1.9, C);
  CHECK(r19.holds);
  CHECK(r19.integral == doctest::Approx(kGamma29).epsilon(0.02));
  CHECK(r19.bound ==
        doctest::Approx(std::pow(C, 0.95) * 20.0).epsilon(1e-12));

  // Constant positive w: integral 0 <= any bound.
  const LayerCakeRecord rc = layer_cake_reverse(constant_w_profile(), 2, 1.5, 1);
  CHECK(rc.holds);
  CHECK(rc.integral == 0.0);

  CHECK_THROWS_AS(layer_cake_reverse(p, 2, 2.0, C), std::invalid_argument);
  CHECK_THROWS_AS(layer_cake_reverse(p, 2, 0.9, C), std::invalid_argument);
}

TEST_CASE("envelope ordering below a bisection threshold") {
  // power(1) vs explog(1, 0.5) vs logpoly(2): in L = log 1/tau the orderings
  // read e^{-L} <= e^{-sqrt(L)} (L >= 1) and sqrt(L) >= 2 log L (L >= L*).
  auto g = [](double L) { return std::sqrt(L) - 2 * std::log(L); };
  double lo = 16, hi = 1000;
  REQUIRE(g(lo) < 0);
  REQUIRE(g(hi) > 0);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) < 0 ? lo : hi) = mid;
  }
  const double Lstar = hi;
  const DecayShape pw = DecayShape::power(1);
  const DecayShape el = DecayShape::explog(1, 0.5);
  const DecayShape lp = DecayShape::logpoly(2);
  for (double L : {Lstar + 1, 2 * Lstar, 5 * Lstar}) {
    const double tau = std::exp(-L);
    CHECK(pw.envelope(tau) <= el.envelope(tau));
    CHECK(el.envelope(tau) <= lp.envelope(tau));
  }
}

TEST_CASE("iterlog envelope is vacuous outside the nested-log domain") {
  const DecayShape it = DecayShape::iterlog(2, 2);
  // log log 1/tau <= 0 when log 1/tau <= 1, i.e. tau >= 1/e.
  CHECK(std::isinf(it.envelope(0.5)));
  CHECK(std::isfinite(it.envelope(1e-3)));
  CHECK(it.envelope(1e-3) > 0);
}

TEST_CASE("doubling_check examples") {
  // w = |t|: sup doubles; C = 2, p = 2 gives tau0 = e^{-2}.
  const DoublingRecord r1 =
      doubling_check(rotation_field(), {0.6, 0.8}, 0.25, 2, 2, 512);
  CHECK(r1.tau0 == doctest::Approx(std::exp(-2.0)).epsilon(1e-12));
  CHECK(r1.sup_2eps / r1.sup_eps == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(r1.pass);

  // Constant field: both sups vanish, conventional pass.
  const DoublingRecord r2 = doubling_check(FieldSpec::constant({1, 0}, kSym),
                                           {0.2, 0.1}, 0.25, 1, 2, 64);
  CHECK(r2.sup_eps == 0.0);
  CHECK(r2.sup_2eps == 0.0);
  CHECK(r2.pass);

  // w = t^2: ratio 4 against 1/tau0 about 19 for C = 32 e^{-2}.
  const double C = 4.33072906357160614;  // 32 e^{-2}
  const DoublingRecord r3 =
      doubling_check(shear2_field(), {0, 0.3}, 0.25, C, 2, 512);
  CHECK(r3.sup_2eps / r3.sup_eps == doctest::Approx(4.0).epsilon(1e-9));
  CHECK(r3.tau0 == doctest::Approx(0.0527057).epsilon(1e-4));
  CHECK(r3.pass);
}

TEST_CASE("kernel_split_audit: closed form and regime guards") {
  // w = |t|, eps = 1, a = 10: lhs = 2 int_0^1 (1+10t)^{-2} dt = 2/11.
  const AngularProfile p = abs_t_profile(1.0, 4096, false);
  const double v0 = p.v_at_x.norm();
  const double T = 10.0 * v0 / p.eps;
  Eigen::VectorXd taus(3);
  taus << 0.05, 0.1, 0.5;
  const KernelSplitRecord rec = kernel_split_audit(p, T, v0, taus);
  CHECK(rec.a == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(rec.Tdelta == doctest::Approx(10.0 * p.sup_w).epsilon(1e-9));
  CHECK(rec.lhs == doctest::Approx(2.0 / 11.0).epsilon(1e-6));
  CHECK(rec.all_hold);
  REQUIRE(rec.rows.size() == 3);
  const KernelSplitRow& row = rec.rows[1];  // tau = 0.1
  CHECK(row.term1 == doctest::Approx(0.2).epsilon(5e-3));
  CHECK(row.term2 == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(row.holds);

  // Constant w = 1, a = 100: lhs = 2 (1+100)^{-2}, empty sublevel sets.
  const AngularProfile pc = constant_w_profile(1.0, 64);
  const KernelSplitRecord rc = kernel_split_audit(pc, 100.0, 1.0, taus);
  CHECK(rc.lhs == doctest::Approx(2.0 / (101.0 * 101.0)).epsilon(1e-12));
  for (const KernelSplitRow& r : rc.rows) CHECK(r.term1 == 0.0);

  // Regime T*delta > 1 is required.
  CHECK_THROWS_AS(kernel_split_audit(p, 0.5 * v0 / p.eps, v0, taus),
                  std::domain_error);
  const FieldSpec c = FieldSpec::constant({1, 0}, kSym);
  const AngularProfile dg = angular_profile(c, {0.2, 0.1}, 0.25, 64);
  CHECK_THROWS_AS(kernel_split_audit(dg, 100, 1, taus), std::domain_error);
}

TEST_CASE("balance_tau: frozen oracles and residuals") {
  // logpoly(2), Tdelta = 10: bisection oracle for 10 tau = log 1/tau.
  const double root = balance_tau(DecayShape::logpoly(2), 10.0);
  CHECK(std::abs(root - 0.174552800274069938) < 1e-10);
  CHECK(balance_residual(DecayShape::logpoly(2), 10.0, root) < 1e-12);

  // explog(1, 1): closed form tau = Tdelta^{-2/3}.
  for (double Td : {std::exp(1.0), std::exp(2.0), std::exp(3.0)}) {
    const double t = balance_tau(DecayShape::explog(1, 1), Td);
    CHECK(std::abs(t - std::pow(Td, -2.0 / 3.0)) < 1e-10);
    CHECK(balance_residual(DecayShape::explog(1, 1), Td, t) < 1e-12);
  }
  CHECK(std::abs(balance_tau(DecayShape::explog(1, 1), std::exp(3.0)) -
                 std::exp(-2.0)) < 1e-10);

  // The root is a genuine sign change of F(L) = 2 log Tdelta - 2L - p log L.
  {
    const double L = std::log(1 / root);
    auto F = [](double LL) {
      return 2 * std::log(10.0) - 2 * LL - 2 * std::log(LL);
    };
    CHECK(F(L - 0.1) > 0);
    CHECK(F(L + 0.1) < 0);
  }

  CHECK_THROWS_AS(balance_tau(DecayShape::logpoly(2), 1.0), std::domain_error);
  CHECK_THROWS_AS(balance_tau(DecayShape::power(1), 10.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(balance_tau(DecayShape::iterlog(2, 2), 10.0),
                  std::invalid_argument);
}

TEST_CASE("bound_factor") {
  CHECK(bound_factor(DecayShape::logpoly(2), std::exp(1.0), 1.0) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(bound_factor(DecayShape::logpoly(2), std::exp(2.0), 1.0) ==
        doctest::Approx(0.25).epsilon(1e-12));
  CHECK(bound_factor(DecayShape::explog(1, 0.5), std::exp(4.0)) ==
        doctest::Approx(std::exp(-2.0)).epsilon(1e-12));
}

TEST_CASE("profile construction is deterministic") {
  const AngularProfile a = abs_t_profile(0.25, 256, true);
  const AngularProfile b = abs_t_profile(0.25, 256, true);
  CHECK((a.w_values == b.w_values));
  CHECK(a.sup_w == b.sup_w);
  CHECK(a.argmax_t == b.argmax_t);
}
