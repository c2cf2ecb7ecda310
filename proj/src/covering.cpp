#include "dirmax/covering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

#include "dirmax/rng.hpp"

namespace dirmax {

namespace {

constexpr double kAngleSlack = 4e-15;

/// h^2 * sum of |f| over the mask's cells.
double mask_l1(const GridFunction& f, const RasterMask& mask) {
  double s = 0;
  for (int i = 0; i < mask.grid.ny; ++i)
    for (int j = 0; j < mask.grid.nx; ++j)
      if (mask.test(i, j)) s += std::abs(f.values(i, j));
  return s * mask.grid.h * mask.grid.h;
}

/// Distance from an interior point to the rectangle's boundary (negative if
/// outside).
double boundary_margin(const OrientedRect& rect, const Eigen::Vector2d& p) {
  const Eigen::Vector2d d = p - rect.center;
  const double a = std::abs(d.dot(rect.axis()));
  const double b = std::abs(d.dot(rect.perp()));
  return std::min(rect.L / 2 - a, rect.W / 2 - b);
}

}  // namespace

void validate_admissible(const AdmissibleFamily& family) {
  using std::to_string;
  if (!(family.delta > 0 && family.delta <= 1))
    throw std::invalid_argument("admissible family: delta must be in (0, 1]");
  if (!(family.theta > 0 && family.theta < 0.5))
    throw std::invalid_argument("admissible family: theta must be in (0, 0.5)");
  if (!(family.lambda > 0))
    throw std::invalid_argument("admissible family: lambda must be positive");
  if (!family.f.grid.same_as(family.grid))
    throw std::invalid_argument("admissible family: f lives on a different grid");
  for (std::size_t k = 0; k < family.members.size(); ++k) {
    const FamilyMember& m = family.members[k];
    const std::string who = "admissible family: member " + to_string(k);
    if (!m.V.grid.same_as(family.grid))
      throw std::invalid_argument(who + " has a V-mask on a different grid");
    const double ecc = m.rect.eccentricity();
    if (!(ecc >= family.theta && ecc < 2 * family.theta))
      throw std::invalid_argument(who + " is outside the eccentricity class");
    if (m.V.count() == 0)
      throw std::invalid_argument(who + " has an empty population");
    if (!m.V.is_subset_of(rasterize(m.rect, family.grid)))
      throw std::invalid_argument(who + " has population cells outside its rectangle");
    if (!(m.V.measure() >= family.delta * m.rect.area()))
      throw std::invalid_argument(who + " fails delta-admissibility");
    if (!(m.mean_over_V > family.lambda))
      throw std::invalid_argument(who + " has mean <= lambda over its population");
  }
}

GreedyResult greedy_disjoint(const AdmissibleFamily& family) {
  if (family.members.empty())
    throw std::invalid_argument("greedy selection: family is empty");
  validate_admissible(family);
  const int n = static_cast<int>(family.members.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const FamilyMember& ma = family.members[a];
    const FamilyMember& mb = family.members[b];
    if (ma.rect.L != mb.rect.L) return ma.rect.L > mb.rect.L;
    return ma.V.count() > mb.V.count();
  });

  GreedyResult out;
  out.blocker.assign(n, -1);
  for (int idx : order) {
    const RasterMask& V = family.members[idx].V;
    int hit = -1;
    for (int s : out.selected) {
      if (family.members[s].V.intersects(V)) {
        hit = s;
        break;
      }
    }
    if (hit < 0)
      out.selected.push_back(idx);
    else
      out.blocker[idx] = hit;
  }
  return out;
}

ContainmentEvidence containment_lemma_check(const AdmissibleFamily& family,
                                            int r0, int ri) {
  ContainmentEvidence ev;
  ev.member = r0;
  ev.blocker = ri;
  const FamilyMember& m0 = family.members[r0];
  const FamilyMember& mi = family.members[ri];

  const auto shared = (m0.V & mi.V).first_set_cell();
  if (!shared) return ev;  // pass stays false: no witness cell
  ev.z0_row = shared->first;
  ev.z0_col = shared->second;
  const Eigen::Vector2d z0 = family.grid.cell_center(ev.z0_row, ev.z0_col);
  const Eigen::Vector2d v = evaluate(family.field, z0);

  ev.phi0 = line_angle(m0.rect.axis(), mi.rect.alpha);
  ev.phi1 = line_angle(v, m0.rect.alpha);
  ev.phi2 = line_angle(v, mi.rect.alpha);
  ev.angle_triangle = ev.phi0 <= ev.phi1 + ev.phi2 + kAngleSlack;
  ev.angle_class = ev.phi0 < 2 * family.theta &&
                   2 * family.theta <= 2 * mi.rect.eccentricity() + kAngleSlack;

  const double c0 = std::cos(ev.phi0), s0 = std::sin(ev.phi0);
  const double L0 = m0.rect.L, W0 = m0.rect.W;
  ev.proj_short = L0 * s0 + W0 * c0 <= 4 * mi.rect.W + kAngleSlack;
  ev.proj_long = L0 * c0 + W0 * s0 <= 2 * L0 + kAngleSlack;

  // Exact corner test against the 10-fold dilation, recording the smallest
  // margin by which a corner clears its half-extents.
  const OrientedRect big = dilate(mi.rect, 10);
  ev.slack = std::numeric_limits<double>::infinity();
  for (const Eigen::Vector2d& q : m0.rect.corners())
    ev.slack = std::min(ev.slack, boundary_margin(big, q));
  ev.contained_10 = ev.slack >= 0;

  const double h = family.grid.h;
  ev.low_margin = boundary_margin(m0.rect, z0) < 2 * h ||
                  boundary_margin(mi.rect, z0) < 2 * h;

  ev.pass = ev.angle_triangle && ev.angle_class && ev.proj_short &&
            ev.proj_long && ev.contained_10;
  return ev;
}

double resolvability_margin(const OrientedRect& rect, const GridSpec& grid) {
  const double diag = std::numbers::sqrt2 * grid.h;
  const double side_long = std::min(10 * rect.L, grid.diameter()) + diag;
  const double side_short = 10 * rect.W + diag;
  return 100 * rect.area() - side_long * side_short;
}

CoveringCertificate covering_certificate(const AdmissibleFamily& family,
                                         std::uint64_t seed,
                                         std::uint64_t config_hash) {
  validate_admissible(family);
  CoveringCertificate cert;
  cert.seed = seed;
  cert.config_hash = config_hash;

  const GreedyResult greedy = greedy_disjoint(family);
  cert.selected = greedy.selected;

  // Union of all populations (the covered set K) and of the rasterized
  // 10-fold dilations of the selected rectangles.
  RasterMask K = RasterMask::empty(family.grid);
  for (const FamilyMember& m : family.members) K |= m.V;
  RasterMask big_union = RasterMask::empty(family.grid);
  long long sum_rp_cells = 0;
  double sum_area = 0, sum_v = 0, sum_f_over_v = 0;
  for (int s : greedy.selected) {
    const FamilyMember& m = family.members[s];
    const RasterMask rp = rasterize(dilate(m.rect, 10), family.grid);
    sum_rp_cells += rp.count();
    big_union |= rp;
    sum_area += m.rect.area();
    sum_v += m.V.measure();
    sum_f_over_v += mask_l1(family.f, m.V);
  }

  cert.cover_exact = K.is_subset_of(big_union);

  ChainNumbers& ch = cert.chain;
  const double h2 = family.grid.h * family.grid.h;
  ch.K = K.measure();
  ch.sumRp = static_cast<double>(sum_rp_cells) * h2;
  ch.sumR100 = 100 * sum_area;
  ch.sumV_over_delta = 100 / family.delta * sum_v;
  ch.bound = 100 / (family.delta * family.lambda) * family.f.l1();
  ch.holds01 = static_cast<long long>(K.count()) <= sum_rp_cells;
  ch.holds12 = ch.sumRp <= ch.sumR100;
  ch.holds23 = ch.sumR100 <= ch.sumV_over_delta;
  ch.holds34 = ch.sumV_over_delta <= ch.bound;

  // Sanity on the last step's derivation: the selected populations are
  // pairwise disjoint, so their f-mass is at most the total mass.
  if (sum_f_over_v > family.f.l1() * (1 + 1e-12))
    throw std::logic_error("covering: disjoint populations carry more mass than f");

  bool all_pairs = true;
  for (std::size_t i = 0; i < family.members.size(); ++i) {
    if (greedy.blocker[i] < 0) continue;
    ContainmentEvidence ev = containment_lemma_check(
        family, static_cast<int>(i), greedy.blocker[i]);
    all_pairs = all_pairs && ev.pass;
    cert.pair_evidence.push_back(std::move(ev));
  }

  cert.pass = cert.cover_exact && all_pairs && ch.holds01 && ch.holds12 &&
              ch.holds23 && ch.holds34;
  return cert;
}

AdmissibleFamily generate_random_family(const FamilyGenConfig& config) {
  if (config.grid_n < 32)
    throw std::invalid_argument("family generator: grid_n must be >= 32");
  if (config.max_members < 1)
    throw std::invalid_argument("family generator: need at least one member");
  if (!(config.theta > 0 && config.theta < 0.05))
    throw std::invalid_argument("family generator: theta must be in (0, 0.05)");
  if (!(config.delta > 0 && config.delta <= 1))
    throw std::invalid_argument("family generator: delta must be in (0, 1]");

  AdmissibleFamily fam;
  fam.grid = GridSpec{{0, 0}, 1.0 / config.grid_n, config.grid_n, config.grid_n};
  fam.delta = config.delta;
  fam.theta = config.theta;

  Rng rng(config.seed);
  const double phi_dir = rng.uniform(0, std::numbers::pi);
  fam.field = FieldSpec::constant({std::cos(phi_dir), std::sin(phi_dir)},
                                  Box{{0, 0}, {1, 1}});
  fam.field.label = "covering-constant";

  fam.f = GridFunction::zeros(fam.grid);
  for (int i = 0; i < fam.grid.ny; ++i)
    for (int j = 0; j < fam.grid.nx; ++j) fam.f.values(i, j) = rng.uniform();

  int attempts = 0;
  const int attempt_cap = 80 * config.max_members;
  while (static_cast<int>(fam.members.size()) < config.max_members) {
    if (++attempts > attempt_cap)
      throw std::logic_error("family generator: acceptance rate collapsed");
    const double L = rng.uniform(0.25, 0.5);
    const double W = config.theta * L * rng.uniform(1.0, 1.9);
    const Eigen::Vector2d center(rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7));
    const double jitter = 0.8 * (W / (2 * L)) * rng.uniform(-1.0, 1.0);
    const OrientedRect rect = make_rect(center, phi_dir + jitter, L, W);
    if (resolvability_margin(rect, fam.grid) <= 0) continue;

    PopulationResult pop = population(fam.field, rect, fam.grid);
    const int cells = pop.mask.count();
    // 2% head-room over delta-admissibility keeps the raster comparison
    // safely away from ties.
    if (cells == 0 || pop.mask.measure() < 1.02 * config.delta * rect.area())
      continue;

    FamilyMember m;
    m.rect = rect;
    m.mean_over_V = mask_l1(fam.f, pop.mask) / pop.mask.measure();
    m.V = std::move(pop.mask);
    fam.members.push_back(std::move(m));
  }

  double min_mean = std::numeric_limits<double>::infinity();
  for (const FamilyMember& m : fam.members)
    min_mean = std::min(min_mean, m.mean_over_V);
  fam.lambda = 0.98 * min_mean;

  validate_admissible(fam);
  return fam;
}

}  // namespace dirmax
