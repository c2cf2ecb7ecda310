#include "dirmax/field.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dirmax/rng.hpp"

namespace dirmax {

namespace {

double default_margin(const Box& domain, double requested) {
  if (requested > 0) return requested;
  double m = 0.25 * domain.diameter();
  if (m <= 0) throw std::invalid_argument("field domain has zero diameter");
  return m;
}

double flat_profile(double u, double gamma) {
  if (u == 0) return 0;  // e^{-1/|u|^gamma} -> 0 as u -> 0
  double a = std::exp(-1.0 / std::pow(std::abs(u), gamma));
  return u > 0 ? a : -a;
}

Eigen::Vector2d sample_bilinear(const SampledGrid& g, const Eigen::Vector2d& p) {
  double fx = (p.x() - g.origin.x()) / g.spacing;
  double fy = (p.y() - g.origin.y()) / g.spacing;
  int nx = static_cast<int>(g.vx.cols());
  int ny = static_cast<int>(g.vx.rows());
  int j = std::clamp(static_cast<int>(std::floor(fx)), 0, nx - 2);
  int i = std::clamp(static_cast<int>(std::floor(fy)), 0, ny - 2);
  double a = std::clamp(fx - j, 0.0, 1.0);
  double b = std::clamp(fy - i, 0.0, 1.0);
  auto blend = [&](const Eigen::ArrayXXd& c) {
    return (1 - b) * ((1 - a) * c(i, j) + a * c(i, j + 1)) +
           b * ((1 - a) * c(i + 1, j) + a * c(i + 1, j + 1));
  };
  return {blend(g.vx), blend(g.vy)};
}

}  // namespace

FieldSpec FieldSpec::constant(const Eigen::Vector2d& v0, Box domain,
                              double margin) {
  FieldSpec f;
  f.kind = FieldKind::Constant;
  f.label = "constant";
  f.domain = domain;
  f.margin = default_margin(domain, margin);
  f.v0 = v0;
  if (v0.norm() == 0) throw std::invalid_argument("constant field must be nonzero");
  return f;
}

FieldSpec FieldSpec::rotation(Box domain, double margin) {
  FieldSpec f;
  f.kind = FieldKind::Rotation;
  f.label = "rotation";
  f.domain = domain;
  f.margin = default_margin(domain, margin);
  return f;
}

FieldSpec FieldSpec::shear_monomial(int k, Box domain, double margin) {
  if (k < 1) throw std::invalid_argument("shear exponent must be >= 1");
  FieldSpec f;
  f.kind = FieldKind::ShearMonomial;
  f.label = "shear" + std::to_string(k);
  f.domain = domain;
  f.margin = default_margin(domain, margin);
  f.monomial_k = k;
  return f;
}

FieldSpec FieldSpec::shear_flat(double gamma, Box domain, double margin) {
  if (!(gamma > 0 && gamma < 1))
    throw std::invalid_argument("flat shear requires 0 < gamma < 1");
  FieldSpec f;
  f.kind = FieldKind::ShearFlat;
  f.label = "flat";
  f.domain = domain;
  f.margin = default_margin(domain, margin);
  f.flat_gamma = gamma;
  return f;
}

FieldSpec FieldSpec::grid_sampled(SampledGrid samples, Box domain,
                                  double margin) {
  if (samples.vx.rows() < 2 || samples.vx.cols() < 2 ||
      samples.vx.rows() != samples.vy.rows() ||
      samples.vx.cols() != samples.vy.cols())
    throw std::invalid_argument("sampled grid needs matching >=2x2 arrays");
  if (!(samples.spacing > 0))
    throw std::invalid_argument("sampled grid spacing must be positive");
  FieldSpec f;
  f.kind = FieldKind::GridSampled;
  f.label = "sampled";
  f.domain = domain;
  f.margin = default_margin(domain, margin);
  f.samples = std::move(samples);
  // Bilinear evaluation is only defined on the lattice hull.
  const auto& g = f.samples;
  Box hull{g.origin,
           g.origin + g.spacing * Eigen::Vector2d(double(g.vx.cols() - 1),
                                                  double(g.vx.rows() - 1))};
  Box padded = f.padded();
  if (!hull.contains(padded.lo) || !hull.contains(padded.hi))
    throw std::invalid_argument("sampled lattice does not cover the padded box");
  return f;
}

Eigen::Vector2d evaluate(const FieldSpec& field, const Eigen::Vector2d& p) {
  if (!field.padded().contains(p))
    throw std::domain_error("field evaluated outside its padded box");
  switch (field.kind) {
    case FieldKind::Constant:
      return field.v0;
    case FieldKind::Rotation:
      return {-p.y(), p.x()};
    case FieldKind::ShearMonomial:
      return {1.0, std::pow(p.x(), field.monomial_k)};
    case FieldKind::ShearFlat:
      return {1.0, flat_profile(p.x(), field.flat_gamma)};
    case FieldKind::GridSampled:
      return sample_bilinear(field.samples, p);
  }
  throw std::logic_error("unreachable field kind");
}

FieldBounds estimate_bounds(const FieldSpec& field, int resolution) {
  if (resolution < 16) throw std::invalid_argument("resolution must be >= 16");
  const Box dom = field.domain;
  const double extent = std::max(dom.width(), dom.height());
  const double h = extent / resolution;
  // Central differences step outside the domain box but stay inside the
  // padded box: h <= diameter / 16 < margin.
  if (h >= field.margin)
    throw std::invalid_argument("margin too small for difference stencil");
  double sup_v = 0, sup_op = 0;
  for (int i = 0; i <= resolution; ++i) {
    for (int j = 0; j <= resolution; ++j) {
      Eigen::Vector2d x(dom.lo.x() + dom.width() * j / resolution,
                        dom.lo.y() + dom.height() * i / resolution);
      sup_v = std::max(sup_v, evaluate(field, x).norm());
      Eigen::Matrix2d J;
      J.col(0) = (evaluate(field, x + Eigen::Vector2d(h, 0)) -
                  evaluate(field, x - Eigen::Vector2d(h, 0))) /
                 (2 * h);
      J.col(1) = (evaluate(field, x + Eigen::Vector2d(0, h)) -
                  evaluate(field, x - Eigen::Vector2d(0, h))) /
                 (2 * h);
      sup_op = std::max(sup_op, J.jacobiSvd().singularValues()(0));
    }
  }
  FieldBounds b;
  b.sup_v = sup_v;
  b.B = std::max(sup_v, sup_op);
  double by_margin = sup_v > 0 ? field.margin / sup_v
                               : std::numeric_limits<double>::infinity();
  b.epsilon0 = std::min(by_margin, 1.0 / (100.0 * std::max(b.B, 1.0)));
  return b;
}

bool segment_safe(const FieldSpec& field, const Eigen::Vector2d& x,
                  double eps) {
  const Box padded = field.padded();
  if (!padded.contains(x)) return false;
  Eigen::Vector2d v = evaluate(field, x);
  return padded.contains(x + eps * v) && padded.contains(x - eps * v);
}

FieldSpec load_field_csv(const std::string& path, const std::string& label) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open field CSV: " + path);
  std::string line;
  if (!std::getline(in, line))
    throw std::invalid_argument("empty field CSV: " + path);
  auto strip = [](std::string s) {
    s.erase(std::remove_if(s.begin(), s.end(),
                           [](unsigned char c) { return std::isspace(c); }),
            s.end());
    return s;
  };
  if (strip(line) != "x,y,vx,vy")
    throw std::invalid_argument("field CSV must start with header x,y,vx,vy");
  struct Row {
    double x, y, vx, vy;
  };
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    if (strip(line).empty()) continue;
    std::istringstream ls(line);
    Row r;
    char c1, c2, c3;
    if (!(ls >> r.x >> c1 >> r.y >> c2 >> r.vx >> c3 >> r.vy) || c1 != ',' ||
        c2 != ',' || c3 != ',')
      throw std::invalid_argument("malformed field CSV row: " + line);
    rows.push_back(r);
  }
  if (rows.size() < 4) throw std::invalid_argument("field CSV needs >= 4 rows");

  std::vector<double> xs, ys;
  for (const Row& r : rows) xs.push_back(r.x), ys.push_back(r.y);
  auto unique_sorted = [](std::vector<double>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end(),
                        [](double a, double b) {
                          return std::abs(a - b) < 1e-12;
                        }),
            v.end());
  };
  unique_sorted(xs);
  unique_sorted(ys);
  if (xs.size() < 2 || ys.size() < 2)
    throw std::invalid_argument("field CSV lattice needs >= 2 distinct x and y");
  double dx = xs[1] - xs[0], dy = ys[1] - ys[0];
  for (std::size_t i = 1; i < xs.size(); ++i)
    if (std::abs(xs[i] - xs[i - 1] - dx) > 1e-9 * std::max(1.0, std::abs(dx)))
      throw std::invalid_argument("field CSV x coordinates are not uniform");
  for (std::size_t i = 1; i < ys.size(); ++i)
    if (std::abs(ys[i] - ys[i - 1] - dy) > 1e-9 * std::max(1.0, std::abs(dy)))
      throw std::invalid_argument("field CSV y coordinates are not uniform");
  if (std::abs(dx - dy) > 1e-9 * std::max(dx, dy))
    throw std::invalid_argument("field CSV lattice must be square");
  if (rows.size() != xs.size() * ys.size())
    throw std::invalid_argument("field CSV lattice is incomplete");

  SampledGrid g;
  g.origin = {xs.front(), ys.front()};
  g.spacing = dx;
  g.vx.setZero(static_cast<int>(ys.size()), static_cast<int>(xs.size()));
  g.vy.setZero(static_cast<int>(ys.size()), static_cast<int>(xs.size()));
  Eigen::ArrayXXd seen = Eigen::ArrayXXd::Zero(g.vx.rows(), g.vx.cols());
  for (const Row& r : rows) {
    int j = static_cast<int>(std::lround((r.x - g.origin.x()) / dx));
    int i = static_cast<int>(std::lround((r.y - g.origin.y()) / dy));
    g.vx(i, j) = r.vx;
    g.vy(i, j) = r.vy;
    seen(i, j) += 1;
  }
  if ((seen != 1.0).any())
    throw std::invalid_argument("field CSV has duplicate or missing nodes");

  Box hull{g.origin, {xs.back(), ys.back()}};
  double m = std::min(hull.width(), hull.height()) / 8.0;
  Box domain = {hull.lo + Eigen::Vector2d(m, m), hull.hi - Eigen::Vector2d(m, m)};
  FieldSpec f = FieldSpec::grid_sampled(std::move(g), domain, m);
  f.label = label;
  return f;
}

std::vector<FieldSpec> builtin_catalog(std::uint64_t noise_seed) {
  Box unit{{0, 0}, {1, 1}};
  Box symm{{-1, -1}, {1, 1}};
  std::vector<FieldSpec> out;
  out.push_back(FieldSpec::constant({1, 0}, unit));
  out.push_back(FieldSpec::rotation(symm));
  out.push_back(FieldSpec::shear_monomial(2, symm));
  out.push_back(FieldSpec::shear_flat(0.5, symm));

  // Smooth pseudo-random perturbation of (1, 0): a coarse lattice over the
  // padded box with amplitude small enough that downstream kernel audits stay
  // in their unconditional regime.
  FieldSpec base = FieldSpec::constant({1, 0}, unit);
  Box padded = base.padded();
  const int n = 17;
  SampledGrid g;
  g.origin = padded.lo;
  g.spacing = std::max(padded.width(), padded.height()) / (n - 1);
  g.vx.setZero(n, n);
  g.vy.setZero(n, n);
  Rng rng(noise_seed);
  const double amp = 0.05;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      g.vx(i, j) = 1.0 + amp * rng.uniform(-1, 1);
      g.vy(i, j) = amp * rng.uniform(-1, 1);
    }
  FieldSpec noise = FieldSpec::grid_sampled(std::move(g), unit);
  noise.label = "noise";
  out.push_back(std::move(noise));
  return out;
}

std::vector<Eigen::Vector2d> catalog_base_points(const FieldSpec& field) {
  std::vector<Eigen::Vector2d> pts;
  const Box d = field.domain;
  for (double fy : {0.3, 0.5, 0.7})
    for (double fx : {0.3, 0.5, 0.7}) {
      Eigen::Vector2d p(d.lo.x() + fx * d.width(), d.lo.y() + fy * d.height());
      if (evaluate(field, p).norm() < 1e-9)
        p += Eigen::Vector2d(0.13 * d.width(), 0.07 * d.height());
      pts.push_back(p);
    }
  return pts;
}

}  // namespace dirmax
