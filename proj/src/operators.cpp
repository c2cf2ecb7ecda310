#include "dirmax/operators.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>

#include "dirmax/parallel.hpp"

namespace dirmax {

double average_A(const FieldSpec& field, const GridFunction& f,
                 const Eigen::Vector2d& x, double eps, int N_t) {
  if (!(eps > 0)) throw std::invalid_argument("eps must be positive");
  if (N_t < 2 || N_t % 2 != 0)
    throw std::invalid_argument("N_t must be even and >= 2");
  Eigen::Vector2d v = evaluate(field, x);
  double step = 2 * eps / N_t;
  double sum = 0;
  for (int i = 0; i <= N_t; ++i) {
    double t = (i - N_t / 2) * step;
    double g = f.interpolate(x + t * v);
    sum += (i == 0 || i == N_t) ? 0.5 * g : g;
  }
  return sum * step / eps;
}

std::vector<double> dyadic_eps_set(double eps_ref, int K) {
  if (!(eps_ref > 0) || K < 0)
    throw std::invalid_argument("need eps_ref > 0 and K >= 0");
  std::vector<double> out;
  for (int k = 0; k <= K; ++k) out.push_back(eps_ref * std::ldexp(1.0, -k));
  return out;
}

GridFunction maximal_Mv(const FieldSpec& field, const GridFunction& f,
                        const GridSpec& grid,
                        const std::vector<double>& eps_set, int N_t,
                        int workers) {
  if (eps_set.empty()) throw std::invalid_argument("eps_set must be nonempty");
  GridFunction out = GridFunction::zeros(grid);
  parallel_for(static_cast<std::size_t>(grid.ny), workers, [&](std::size_t row) {
    int i = static_cast<int>(row);
    for (int j = 0; j < grid.nx; ++j) {
      Eigen::Vector2d x = grid.cell_center(i, j);
      if (!field.domain.contains(x)) continue;  // indicator of Omega
      double best = 0;
      for (double eps : eps_set)
        best = std::max(best, std::abs(average_A(field, f, x, eps, N_t)));
      out.values(i, j) = best;
    }
  });
  return out;
}

CandidateFamily enumerate_family(const FieldSpec& field, const GridSpec& grid,
                                 const FamilyParams& params) {
  if (params.center_stride < 1 || params.n_alpha < 1 || params.lengths.empty())
    throw std::invalid_argument("family needs stride, orientations, lengths");
  if (!(params.delta > 0 && params.delta <= 1))
    throw std::invalid_argument("delta must be in (0, 1]");
  if (params.rule == WidthRule::ThetaClass && !(params.theta > 0))
    throw std::invalid_argument("theta must be positive");
  if (params.rule == WidthRule::WClass && !(params.w > 0))
    throw std::invalid_argument("w must be positive");

  CandidateFamily family;
  family.params = params;
  family.grid = grid;
  Box grid_box{grid.origin,
               grid.origin + grid.h * Eigen::Vector2d(grid.nx, grid.ny)};
  for (int i = params.center_stride / 2; i < grid.ny; i += params.center_stride)
    for (int j = params.center_stride / 2; j < grid.nx;
         j += params.center_stride)
      for (int k = 0; k < params.n_alpha; ++k)
        for (double L : params.lengths)
          for (double wf : {1.0, 1.5}) {
            double W = params.rule == WidthRule::ThetaClass
                           ? wf * params.theta * L
                           : wf * params.w;
            if (W > L || L >= params.max_L || W >= params.max_W) continue;
            double alpha = k * M_PI / params.n_alpha;
            OrientedRect rect =
                make_rect(grid.cell_center(i, j), alpha, L, W);
            bool inside = true;
            for (const Eigen::Vector2d& c : rect.corners())
              inside = inside && grid_box.contains(c);
            if (!inside) continue;
            Candidate cand;
            cand.rect = rect;
            cand.R_cells = rasterize(rect, grid);
            cand.V = population(field, rect, grid).mask;
            cand.delta_admissible =
                cand.V.count() > 0 &&
                cand.V.measure() >= params.delta * rect.area();
            family.members.push_back(std::move(cand));
          }
  return family;
}

namespace {

double mask_sum_abs(const GridFunction& f, const RasterMask& mask) {
  double sum = 0;
  for (int i = 0; i < mask.grid.ny; ++i)
    for (int j = 0; j < mask.grid.nx; ++j)
      if (mask.test(i, j)) sum += std::abs(f.values(i, j));
  return sum;
}

void paint_max(GridFunction& out, const RasterMask& mask, double value) {
  for (int i = 0; i < mask.grid.ny; ++i)
    for (int j = 0; j < mask.grid.nx; ++j)
      if (mask.test(i, j)) out.values(i, j) = std::max(out.values(i, j), value);
}

MaximalResult family_maximal(const CandidateFamily& family,
                             const GridFunction& f, bool over_population) {
  if (!family.grid.same_as(f.grid))
    throw std::invalid_argument("family and f grids differ");
  MaximalResult res{GridFunction::zeros(family.grid), 0};
  for (const Candidate& cand : family.members) {
    if (!cand.delta_admissible) continue;
    ++res.admissible_count;
    const RasterMask& support = over_population ? cand.V : cand.R_cells;
    int n = support.count();
    if (n == 0) continue;
    double mean = mask_sum_abs(f, support) / n;
    paint_max(res.M, support, mean);
  }
  return res;
}

}  // namespace

MaximalResult laceyli_maximal(const CandidateFamily& family,
                              const GridFunction& f) {
  if (family.params.rule != WidthRule::WClass)
    throw std::invalid_argument("laceyli_maximal needs a WClass family");
  for (const Candidate& cand : family.members)
    if (cand.rect.L >= family.params.max_L || cand.rect.W >= family.params.max_W)
      throw std::invalid_argument("family member exceeds the WClass caps");
  return family_maximal(family, f, /*over_population=*/false);
}

MaximalResult tilde_maximal(const CandidateFamily& family,
                            const GridFunction& f) {
  if (family.params.rule != WidthRule::ThetaClass)
    throw std::invalid_argument("tilde_maximal needs a ThetaClass family");
  if (!(family.params.theta < 0.01))
    throw std::invalid_argument("tilde_maximal requires theta < 1/100");
  return family_maximal(family, f, /*over_population=*/true);
}

double weak_type_ratio(const GridFunction& Mf, const GridFunction& f,
                       const Eigen::VectorXd& lambda_grid) {
  double f_l1 = f.l1();
  if (!(f_l1 > 0)) throw std::invalid_argument("weak type needs ||f||_1 > 0");
  double area = Mf.cell_area();
  double best = 0;
  for (int k = 0; k < lambda_grid.size(); ++k) {
    double lambda = lambda_grid[k];
    int over = (Mf.values > lambda).count();
    best = std::max(best, lambda * over * area / f_l1);
  }
  return best;
}

Eigen::VectorXd default_lambda_grid(const GridFunction& Mf, int n) {
  double max = 0, minpos = std::numeric_limits<double>::infinity();
  for (int i = 0; i < Mf.values.rows(); ++i)
    for (int j = 0; j < Mf.values.cols(); ++j) {
      double v = Mf.values(i, j);
      if (v > 0) {
        max = std::max(max, v);
        minpos = std::min(minpos, v);
      }
    }
  if (max == 0) return Eigen::VectorXd();
  double lo = std::log(0.5 * minpos), hi = std::log(max * (1 + 1e-9));
  Eigen::VectorXd g(n);
  for (int k = 0; k < n; ++k) g[k] = std::exp(lo + (hi - lo) * k / (n - 1));
  return g;
}

namespace {

int checked_pow2_size(const GridSpec& grid) {
  if (grid.nx != grid.ny)
    throw std::invalid_argument("frequency ops need a square grid");
  int n = grid.nx;
  if (n < 4 || (n & (n - 1)) != 0)
    throw std::invalid_argument("frequency ops need n a power of two >= 4");
  return n;
}

// Signed frequency of array index m on an n-periodic lattice: (-n/2, n/2].
inline long signed_freq(int m, int n) { return m <= n / 2 ? m : m - n; }

Eigen::MatrixXcd fft2(const Eigen::ArrayXXd& values) {
  int n = static_cast<int>(values.rows());
  Eigen::MatrixXcd stage(n, n), out(n, n);
  Eigen::FFT<double> fft;
  Eigen::VectorXcd in(n), res(n);
  for (int i = 0; i < n; ++i) {
    in = values.row(i).matrix().transpose().cast<std::complex<double>>();
    fft.fwd(res, in);
    stage.row(i) = res.transpose();
  }
  for (int j = 0; j < n; ++j) {
    in = stage.col(j);
    fft.fwd(res, in);
    out.col(j) = res;
  }
  return out;
}

Eigen::ArrayXXd ifft2_real(const Eigen::MatrixXcd& spectrum) {
  int n = static_cast<int>(spectrum.rows());
  Eigen::MatrixXcd stage(n, n);
  Eigen::FFT<double> fft;
  Eigen::VectorXcd in(n), res(n);
  for (int j = 0; j < n; ++j) {
    in = spectrum.col(j);
    fft.inv(res, in);
    stage.col(j) = res;
  }
  Eigen::ArrayXXd out(n, n);
  for (int i = 0; i < n; ++i) {
    in = stage.row(i).transpose();
    fft.inv(res, in);
    out.row(i) = res.real().transpose();
  }
  return out;
}

}  // namespace

BandDecomposition lp_decompose(const GridFunction& f) {
  int n = checked_pow2_size(f.grid);
  Eigen::MatrixXcd spectrum = fft2(f.values);

  BandDecomposition dec;
  dec.dc = GridFunction::zeros(f.grid);
  for (int T = 1; T <= n / 2; T *= 2)
    dec.bands.emplace_back(T, GridFunction::zeros(f.grid));

  Eigen::MatrixXcd masked(n, n);
  auto extract = [&](auto in_band) {
    masked.setZero();
    for (int mi = 0; mi < n; ++mi)
      for (int mj = 0; mj < n; ++mj) {
        long ky = signed_freq(mi, n), kx = signed_freq(mj, n);
        if (in_band(kx * kx + ky * ky)) masked(mi, mj) = spectrum(mi, mj);
      }
    return ifft2_real(masked);
  };

  dec.dc.values = extract([](long q) { return q == 0; });
  for (auto& [T, fT] : dec.bands) {
    long t2 = static_cast<long>(T) * T;
    fT.values = extract([t2](long q) { return t2 <= q && q < 4 * t2; });
  }
  return dec;
}

GridFunction mollified_cutoff(const RasterMask& mask, double T) {
  if (!(T >= 1)) throw std::invalid_argument("mollifier needs T >= 1");
  int n = checked_pow2_size(mask.grid);
  GridFunction chi = GridFunction::zeros(mask.grid);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (mask.test(i, j)) chi.values(i, j) = 1;
  Eigen::MatrixXcd spectrum = fft2(chi.values);
  for (int mi = 0; mi < n; ++mi)
    for (int mj = 0; mj < n; ++mj) {
      long ky = signed_freq(mi, n), kx = signed_freq(mj, n);
      double rho = std::sqrt(static_cast<double>(kx * kx + ky * ky)) / T;
      // Smooth radial bump supported in the open unit disk, value 1 at 0.
      double factor =
          rho < 1 ? std::exp(1 - 1 / (1 - rho * rho)) : 0.0;
      spectrum(mi, mj) *= factor;
    }
  GridFunction out = GridFunction::zeros(mask.grid);
  out.values = ifft2_real(spectrum);
  return out;
}

SingleScaleRecord single_scale_audit(const FieldSpec& field,
                                     const GridFunction& f_T,
                                     const BourgainRect& rect, double T,
                                     const DecayShape& regime, double C,
                                     int N_t) {
  SingleScaleRecord rec;
  if (rect.degenerate) {
    rec.skipped = true;
    return rec;
  }
  rec.Tdelta = T * rect.delta;
  if (!(rec.Tdelta > 1))
    throw std::domain_error("single-scale regime requires T*delta > 1");
  OrientedRect R = rect.rect();
  RasterMask R_raster = rasterize(R, f_T.grid);
  double area = f_T.cell_area();
  double sq = 0;
  for (int i = 0; i < f_T.grid.ny; ++i)
    for (int j = 0; j < f_T.grid.nx; ++j) {
      if (!R_raster.test(i, j)) continue;
      double a = average_A(field, f_T, f_T.grid.cell_center(i, j), rect.eps,
                           N_t);
      sq += a * a * area;
    }
  rec.lhs = std::sqrt(sq);
  rec.factor = bound_factor(regime, rec.Tdelta, C);
  GridFunction cutoff = mollified_cutoff(rasterize(dilate(R, 2), f_T.grid), T);
  rec.rhs_core =
      std::sqrt(area * (f_T.values * cutoff.values).square().sum());
  rec.ratio = rec.rhs_core > 0 ? rec.lhs / (rec.factor * rec.rhs_core) : 0;
  return rec;
}

ScaleSumRecord scale_sum_audit(const GridFunction& f, const DecayShape& weights,
                               int J) {
  if (J < 1) throw std::invalid_argument("need J >= 1");
  ScaleSumRecord rec;
  if (weights.kind == DecayKind::LogPoly && weights.p <= 1) {
    rec.divergent = true;  // sum_j j^{-p} has no uniform constant
    return rec;
  }
  if (weights.kind != DecayKind::LogPoly && weights.kind != DecayKind::ExpLog)
    throw std::invalid_argument("weights must be logpoly or explog");
  auto weight = [&](int j) {
    return weights.kind == DecayKind::LogPoly
               ? std::pow(j, -weights.p)
               : std::exp(-weights.sigma *
                          std::pow(j * std::log(2.0), weights.c1));
  };
  BandDecomposition dec = lp_decompose(f);
  std::vector<std::pair<long, double>> band_energy;  // (T, ||f_T||_2^2)
  for (const auto& [T, fT] : dec.bands) {
    double l2 = fT.l2();
    band_energy.emplace_back(T, l2 * l2);
  }
  double f_l2 = f.l2();
  rec.f_norm2 = f_l2 * f_l2;
  for (int j = 1; j <= J; ++j) {
    double wj = weight(j);
    rec.weight_sum += wj;
    double inner = 0;
    // Bands at scale 2^j and above; j beyond the lattice Nyquist (and in
    // particular j >= 63, where 1L << j would overflow) contributes nothing.
    for (const auto& [T, e] : band_energy)
      if (j < 63 && T >= (1L << j)) inner += e;
    rec.lhs += wj * inner;
  }
  rec.rhs = rec.weight_sum * rec.f_norm2;
  rec.holds = rec.lhs <= rec.rhs;
  return rec;
}

}  // namespace dirmax
