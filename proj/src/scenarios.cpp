#include "dirmax/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <map>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "dirmax/covering.hpp"
#include "dirmax/field.hpp"
#include "dirmax/geometry.hpp"
#include "dirmax/grid_function.hpp"
#include "dirmax/io.hpp"
#include "dirmax/operators.hpp"
#include "dirmax/rng.hpp"

namespace dirmax {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

std::string now_utc() {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Collects emitted files (name, bytes, checksum) as scenarios write them.
class Emitter {
 public:
  explicit Emitter(std::string dir) : dir_(std::move(dir)) {}

  std::string path(const std::string& name) const { return dir_ + "/" + name; }

  void text(const std::string& name, const std::string& content) {
    write_text_file(path(name), content);
    note(name);
  }

  void note(const std::string& name) {
    EmittedFile f;
    f.name = name;
    f.checksum = file_checksum(path(name));
    f.bytes = static_cast<std::uint64_t>(fs::file_size(path(name)));
    files_.push_back(std::move(f));
  }

  const std::vector<EmittedFile>& files() const { return files_; }

 private:
  std::string dir_;
  std::vector<EmittedFile> files_;
};

FieldSpec resolve_field(const ExperimentConfig& c) {
  if (c.field == "csv") {
    if (c.field_csv.empty())
      throw ConfigError("config key `field_csv`: required when field is \"csv\"");
    return load_field_csv(c.field_csv, "csv");
  }
  for (const FieldSpec& f : builtin_catalog())
    if (f.label == c.field) return f;
  throw ConfigError("config key `field`: unknown label `" + c.field +
                    "` (catalog: constant, rotation, shear2, flat, noise, csv)");
}

Eigen::VectorXd make_tau_grid(const ExperimentConfig& c) {
  if (c.tau.kind == "aligned") return aligned_tau_grid(c.N_t, c.tau.count);
  return default_tau_grid(c.tau.count);
}

GridSpec square_grid_over(const Box& box, int n) {
  if (std::abs(box.width() - box.height()) > 1e-12 * box.diameter())
    throw ConfigError("grid scenarios need a square field domain");
  return GridSpec{box.lo, box.width() / n, n, n};
}

GridFunction random_grid_function(const GridSpec& grid, Rng& rng) {
  GridFunction f = GridFunction::zeros(grid);
  for (int i = 0; i < grid.ny; ++i)
    for (int j = 0; j < grid.nx; ++j) f.values(i, j) = rng.uniform();
  return f;
}

/// Nondegenerate endpoint-node profiles at the catalog base points; throws
/// ConfigError when eps cannot be run or nothing remains.
std::vector<AngularProfile> base_profiles(const FieldSpec& field, double eps,
                                          int N_t, ProfileLayout layout) {
  std::vector<AngularProfile> out;
  for (const Eigen::Vector2d& x : catalog_base_points(field)) {
    try {
      AngularProfile p = layout == ProfileLayout::Nodes
                             ? angular_profile(field, x, eps, N_t)
                             : angular_profile_cells(field, x, eps, N_t);
      if (!p.degenerate()) out.push_back(std::move(p));
    } catch (const std::domain_error&) {
      throw ConfigError("config key `eps`: " + std::to_string(eps) +
                        " leaves the padded box of field `" + field.label +
                        "` at a base point");
    }
  }
  if (out.empty())
    throw ConfigError("config key `field`: every base-point profile of `" +
                      field.label + "` is degenerate (w == 0)");
  return out;
}

json shape_json(const DecayShape& s) {
  return json::parse(shape_to_json_text(s));
}

std::string csv_cell(double v) { return format_double(v); }

// ---------------------------------------------------------------------------
// scenario: audit-decay
// ---------------------------------------------------------------------------
void run_audit_decay(const ExperimentConfig& c, Emitter& em) {
  if (c.shapes.empty())
    throw ConfigError("config key `shapes`: audit-decay needs at least one");
  const FieldSpec field = resolve_field(c);
  const auto profiles =
      base_profiles(field, c.eps, c.N_t, ProfileLayout::Nodes);
  const Eigen::VectorXd taus = make_tau_grid(c);

  json reports = json::array();
  std::ostringstream sweep;
  sweep << "shape,field,x1,x2,eps,tau,measure,envelope,ratio\n";
  for (const DecayShape& shape : c.shapes) {
    const DecayReport rep = fit_decay_constant(profiles, shape, taus);
    if (!(rep.C_min >= 0) || rep.witnesses.empty())
      throw ScenarioFailure("audit-decay: fit produced no witnesses for " +
                            shape.label());
    json rj;
    rj["shape"] = shape_json(shape);
    rj["C_min"] = rep.C_min;
    rj["witnesses"] = json::array();
    for (const DecayWitness& w : rep.witnesses)
      rj["witnesses"].push_back({{"field", w.field_label},
                                 {"x", {w.x.x(), w.x.y()}},
                                 {"eps", w.eps},
                                 {"tau", w.tau},
                                 {"ratio", w.ratio}});
    reports.push_back(std::move(rj));

    for (const AngularProfile& prof : profiles) {
      const SublevelCurve curve = SublevelCurve::from_profile(prof);
      for (int k = 0; k < taus.size(); ++k) {
        const double tau = taus[k];
        const double m = curve.measure(tau);
        const double env = shape.envelope(tau);
        const double ratio = std::isfinite(env) ? m / (env * prof.eps) : 0.0;
        sweep << shape.label() << ',' << field.label << ','
              << csv_cell(prof.x.x()) << ',' << csv_cell(prof.x.y()) << ','
              << csv_cell(prof.eps) << ',' << csv_cell(tau) << ','
              << csv_cell(m) << ',' << csv_cell(env) << ',' << csv_cell(ratio)
              << '\n';
      }
    }
  }

  json top;
  top["field"] = field.label;
  top["eps"] = c.eps;
  top["N_t"] = c.N_t;
  top["tau_kind"] = c.tau.kind;
  top["n_profiles"] = profiles.size();
  top["reports"] = std::move(reports);
  em.text("decay_report.json", top.dump(2) + "\n");
  em.text("decay_sweep.csv", sweep.str());
}

// ---------------------------------------------------------------------------
// scenario: doubling
// ---------------------------------------------------------------------------
void run_doubling(const ExperimentConfig& c, Emitter& em) {
  const FieldSpec field = resolve_field(c);
  const auto pts = catalog_base_points(field);
  const std::vector<double> eps_set = dyadic_eps_set(c.eps_ref, c.eps_levels);
  const Eigen::VectorXd taus = make_tau_grid(c);

  // Fit the log-polynomial decay constant over all nondegenerate profiles.
  std::vector<AngularProfile> profiles;
  for (double eps : eps_set)
    for (const Eigen::Vector2d& x : pts) {
      try {
        AngularProfile prof = angular_profile(field, x, eps, c.N_t);
        if (!prof.degenerate()) profiles.push_back(std::move(prof));
      } catch (const std::domain_error&) {
        throw ConfigError("config key `eps_ref`: scale " + std::to_string(eps) +
                          " leaves the padded box of field `" + field.label +
                          "`");
      }
    }
  double C_min = 0;
  if (!profiles.empty())
    C_min = fit_decay_constant(profiles, DecayShape::logpoly(c.p), taus).C_min;

  std::ostringstream csv;
  csv << "field,x1,x2,eps,sup_eps,sup_2eps,tau0,pass\n";
  double tau0 = 0;
  int checks = 0;
  for (double eps : eps_set)
    for (const Eigen::Vector2d& x : pts) {
      DoublingRecord rec;
      try {
        rec = doubling_check(field, x, eps, C_min, c.p, c.N_t);
      } catch (const std::domain_error&) {
        throw ConfigError("config key `eps_ref`: doubled scale " +
                          std::to_string(2 * eps) +
                          " leaves the padded box of field `" + field.label +
                          "`");
      }
      tau0 = rec.tau0;
      ++checks;
      csv << field.label << ',' << csv_cell(x.x()) << ',' << csv_cell(x.y())
          << ',' << csv_cell(eps) << ',' << csv_cell(rec.sup_eps) << ','
          << csv_cell(rec.sup_2eps) << ',' << csv_cell(rec.tau0) << ','
          << (rec.pass ? 1 : 0) << '\n';
      if (!rec.pass)
        throw ScenarioFailure(
            "doubling: sup over the doubled interval exceeds sup/tau0 at x=(" +
            format_double(x.x()) + "," + format_double(x.y()) +
            "), eps=" + format_double(eps) + ": " +
            format_double(rec.sup_2eps) + " > " +
            format_double(rec.sup_eps / rec.tau0));
    }
  em.text("doubling.csv", csv.str());

  json j;
  j["field"] = field.label;
  j["p"] = c.p;
  j["C_min"] = C_min;
  j["tau0"] = tau0;
  j["n_checks"] = checks;
  j["all_pass"] = true;
  em.text("doubling.json", j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// scenario: balance
// ---------------------------------------------------------------------------
void run_balance(const ExperimentConfig& c, Emitter& em) {
  if (c.shapes.empty())
    throw ConfigError("config key `shapes`: balance needs at least one");
  if (c.Tdelta_values.empty())
    throw ConfigError("config key `Tdelta_values`: balance needs at least one");
  std::ostringstream csv;
  csv << "regime,Tdelta,tau,residual\n";
  double max_residual = 0;
  for (const DecayShape& shape : c.shapes) {
    for (double Td : c.Tdelta_values) {
      double tau, res;
      try {
        tau = balance_tau(shape, Td);
        res = balance_residual(shape, Td, tau);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config key `shapes`: ") + e.what());
      }
      max_residual = std::max(max_residual, res);
      csv << shape.label() << ',' << csv_cell(Td) << ',' << csv_cell(tau)
          << ',' << csv_cell(res) << '\n';
      if (!(res < 1e-12))
        throw ScenarioFailure("balance: residual " + format_double(res) +
                              " >= 1e-12 for " + shape.label() +
                              " at Tdelta=" + format_double(Td));
    }
  }
  em.text("balance.csv", csv.str());

  json j;
  j["max_residual"] = max_residual;
  j["n_roots"] =
      static_cast<int>(c.shapes.size() * c.Tdelta_values.size());
  j["all_pass"] = true;
  em.text("balance.json", j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// scenario: kernel-split
// ---------------------------------------------------------------------------
void run_kernel_split(const ExperimentConfig& c, Emitter& em) {
  const FieldSpec field = resolve_field(c);
  const Eigen::VectorXd taus = make_tau_grid(c);
  std::ostringstream csv;
  csv << "field,x1,x2,eps,a,Tdelta,tau,lhs,term1,term2,holds\n";
  int audited = 0, skipped = 0;
  for (const Eigen::Vector2d& x : catalog_base_points(field)) {
    AngularProfile prof;
    try {
      prof = angular_profile(field, x, c.eps, c.N_t);
    } catch (const std::domain_error&) {
      throw ConfigError("config key `eps`: " + std::to_string(c.eps) +
                        " leaves the padded box of field `" + field.label +
                        "` at a base point");
    }
    const double v0 = prof.v_at_x.norm();
    for (double a : c.a_values) {
      if (prof.degenerate() || !(a * prof.sup_w > 1 + 1e-9)) {
        ++skipped;  // regime T*delta > 1 not reachable at this profile
        continue;
      }
      const double T = a * v0 / c.eps;
      const KernelSplitRecord rec = kernel_split_audit(prof, T, v0, taus);
      ++audited;
      for (const KernelSplitRow& row : rec.rows) {
        csv << field.label << ',' << csv_cell(x.x()) << ',' << csv_cell(x.y())
            << ',' << csv_cell(c.eps) << ',' << csv_cell(a) << ','
            << csv_cell(rec.Tdelta) << ',' << csv_cell(row.tau) << ','
            << csv_cell(row.lhs) << ',' << csv_cell(row.term1) << ','
            << csv_cell(row.term2) << ',' << (row.holds ? 1 : 0) << '\n';
        if (!row.holds)
          throw ScenarioFailure(
              "kernel-split: lhs > term1 + term2 at x=(" +
              format_double(x.x()) + "," + format_double(x.y()) +
              "), a=" + format_double(a) + ", tau=" + format_double(row.tau) +
              ": " + format_double(row.lhs) + " > " +
              format_double(row.term1 + row.term2));
      }
    }
  }
  if (audited == 0)
    throw ScenarioFailure(
        "kernel-split: no profile entered the T*delta > 1 regime");
  em.text("kernel_split.csv", csv.str());

  json j;
  j["field"] = field.label;
  j["eps"] = c.eps;
  j["a_values"] = c.a_values;
  j["n_audited"] = audited;
  j["n_skipped"] = skipped;
  j["all_hold"] = true;
  em.text("kernel_split.json", j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// scenario: lp
// ---------------------------------------------------------------------------
void run_lp(const ExperimentConfig& c, Emitter& em) {
  GridSpec grid{{0, 0}, 1.0 / c.grid_n, c.grid_n, c.grid_n};
  Rng rng(c.seed);
  const GridFunction f = random_grid_function(grid, rng);
  const BandDecomposition dec = lp_decompose(f);

  Eigen::ArrayXXd recon = dec.dc.values;
  double sum_sq = dec.dc.l2() * dec.dc.l2();
  std::ostringstream csv;
  csv << "T,norm2\n0," << csv_cell(dec.dc.l2()) << '\n';
  for (const auto& [T, fT] : dec.bands) {
    recon += fT.values;
    sum_sq += fT.l2() * fT.l2();
    csv << T << ',' << csv_cell(fT.l2()) << '\n';
  }
  const double recon_err = (recon - f.values).abs().maxCoeff();
  const double f2 = f.l2() * f.l2();
  const double plancherel_rel = std::abs(sum_sq - f2) / f2;
  if (!(recon_err < 1e-10))
    throw ScenarioFailure("lp: reconstruction L^inf error " +
                          format_double(recon_err) + " >= 1e-10");
  if (!(plancherel_rel < 1e-10))
    throw ScenarioFailure("lp: Plancherel relative error " +
                          format_double(plancherel_rel) + " >= 1e-10");
  em.text("lp_bands.csv", csv.str());

  json j;
  j["n"] = c.grid_n;
  j["n_bands"] = dec.bands.size();
  j["recon_linf"] = recon_err;
  j["plancherel_rel"] = plancherel_rel;
  j["pass"] = true;
  em.text("lp.json", j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// scenario: maximal
// ---------------------------------------------------------------------------
void run_maximal(const ExperimentConfig& c, Emitter& em) {
  const FieldSpec field = resolve_field(c);
  const GridSpec grid = square_grid_over(field.domain, c.grid_n);

  double eps_ref = c.eps_ref;
  if (eps_ref <= 0) {
    const FieldBounds b = estimate_bounds(field);
    if (!(b.epsilon0 > 0))
      throw ConfigError("config key `eps_ref`: field has no admissible scale");
    eps_ref = std::exp2(std::floor(std::log2(b.epsilon0)));
  }
  const std::vector<double> eps_set = dyadic_eps_set(eps_ref, c.eps_levels);

  Rng rng(c.seed);
  const GridFunction f = random_grid_function(grid, rng);
  const GridFunction Mf =
      maximal_Mv(field, f, grid, eps_set, c.N_t, c.workers);
  if (!(Mf.values.minCoeff() >= 0) || !Mf.values.isFinite().all())
    throw ScenarioFailure("maximal: M_v produced a negative or non-finite value");
  write_grid_vfgf(em.path("maximal.vfgf"), Mf);
  em.note("maximal.vfgf");

  const OmegaPartition part = omega_partition(field, c.eps, grid, c.N_t);
  std::ostringstream csv;
  csv << "# grid," << format_double(grid.origin.x()) << ','
      << format_double(grid.origin.y()) << ',' << format_double(grid.h) << ','
      << grid.nx << ',' << grid.ny << "\nrow,col,s\n";
  json bins = json::object();
  for (const auto& [s, mask] : part.bins) {
    bins[std::to_string(s)] = mask.count();
    for (int i = 0; i < grid.ny; ++i)
      for (int j = 0; j < grid.nx; ++j)
        if (mask.test(i, j)) csv << i << ',' << j << ',' << s << '\n';
  }
  em.text("omega_partition.csv", csv.str());

  json j;
  j["field"] = field.label;
  j["grid_n"] = c.grid_n;
  j["eps_set"] = eps_set;
  j["omega_eps"] = c.eps;
  j["sup_Mf"] = Mf.linf();
  j["bins"] = std::move(bins);
  j["degenerate_cells"] = part.degenerate.count();
  em.text("maximal.json", j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// scenario: weak-type
// ---------------------------------------------------------------------------
void run_weak_type(const ExperimentConfig& c, Emitter& em) {
  const FieldSpec field = resolve_field(c);
  const GridSpec grid = square_grid_over(field.domain, c.grid_n);

  FamilyParams params;
  params.rule = WidthRule::ThetaClass;
  params.center_stride = c.center_stride;
  params.n_alpha = c.n_alpha;
  params.lengths = c.lengths;
  params.theta = c.theta;
  params.delta = c.delta;
  const CandidateFamily family = enumerate_family(field, grid, params);

  // The 100/delta bound is measure-theoretically forced only when the grid
  // resolves every admissible rectangle's 10-fold dilation.
  int admissible = 0;
  std::vector<const Candidate*> adm;
  for (const Candidate& cand : family.members) {
    if (!cand.delta_admissible) continue;
    ++admissible;
    adm.push_back(&cand);
    if (resolvability_margin(cand.rect, grid) <= 0)
      throw ScenarioFailure(
          "weak-type: an admissible rectangle is too thin for the grid "
          "(raster dilation may exceed 100|R|); enlarge lengths or grid_n");
  }
  if (admissible == 0)
    throw ScenarioFailure(
        "weak-type: family has no admissible members; widen the candidate "
        "enumeration");

  const double bound = 100.0 / c.delta;
  std::ostringstream csv;
  csv << "f,lambda,superlevel_measure,ratio\n";
  json ratios = json::object();

  auto audit = [&](const std::string& label, const GridFunction& f) {
    const MaximalResult res = tilde_maximal(family, f);
    const Eigen::VectorXd lambdas =
        default_lambda_grid(res.M, c.lambda_count);
    const double ratio = weak_type_ratio(res.M, f, lambdas);
    const double h2 = grid.h * grid.h;
    for (int k = 0; k < lambdas.size(); ++k) {
      const double lam = lambdas[k];
      const double meas =
          static_cast<double>((res.M.values > lam).count()) * h2;
      csv << label << ',' << csv_cell(lam) << ',' << csv_cell(meas) << ','
          << csv_cell(lam * meas / f.l1()) << '\n';
    }
    ratios[label] = ratio;
    if (!(ratio <= bound))
      throw ScenarioFailure("weak-type: ratio " + format_double(ratio) +
                            " exceeds 100/delta = " + format_double(bound) +
                            " on f = " + label);
  };

  // Spikes sit inside covered populations so the audits are non-vacuous
  // (a spike no admissible rectangle sees has M identically zero).
  auto spike = [](GridFunction& f, const Candidate& cand) {
    const auto cell = *cand.V.first_set_cell();
    f.values(cell.first, cell.second) = 1;
  };
  GridFunction one = GridFunction::zeros(grid);
  spike(one, *adm.front());
  audit("one_cell", one);

  GridFunction three = GridFunction::zeros(grid);
  spike(three, *adm.front());
  spike(three, *adm[adm.size() / 2]);
  spike(three, *adm.back());
  audit("three_cells", three);

  GridFunction sparse = GridFunction::zeros(grid);
  Rng rng(c.seed);
  const int n_spikes = std::max(1, grid.nx * grid.ny / 100);
  for (int k = 0; k < n_spikes; ++k) {
    const auto idx = rng.below(static_cast<std::uint64_t>(grid.nx) * grid.ny);
    sparse.values(static_cast<int>(idx) / grid.nx,
                  static_cast<int>(idx) % grid.nx) += rng.uniform();
  }
  audit("sparse", sparse);

  em.text("weak_type.csv", csv.str());
  json j;
  j["field"] = field.label;
  j["delta"] = c.delta;
  j["theta"] = c.theta;
  j["candidates"] = family.members.size();
  j["admissible"] = admissible;
  j["bound"] = bound;
  j["ratios"] = std::move(ratios);
  j["pass"] = true;
  em.text("weak_type.json", j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// scenario: covering
// ---------------------------------------------------------------------------
void run_covering(const ExperimentConfig& c, Emitter& em) {
  if (c.n_families < 1)
    throw ConfigError("config key `n_families`: need at least 1");
  std::ostringstream chain_csv;
  chain_csv << "family,seed,members,selected,K,sumRp,sumR100,sumV_over_delta,"
               "bound,pass\n";
  const Rng root(c.seed);
  bool first_written = false;
  for (int k = 0; k < c.n_families; ++k) {
    FamilyGenConfig gen;
    gen.grid_n = c.grid_n;
    gen.max_members = c.max_members;
    gen.delta = c.delta;
    gen.theta = c.theta;
    gen.seed = root.fork(static_cast<std::uint64_t>(k)).seed();
    const AdmissibleFamily family = generate_random_family(gen);
    const CoveringCertificate cert =
        covering_certificate(family, gen.seed, c.hash());
    chain_csv << k << ',' << gen.seed << ',' << family.members.size() << ','
              << cert.selected.size() << ',' << csv_cell(cert.chain.K) << ','
              << csv_cell(cert.chain.sumRp) << ','
              << csv_cell(cert.chain.sumR100) << ','
              << csv_cell(cert.chain.sumV_over_delta) << ','
              << csv_cell(cert.chain.bound) << ',' << (cert.pass ? 1 : 0)
              << '\n';
    if (!cert.pass) {
      const ChainNumbers& ch = cert.chain;
      std::string what = "covering: certificate failed for family " +
                         std::to_string(k);
      if (!ch.holds01)
        what += ": |K| > sum|R'|: " + format_double(ch.K) + " > " +
                format_double(ch.sumRp);
      else if (!ch.holds12)
        what += ": sum|R'| > 100 sum|R|: " + format_double(ch.sumRp) + " > " +
                format_double(ch.sumR100);
      else if (!ch.holds23)
        what += ": 100 sum|R| > (100/delta) sum|V|: " +
                format_double(ch.sumR100) + " > " +
                format_double(ch.sumV_over_delta);
      else if (!ch.holds34)
        what += ": (100/delta) sum|V| > bound: " +
                format_double(ch.sumV_over_delta) + " > " +
                format_double(ch.bound);
      else if (!cert.cover_exact)
        what += ": a population cell escapes the dilation union";
      else
        what += ": a containment-evidence assertion failed";
      throw ScenarioFailure(what);
    }
    if (!first_written) {
      write_certificate_json(em.path("certificate.json"), cert);
      em.note("certificate.json");
      std::ostringstream ev;
      ev << "member,contained_in,slack,phi0,phi1,phi2,low_margin,pass\n";
      for (const ContainmentEvidence& e : cert.pair_evidence)
        ev << e.member << ',' << e.blocker << ',' << csv_cell(e.slack) << ','
           << csv_cell(e.phi0) << ',' << csv_cell(e.phi1) << ','
           << csv_cell(e.phi2) << ',' << (e.low_margin ? 1 : 0) << ','
           << (e.pass ? 1 : 0) << '\n';
      em.text("evidence.csv", ev.str());
      first_written = true;
    }
  }
  em.text("chain_slack.csv", chain_csv.str());

  json j;
  j["n_families"] = c.n_families;
  j["grid_n"] = c.grid_n;
  j["delta"] = c.delta;
  j["theta"] = c.theta;
  j["max_members"] = c.max_members;
  j["all_pass"] = true;
  em.text("covering.json", j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// scenario: scale-sum
// ---------------------------------------------------------------------------
void run_scale_sum(const ExperimentConfig& c, Emitter& em) {
  GridSpec grid{{0, 0}, 1.0 / c.grid_n, c.grid_n, c.grid_n};
  Rng rng(c.seed);
  const GridFunction f = random_grid_function(grid, rng);

  std::ostringstream csv;
  csv << "weights,divergent,lhs,weight_sum,f_norm2,rhs,holds\n";
  auto row = [&](const DecayShape& shape, const ScaleSumRecord& rec) {
    csv << shape.label() << ',' << (rec.divergent ? 1 : 0) << ','
        << csv_cell(rec.lhs) << ',' << csv_cell(rec.weight_sum) << ','
        << csv_cell(rec.f_norm2) << ',' << csv_cell(rec.rhs) << ','
        << (rec.holds ? 1 : 0) << '\n';
  };

  const ScaleSumRecord main_rec =
      scale_sum_audit(f, DecayShape::logpoly(c.p), c.J);
  row(DecayShape::logpoly(c.p), main_rec);
  if (main_rec.divergent)
    throw ConfigError("config key `p`: must be > 1 for a convergent weight sum");
  if (!main_rec.holds)
    throw ScenarioFailure("scale-sum: weighted band sum " +
                          format_double(main_rec.lhs) + " exceeds bound " +
                          format_double(main_rec.rhs));

  const ScaleSumRecord harmonic =
      scale_sum_audit(f, DecayShape::logpoly(1), c.J);
  row(DecayShape::logpoly(1), harmonic);
  if (!harmonic.divergent)
    throw ScenarioFailure("scale-sum: p = 1 was not flagged divergent");

  const ScaleSumRecord explog =
      scale_sum_audit(f, DecayShape::explog(1, 1), c.J);
  row(DecayShape::explog(1, 1), explog);
  if (!explog.holds)
    throw ScenarioFailure("scale-sum: exp-log weighted sum " +
                          format_double(explog.lhs) + " exceeds bound " +
                          format_double(explog.rhs));
  em.text("scale_sum.csv", csv.str());

  json j;
  j["n"] = c.grid_n;
  j["J"] = c.J;
  j["p"] = c.p;
  j["lhs"] = main_rec.lhs;
  j["weight_sum"] = main_rec.weight_sum;
  j["rhs"] = main_rec.rhs;
  j["harmonic_divergent"] = harmonic.divergent;
  j["pass"] = true;
  em.text("scale_sum.json", j.dump(2) + "\n");
}

}  // namespace

// ---------------------------------------------------------------------------
// ExperimentConfig
// ---------------------------------------------------------------------------

ExperimentConfig ExperimentConfig::defaults_for(const std::string& scenario) {
  ExperimentConfig c;
  c.scenario = scenario;
  if (scenario == "audit-decay") {
    c.eps = 0.5;
    c.shapes = {DecayShape::power(1), DecayShape::explog(1, 1),
                DecayShape::logpoly(2), DecayShape::iterlog(2, 2)};
  } else if (scenario == "doubling") {
    c.shapes = {DecayShape::logpoly(2)};
  } else if (scenario == "balance") {
    c.shapes = {DecayShape::logpoly(2), DecayShape::explog(1, 1)};
    c.Tdelta_values = {std::exp(1.0), std::exp(2.0), std::exp(3.0), 10.0};
  } else if (scenario == "kernel-split") {
    c.tau.kind = "default";
  } else if (scenario == "lp") {
    // defaults as-is
  } else if (scenario == "maximal") {
    c.grid_n = 128;
    c.N_t = 256;
    c.eps_ref = -1;  // auto: largest power of two within epsilon0
    c.eps = 0.0625;
  } else if (scenario == "weak-type") {
    c.field = "constant";
  } else if (scenario == "covering") {
    // defaults as-is
  } else if (scenario == "scale-sum") {
    // defaults as-is
  } else {
    throw ConfigError("unknown scenario `" + scenario +
                      "` (expected one of: audit-decay, doubling, balance, "
                      "kernel-split, lp, maximal, weak-type, covering, "
                      "scale-sum)");
  }
  return c;
}

namespace {

double want_double(const json& v, const std::string& key) {
  if (!v.is_number())
    throw ConfigError("config key `" + key + "`: expected a number");
  return v.get<double>();
}

int want_int(const json& v, const std::string& key) {
  if (!v.is_number_integer())
    throw ConfigError("config key `" + key + "`: expected an integer");
  return v.get<int>();
}

std::string want_string(const json& v, const std::string& key) {
  if (!v.is_string())
    throw ConfigError("config key `" + key + "`: expected a string");
  return v.get<std::string>();
}

std::vector<double> want_double_list(const json& v, const std::string& key) {
  if (!v.is_array())
    throw ConfigError("config key `" + key + "`: expected an array of numbers");
  std::vector<double> out;
  for (const auto& e : v) out.push_back(want_double(e, key));
  return out;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json_text(
    const std::string& text, const std::string& fallback_scenario) {
  json j;
  try {
    j = json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config JSON parse error: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");

  std::string scenario = fallback_scenario;
  if (j.contains("scenario")) {
    const std::string own = want_string(j["scenario"], "scenario");
    if (!fallback_scenario.empty() && own != fallback_scenario)
      throw ConfigError("config key `scenario`: `" + own +
                        "` does not match the subcommand `" +
                        fallback_scenario + "`");
    scenario = own;
  }
  if (scenario.empty())
    throw ConfigError("config key `scenario`: missing (and no subcommand)");

  ExperimentConfig c = defaults_for(scenario);
  for (const auto& [key, value] : j.items()) {
    if (key == "scenario") {
    } else if (key == "seed") {
      if (!value.is_number_unsigned())
        throw ConfigError("config key `seed`: expected an unsigned integer");
      c.seed = value.get<std::uint64_t>();
    } else if (key == "workers") {
      c.workers = want_int(value, key);
    } else if (key == "out_dir") {
      c.out_dir = want_string(value, key);
    } else if (key == "field") {
      c.field = want_string(value, key);
    } else if (key == "field_csv") {
      c.field_csv = want_string(value, key);
    } else if (key == "grid_n") {
      c.grid_n = want_int(value, key);
    } else if (key == "N_t") {
      c.N_t = want_int(value, key);
    } else if (key == "eps") {
      c.eps = want_double(value, key);
    } else if (key == "eps_ref") {
      c.eps_ref = want_double(value, key);
    } else if (key == "eps_levels") {
      c.eps_levels = want_int(value, key);
    } else if (key == "tau") {
      if (!value.is_object())
        throw ConfigError("config key `tau`: expected an object");
      for (const auto& [tk, tv] : value.items()) {
        if (tk == "kind")
          c.tau.kind = want_string(tv, "tau.kind");
        else if (tk == "count")
          c.tau.count = want_int(tv, "tau.count");
        else
          throw ConfigError("config key `tau." + tk + "`: unknown key");
      }
    } else if (key == "shapes") {
      if (!value.is_array())
        throw ConfigError("config key `shapes`: expected an array");
      c.shapes.clear();
      for (const auto& sj : value) {
        try {
          c.shapes.push_back(shape_from_json_text(sj.dump()));
        } catch (const std::exception& e) {
          throw ConfigError(std::string("config key `shapes`: ") + e.what());
        }
      }
    } else if (key == "delta") {
      c.delta = want_double(value, key);
    } else if (key == "theta") {
      c.theta = want_double(value, key);
    } else if (key == "lambda_count") {
      c.lambda_count = want_int(value, key);
    } else if (key == "lengths") {
      c.lengths = want_double_list(value, key);
    } else if (key == "center_stride") {
      c.center_stride = want_int(value, key);
    } else if (key == "n_alpha") {
      c.n_alpha = want_int(value, key);
    } else if (key == "a_values") {
      c.a_values = want_double_list(value, key);
    } else if (key == "Tdelta_values") {
      c.Tdelta_values = want_double_list(value, key);
    } else if (key == "p") {
      c.p = want_double(value, key);
    } else if (key == "J") {
      c.J = want_int(value, key);
    } else if (key == "n_families") {
      c.n_families = want_int(value, key);
    } else if (key == "max_members") {
      c.max_members = want_int(value, key);
    } else {
      throw ConfigError("config key `" + key + "`: unknown key");
    }
  }

  if (c.workers < 1 || c.workers > 256)
    throw ConfigError("config key `workers`: expected 1..256");
  if (c.grid_n < 8 || c.grid_n > 4096)
    throw ConfigError("config key `grid_n`: expected 8..4096");
  if (c.N_t < 64 || c.N_t % 2 != 0 || c.N_t > (1 << 20))
    throw ConfigError("config key `N_t`: expected an even value >= 64");
  if (!(c.eps > 0)) throw ConfigError("config key `eps`: must be positive");
  if (c.eps_levels < 0 || c.eps_levels > 40)
    throw ConfigError("config key `eps_levels`: expected 0..40");
  if (c.tau.kind != "aligned" && c.tau.kind != "default")
    throw ConfigError("config key `tau.kind`: expected aligned or default");
  if (c.tau.count < 32 || c.tau.count > 4096)
    throw ConfigError("config key `tau.count`: expected 32..4096");
  if (!(c.delta > 0 && c.delta <= 1))
    throw ConfigError("config key `delta`: expected a value in (0, 1]");
  if (!(c.theta > 0 && c.theta < 0.5))
    throw ConfigError("config key `theta`: expected a value in (0, 0.5)");
  if (c.lambda_count < 2 || c.lambda_count > 4096)
    throw ConfigError("config key `lambda_count`: expected 2..4096");
  if (c.lengths.empty())
    throw ConfigError("config key `lengths`: must be nonempty");
  for (double L : c.lengths)
    if (!(L > 0)) throw ConfigError("config key `lengths`: must be positive");
  if (c.center_stride < 1)
    throw ConfigError("config key `center_stride`: must be >= 1");
  if (c.n_alpha < 1 || c.n_alpha > 512)
    throw ConfigError("config key `n_alpha`: expected 1..512");
  if (c.J < 1 || c.J > 1000)
    throw ConfigError("config key `J`: expected 1..1000");
  if (c.n_families < 1 || c.n_families > 10000)
    throw ConfigError("config key `n_families`: expected 1..10000");
  if (c.max_members < 1 || c.max_members > 4096)
    throw ConfigError("config key `max_members`: expected 1..4096");
  return c;
}

ExperimentConfig ExperimentConfig::from_json_file(
    const std::string& path, const std::string& fallback_scenario) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return from_json_text(text, fallback_scenario);
}

std::string ExperimentConfig::canonical_json() const {
  // out_dir and workers are execution knobs, not experiment identity: outputs
  // must be byte-identical across worker counts and output locations, and
  // config.json / the config hash are themselves outputs.
  json j;
  j["scenario"] = scenario;
  j["seed"] = seed;
  j["field"] = field;
  j["field_csv"] = field_csv;
  j["grid_n"] = grid_n;
  j["N_t"] = N_t;
  j["eps"] = eps;
  j["eps_ref"] = eps_ref;
  j["eps_levels"] = eps_levels;
  j["tau"] = {{"kind", tau.kind}, {"count", tau.count}};
  j["shapes"] = json::array();
  for (const DecayShape& s : shapes)
    j["shapes"].push_back(json::parse(shape_to_json_text(s)));
  j["delta"] = delta;
  j["theta"] = theta;
  j["lambda_count"] = lambda_count;
  j["lengths"] = lengths;
  j["center_stride"] = center_stride;
  j["n_alpha"] = n_alpha;
  j["a_values"] = a_values;
  j["Tdelta_values"] = Tdelta_values;
  j["p"] = p;
  j["J"] = J;
  j["n_families"] = n_families;
  j["max_members"] = max_members;
  return j.dump();
}

std::uint64_t ExperimentConfig::hash() const {
  const std::string s = canonical_json();
  return fnv1a64(s.data(), s.size());
}

// ---------------------------------------------------------------------------
// runner
// ---------------------------------------------------------------------------

RunManifest run_scenario(const ExperimentConfig& config) {
  RunManifest man;
  man.scenario = config.scenario;
  man.config_hash = config.hash();
  man.seed = config.seed;
  man.generator = std::string(kGeneratorName);
  man.workers = config.workers;
  man.started_utc = now_utc();

  std::error_code ec;
  fs::create_directories(config.out_dir, ec);
  if (ec)
    throw ConfigError("config key `out_dir`: cannot create `" +
                      config.out_dir + "`: " + ec.message());

  Emitter em(config.out_dir);
  em.text("config.json", config.canonical_json() + "\n");

  if (config.scenario == "audit-decay") run_audit_decay(config, em);
  else if (config.scenario == "doubling") run_doubling(config, em);
  else if (config.scenario == "balance") run_balance(config, em);
  else if (config.scenario == "kernel-split") run_kernel_split(config, em);
  else if (config.scenario == "lp") run_lp(config, em);
  else if (config.scenario == "maximal") run_maximal(config, em);
  else if (config.scenario == "weak-type") run_weak_type(config, em);
  else if (config.scenario == "covering") run_covering(config, em);
  else if (config.scenario == "scale-sum") run_scale_sum(config, em);
  else
    throw ConfigError("unknown scenario `" + config.scenario + "`");

  man.files = em.files();
  man.finished_utc = now_utc();

  json mj;
  mj["artifact_version"] = man.artifact_version;
  mj["generator"] = man.generator;
  mj["scenario"] = man.scenario;
  mj["config_hash"] = hex_u64(man.config_hash);
  mj["seed"] = man.seed;
  mj["workers"] = man.workers;
  mj["started_utc"] = man.started_utc;
  mj["finished_utc"] = man.finished_utc;
  mj["files"] = json::array();
  for (const EmittedFile& f : man.files)
    mj["files"].push_back({{"name", f.name},
                           {"bytes", f.bytes},
                           {"fnv1a64", hex_u64(f.checksum)}});
  write_text_file(config.out_dir + "/manifest.json", mj.dump(2) + "\n");
  return man;
}

// ---------------------------------------------------------------------------
// catalog + plotdata
// ---------------------------------------------------------------------------

std::string catalog_text() {
  return
      "field kinds (catalog labels in brackets):\n"
      "  constant        [constant]  v(x) = (v0x, v0y), v0 nonzero\n"
      "  rotation        [rotation]  v(x) = (-x2, x1)\n"
      "  shear_monomial  [shear2]    v(x) = (1, x1^k), integer k >= 1\n"
      "  shear_flat      [flat]      v(x) = (1, sgn(x1) exp(-1/|x1|^gamma)),"
      " gamma in (0,1)\n"
      "  grid_sampled    [noise,csv] bilinear lattice of samples (CSV header"
      " x,y,vx,vy)\n";
}

std::string catalog_json() {
  json j;
  j["kinds"] = json::array({
      json{{"name", "constant"},
           {"labels", {"constant"}},
           {"params", {{"v0x", "real, (v0x,v0y) nonzero"},
                       {"v0y", "real"}}},
           {"formula", "v(x) = (v0x, v0y)"}},
      json{{"name", "rotation"},
           {"labels", {"rotation"}},
           {"params", json::object()},
           {"formula", "v(x) = (-x2, x1)"}},
      json{{"name", "shear_monomial"},
           {"labels", {"shear2"}},
           {"params", {{"k", "integer >= 1"}}},
           {"formula", "v(x) = (1, x1^k)"}},
      json{{"name", "shear_flat"},
           {"labels", {"flat"}},
           {"params", {{"gamma", "real in (0,1)"}}},
           {"formula", "v(x) = (1, sgn(x1) exp(-1/|x1|^gamma))"}},
      json{{"name", "grid_sampled"},
           {"labels", {"noise", "csv"}},
           {"params", {{"field_csv", "path to x,y,vx,vy lattice CSV"}}},
           {"formula", "bilinear interpolation between lattice nodes"}},
  });
  j["config_field_labels"] =
      json::array({"constant", "rotation", "shear2", "flat", "noise", "csv"});
  return j.dump(2) + "\n";
}

void emit_plotdata(const std::string& kind, const std::string& result_path,
                   const std::string& out_path) {
  if (kind == "decay") {
    std::istringstream in(read_text_file(result_path));
    std::string line;
    if (!std::getline(in, line) ||
        line != "shape,field,x1,x2,eps,tau,measure,envelope,ratio")
      throw std::runtime_error(result_path +
                               ": not a decay_sweep.csv (header mismatch, artifact version " +
                               std::string(kArtifactVersion) + ")");
    std::string first_shape;
    std::map<double, std::pair<double, double>> best;  // tau -> (ratio, env)
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::vector<std::string> f;
      std::size_t start = 0;
      while (true) {
        std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
          f.push_back(line.substr(start));
          break;
        }
        f.push_back(line.substr(start, comma - start));
        start = comma + 1;
      }
      if (f.size() < 9)
        throw std::runtime_error(result_path + ": malformed sweep row (artifact version " +
                                 std::string(kArtifactVersion) + ")");
      if (f.size() > 9) {
        // Shape labels of two-parameter regimes contain a comma (for example
        // explog(1,1)); the trailing eight columns are comma-free, so fold
        // the surplus pieces back into the shape column.
        std::size_t extra = f.size() - 9;
        for (std::size_t i = 1; i <= extra; ++i) f[0] += "," + f[i];
        f.erase(f.begin() + 1, f.begin() + 1 + static_cast<std::ptrdiff_t>(extra));
      }
      if (first_shape.empty()) first_shape = f[0];
      if (f[0] != first_shape) continue;
      const double tau = parse_double(f[5]);
      const double env = parse_double(f[7]);
      const double ratio = parse_double(f[8]);
      auto [it, fresh] = best.try_emplace(tau, ratio, env);
      if (!fresh && ratio > it->second.first) it->second.first = ratio;
    }
    std::ostringstream out;
    out << "tau,ratio,envelope\n";
    for (const auto& [tau, re] : best)
      out << format_double(tau) << ',' << format_double(re.first) << ','
          << format_double(re.second) << '\n';
    write_text_file(out_path, out.str());
  } else if (kind == "omega") {
    std::istringstream in(read_text_file(result_path));
    std::string line;
    if (!std::getline(in, line) || line.rfind("# grid,", 0) != 0)
      throw std::runtime_error(result_path +
                               ": not an omega_partition.csv (no grid header, artifact version " +
                               std::string(kArtifactVersion) + ")");
    if (!std::getline(in, line) || line != "row,col,s")
      throw std::runtime_error(result_path +
                               ": not an omega_partition.csv (header mismatch, artifact version " +
                               std::string(kArtifactVersion) + ")");
    std::ostringstream out;
    out << "row,col,s\n";
    while (std::getline(in, line))
      if (!line.empty()) out << line << '\n';
    write_text_file(out_path, out.str());
  } else if (kind == "certificate") {
    const CoveringCertificate cert = read_certificate_json(result_path);
    std::ostringstream out;
    out << "member,contained_in,slack\n";
    for (const ContainmentEvidence& e : cert.pair_evidence)
      out << e.member << ',' << e.blocker << ',' << format_double(e.slack)
          << '\n';
    write_text_file(out_path, out.str());
  } else {
    throw ConfigError("plotdata kind `" + kind +
                      "`: expected decay, omega, or certificate");
  }
}

}  // namespace dirmax
