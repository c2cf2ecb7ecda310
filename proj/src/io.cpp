#include "dirmax/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "dirmax/rng.hpp"

namespace dirmax {

using json = nlohmann::ordered_json;

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::ifstream open_in(const std::string& path, std::ios::openmode mode) {
  std::ifstream in(path, mode);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  return in;
}

std::ofstream open_out(const std::string& path, std::ios::openmode mode) {
  std::ofstream out(path, mode);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  return out;
}

GridSpec parse_grid_header(const std::string& line, const std::string& path) {
  const std::string prefix = "# grid,";
  if (line.rfind(prefix, 0) != 0)
    throw std::runtime_error(path + ": missing `# grid,...` header line");
  const auto f = split_csv_line(line.substr(prefix.size()));
  if (f.size() != 5)
    throw std::runtime_error(path + ": grid header needs 5 fields");
  GridSpec g;
  g.origin = {parse_double(f[0]), parse_double(f[1])};
  g.h = parse_double(f[2]);
  g.nx = std::stoi(f[3]);
  g.ny = std::stoi(f[4]);
  if (g.h <= 0 || g.nx < 1 || g.ny < 1)
    throw std::runtime_error(path + ": degenerate grid header");
  return g;
}

std::string grid_header(const GridSpec& g) {
  return "# grid," + format_double(g.origin.x()) + "," +
         format_double(g.origin.y()) + "," + format_double(g.h) + "," +
         std::to_string(g.nx) + "," + std::to_string(g.ny) + "\n";
}

json shape_to_json(const DecayShape& s) {
  json j;
  switch (s.kind) {
    case DecayKind::Power:
      j["kind"] = "power";
      j["expo"] = s.expo;
      break;
    case DecayKind::ExpLog:
      j["kind"] = "explog";
      j["sigma"] = s.sigma;
      j["c1"] = s.c1;
      break;
    case DecayKind::LogPoly:
      j["kind"] = "logpoly";
      j["p"] = s.p;
      break;
    case DecayKind::IterLog:
      j["kind"] = "iterlog";
      j["p"] = s.p;
      j["depth"] = s.depth;
      break;
  }
  return j;
}

DecayShape shape_from_json(const json& j) {
  if (!j.is_object() || !j.contains("kind"))
    throw std::runtime_error("decay shape JSON needs a `kind` key");
  const std::string kind = j.at("kind").get<std::string>();
  for (const auto& [key, _] : j.items()) {
    static const char* known[] = {"kind", "expo", "sigma", "c1", "p", "depth"};
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw std::runtime_error("decay shape JSON: unknown key `" + key + "`");
  }
  if (kind == "power") return DecayShape::power(j.value("expo", 1.0));
  if (kind == "explog")
    return DecayShape::explog(j.value("sigma", 1.0), j.value("c1", 1.0));
  if (kind == "logpoly") return DecayShape::logpoly(j.value("p", 2.0));
  if (kind == "iterlog")
    return DecayShape::iterlog(j.value("p", 2.0), j.value("depth", 2));
  throw std::runtime_error("decay shape JSON: unknown kind `" + kind + "`");
}

void put_u32(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4];
  std::memcpy(b, &v, 4);
  out.write(reinterpret_cast<char*>(b), 4);
}

void put_f64(std::ofstream& out, double v) {
  unsigned char b[8];
  std::memcpy(b, &v, 8);
  out.write(reinterpret_cast<char*>(b), 8);
}

std::uint32_t get_u32(std::ifstream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw std::runtime_error(path + ": truncated binary grid file");
  std::uint32_t v;
  std::memcpy(&v, b, 4);
  return v;
}

double get_f64(std::ifstream& in, const std::string& path) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8))
    throw std::runtime_error(path + ": truncated binary grid file");
  double v;
  std::memcpy(&v, b, 8);
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) {
  if (s.empty()) throw std::runtime_error("empty numeric field");
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size())
    throw std::runtime_error("bad numeric field: `" + s + "`");
  return v;
}

void write_grid_csv(const std::string& path, const GridFunction& f) {
  auto out = open_out(path, std::ios::binary);
  out << grid_header(f.grid) << "row,col,value\n";
  for (int i = 0; i < f.grid.ny; ++i)
    for (int j = 0; j < f.grid.nx; ++j)
      out << i << ',' << j << ',' << format_double(f.values(i, j)) << '\n';
}

GridFunction read_grid_csv(const std::string& path) {
  auto in = open_in(path, std::ios::binary);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error(path + ": empty grid CSV");
  GridFunction f = GridFunction::zeros(parse_grid_header(line, path));
  if (!std::getline(in, line) || line != "row,col,value")
    throw std::runtime_error(path + ": missing row,col,value header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 3)
      throw std::runtime_error(path + ": malformed row `" + line + "`");
    const int i = std::stoi(cells[0]), j = std::stoi(cells[1]);
    if (i < 0 || i >= f.grid.ny || j < 0 || j >= f.grid.nx)
      throw std::runtime_error(path + ": cell index out of range");
    f.values(i, j) = parse_double(cells[2]);
  }
  return f;
}

void write_grid_vfgf(const std::string& path, const GridFunction& f) {
  if (f.grid.nx != f.grid.ny)
    throw std::invalid_argument("binary grid layout requires a square grid");
  auto out = open_out(path, std::ios::binary);
  out.write("VFGF", 4);
  put_u32(out, static_cast<std::uint32_t>(f.grid.nx));
  put_f64(out, f.grid.origin.x());
  put_f64(out, f.grid.origin.y());
  put_f64(out, f.grid.h);
  for (int i = 0; i < f.grid.ny; ++i)
    for (int j = 0; j < f.grid.nx; ++j) put_f64(out, f.values(i, j));
}

GridFunction read_grid_vfgf(const std::string& path) {
  auto in = open_in(path, std::ios::binary);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "VFGF", 4) != 0)
    throw std::runtime_error(path + ": not a VFGF file");
  const std::uint32_t n = get_u32(in, path);
  if (n == 0 || n > (1u << 16))
    throw std::runtime_error(path + ": implausible grid size");
  GridSpec g;
  g.origin.x() = get_f64(in, path);
  g.origin.y() = get_f64(in, path);
  g.h = get_f64(in, path);
  g.nx = g.ny = static_cast<int>(n);
  GridFunction f = GridFunction::zeros(g);
  for (int i = 0; i < f.grid.ny; ++i)
    for (int j = 0; j < f.grid.nx; ++j) f.values(i, j) = get_f64(in, path);
  return f;
}

void write_mask_csv(const std::string& path, const RasterMask& mask) {
  auto out = open_out(path, std::ios::binary);
  out << grid_header(mask.grid) << "row,col\n";
  for (int i = 0; i < mask.grid.ny; ++i)
    for (int j = 0; j < mask.grid.nx; ++j)
      if (mask.test(i, j)) out << i << ',' << j << '\n';
}

RasterMask read_mask_csv(const std::string& path) {
  auto in = open_in(path, std::ios::binary);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error(path + ": empty mask CSV");
  RasterMask mask = RasterMask::empty(parse_grid_header(line, path));
  if (!std::getline(in, line) || line != "row,col")
    throw std::runtime_error(path + ": missing row,col header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 2)
      throw std::runtime_error(path + ": malformed row `" + line + "`");
    const int i = std::stoi(cells[0]), j = std::stoi(cells[1]);
    if (i < 0 || i >= mask.grid.ny || j < 0 || j >= mask.grid.nx)
      throw std::runtime_error(path + ": cell index out of range");
    mask.set(i, j);
  }
  return mask;
}

std::string shape_to_json_text(const DecayShape& shape) {
  return shape_to_json(shape).dump();
}

DecayShape shape_from_json_text(const std::string& text) {
  return shape_from_json(json::parse(text));
}

void write_decay_report_json(const std::string& path,
                             const DecayReport& report) {
  json j;
  j["shape"] = shape_to_json(report.shape);
  j["C_min"] = report.C_min;
  j["tau_grid"] = json::array();
  for (int i = 0; i < report.tau_grid.size(); ++i)
    j["tau_grid"].push_back(report.tau_grid[i]);
  j["witnesses"] = json::array();
  for (const DecayWitness& w : report.witnesses) {
    j["witnesses"].push_back({{"field", w.field_label},
                              {"x", {w.x.x(), w.x.y()}},
                              {"eps", w.eps},
                              {"tau", w.tau},
                              {"ratio", w.ratio}});
  }
  write_text_file(path, j.dump(2) + "\n");
}

DecayReport read_decay_report_json(const std::string& path) {
  const json j = json::parse(read_text_file(path));
  DecayReport r;
  r.shape = shape_from_json(j.at("shape"));
  r.C_min = j.at("C_min").get<double>();
  const auto& taus = j.at("tau_grid");
  r.tau_grid.resize(static_cast<Eigen::Index>(taus.size()));
  for (std::size_t i = 0; i < taus.size(); ++i)
    r.tau_grid[static_cast<Eigen::Index>(i)] = taus[i].get<double>();
  for (const auto& wj : j.at("witnesses")) {
    DecayWitness w;
    w.field_label = wj.at("field").get<std::string>();
    w.x = {wj.at("x")[0].get<double>(), wj.at("x")[1].get<double>()};
    w.eps = wj.at("eps").get<double>();
    w.tau = wj.at("tau").get<double>();
    w.ratio = wj.at("ratio").get<double>();
    r.witnesses.push_back(std::move(w));
  }
  return r;
}

void write_certificate_json(const std::string& path,
                            const CoveringCertificate& cert) {
  json j;
  j["config_hash"] = hex_u64(cert.config_hash);
  j["seed"] = cert.seed;
  j["selected"] = cert.selected;
  j["chain"] = {{"K", cert.chain.K},
                {"sumRp", cert.chain.sumRp},
                {"sumR100", cert.chain.sumR100},
                {"sumV_over_delta", cert.chain.sumV_over_delta},
                {"bound", cert.chain.bound},
                {"holds01", cert.chain.holds01},
                {"holds12", cert.chain.holds12},
                {"holds23", cert.chain.holds23},
                {"holds34", cert.chain.holds34}};
  j["pair_evidence"] = json::array();
  for (const ContainmentEvidence& e : cert.pair_evidence) {
    j["pair_evidence"].push_back({{"member", e.member},
                                  {"blocker", e.blocker},
                                  {"z0", {e.z0_row, e.z0_col}},
                                  {"phi0", e.phi0},
                                  {"phi1", e.phi1},
                                  {"phi2", e.phi2},
                                  {"angle_triangle", e.angle_triangle},
                                  {"angle_class", e.angle_class},
                                  {"proj_short", e.proj_short},
                                  {"proj_long", e.proj_long},
                                  {"contained_10", e.contained_10},
                                  {"slack", e.slack},
                                  {"low_margin", e.low_margin},
                                  {"pass", e.pass}});
  }
  j["cover_exact"] = cert.cover_exact;
  j["pass"] = cert.pass;
  write_text_file(path, j.dump(2) + "\n");
}

CoveringCertificate read_certificate_json(const std::string& path) {
  const json j = json::parse(read_text_file(path));
  CoveringCertificate c;
  c.config_hash = parse_hex_u64(j.at("config_hash").get<std::string>());
  c.seed = j.at("seed").get<std::uint64_t>();
  c.selected = j.at("selected").get<std::vector<int>>();
  const auto& ch = j.at("chain");
  c.chain.K = ch.at("K").get<double>();
  c.chain.sumRp = ch.at("sumRp").get<double>();
  c.chain.sumR100 = ch.at("sumR100").get<double>();
  c.chain.sumV_over_delta = ch.at("sumV_over_delta").get<double>();
  c.chain.bound = ch.at("bound").get<double>();
  c.chain.holds01 = ch.at("holds01").get<bool>();
  c.chain.holds12 = ch.at("holds12").get<bool>();
  c.chain.holds23 = ch.at("holds23").get<bool>();
  c.chain.holds34 = ch.at("holds34").get<bool>();
  for (const auto& ej : j.at("pair_evidence")) {
    ContainmentEvidence e;
    e.member = ej.at("member").get<int>();
    e.blocker = ej.at("blocker").get<int>();
    e.z0_row = ej.at("z0")[0].get<int>();
    e.z0_col = ej.at("z0")[1].get<int>();
    e.phi0 = ej.at("phi0").get<double>();
    e.phi1 = ej.at("phi1").get<double>();
    e.phi2 = ej.at("phi2").get<double>();
    e.angle_triangle = ej.at("angle_triangle").get<bool>();
    e.angle_class = ej.at("angle_class").get<bool>();
    e.proj_short = ej.at("proj_short").get<bool>();
    e.proj_long = ej.at("proj_long").get<bool>();
    e.contained_10 = ej.at("contained_10").get<bool>();
    e.slack = ej.at("slack").get<double>();
    e.low_margin = ej.at("low_margin").get<bool>();
    e.pass = ej.at("pass").get<bool>();
    c.pair_evidence.push_back(e);
  }
  c.cover_exact = j.at("cover_exact").get<bool>();
  c.pass = j.at("pass").get<bool>();
  return c;
}

std::string read_text_file(const std::string& path) {
  auto in = open_in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  auto out = open_out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("short write: " + path);
}

std::uint64_t file_checksum(const std::string& path) {
  const std::string bytes = read_text_file(path);
  return fnv1a64(bytes.data(), bytes.size());
}

std::string hex_u64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t parse_hex_u64(const std::string& s) {
  if (s.empty() || s.size() > 16)
    throw std::runtime_error("bad hex64 field: `" + s + "`");
  std::uint64_t v = 0;
  for (char c : s) {
    int d;
    if (c >= '0' && c <= '9') d = c - '0';
    else if (c >= 'a' && c <= 'f') d = c - 'a' + 10;
    else if (c >= 'A' && c <= 'F') d = c - 'A' + 10;
    else throw std::runtime_error("bad hex64 field: `" + s + "`");
    v = (v << 4) | static_cast<std::uint64_t>(d);
  }
  return v;
}

}  // namespace dirmax
