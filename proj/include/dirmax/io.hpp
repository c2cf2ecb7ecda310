#pragma once

#include <cstdint>
#include <string>

#include "dirmax/angular.hpp"
#include "dirmax/covering.hpp"
#include "dirmax/geometry.hpp"
#include "dirmax/grid_function.hpp"

namespace dirmax {

/// %.17g rendering: round-trips every finite double exactly.
std::string format_double(double v);
/// Inverse of format_double; throws on trailing garbage or empty input.
double parse_double(const std::string& s);

/// CSV layout: one comment line `# grid,<ox>,<oy>,<h>,<nx>,<ny>`, a
/// `row,col,value` header, then one line per cell in row-major order.
void write_grid_csv(const std::string& path, const GridFunction& f);
GridFunction read_grid_csv(const std::string& path);

/// Compact binary layout (little-endian): magic "VFGF", u32 n for an n x n
/// grid, f64 origin_x, origin_y, spacing, then n*n row-major f64 values.
void write_grid_vfgf(const std::string& path, const GridFunction& f);
GridFunction read_grid_vfgf(const std::string& path);

/// CSV layout: the same grid comment line, a `row,col` header, then one line
/// per set cell in row-major order.
void write_mask_csv(const std::string& path, const RasterMask& mask);
RasterMask read_mask_csv(const std::string& path);

/// Decay-shape serialization as a standalone JSON object, e.g.
/// {"kind":"logpoly","p":2}.
std::string shape_to_json_text(const DecayShape& shape);
DecayShape shape_from_json_text(const std::string& text);

void write_decay_report_json(const std::string& path,
                             const DecayReport& report);
DecayReport read_decay_report_json(const std::string& path);

/// Certificate schema: {config_hash, seed, selected[], chain:{K, sumRp,
/// sumR100, sumV_over_delta, bound}, pair_evidence[], cover_exact, pass}.
/// Hashes are hex strings; evidence entries carry the angle/projection
/// numbers and flags.
void write_certificate_json(const std::string& path,
                            const CoveringCertificate& cert);
CoveringCertificate read_certificate_json(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

/// FNV-1a 64 over the file's bytes.
std::uint64_t file_checksum(const std::string& path);
std::string hex_u64(std::uint64_t v);
std::uint64_t parse_hex_u64(const std::string& s);

}  // namespace dirmax
