#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "hmrf_icp/benchmark.hpp"
#include "hmrf_icp/geometry.hpp"
#include "hmrf_icp/hmrf_em.hpp"
#include "hmrf_icp/icp.hpp"

namespace hmrf_icp {

inline constexpr double kTumDepthScale = 5000.0;  // ticks per meter

// ---- PLY (ASCII only) ----

/// Vertex x/y/z of an ASCII PLY; other properties and elements are skipped.
FixedCloud read_ply(const std::string& path);
FixedCloud read_ply(std::istream& in);

/// Like read_ply, but restores the pixel lattice written by write_ply for a
/// StructuredCloud ("comment lattice W H" plus a per-vertex pixel index).
/// Files without that metadata become a 1 x N lattice.
StructuredCloud read_structured_ply(const std::string& path);
StructuredCloud read_structured_ply(std::istream& in);

void write_ply(const std::string& path, const FixedCloud& cloud);
/// Writes the valid points. With labels, vertices are tinted dark blue for
/// inliers (z~ > 0) and light blue for outliers.
void write_ply(const std::string& path, const StructuredCloud& cloud, const MeanField* labels = nullptr);
void write_ply(std::ostream& out, const StructuredCloud& cloud, const MeanField* labels = nullptr);

// ---- PNG ----

/// Single-channel 16-bit PNG; depth = tick / scale, tick 0 is invalid.
DepthMap read_depth_png16(const std::string& path, double scale_ticks_per_meter = kTumDepthScale);
void write_depth_png16(const std::string& path, const DepthMap& map, double scale_ticks_per_meter = kTumDepthScale);

/// 8-bit grayscale image of the field: z~ = -1 -> 0, z~ = +1 -> 255.
/// Unobserved pixels are written as 0; see write_unobserved_mask_png.
void write_field_png(const std::string& path, const MeanField& field);
/// 255 where the lattice has no valid pixel, 0 elsewhere.
void write_unobserved_mask_png(const std::string& path, const Lattice& lattice);

// ---- transforms ----

/// 4x4 row-major matrix, whitespace separated.
RigidTransform read_transform(const std::string& path);
RigidTransform parse_transform(std::istream& in);
void write_transform(const std::string& path, const RigidTransform& t);
void write_transform(std::ostream& out, const RigidTransform& t);

// ---- tables ----

using ResultsTable = std::vector<BenchmarkRecord>;

/// Column prefixes in table order.
const std::vector<std::string>& results_strategy_columns();
std::string results_csv_header();

/// overlap, then <s>_t_err, <s>_r_err, <s>_iters, <s>_time for each strategy
/// column. Floats use 17 significant digits; strategies absent from a record
/// leave their cells empty.
void write_results_csv(const std::string& path, const ResultsTable& table);
void write_results_csv(std::ostream& out, const ResultsTable& table);
ResultsTable read_results_csv(const std::string& path);
ResultsTable read_results_csv(std::istream& in);

/// Per-overlap-decile medians of every error, iteration and time column.
void write_decile_summary_csv(std::ostream& out, const ResultsTable& table);
void write_decile_summary_csv(const std::string& path, const ResultsTable& table);

/// One row per ICP iteration of a registration.
void write_trace_csv(std::ostream& out, const IcpResult& result);
void write_trace_csv(const std::string& path, const IcpResult& result);

/// "%.17g"
std::string format_double(double v);

}  // namespace hmrf_icp
