#include "hmrf_icp/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

#include <png.h>

#include "hmrf_icp/errors.hpp"
#include "hmrf_icp/rejection.hpp"

namespace hmrf_icp {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  return out;
}

void finish(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw IoError("failed writing '" + path + "'");
}

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  for (std::string tok; ss >> tok;) out.push_back(tok);
  return out;
}

double parse_number(const std::string& tok, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ParseError("invalid number '" + tok + "'", line);
  }
}

// ---- PLY ----

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<std::string> properties;
  bool has_list = false;
};

struct PlyCloud {
  std::vector<Point3> points;
  std::vector<long long> pixels;  // empty unless a "pixel" property exists
  std::optional<std::pair<int, int>> lattice;
};

const std::vector<std::string> kScalarTypes = {"char",  "uchar",  "short",   "ushort",  "int",     "uint",
                                               "float", "double", "int8",    "uint8",   "int16",   "uint16",
                                               "int32", "uint32", "float32", "float64"};

PlyCloud parse_ply(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&](bool required) {
    if (!std::getline(in, line)) {
      if (required) throw ParseError("unexpected end of PLY file", line_no + 1);
      return false;
    }
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };

  next_line(true);
  if (line != "ply") throw ParseError("missing 'ply' magic", line_no);

  PlyCloud cloud;
  std::vector<PlyElement> elements;
  bool saw_format = false;
  while (true) {
    next_line(true);
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok[0] == "end_header") break;
    if (tok[0] == "format") {
      if (tok.size() < 3) throw ParseError("malformed format line", line_no);
      if (tok[1] != "ascii") throw ParseError("unsupported PLY format '" + tok[1] + "' (only ascii)", line_no);
      saw_format = true;
    } else if (tok[0] == "comment" || tok[0] == "obj_info") {
      if (tok.size() == 4 && tok[0] == "comment" && tok[1] == "lattice")
        cloud.lattice = {static_cast<int>(parse_number(tok[2], line_no)),
                         static_cast<int>(parse_number(tok[3], line_no))};
    } else if (tok[0] == "element") {
      if (tok.size() != 3) throw ParseError("malformed element line", line_no);
      const double count = parse_number(tok[2], line_no);
      if (count < 0 || count != std::floor(count)) throw ParseError("invalid element count", line_no);
      elements.push_back(PlyElement{tok[1], static_cast<std::size_t>(count), {}, false});
    } else if (tok[0] == "property") {
      if (elements.empty()) throw ParseError("property before any element", line_no);
      if (tok.size() >= 2 && tok[1] == "list") {
        if (tok.size() != 5) throw ParseError("malformed list property", line_no);
        elements.back().has_list = true;
        elements.back().properties.push_back(tok[4]);
      } else {
        if (tok.size() != 3) throw ParseError("malformed property line", line_no);
        if (std::find(kScalarTypes.begin(), kScalarTypes.end(), tok[1]) == kScalarTypes.end())
          throw ParseError("unknown property type '" + tok[1] + "'", line_no);
        elements.back().properties.push_back(tok[2]);
      }
    } else {
      throw ParseError("unexpected header keyword '" + tok[0] + "'", line_no);
    }
  }
  if (!saw_format) throw ParseError("missing format line", line_no);

  for (const PlyElement& el : elements) {
    if (el.name != "vertex") {
      for (std::size_t i = 0; i < el.count; ++i) next_line(true);
      continue;
    }
    auto column = [&](const std::string& name) -> std::ptrdiff_t {
      auto it = std::find(el.properties.begin(), el.properties.end(), name);
      return it == el.properties.end() ? -1 : it - el.properties.begin();
    };
    const std::ptrdiff_t cx = column("x"), cy = column("y"), cz = column("z"), cp = column("pixel");
    if (cx < 0 || cy < 0 || cz < 0) throw ParseError("vertex element lacks x/y/z properties");
    if (el.has_list) throw ParseError("list properties on vertices are not supported");

    cloud.points.reserve(el.count);
    for (std::size_t i = 0; i < el.count; ++i) {
      next_line(true);
      const auto tok = split_ws(line);
      if (tok.size() != el.properties.size())
        throw ParseError("expected " + std::to_string(el.properties.size()) + " values per vertex", line_no);
      Point3 p(parse_number(tok[cx], line_no), parse_number(tok[cy], line_no), parse_number(tok[cz], line_no));
      if (!p.allFinite()) throw ParseError("non-finite vertex coordinate", line_no);
      cloud.points.push_back(p);
      if (cp >= 0) cloud.pixels.push_back(static_cast<long long>(parse_number(tok[cp], line_no)));
    }
    return cloud;
  }
  throw ParseError("PLY file has no vertex element");
}

void write_ply_points(std::ostream& out, const std::vector<Point3>& pts, const std::vector<std::size_t>* pixels,
                      const std::vector<std::uint8_t>* inlier, std::optional<std::pair<int, int>> lattice) {
  out << "ply\nformat ascii 1.0\n";
  if (lattice) out << "comment lattice " << lattice->first << ' ' << lattice->second << '\n';
  out << "element vertex " << pts.size() << '\n';
  out << "property double x\nproperty double y\nproperty double z\n";
  if (pixels) out << "property int pixel\n";
  if (inlier) out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out << "end_header\n";
  for (std::size_t i = 0; i < pts.size(); ++i) {
    out << format_double(pts[i].x()) << ' ' << format_double(pts[i].y()) << ' ' << format_double(pts[i].z());
    if (pixels) out << ' ' << (*pixels)[i];
    if (inlier) out << ((*inlier)[i] ? " 20 40 160" : " 160 210 255");
    out << '\n';
  }
}

// ---- PNG ----

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct PngImage {
  int width = 0;
  int height = 0;
  int bit_depth = 0;
  int channels = 0;
  std::vector<std::uint8_t> bytes;  // rows, samples big-endian for 16 bit
};

PngImage read_png(const std::string& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw IoError("cannot open '" + path + "' for reading");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    throw ParseError("'" + path + "' is not a PNG file");

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("libpng initialization failed");
  }
  PngImage img;
  std::vector<png_bytep> rows;
  volatile bool ok = false;
  volatile bool bad_format = false;
  if (setjmp(png_jmpbuf(png)) == 0) {
    png_init_io(png, file.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    img.width = static_cast<int>(png_get_image_width(png, info));
    img.height = static_cast<int>(png_get_image_height(png, info));
    img.bit_depth = png_get_bit_depth(png, info);
    img.channels = png_get_channels(png, info);
    if (png_get_color_type(png, info) == PNG_COLOR_TYPE_PALETTE || png_get_interlace_type(png, info) != PNG_INTERLACE_NONE) {
      bad_format = true;
    } else {
      const std::size_t stride = png_get_rowbytes(png, info);
      img.bytes.resize(stride * static_cast<std::size_t>(img.height));
      rows.resize(static_cast<std::size_t>(img.height));
      for (int r = 0; r < img.height; ++r) rows[r] = img.bytes.data() + stride * r;
      png_read_image(png, rows.data());
      png_read_end(png, nullptr);
      ok = true;
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  if (bad_format) throw ParseError("'" + path + "': palette or interlaced PNGs are not supported");
  if (!ok) throw ParseError("'" + path + "': corrupt PNG data");
  return img;
}

void write_png(const std::string& path, int width, int height, int bit_depth, const std::vector<std::uint8_t>& bytes) {
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw IoError("cannot open '" + path + "' for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng initialization failed");
  }
  const std::size_t stride = std::size_t(width) * (bit_depth / 8);
  std::vector<png_bytep> rows(static_cast<std::size_t>(height));
  for (int r = 0; r < height; ++r) rows[r] = const_cast<png_bytep>(bytes.data() + stride * r);
  volatile bool ok = false;
  if (setjmp(png_jmpbuf(png)) == 0) {
    png_init_io(png, file.get());
    png_set_IHDR(png, info, width, height, bit_depth, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    ok = true;
  }
  png_destroy_write_struct(&png, &info);
  if (!ok) throw IoError("failed writing PNG '" + path + "'");
}

// ---- CSV ----

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cell);
      cell.clear();
    } else if (c != '\r') {
      cell += c;
    }
  }
  cells.push_back(cell);
  return cells;
}

}  // namespace

FixedCloud read_ply(std::istream& in) { return FixedCloud{parse_ply(in).points}; }

FixedCloud read_ply(const std::string& path) {
  auto in = open_in(path);
  return read_ply(in);
}

StructuredCloud read_structured_ply(std::istream& in) {
  PlyCloud ply = parse_ply(in);
  if (!ply.lattice || ply.pixels.size() != ply.points.size()) return to_structured(FixedCloud{std::move(ply.points)});

  const auto [w, h] = *ply.lattice;
  if (w <= 0 || h <= 0) throw ParseError("invalid lattice dimensions");
  StructuredCloud cloud(w, h);
  for (std::size_t i = 0; i < ply.points.size(); ++i) {
    const long long p = ply.pixels[i];
    if (p < 0 || static_cast<std::size_t>(p) >= cloud.size()) throw ParseError("pixel index outside the lattice");
    if (cloud.valid[p]) throw ParseError("duplicate pixel index " + std::to_string(p));
    cloud.points[p] = ply.points[i];
    cloud.valid[p] = 1;
  }
  return cloud;
}

StructuredCloud read_structured_ply(const std::string& path) {
  auto in = open_in(path);
  return read_structured_ply(in);
}

void write_ply(const std::string& path, const FixedCloud& cloud) {
  auto out = open_out(path);
  write_ply_points(out, cloud.points, nullptr, nullptr, std::nullopt);
  finish(out, path);
}

void write_ply(std::ostream& out, const StructuredCloud& cloud, const MeanField* labels) {
  std::vector<Point3> pts;
  std::vector<std::size_t> pixels;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (!cloud.valid[i]) continue;
    pts.push_back(cloud.points[i]);
    pixels.push_back(i);
  }
  std::vector<std::uint8_t> inlier;
  if (labels) {
    if (labels->size() != pts.size()) throw ConfigError("label field is not aligned with the cloud");
    inlier.reserve(pts.size());
    for (double z : labels->values) inlier.push_back(z > 0 ? 1 : 0);
  }
  write_ply_points(out, pts, &pixels, labels ? &inlier : nullptr, std::pair{cloud.width, cloud.height});
}

void write_ply(const std::string& path, const StructuredCloud& cloud, const MeanField* labels) {
  auto out = open_out(path);
  write_ply(out, cloud, labels);
  finish(out, path);
}

DepthMap read_depth_png16(const std::string& path, double scale) {
  if (!(scale > 0)) throw InputError("depth scale must be positive");
  const PngImage img = read_png(path);
  if (img.bit_depth != 16 || img.channels != 1)
    throw ParseError("'" + path + "': expected a single-channel 16-bit PNG, got " + std::to_string(img.channels) +
                     " channel(s) at " + std::to_string(img.bit_depth) + " bit");
  DepthMap map(img.width, img.height);
  for (std::size_t i = 0; i < map.size(); ++i) {
    const unsigned tick = (unsigned(img.bytes[2 * i]) << 8) | img.bytes[2 * i + 1];
    if (tick == 0) continue;
    map.depth[i] = tick / scale;
    map.valid[i] = 1;
  }
  return map;
}

void write_depth_png16(const std::string& path, const DepthMap& map, double scale) {
  if (!(scale > 0)) throw InputError("depth scale must be positive");
  std::vector<std::uint8_t> bytes(2 * map.size(), 0);
  for (std::size_t i = 0; i < map.size(); ++i) {
    if (!map.valid[i]) continue;
    const double ticks = std::round(map.depth[i] * scale);
    const auto t = static_cast<unsigned>(std::clamp(ticks, 1.0, 65535.0));
    bytes[2 * i] = static_cast<std::uint8_t>(t >> 8);
    bytes[2 * i + 1] = static_cast<std::uint8_t>(t & 0xff);
  }
  write_png(path, map.width, map.height, 16, bytes);
}

void write_field_png(const std::string& path, const MeanField& field) {
  const Lattice& lat = *field.lattice;
  std::vector<std::uint8_t> bytes(std::size_t(lat.width()) * lat.height(), 0);
  for (std::size_t s = 0; s < field.size(); ++s) {
    const double z = std::clamp(field.values[s], -1.0, 1.0);
    bytes[lat.pixel(s)] = static_cast<std::uint8_t>(std::lround(127.5 * (z + 1.0)));
  }
  write_png(path, lat.width(), lat.height(), 8, bytes);
}

void write_unobserved_mask_png(const std::string& path, const Lattice& lattice) {
  std::vector<std::uint8_t> bytes(std::size_t(lattice.width()) * lattice.height(), 255);
  for (std::size_t s = 0; s < lattice.size(); ++s) bytes[lattice.pixel(s)] = 0;
  write_png(path, lattice.width(), lattice.height(), 8, bytes);
}

RigidTransform parse_transform(std::istream& in) {
  Eigen::Matrix4d m;
  std::string tok;
  for (int i = 0; i < 16; ++i) {
    if (!(in >> tok)) throw ParseError("transform needs 16 numbers, found " + std::to_string(i));
    m(i / 4, i % 4) = parse_number(tok, 0);
  }
  if (in >> tok) throw ParseError("trailing content after 4x4 transform");
  try {
    return RigidTransform::from_matrix(m);
  } catch (const InputError& e) {
    throw ParseError(e.what());
  }
}

RigidTransform read_transform(const std::string& path) {
  auto in = open_in(path);
  return parse_transform(in);
}

void write_transform(std::ostream& out, const RigidTransform& t) {
  const Eigen::Matrix4d m = t.matrix();
  for (int r = 0; r < 4; ++r)
    out << format_double(m(r, 0)) << ' ' << format_double(m(r, 1)) << ' ' << format_double(m(r, 2)) << ' '
        << format_double(m(r, 3)) << '\n';
}

void write_transform(const std::string& path, const RigidTransform& t) {
  auto out = open_out(path);
  write_transform(out, t);
  finish(out, path);
}

const std::vector<std::string>& results_strategy_columns() {
  static const std::vector<std::string> columns = {"all", "pct", "sigma", "x84", "dynamic", "hmrf"};
  return columns;
}

std::string results_csv_header() {
  std::string h = "overlap";
  for (const auto& s : results_strategy_columns()) h += "," + s + "_t_err," + s + "_r_err," + s + "_iters," + s + "_time";
  return h;
}

void write_results_csv(std::ostream& out, const ResultsTable& table) {
  out << results_csv_header() << '\n';
  for (const auto& rec : table) {
    out << format_double(rec.overlap);
    for (const auto& s : results_strategy_columns()) {
      if (const StrategyOutcome* o = rec.find(s))
        out << ',' << format_double(o->t_err) << ',' << format_double(o->r_err) << ',' << o->iterations << ','
            << format_double(o->elapsed_seconds);
      else
        out << ",,,,";
    }
    out << '\n';
  }
}

void write_results_csv(const std::string& path, const ResultsTable& table) {
  auto out = open_out(path);
  write_results_csv(out, table);
  finish(out, path);
}

ResultsTable read_results_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw ParseError("empty results file", 1);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  if (!col.count("overlap")) throw ParseError("results header lacks an overlap column", 1);

  ResultsTable table;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size()) throw ParseError("row has " + std::to_string(cells.size()) + " cells", line_no);
    BenchmarkRecord rec;
    rec.scene = table.size();
    rec.overlap = parse_number(cells[col["overlap"]], line_no);
    for (const auto& s : results_strategy_columns()) {
      const auto t = col.find(s + "_t_err");
      if (t == col.end() || cells[t->second].empty()) continue;
      auto value = [&](const std::string& suffix) {
        const auto it = col.find(s + suffix);
        if (it == col.end()) throw ParseError("missing column " + s + suffix, 1);
        return parse_number(cells[it->second], line_no);
      };
      StrategyOutcome o;
      o.strategy = s;
      o.t_err = value("_t_err");
      o.r_err = value("_r_err");
      o.iterations = static_cast<int>(value("_iters"));
      o.elapsed_seconds = value("_time");
      rec.outcomes.push_back(o);
    }
    table.push_back(std::move(rec));
  }
  return table;
}

ResultsTable read_results_csv(const std::string& path) {
  auto in = open_in(path);
  return read_results_csv(in);
}

void write_decile_summary_csv(std::ostream& out, const ResultsTable& table) {
  out << "decile_lo,decile_hi,count";
  for (const auto& s : results_strategy_columns())
    out << ',' << s << "_t_err," << s << "_r_err," << s << "_iters," << s << "_time";
  out << '\n';
  for (int d = 0; d < 10; ++d) {
    std::vector<const BenchmarkRecord*> rows;
    for (const auto& rec : table)
      if (std::clamp(static_cast<int>(std::floor(rec.overlap * 10.0)), 0, 9) == d) rows.push_back(&rec);
    if (rows.empty()) continue;
    out << format_double(d / 10.0) << ',' << format_double((d + 1) / 10.0) << ',' << rows.size();
    for (const auto& s : results_strategy_columns()) {
      std::vector<double> t, r, it, tm;
      for (const auto* rec : rows) {
        if (const StrategyOutcome* o = rec->find(s)) {
          t.push_back(o->t_err);
          r.push_back(o->r_err);
          it.push_back(o->iterations);
          tm.push_back(o->elapsed_seconds);
        }
      }
      if (t.empty()) {
        out << ",,,,";
        continue;
      }
      out << ',' << format_double(median(t)) << ',' << format_double(median(r)) << ',' << format_double(median(it))
          << ',' << format_double(median(tm));
    }
    out << '\n';
  }
}

void write_decile_summary_csv(const std::string& path, const ResultsTable& table) {
  auto out = open_out(path);
  write_decile_summary_csv(out, table);
  finish(out, path);
}

void write_trace_csv(std::ostream& out, const IcpResult& result) {
  out << "iteration,step_translation,step_rotation,inlier_count,mean_inlier_residual,em_iterations\n";
  for (std::size_t i = 0; i < result.trace.size(); ++i) {
    const IterationRecord& r = result.trace[i];
    out << i + 1 << ',' << format_double(r.step_translation) << ',' << format_double(r.step_rotation) << ','
        << r.inlier_count << ',' << format_double(r.mean_inlier_residual) << ',' << r.em_iterations << '\n';
  }
}

void write_trace_csv(const std::string& path, const IcpResult& result) {
  auto out = open_out(path);
  write_trace_csv(out, result);
  finish(out, path);
}

}  // namespace hmrf_icp
