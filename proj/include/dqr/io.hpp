#ifndef DQR_IO_HPP
#define DQR_IO_HPP

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dqr/regions.hpp"

namespace dqr {

namespace fs = std::filesystem;
using json = nlohmann::json;

/// Shortest round-trip decimal form, stable across runs.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// CSV

/// String-typed CSV table; typing happens at ingestion against the declared
/// schema. Handles quoted fields with doubled quotes.
struct DataTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> cells;  // row-major

  long rows() const { return long(cells.size()); }
  int column_index(const std::string& name) const {
    for (size_t j = 0; j < columns.size(); ++j)
      if (columns[j] == name) return int(j);
    return -1;
  }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(field);
      field.clear();
    } else if (ch != '\r') {
      field += ch;
    }
  }
  out.push_back(field);
  return out;
}

inline std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace detail

inline DataTable read_csv_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open input file: " + path);
  DataTable table;
  std::string line;
  if (!std::getline(in, line)) throw IngestError("empty input file: " + path);
  for (auto& h : detail::split_csv_line(line)) table.columns.push_back(detail::trim(h));
  if (table.columns.empty() || (table.columns.size() == 1 && table.columns[0].empty()))
    throw IngestError("empty header row in: " + path);
  long row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != table.columns.size())
      throw IngestError("row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                            " fields, expected " + std::to_string(table.columns.size()),
                        row);
    table.cells.push_back(std::move(cells));
  }
  return table;
}

/// Numeric column with location-carrying parse errors.
inline Vec numeric_column(const DataTable& table, const std::string& name) {
  const int j = table.column_index(name);
  if (j < 0) throw IngestError("column '" + name + "' not found in header", -1, name);
  Vec out(table.rows());
  for (long i = 0; i < table.rows(); ++i) {
    const std::string cell = detail::trim(table.cells[size_t(i)][size_t(j)]);
    try {
      size_t used = 0;
      out[i] = std::stod(cell, &used);
      if (used != cell.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw IngestError("non-numeric value '" + cell + "' in column '" + name + "' at data row " +
                            std::to_string(i + 1),
                        i + 1, name);
    }
  }
  return out;
}

inline void write_csv(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows) {
  fs::create_directories(fs::path(path).parent_path().empty() ? "." : fs::path(path).parent_path().string());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  for (size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  out << "\n";
  for (const auto& row : rows) {
    for (size_t j = 0; j < row.size(); ++j) out << (j ? "," : "") << row[j];
    out << "\n";
  }
}

// ---------------------------------------------------------------------------
// Draw store persistence: a flat binary table plus a CSV export with stable
// header names.

inline void write_draw_store(const std::string& base_path, const DrawStore& store) {
  const long T = store.draws();
  const long P = store.coef.cols();
  const long Q = store.precisions.cols();

  std::vector<std::string> header = store.coef_names;
  header.push_back("sigma");
  for (const auto& n : store.precision_names) header.push_back(n);
  std::vector<std::vector<std::string>> rows;
  rows.reserve(size_t(T));
  for (long t = 0; t < T; ++t) {
    std::vector<std::string> row;
    row.reserve(size_t(P + 1 + Q));
    for (long c = 0; c < P; ++c) row.push_back(format_double(store.coef(t, c)));
    row.push_back(format_double(store.sigma[t]));
    for (long c = 0; c < Q; ++c) row.push_back(format_double(store.precisions(t, c)));
    rows.push_back(std::move(row));
  }
  write_csv(base_path + ".csv", header, rows);

  std::ofstream bin(base_path + ".bin", std::ios::binary);
  if (!bin) throw Error("cannot write " + base_path + ".bin");
  const char magic[8] = {'D', 'Q', 'R', 'D', 'R', 'W', '0', '1'};
  bin.write(magic, 8);
  auto put64 = [&](std::uint64_t v) { bin.write(reinterpret_cast<const char*>(&v), 8); };
  put64(std::uint64_t(T));
  put64(std::uint64_t(P));
  put64(std::uint64_t(Q));
  bin.write(reinterpret_cast<const char*>(&store.tau), 8);
  const double floors = double(store.v_floor_count);
  bin.write(reinterpret_cast<const char*>(&floors), 8);
  for (long t = 0; t < T; ++t) {
    for (long c = 0; c < P; ++c)
      bin.write(reinterpret_cast<const char*>(&store.coef(t, c)), 8);
    bin.write(reinterpret_cast<const char*>(&store.sigma[t]), 8);
    for (long c = 0; c < Q; ++c)
      bin.write(reinterpret_cast<const char*>(&store.precisions(t, c)), 8);
  }
}

inline DrawStore read_draw_store(const std::string& base_path,
                                 const std::vector<std::string>& coef_names,
                                 const std::vector<std::string>& precision_names) {
  const std::string bin_path = base_path + ".bin";
  if (!fs::exists(bin_path))
    throw InvalidStateError("missing draw store artifact: " + bin_path);
  std::ifstream bin(bin_path, std::ios::binary);
  char magic[8];
  bin.read(magic, 8);
  if (std::string(magic, 8) != "DQRDRW01")
    throw InvalidStateError("bad draw store header in: " + bin_path);
  auto get64 = [&]() {
    std::uint64_t v = 0;
    bin.read(reinterpret_cast<char*>(&v), 8);
    return v;
  };
  const long T = long(get64());
  const long P = long(get64());
  const long Q = long(get64());
  DrawStore store;
  bin.read(reinterpret_cast<char*>(&store.tau), 8);
  double floors = 0.0;
  bin.read(reinterpret_cast<char*>(&floors), 8);
  store.v_floor_count = long(floors);
  store.coef.resize(T, P);
  store.sigma.resize(T);
  store.precisions.resize(T, Q);
  for (long t = 0; t < T; ++t) {
    for (long c = 0; c < P; ++c) bin.read(reinterpret_cast<char*>(&store.coef(t, c)), 8);
    bin.read(reinterpret_cast<char*>(&store.sigma[t]), 8);
    for (long c = 0; c < Q; ++c) bin.read(reinterpret_cast<char*>(&store.precisions(t, c)), 8);
  }
  if (!bin) throw InvalidStateError("truncated draw store: " + bin_path);
  store.coef_names = coef_names;
  store.precision_names = precision_names;
  if (long(store.coef_names.size()) != P || long(store.precision_names.size()) != Q)
    throw InvalidStateError("draw store shape does not match layout: " + bin_path);
  return store;
}

// ---------------------------------------------------------------------------
// Contour serialization

inline json contour_to_json(const Contour& contour,
                            const std::vector<std::string>& covariate_names) {
  json j;
  j["tau"] = contour.tau;
  json point = json::object();
  for (long i = 0; i < contour.covariate_point.size(); ++i) {
    const std::string name =
        size_t(i) < covariate_names.size() ? covariate_names[size_t(i)] : "c" + std::to_string(i);
    point[name] = contour.covariate_point[i];
  }
  j["covariate_point"] = point;
  json verts = json::array();
  for (const auto& v : contour.vertices) {
    json row = json::array();
    for (long c = 0; c < v.size(); ++c) row.push_back(v[c]);
    verts.push_back(row);
  }
  j["vertices"] = verts;
  if (!contour.faces.empty()) j["faces"] = contour.faces;
  j["empty"] = contour.empty_region;
  j["unbounded"] = contour.unbounded;
  return j;
}

inline void write_json(const std::string& path, const json& j) {
  fs::create_directories(fs::path(path).parent_path().empty() ? "." : fs::path(path).parent_path().string());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << j.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// SVG overlays for 2D contours

/// Minimal static plot: frame, zero axes when visible, one closed polyline
/// per contour, legend top-left.
inline void write_contour_svg(const std::string& path, const std::vector<Contour>& contours,
                              const std::vector<std::string>& labels) {
  static const char* palette[] = {"#4878a8", "#b04030", "#4a8c5c", "#c8872a",
                                  "#7b5aa6", "#2e8b99", "#a85a78", "#708238"};
  double lo_x = 1e300, hi_x = -1e300, lo_y = 1e300, hi_y = -1e300;
  for (const auto& c : contours)
    for (const auto& v : c.vertices) {
      lo_x = std::min(lo_x, v[0]);
      hi_x = std::max(hi_x, v[0]);
      lo_y = std::min(lo_y, v[1]);
      hi_y = std::max(hi_y, v[1]);
    }
  if (lo_x > hi_x) {
    lo_x = lo_y = -1.0;
    hi_x = hi_y = 1.0;
  }
  const double pad_x = 0.08 * (hi_x - lo_x + 1e-12), pad_y = 0.08 * (hi_y - lo_y + 1e-12);
  lo_x -= pad_x;
  hi_x += pad_x;
  lo_y -= pad_y;
  hi_y += pad_y;
  const double W = 640.0, H = 640.0, margin = 48.0;
  auto sx = [&](double x) { return margin + (x - lo_x) / (hi_x - lo_x) * (W - 2 * margin); };
  auto sy = [&](double y) { return H - margin - (y - lo_y) / (hi_y - lo_y) * (H - 2 * margin); };

  std::ostringstream svg;
  svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H << "'>\n";
  svg << "<rect x='" << margin << "' y='" << margin << "' width='" << W - 2 * margin
      << "' height='" << H - 2 * margin << "' fill='white' stroke='#444'/>\n";
  if (lo_x < 0.0 && hi_x > 0.0)
    svg << "<line x1='" << sx(0) << "' y1='" << margin << "' x2='" << sx(0) << "' y2='"
        << H - margin << "' stroke='#bbb' stroke-dasharray='4 3'/>\n";
  if (lo_y < 0.0 && hi_y > 0.0)
    svg << "<line x1='" << margin << "' y1='" << sy(0) << "' x2='" << W - margin << "' y2='"
        << sy(0) << "' stroke='#bbb' stroke-dasharray='4 3'/>\n";
  svg << "<text x='" << margin << "' y='" << H - margin + 28 << "' font-size='12'>"
      << format_double(lo_x) << "</text>\n";
  svg << "<text x='" << W - margin - 40 << "' y='" << H - margin + 28 << "' font-size='12'>"
      << format_double(hi_x) << "</text>\n";
  svg << "<text x='4' y='" << H - margin << "' font-size='12'>" << format_double(lo_y)
      << "</text>\n";
  svg << "<text x='4' y='" << margin + 8 << "' font-size='12'>" << format_double(hi_y)
      << "</text>\n";

  for (size_t c = 0; c < contours.size(); ++c) {
    if (contours[c].empty_region || contours[c].vertices.empty()) continue;
    const char* color = palette[c % 8];
    svg << "<path d='";
    for (size_t i = 0; i < contours[c].vertices.size(); ++i) {
      const auto& v = contours[c].vertices[i];
      svg << (i == 0 ? "M" : "L") << sx(v[0]) << " " << sy(v[1]) << " ";
    }
    svg << "Z' fill='none' stroke='" << color << "' stroke-width='1.6'/>\n";
  }
  for (size_t c = 0; c < contours.size() && c < labels.size(); ++c)
    svg << "<text x='" << margin + 10 << "' y='" << margin + 18 + 16 * double(c)
        << "' font-size='13' fill='" << palette[c % 8] << "'>" << labels[c] << "</text>\n";
  svg << "</svg>\n";

  fs::create_directories(fs::path(path).parent_path().empty() ? "." : fs::path(path).parent_path().string());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << svg.str();
}

}  // namespace dqr

#endif  // DQR_IO_HPP
