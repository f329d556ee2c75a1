#include "pfa/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "pfa/errors.hpp"

namespace pfa {

namespace fs = std::filesystem;
using Eigen::MatrixXd;

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    // trim surrounding whitespace
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

}  // namespace

void atomic_write_text(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out << content;
  }
  fs::rename(tmp, path);
}

Dataset ingest_csv(const fs::path& path, const std::string& group_column,
                   bool log_transform) {
  const auto lines = read_lines(path);
  if (lines.size() < 2)
    throw DataError(path.string() + ": need a header and at least one row");
  const auto header = split_line(lines[0]);

  int group_col = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    for (std::size_t c2 = c + 1; c2 < header.size(); ++c2)
      if (header[c] == header[c2])
        throw DataError(path.string() + ": duplicate header column '" +
                        header[c] + "'");
    if (header[c] == group_column) group_col = static_cast<int>(c);
  }
  if (group_col < 0)
    throw DataError(path.string() + ": group column '" + group_column +
                    "' not found in header");

  std::vector<std::string> variable_names;
  for (std::size_t c = 0; c < header.size(); ++c)
    if (static_cast<int>(c) != group_col) variable_names.push_back(header[c]);

  const int n = static_cast<int>(lines.size()) - 1;
  const int p = static_cast<int>(variable_names.size());
  if (p == 0) throw DataError(path.string() + ": no numeric columns");

  MatrixXd raw(n, p);
  std::vector<int> group(n);
  std::vector<std::string> group_names;
  for (int r = 0; r < n; ++r) {
    const auto cells = split_line(lines[r + 1]);
    if (cells.size() != header.size())
      throw DataError(path.string() + ": row " + std::to_string(r + 1) +
                      " has " + std::to_string(cells.size()) +
                      " cells, expected " + std::to_string(header.size()));
    int vc = 0;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (static_cast<int>(c) == group_col) {
        const std::string& label = cells[c];
        if (label.empty())
          throw DataError(path.string() + ": empty group label in row " +
                          std::to_string(r + 1));
        auto it = std::find(group_names.begin(), group_names.end(), label);
        if (it == group_names.end()) {
          group_names.push_back(label);
          group[r] = static_cast<int>(group_names.size()) - 1;
        } else {
          group[r] = static_cast<int>(it - group_names.begin());
        }
        continue;
      }
      double v;
      if (!parse_double(cells[c], v))
        throw DataError(path.string() + ": non-numeric value '" + cells[c] +
                        "' in row " + std::to_string(r + 1) + ", column " +
                        header[c]);
      if (log_transform) {
        if (!(v > 0.0))
          throw DataError(path.string() + ": log transform needs positive "
                          "values; row " + std::to_string(r + 1) +
                          ", column " + header[c]);
        v = std::log(v);
      }
      raw(r, vc++) = v;
    }
  }
  return center_dataset(raw, std::move(group), std::move(group_names),
                        std::move(variable_names));
}

void write_dataset_csv(const fs::path& path, const Dataset& data,
                       const std::string& group_column, bool uncenter) {
  std::string out = group_column;
  for (const auto& v : data.variable_names) out += "," + v;
  out += "\n";
  for (int r = 0; r < data.n(); ++r) {
    out += data.group_names[data.group[r]];
    for (int c = 0; c < data.p(); ++c) {
      double v = data.values(r, c);
      if (uncenter && data.centered) v += data.center_vector[c];
      out += "," + format_double(v);
    }
    out += "\n";
  }
  atomic_write_text(path, out);
}

void write_csv_matrix(const fs::path& path, const MatrixXd& m,
                      const std::vector<std::string>& header,
                      const std::vector<std::string>& row_names) {
  std::string out;
  if (!header.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c)
      out += (c ? "," : "") + header[c];
    out += "\n";
  }
  for (int r = 0; r < m.rows(); ++r) {
    std::string line;
    if (!row_names.empty()) line = row_names[r] + ",";
    for (int c = 0; c < m.cols(); ++c)
      line += (c ? "," : "") + format_double(m(r, c));
    out += line + "\n";
  }
  atomic_write_text(path, out);
}

CsvMatrix read_csv_matrix(const fs::path& path) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw DataError(path.string() + ": empty file");
  CsvMatrix out;
  std::size_t first = 0;
  {
    const auto cells = split_line(lines[0]);
    double v;
    bool numeric = true;
    for (const auto& c : cells) numeric = numeric && parse_double(c, v);
    if (!numeric) {
      out.header = cells;
      first = 1;
    }
  }
  if (first == lines.size()) throw DataError(path.string() + ": no data rows");
  const auto probe = split_line(lines[first]);
  double v;
  const bool has_row_names = !parse_double(probe[0], v);
  const int cols = static_cast<int>(probe.size()) - (has_row_names ? 1 : 0);
  const int rows = static_cast<int>(lines.size() - first);
  out.values.resize(rows, cols);
  for (int r = 0; r < rows; ++r) {
    const auto cells = split_line(lines[first + r]);
    if (static_cast<int>(cells.size()) != cols + (has_row_names ? 1 : 0))
      throw DataError(path.string() + ": ragged row " + std::to_string(r + 1));
    int c0 = 0;
    if (has_row_names) {
      out.row_names.push_back(cells[0]);
      c0 = 1;
    }
    for (int c = 0; c < cols; ++c) {
      if (!parse_double(cells[c0 + c], out.values(r, c)))
        throw DataError(path.string() + ": non-numeric value '" +
                        cells[c0 + c] + "' in row " + std::to_string(r + 1));
    }
  }
  return out;
}

void write_ppm_heatmap(const fs::path& path, const MatrixXd& m, int cell) {
  const int rows = static_cast<int>(m.rows());
  const int cols = static_cast<int>(m.cols());
  const double scale = std::max(1e-300, m.cwiseAbs().maxCoeff());
  const int W = cols * cell, H = rows * cell;
  std::string body;
  body.reserve(static_cast<std::size_t>(W) * H * 3);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const double v = m(y / cell, x / cell) / scale;
      // white at zero, coral toward +1, deep pink/blue toward -1
      unsigned char r, g, b;
      if (v >= 0) {
        r = 255;
        g = static_cast<unsigned char>(255 - 180 * v);
        b = static_cast<unsigned char>(255 - 200 * v);
      } else {
        r = static_cast<unsigned char>(255 + 200 * v);
        g = static_cast<unsigned char>(255 + 180 * v);
        b = 255;
      }
      body += static_cast<char>(r);
      body += static_cast<char>(g);
      body += static_cast<char>(b);
    }
  }
  std::string out = "P6\n" + std::to_string(W) + " " + std::to_string(H) +
                    "\n255\n" + body;
  atomic_write_text(path, out);
}

}  // namespace pfa
