#include "mfh/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <unordered_map>

#include <fmt/format.h>

#include "mfh/errors.hpp"

namespace mfh {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_line(const std::string& line,
                                    const std::string& file, std::size_t lineno) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trim(cell));
      cell.clear();
    } else {
      cell += c;
    }
  }
  if (quoted) throw ParseError(file, lineno, "unterminated quote");
  out.push_back(trim(cell));
  return out;
}

double parse_number(const std::string& cell, const std::string& file,
                    std::size_t lineno, const std::string& column) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (!cell.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (cell.empty() || ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw ParseError(file, lineno,
                     fmt::format("column '{}': '{}' is not a finite number",
                                 column, cell));
  }
  return v;
}

void expect_header(const CsvTable& t, std::size_t pos, const std::string& name,
                   const std::string& file) {
  if (pos >= t.header.size() || t.header[pos] != name) {
    throw ParseError(file, 1, fmt::format("expected column {} to be '{}'",
                                          pos + 1, name));
  }
}

std::size_t count_prefix(const std::vector<std::string>& header,
                         const std::string& prefix) {
  std::size_t n = 0;
  for (const auto& h : header) {
    if (h.rfind(prefix, 0) == 0) ++n;
  }
  return n;
}

}  // namespace

CsvTable read_csv(const std::filesystem::path& path) {
  const std::string file = path.string();
  std::ifstream in(path);
  if (!in) throw ParseError(file, 0, "cannot open file");
  CsvTable t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto cells = split_line(line, file, lineno);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw ParseError(file, lineno,
                       fmt::format("expected {} fields, found {}",
                                   t.header.size(), cells.size()));
    }
    t.rows.push_back(std::move(cells));
    t.line_numbers.push_back(lineno);
  }
  if (t.header.empty()) throw ParseError(file, lineno, "missing header");
  return t;
}

Dataset load_dataset(const std::filesystem::path& areas_path,
                     const std::filesystem::path& covariance_path) {
  const std::string afile = areas_path.string();
  const std::string cfile = covariance_path.string();
  const CsvTable at = read_csv(areas_path);
  const CsvTable ct = read_csv(covariance_path);

  expect_header(at, 0, "area_id", afile);
  expect_header(ct, 0, "area_id", cfile);
  const std::size_t k = count_prefix(at.header, "y_");
  if (k == 0) throw ParseError(afile, 1, "no y_ columns");
  const std::size_t nx = at.header.size() - 1 - k;
  if (nx % k != 0) {
    throw ParseError(afile, 1, fmt::format("{} x columns is not a multiple of k = {}",
                                           nx, k));
  }
  const std::size_t s = nx / k;
  for (std::size_t j = 0; j < k; ++j) {
    expect_header(at, 1 + j, fmt::format("y_{}", j + 1), afile);
    for (std::size_t c = 0; c < s; ++c) {
      expect_header(at, 1 + k + j * s + c, fmt::format("x_{}_{}", j + 1, c + 1), afile);
    }
  }
  if (ct.header.size() != 1 + k * k) {
    throw ParseError(cfile, 1,
                     fmt::format("expected {} covariance columns for k = {}, found {}",
                                 k * k, k, ct.header.size() - 1));
  }
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t c = 0; c < k; ++c) {
      expect_header(ct, 1 + r * k + c, fmt::format("d_{}_{}", r + 1, c + 1), cfile);
    }
  }

  std::unordered_map<std::string, MatrixXd> cov;
  for (std::size_t i = 0; i < ct.rows.size(); ++i) {
    const auto& row = ct.rows[i];
    const std::size_t line = ct.line_numbers[i];
    if (row[0].empty()) throw ParseError(cfile, line, "empty area_id");
    MatrixXd d(k, k);
    for (std::size_t r = 0; r < k; ++r) {
      for (std::size_t c = 0; c < k; ++c) {
        d(r, c) = parse_number(row[1 + r * k + c], cfile, line,
                               ct.header[1 + r * k + c]);
      }
    }
    if (relative_asymmetry(d) > tol::kSymmetry) {
      throw ParseError(cfile, line, fmt::format("D of area '{}' is not symmetric", row[0]));
    }
    if (!cov.emplace(row[0], std::move(d)).second) {
      throw ParseError(cfile, line, fmt::format("duplicate area_id '{}'", row[0]));
    }
  }

  std::vector<AreaRecord> areas;
  std::set<std::string> seen;
  areas.reserve(at.rows.size());
  for (std::size_t i = 0; i < at.rows.size(); ++i) {
    const auto& row = at.rows[i];
    const std::size_t line = at.line_numbers[i];
    if (row[0].empty()) throw ParseError(afile, line, "empty area_id");
    if (!seen.insert(row[0]).second) {
      throw ParseError(afile, line, fmt::format("duplicate area_id '{}'", row[0]));
    }
    AreaRecord rec;
    rec.area_id = row[0];
    rec.y.resize(k);
    rec.X.resize(k, s);
    for (std::size_t j = 0; j < k; ++j) {
      rec.y(j) = parse_number(row[1 + j], afile, line, at.header[1 + j]);
      for (std::size_t c = 0; c < s; ++c) {
        const std::size_t col = 1 + k + j * s + c;
        rec.X(j, c) = parse_number(row[col], afile, line, at.header[col]);
      }
    }
    const auto it = cov.find(rec.area_id);
    if (it == cov.end()) throw MissingArea(rec.area_id);
    rec.D = it->second;
    areas.push_back(std::move(rec));
  }
  return validate_dataset(std::move(areas));
}

void write_dataset(const Dataset& data,
                   const std::filesystem::path& areas_path,
                   const std::filesystem::path& covariance_path) {
  const Eigen::Index k = data.k();
  const Eigen::Index s = data.s();
  std::ofstream af(areas_path);
  std::ofstream cf(covariance_path);
  if (!af) throw ValidationError("cannot write " + areas_path.string());
  if (!cf) throw ValidationError("cannot write " + covariance_path.string());

  af << "area_id";
  for (Eigen::Index j = 0; j < k; ++j) af << fmt::format(",y_{}", j + 1);
  for (Eigen::Index j = 0; j < k; ++j) {
    for (Eigen::Index c = 0; c < s; ++c) af << fmt::format(",x_{}_{}", j + 1, c + 1);
  }
  af << '\n';
  cf << "area_id";
  for (Eigen::Index r = 0; r < k; ++r) {
    for (Eigen::Index c = 0; c < k; ++c) cf << fmt::format(",d_{}_{}", r + 1, c + 1);
  }
  cf << '\n';

  for (const auto& a : data.areas()) {
    af << a.area_id;
    for (Eigen::Index j = 0; j < k; ++j) af << fmt::format(",{:.17g}", a.y(j));
    for (Eigen::Index j = 0; j < k; ++j) {
      for (Eigen::Index c = 0; c < s; ++c) af << fmt::format(",{:.17g}", a.X(j, c));
    }
    af << '\n';
    cf << a.area_id;
    for (Eigen::Index r = 0; r < k; ++r) {
      for (Eigen::Index c = 0; c < k; ++c) cf << fmt::format(",{:.17g}", a.D(r, c));
    }
    cf << '\n';
  }
}

std::map<std::string, std::string> load_groups(
    const std::filesystem::path& path, const Dataset& data) {
  const std::string file = path.string();
  const CsvTable t = read_csv(path);
  if (t.header.size() != 2 || t.header[0] != "area_id" || t.header[1] != "group") {
    throw ParseError(file, 1, "expected header 'area_id,group'");
  }
  std::map<std::string, std::string> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    if (!out.emplace(t.rows[i][0], t.rows[i][1]).second) {
      throw ParseError(file, t.line_numbers[i],
                       fmt::format("duplicate area_id '{}'", t.rows[i][0]));
    }
  }
  for (const auto& a : data.areas()) {
    if (!out.count(a.area_id)) throw MissingArea(a.area_id);
  }
  return out;
}

}  // namespace mfh
