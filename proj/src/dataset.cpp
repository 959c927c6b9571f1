#include "dcue/dataset.hpp"

#include "dcue/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace dcue {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
    } else if (c == ',' && !quoted) {
      out.push_back(cell);
      cell.clear();
    } else if (c != '\r') {
      cell.push_back(c);
    }
  }
  out.push_back(cell);
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

bool parse_number(const std::string& text, double& value) {
  const std::string t = trim(text);
  if (t.empty()) return false;
  const char* first = t.data();
  const char* last = t.data() + t.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  return ec == std::errc() && ptr == last && std::isfinite(value);
}

bool all_finite(const Eigen::MatrixXd& a) { return a.allFinite(); }

}  // namespace

void Dataset::validate() const {
  const Eigen::Index rows = y.size();
  if (d.size() != rows || z.rows() != rows || x.rows() != rows) {
    throw DataError("dataset containers disagree on the number of observations");
  }
  if (rows < 2) throw DataError("dataset needs at least 2 observations, got " + std::to_string(rows));
  if (z.cols() < 1) throw DataError("dataset needs at least one instrument column");
  if (!y.allFinite() || !d.allFinite() || !all_finite(z) || !all_finite(x)) {
    throw DataError("dataset contains non-finite entries");
  }
}

Dataset Dataset::subset(const std::vector<Eigen::Index>& idx) const {
  Dataset out;
  const auto k = static_cast<Eigen::Index>(idx.size());
  out.y.resize(k);
  out.d.resize(k);
  out.z.resize(k, z.cols());
  out.x.resize(k, x.cols());
  for (Eigen::Index r = 0; r < k; ++r) {
    const auto i = idx[static_cast<std::size_t>(r)];
    out.y(r) = y(i);
    out.d(r) = d(i);
    out.z.row(r) = z.row(i);
    out.x.row(r) = x.row(i);
  }
  return out;
}

void ColumnSchema::validate() const {
  if (outcome.empty()) throw ConfigError("schema: outcome column not set");
  if (treatment.empty()) throw ConfigError("schema: treatment column not set");
  if (instruments.empty()) throw ConfigError("schema: at least one instrument column is required");
}

Dataset load_csv(const std::string& path, const ColumnSchema& schema) {
  schema.validate();
  std::ifstream in(path);
  if (!in) throw DataError("cannot open data file '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) throw DataError("data file '" + path + "' is empty");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM

  std::unordered_map<std::string, std::size_t> header;
  const auto names = split_csv_line(line);
  for (std::size_t c = 0; c < names.size(); ++c) header.emplace(trim(names[c]), c);

  auto locate = [&](const std::string& name) {
    auto it = header.find(name);
    if (it == header.end()) throw DataError("missing column '" + name + "' in '" + path + "'");
    return it->second;
  };

  // Mapped column order: outcome, treatment, instruments..., covariates...
  std::vector<std::size_t> cols;
  std::vector<std::string> col_names;
  cols.push_back(locate(schema.outcome));
  col_names.push_back(schema.outcome);
  cols.push_back(locate(schema.treatment));
  col_names.push_back(schema.treatment);
  for (const auto& s : schema.instruments) {
    cols.push_back(locate(s));
    col_names.push_back(s);
  }
  for (const auto& s : schema.covariates) {
    cols.push_back(locate(s));
    col_names.push_back(s);
  }

  std::vector<std::vector<double>> rows;
  std::size_t row_no = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty() || line == "\r") continue;
    ++row_no;
    const auto cells = split_csv_line(line);
    std::vector<double> values(cols.size());
    for (std::size_t c = 0; c < cols.size(); ++c) {
      if (cols[c] >= cells.size() || !parse_number(cells[cols[c]], values[c])) {
        const std::string got = cols[c] < cells.size() ? cells[cols[c]] : std::string("<missing>");
        throw DataError("non-numeric value '" + got + "' at row " + std::to_string(row_no) + ", column '" +
                        col_names[c] + "'");
      }
    }
    rows.push_back(std::move(values));
  }

  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto m = static_cast<Eigen::Index>(schema.instruments.size());
  const auto p = static_cast<Eigen::Index>(schema.covariates.size());
  if (n < 2) throw DataError("need at least 2 data rows, found " + std::to_string(n));

  Dataset ds;
  ds.y.resize(n);
  ds.d.resize(n);
  ds.z.resize(n, m);
  ds.x.resize(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    ds.y(i) = r[0];
    ds.d(i) = r[1];
    for (Eigen::Index j = 0; j < m; ++j) ds.z(i, j) = r[static_cast<std::size_t>(2 + j)];
    for (Eigen::Index j = 0; j < p; ++j) ds.x(i, j) = r[static_cast<std::size_t>(2 + m + j)];
  }
  ds.validate();
  return ds;
}

void write_csv(const std::string& path, const Dataset& ds, const ColumnSchema& schema) {
  if (static_cast<Eigen::Index>(schema.instruments.size()) != ds.m() ||
      static_cast<Eigen::Index>(schema.covariates.size()) != ds.p()) {
    throw ConfigError("write_csv: schema does not match dataset dimensions");
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << schema.outcome << ',' << schema.treatment;
  for (const auto& s : schema.instruments) out << ',' << s;
  for (const auto& s : schema.covariates) out << ',' << s;
  out << '\n';
  out.precision(17);
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    out << ds.y(i) << ',' << ds.d(i);
    for (Eigen::Index j = 0; j < ds.m(); ++j) out << ',' << ds.z(i, j);
    for (Eigen::Index j = 0; j < ds.p(); ++j) out << ',' << ds.x(i, j);
    out << '\n';
  }
}

ColumnSchema default_schema(Eigen::Index m, Eigen::Index p) {
  ColumnSchema s;
  s.outcome = "y";
  s.treatment = "d";
  for (Eigen::Index j = 0; j < m; ++j) s.instruments.push_back("z" + std::to_string(j + 1));
  for (Eigen::Index j = 0; j < p; ++j) s.covariates.push_back("x" + std::to_string(j + 1));
  return s;
}

}  // namespace dcue
