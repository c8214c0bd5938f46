#include "picmatch/sample.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "picmatch/errors.hpp"

namespace picmatch {

int Sample::num_strata() const {
  if (stratum.empty()) return 1;
  return *std::max_element(stratum.begin(), stratum.end()) + 1;
}

int Sample::n_treated() const { return static_cast<int>(z.sum()); }

int Sample::n_control() const { return n() - n_treated(); }

void Sample::validate() const {
  if (z.size() != x.rows())
    throw DimensionError("treatment vector length does not match covariate rows");
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    if (z[i] != 0.0 && z[i] != 1.0)
      throw SchemaError("treatment entry at row " + std::to_string(i + 1) +
                        " is not 0 or 1");
  }
  if (p() < 2)
    throw DimensionError("at least 2 covariates are required (p >= 2), got p=" +
                         std::to_string(p()));
  if (y && y->size() != x.rows())
    throw DimensionError("outcome vector length does not match covariate rows");
  if (!stratum.empty()) {
    if (static_cast<int>(stratum.size()) != n())
      throw DimensionError("stratum vector length does not match covariate rows");
    const int L = num_strata();
    if (L >= n()) throw DimensionError("stratum count must be below n");
    std::vector<int> counts(L, 0);
    for (int s : stratum) {
      if (s < 0 || s >= L) throw SchemaError("stratum labels must be contiguous");
      ++counts[s];
    }
    for (int l = 0; l < L; ++l)
      if (counts[l] == 0)
        throw SchemaError("stratum " + std::to_string(l) + " has no rows");
  }
  for (int j = 0; j < p(); ++j) {
    const double lo = x.col(j).minCoeff();
    const double hi = x.col(j).maxCoeff();
    if (lo == hi)
      throw ConditioningError("covariate column '" +
                              (j < static_cast<int>(covariate_names.size())
                                   ? covariate_names[j]
                                   : std::to_string(j)) +
                              "' is constant; it would break full-rank checks");
  }
}

Eigen::MatrixXd CenteredSample::uncentered_x() const {
  Eigen::MatrixXd out = sample.x;
  if (sample.stratum.empty()) {
    out.rowwise() += column_means.row(0);
  } else {
    for (int i = 0; i < sample.n(); ++i)
      out.row(i) += column_means.row(sample.stratum[i]);
  }
  return out;
}

CenteredSample center(const Sample& s) {
  s.validate();
  CenteredSample out;
  out.sample = s;
  const int L = s.num_strata();
  out.column_means = Eigen::MatrixXd::Zero(L, s.p());
  if (s.stratum.empty()) {
    out.column_means.row(0) = s.x.colwise().mean();
    out.sample.x.rowwise() -= out.column_means.row(0);
  } else {
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(L);
    for (int i = 0; i < s.n(); ++i) {
      out.column_means.row(s.stratum[i]) += s.x.row(i);
      counts[s.stratum[i]] += 1.0;
    }
    out.column_means.array().colwise() /= counts.array();
    for (int i = 0; i < s.n(); ++i)
      out.sample.x.row(i) -= out.column_means.row(s.stratum[i]);
  }
  return out;
}

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, sep)) out.push_back(trim(cell));
  if (!line.empty() && line.back() == sep) out.push_back("");
  return out;
}

double parse_cell(const std::string& cell, int row, const std::string& col) {
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end)
    throw ParseError("malformed numeric cell '" + cell + "' at row " +
                     std::to_string(row) + ", column '" + col + "'");
  return value;
}

}  // namespace

CsvSchema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open schema file: " + path);
  CsvSchema schema;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError("schema line is not key = value: " + line);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "treatment")
      schema.treatment = value;
    else if (key == "outcome")
      schema.outcome = value;
    else if (key == "stratum")
      schema.stratum = value;
    else if (key == "covariates")
      schema.covariates = split(value, ',');
    else
      throw SchemaError("unknown schema key: " + key);
  }
  if (schema.treatment.empty())
    throw SchemaError("schema must declare a treatment column");
  return schema;
}

Sample load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open CSV file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty CSV file: " + path);
  const std::vector<std::string> header = split(line, ',');

  auto col_index = [&](const std::string& name) -> int {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw SchemaError("column '" + name + "' not found in CSV header");
    return static_cast<int>(it - header.begin());
  };

  const int z_col = col_index(schema.treatment);
  const int y_col = schema.outcome.empty() ? -1 : col_index(schema.outcome);
  const int s_col = schema.stratum.empty() ? -1 : col_index(schema.stratum);

  std::vector<int> x_cols;
  std::vector<std::string> x_names;
  if (schema.covariates.empty()) {
    for (int j = 0; j < static_cast<int>(header.size()); ++j) {
      if (j == z_col || j == y_col || j == s_col) continue;
      x_cols.push_back(j);
      x_names.push_back(header[j]);
    }
  } else {
    for (const auto& name : schema.covariates) {
      x_cols.push_back(col_index(name));
      x_names.push_back(name);
    }
  }
  if (x_cols.size() < 2)
    throw DimensionError("at least 2 covariate columns are required");

  std::vector<std::vector<double>> x_rows;
  std::vector<double> z_vals;
  std::vector<double> y_vals;
  std::vector<std::string> s_raw;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != header.size())
      throw ParseError("row " + std::to_string(row) + " has " +
                       std::to_string(cells.size()) + " cells, expected " +
                       std::to_string(header.size()));
    const double zv = parse_cell(cells[z_col], row, schema.treatment);
    if (zv != 0.0 && zv != 1.0)
      throw SchemaError("treatment value '" + cells[z_col] + "' at row " +
                        std::to_string(row) + " is not 0 or 1");
    z_vals.push_back(zv);
    std::vector<double> xr;
    xr.reserve(x_cols.size());
    for (size_t k = 0; k < x_cols.size(); ++k) {
      const std::string& cell = cells[x_cols[k]];
      if (cell.empty())
        throw ParseError("missing covariate cell at row " + std::to_string(row) +
                         ", column '" + x_names[k] + "'");
      xr.push_back(parse_cell(cell, row, x_names[k]));
    }
    x_rows.push_back(std::move(xr));
    if (y_col >= 0) {
      const std::string& cell = cells[y_col];
      y_vals.push_back(cell.empty() ? std::nan("")
                                    : parse_cell(cell, row, schema.outcome));
    }
    if (s_col >= 0) s_raw.push_back(cells[s_col]);
  }

  Sample s;
  const int n = static_cast<int>(x_rows.size());
  const int p = static_cast<int>(x_cols.size());
  s.x.resize(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) s.x(i, j) = x_rows[i][j];
  s.z = Eigen::Map<Eigen::VectorXd>(z_vals.data(), n);
  s.covariate_names = x_names;
  if (y_col >= 0) s.y = Eigen::Map<Eigen::VectorXd>(y_vals.data(), n);
  if (s_col >= 0) {
    std::map<std::string, int> labels;
    for (const auto& raw : s_raw) {
      if (!labels.count(raw)) {
        const int next = static_cast<int>(labels.size());
        labels[raw] = next;
        s.stratum_names.push_back(raw);
      }
      s.stratum.push_back(labels[raw]);
    }
  }
  s.validate();
  return s;
}

}  // namespace picmatch
