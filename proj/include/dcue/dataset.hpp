#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace dcue {

/// Raw observations of the partially linear IV model: outcome, treatment,
/// instruments (n x m) and covariates (n x p, p may be zero).
struct Dataset {
  Eigen::VectorXd y;
  Eigen::VectorXd d;
  Eigen::MatrixXd z;
  Eigen::MatrixXd x;

  Eigen::Index n() const { return y.size(); }
  Eigen::Index m() const { return z.cols(); }
  Eigen::Index p() const { return x.cols(); }

  /// Throws DataError when sizes disagree, n < 2, m < 1 or any entry is non-finite.
  void validate() const;

  /// Rows `idx` of every container, in the given order.
  Dataset subset(const std::vector<Eigen::Index>& idx) const;
};

/// Mapping from CSV header names to model roles.
struct ColumnSchema {
  std::string outcome;
  std::string treatment;
  std::vector<std::string> instruments;
  std::vector<std::string> covariates;

  void validate() const;
};

/// Reads a comma-separated file with a mandatory header row. Every mapped
/// cell must parse as a finite decimal number; otherwise DataError names the
/// 1-based data row and the column.
Dataset load_csv(const std::string& path, const ColumnSchema& schema);

/// Writes `ds` with the schema's column names, 17 significant digits.
void write_csv(const std::string& path, const Dataset& ds, const ColumnSchema& schema);

/// Schema with generated names y, d, z1..zm, x1..xp.
ColumnSchema default_schema(Eigen::Index m, Eigen::Index p);

}  // namespace dcue
