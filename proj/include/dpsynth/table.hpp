#ifndef DPSYNTH_TABLE_HPP
#define DPSYNTH_TABLE_HPP

#include <Eigen/Dense>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "dpsynth/privacy.hpp"

namespace dpsynth {

// Per-column public metadata: a categorical cardinality or continuous bounds
// plus a bin count. Bounds and cardinalities are declared, never derived from
// the private data.
struct ColumnDomain {
  enum class Kind { categorical, continuous };

  std::string name;
  Kind kind = Kind::continuous;
  size_t cardinality = 0;          // categorical
  std::vector<std::string> labels; // optional; size == cardinality when set
  double lower = 0.0;              // continuous
  double upper = 1.0;
  size_t bin_count = 20;

  static ColumnDomain categorical(std::string name, size_t cardinality);
  static ColumnDomain categorical(std::string name, std::vector<std::string> labels);
  static ColumnDomain continuous(std::string name, double lower, double upper,
                                 size_t bin_count = 20);

  bool is_categorical() const { return kind == Kind::categorical; }
  // Number of discrete cells this column maps to after discretization.
  size_t domain_size() const { return is_categorical() ? cardinality : bin_count; }
};

struct Schema {
  std::vector<ColumnDomain> columns;
  std::optional<size_t> target_index;

  Schema() = default;
  Schema(std::vector<ColumnDomain> cols, std::optional<size_t> target = std::nullopt);

  size_t width() const { return columns.size(); }
  const ColumnDomain& operator[](size_t i) const { return columns[i]; }
  size_t index_of(const std::string& name) const;
  bool all_categorical() const;
};

// Immutable n x d dataset. Continuous cells hold reals, categorical cells hold
// codes in [0, cardinality).
class Table {
 public:
  Table(Schema schema, std::vector<double> row_major_values);

  const Schema& schema() const { return schema_; }
  size_t rows() const { return rows_; }
  size_t cols() const { return schema_.width(); }
  double at(size_t row, size_t col) const { return values_[row * cols() + col]; }
  const std::vector<double>& values() const { return values_; }

 private:
  Schema schema_;
  size_t rows_;
  std::vector<double> values_;
};

// Convenience builder used by generators and samplers.
class TableBuilder {
 public:
  explicit TableBuilder(Schema schema, size_t reserve_rows = 0);
  void push_row(const std::vector<double>& row);
  double& cell(size_t row, size_t col);
  void resize(size_t rows);
  Table build() &&;

 private:
  Schema schema_;
  size_t rows_ = 0;
  std::vector<double> values_;
};

// Dense count/probability tensor over an ordered attribute subset.
class MarginalTable {
 public:
  MarginalTable(std::vector<size_t> attrs, std::vector<size_t> dims);

  const std::vector<size_t>& attrs() const { return attrs_; }
  const std::vector<size_t>& dims() const { return dims_; }
  size_t size() const { return counts_.size(); }
  double& operator[](size_t flat) { return counts_[flat]; }
  double operator[](size_t flat) const { return counts_[flat]; }
  std::vector<double>& counts() { return counts_; }
  const std::vector<double>& counts() const { return counts_; }

  size_t flat_index(const std::vector<size_t>& cell) const;
  double total() const;
  // Sums onto one axis (position within attrs()).
  std::vector<double> project(size_t axis) const;

 private:
  std::vector<size_t> attrs_;
  std::vector<size_t> dims_;
  std::vector<size_t> strides_;
  std::vector<double> counts_;
};

// Maps continuous columns to bin codes floor((v-lo)/(hi-lo)*bins) clamped to
// [0, bins-1]; categorical columns pass through. Values outside the declared
// bounds are clamped and counted in *clamped_values when provided.
Table discretize(const Table& table, size_t bins, size_t* clamped_values = nullptr);

// Inverse of discretize up to bin resolution: bin codes are mapped back to bin
// centers of the original continuous schema. Categorical columns pass through.
Table undiscretize(const Table& binned, const Schema& original);

// Exact (pre-noise) contingency counts over the given attribute tuple.
MarginalTable marginal(const Table& table, const std::vector<size_t>& attrs);

// Clamps negatives to zero and normalizes to total mass 1; an all-zero table
// yields the uniform distribution.
MarginalTable to_distribution(const MarginalTable& m);

// Empirical (conditional) mutual information in bits, 0*log 0 := 0.
double mutual_information(const Table& table, size_t i, size_t j,
                          const std::vector<size_t>& given = {});

// Mutual information between one attribute and a joint group of attributes.
double joint_mutual_information(const Table& table, size_t child,
                                const std::vector<size_t>& parents);

// 1 - total variation distance between two normalized tables of equal shape.
double tvd_similarity(const MarginalTable& p, const MarginalTable& q);

// Encodes rows for the numeric models: continuous columns min-max scaled to
// [-1, 1] (clamped), categorical columns one-hot.
class RowEncoder {
 public:
  struct Block {
    size_t offset;
    size_t size;
    bool categorical;
  };

  explicit RowEncoder(const Schema& schema, std::optional<size_t> skip_column = std::nullopt);

  size_t width() const { return width_; }
  const Schema& schema() const { return schema_; }
  const std::vector<Block>& blocks() const { return blocks_; }
  Eigen::MatrixXd encode(const Table& table) const;
  // argmax per one-hot block; inverse min-max scale for continuous columns.
  Table decode(const Eigen::MatrixXd& encoded) const;

 private:
  Schema schema_;
  std::optional<size_t> skip_;
  size_t width_;
  std::vector<size_t> offsets_;
  std::vector<Block> blocks_;
};

}  // namespace dpsynth

#endif  // DPSYNTH_TABLE_HPP
