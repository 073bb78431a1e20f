#include "dpsynth/table.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_set>

namespace dpsynth {

ColumnDomain ColumnDomain::categorical(std::string name, size_t cardinality) {
  if (cardinality < 2) throw InputError("categorical cardinality must be >= 2");
  ColumnDomain c;
  c.name = std::move(name);
  c.kind = Kind::categorical;
  c.cardinality = cardinality;
  return c;
}

ColumnDomain ColumnDomain::categorical(std::string name, std::vector<std::string> labels) {
  ColumnDomain c = categorical(std::move(name), labels.size());
  c.labels = std::move(labels);
  return c;
}

ColumnDomain ColumnDomain::continuous(std::string name, double lower, double upper,
                                      size_t bin_count) {
  if (!(lower < upper)) throw InputError("continuous bounds need lower < upper");
  if (bin_count < 2) throw InputError("bin count must be >= 2");
  ColumnDomain c;
  c.name = std::move(name);
  c.kind = Kind::continuous;
  c.lower = lower;
  c.upper = upper;
  c.bin_count = bin_count;
  return c;
}

Schema::Schema(std::vector<ColumnDomain> cols, std::optional<size_t> target)
    : columns(std::move(cols)), target_index(target) {
  std::unordered_set<std::string> names;
  for (const auto& c : columns) {
    if (!names.insert(c.name).second) throw InputError("duplicate column name: " + c.name);
  }
  if (target_index && *target_index >= columns.size()) {
    throw InputError("target index out of range");
  }
}

size_t Schema::index_of(const std::string& name) const {
  for (size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].name == name) return i;
  }
  throw InputError("unknown column: " + name);
}

bool Schema::all_categorical() const {
  return std::all_of(columns.begin(), columns.end(),
                     [](const ColumnDomain& c) { return c.is_categorical(); });
}

Table::Table(Schema schema, std::vector<double> row_major_values)
    : schema_(std::move(schema)), values_(std::move(row_major_values)) {
  const size_t d = schema_.width();
  if (d == 0 || values_.size() % d != 0) throw InputError("value count does not match schema");
  rows_ = values_.size() / d;
  if (rows_ == 0) throw InputError("table needs at least one row");
  for (size_t c = 0; c < d; ++c) {
    const auto& col = schema_[c];
    if (!col.is_categorical()) continue;
    for (size_t r = 0; r < rows_; ++r) {
      const double v = at(r, c);
      if (v < 0.0 || v >= static_cast<double>(col.cardinality) || v != std::floor(v)) {
        throw InputError("categorical value out of domain in column " + col.name);
      }
    }
  }
}

TableBuilder::TableBuilder(Schema schema, size_t reserve_rows) : schema_(std::move(schema)) {
  values_.reserve(reserve_rows * schema_.width());
}

void TableBuilder::push_row(const std::vector<double>& row) {
  if (row.size() != schema_.width()) throw InputError("row width mismatch");
  values_.insert(values_.end(), row.begin(), row.end());
  ++rows_;
}

double& TableBuilder::cell(size_t row, size_t col) {
  return values_[row * schema_.width() + col];
}

void TableBuilder::resize(size_t rows) {
  rows_ = rows;
  values_.resize(rows * schema_.width());
}

Table TableBuilder::build() && { return Table(std::move(schema_), std::move(values_)); }

MarginalTable::MarginalTable(std::vector<size_t> attrs, std::vector<size_t> dims)
    : attrs_(std::move(attrs)), dims_(std::move(dims)) {
  if (attrs_.size() != dims_.size() || attrs_.empty()) {
    throw InputError("marginal needs matching attrs and dims");
  }
  strides_.assign(dims_.size(), 1);
  size_t total = 1;
  for (size_t i = dims_.size(); i-- > 0;) {
    strides_[i] = total;
    total *= dims_[i];
  }
  counts_.assign(total, 0.0);
}

size_t MarginalTable::flat_index(const std::vector<size_t>& cell) const {
  size_t idx = 0;
  for (size_t i = 0; i < cell.size(); ++i) idx += cell[i] * strides_[i];
  return idx;
}

double MarginalTable::total() const {
  double s = 0.0;
  for (double c : counts_) s += c;
  return s;
}

std::vector<double> MarginalTable::project(size_t axis) const {
  std::vector<double> out(dims_[axis], 0.0);
  const size_t stride = strides_[axis];
  const size_t dim = dims_[axis];
  for (size_t flat = 0; flat < counts_.size(); ++flat) {
    out[(flat / stride) % dim] += counts_[flat];
  }
  return out;
}

Table discretize(const Table& table, size_t bins, size_t* clamped_values) {
  if (bins < 2) throw InputError("bin count must be >= 2");
  size_t clamped = 0;
  std::vector<ColumnDomain> cols;
  cols.reserve(table.cols());
  for (size_t c = 0; c < table.cols(); ++c) {
    const auto& col = table.schema()[c];
    if (col.is_categorical()) {
      cols.push_back(col);
    } else {
      if (!std::isfinite(col.lower) || !std::isfinite(col.upper)) {
        throw InputError("discretize needs finite declared bounds for " + col.name);
      }
      cols.push_back(ColumnDomain::categorical(col.name, bins));
    }
  }
  Schema out_schema(std::move(cols), table.schema().target_index);

  std::vector<double> values(table.values());
  for (size_t c = 0; c < table.cols(); ++c) {
    const auto& col = table.schema()[c];
    if (col.is_categorical()) continue;
    const double span = col.upper - col.lower;
    for (size_t r = 0; r < table.rows(); ++r) {
      const double v = values[r * table.cols() + c];
      if (v < col.lower || v > col.upper) ++clamped;
      double bin = std::floor((v - col.lower) / span * static_cast<double>(bins));
      bin = std::clamp(bin, 0.0, static_cast<double>(bins - 1));
      values[r * table.cols() + c] = bin;
    }
  }
  if (clamped_values) *clamped_values = clamped;
  return Table(std::move(out_schema), std::move(values));
}

Table undiscretize(const Table& binned, const Schema& original) {
  if (binned.cols() != original.width()) throw InputError("schema width mismatch");
  std::vector<double> values(binned.values());
  for (size_t c = 0; c < original.width(); ++c) {
    const auto& col = original[c];
    if (col.is_categorical()) continue;
    const size_t bins = binned.schema()[c].cardinality;
    const double width = (col.upper - col.lower) / static_cast<double>(bins);
    for (size_t r = 0; r < binned.rows(); ++r) {
      double& v = values[r * binned.cols() + c];
      v = col.lower + (v + 0.5) * width;
    }
  }
  return Table(original, std::move(values));
}

MarginalTable marginal(const Table& table, const std::vector<size_t>& attrs) {
  if (attrs.empty()) throw InputError("marginal needs at least one attribute");
  std::set<size_t> unique(attrs.begin(), attrs.end());
  if (unique.size() != attrs.size()) throw InputError("repeated attribute in marginal");
  std::vector<size_t> dims;
  for (size_t a : attrs) {
    if (a >= table.cols()) throw InputError("attribute index out of range");
    const auto& col = table.schema()[a];
    if (!col.is_categorical()) {
      throw InputError("marginal needs categorical attributes; discretize first");
    }
    dims.push_back(col.cardinality);
  }
  MarginalTable m(attrs, dims);
  std::vector<size_t> cell(attrs.size());
  for (size_t r = 0; r < table.rows(); ++r) {
    for (size_t i = 0; i < attrs.size(); ++i) {
      cell[i] = static_cast<size_t>(table.at(r, attrs[i]));
    }
    m[m.flat_index(cell)] += 1.0;
  }
  return m;
}

MarginalTable to_distribution(const MarginalTable& m) {
  MarginalTable out(m.attrs(), m.dims());
  double total = 0.0;
  for (size_t i = 0; i < m.size(); ++i) {
    out[i] = std::max(0.0, m[i]);
    total += out[i];
  }
  if (total <= 0.0) {
    const double u = 1.0 / static_cast<double>(out.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = u;
    return out;
  }
  for (size_t i = 0; i < out.size(); ++i) out[i] /= total;
  return out;
}

namespace {

double entropy_bits(const std::vector<double>& counts, double n) {
  double h = 0.0;
  for (double c : counts) {
    if (c > 0.0) h -= (c / n) * std::log2(c / n);
  }
  return h;
}

}  // namespace

double mutual_information(const Table& table, size_t i, size_t j,
                          const std::vector<size_t>& given) {
  std::vector<size_t> attrs = given;
  attrs.push_back(i);
  attrs.push_back(j);
  MarginalTable joint = marginal(table, attrs);  // validates distinctness

  const size_t g = given.size();
  const double n = static_cast<double>(table.rows());
  const size_t di = joint.dims()[g];
  const size_t dj = joint.dims()[g + 1];
  size_t gcells = 1;
  for (size_t k = 0; k < g; ++k) gcells *= joint.dims()[k];

  double mi = 0.0;
  std::vector<double> cz(1, 0.0), cxz(di, 0.0), cyz(dj, 0.0);
  for (size_t gz = 0; gz < gcells; ++gz) {
    const size_t base = gz * di * dj;
    double z_total = 0.0;
    std::fill(cxz.begin(), cxz.end(), 0.0);
    std::fill(cyz.begin(), cyz.end(), 0.0);
    for (size_t x = 0; x < di; ++x) {
      for (size_t y = 0; y < dj; ++y) {
        const double c = joint[base + x * dj + y];
        z_total += c;
        cxz[x] += c;
        cyz[y] += c;
      }
    }
    if (z_total <= 0.0) continue;
    for (size_t x = 0; x < di; ++x) {
      for (size_t y = 0; y < dj; ++y) {
        const double c = joint[base + x * dj + y];
        if (c > 0.0) {
          mi += (c / n) * std::log2((c * z_total) / (cxz[x] * cyz[y]));
        }
      }
    }
  }
  return std::max(0.0, mi);
}

double joint_mutual_information(const Table& table, size_t child,
                                const std::vector<size_t>& parents) {
  if (parents.empty()) return 0.0;
  std::vector<size_t> all = parents;
  all.push_back(child);
  MarginalTable joint = marginal(table, all);
  const double n = static_cast<double>(table.rows());

  // I(child; parents) = H(child) + H(parents) - H(child, parents).
  const double h_joint = entropy_bits(joint.counts(), n);
  const double h_child = entropy_bits(joint.project(parents.size()), n);

  size_t pcells = 1;
  for (size_t k = 0; k < parents.size(); ++k) pcells *= joint.dims()[k];
  const size_t dc = joint.dims()[parents.size()];
  std::vector<double> pcounts(pcells, 0.0);
  for (size_t flat = 0; flat < joint.size(); ++flat) pcounts[flat / dc] += joint[flat];
  const double h_parents = entropy_bits(pcounts, n);

  return std::max(0.0, h_child + h_parents - h_joint);
}

double tvd_similarity(const MarginalTable& p, const MarginalTable& q) {
  if (p.dims() != q.dims()) throw InputError("tvd_similarity needs equal shapes");
  double l1 = 0.0;
  for (size_t i = 0; i < p.size(); ++i) l1 += std::abs(p[i] - q[i]);
  return 1.0 - 0.5 * l1;
}

RowEncoder::RowEncoder(const Schema& schema, std::optional<size_t> skip_column)
    : schema_(schema), skip_(skip_column) {
  size_t w = 0;
  offsets_.resize(schema.width(), 0);
  for (size_t c = 0; c < schema.width(); ++c) {
    offsets_[c] = w;
    if (skip_ && *skip_ == c) continue;
    const size_t size = schema[c].is_categorical() ? schema[c].cardinality : 1;
    blocks_.push_back(Block{w, size, schema[c].is_categorical()});
    w += size;
  }
  width_ = w;
}

Eigen::MatrixXd RowEncoder::encode(const Table& table) const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(table.rows(), width_);
  for (size_t c = 0; c < schema_.width(); ++c) {
    if (skip_ && *skip_ == c) continue;
    const auto& col = schema_[c];
    const size_t off = offsets_[c];
    for (size_t r = 0; r < table.rows(); ++r) {
      const double v = table.at(r, c);
      if (col.is_categorical()) {
        out(r, off + static_cast<size_t>(v)) = 1.0;
      } else {
        const double scaled = 2.0 * (v - col.lower) / (col.upper - col.lower) - 1.0;
        out(r, off) = std::clamp(scaled, -1.0, 1.0);
      }
    }
  }
  return out;
}

Table RowEncoder::decode(const Eigen::MatrixXd& encoded) const {
  if (skip_) throw InputError("cannot decode with a skipped column");
  if (static_cast<size_t>(encoded.cols()) != width_) throw InputError("encoded width mismatch");
  const size_t n = encoded.rows();
  std::vector<double> values(n * schema_.width());
  for (size_t c = 0; c < schema_.width(); ++c) {
    const auto& col = schema_[c];
    const size_t off = offsets_[c];
    for (size_t r = 0; r < n; ++r) {
      double v;
      if (col.is_categorical()) {
        size_t best = 0;
        for (size_t k = 1; k < col.cardinality; ++k) {
          if (encoded(r, off + k) > encoded(r, off + best)) best = k;
        }
        v = static_cast<double>(best);
      } else {
        const double y = std::clamp(encoded(r, off), -1.0, 1.0);
        v = col.lower + (y + 1.0) * 0.5 * (col.upper - col.lower);
      }
      values[r * schema_.width() + c] = v;
    }
  }
  return Table(schema_, std::move(values));
}

}  // namespace dpsynth
