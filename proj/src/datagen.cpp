#include "dpsynth/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "dpsynth/rng.hpp"

namespace dpsynth {

namespace {

constexpr double kGaussBound = 6.0;
constexpr double kPi = 3.14159265358979323846;

Schema gauss_schema(size_t d, bool with_target) {
  std::vector<ColumnDomain> cols;
  cols.reserve(d + (with_target ? 1 : 0));
  for (size_t c = 0; c < d; ++c) {
    cols.push_back(ColumnDomain::continuous("x" + std::to_string(c), -kGaussBound, kGaussBound));
  }
  std::optional<size_t> target;
  if (with_target) {
    cols.push_back(ColumnDomain::categorical("label", kMixComponents));
    target = d;
  }
  return Schema(std::move(cols), target);
}

}  // namespace

GaussFamily gauss_family_from_string(const std::string& name) {
  if (name == "eye") return GaussFamily::eye;
  if (name == "corr") return GaussFamily::corr;
  if (name == "mix_unsup") return GaussFamily::mix_unsup;
  if (name == "mix_sup") return GaussFamily::mix_sup;
  throw InputError("unknown gauss family: " + name);
}

std::string to_string(GaussFamily family) {
  switch (family) {
    case GaussFamily::eye: return "eye";
    case GaussFamily::corr: return "corr";
    case GaussFamily::mix_unsup: return "mix_unsup";
    case GaussFamily::mix_sup: return "mix_sup";
  }
  return "eye";
}

GaussSpec::GaussSpec(GaussFamily f, size_t n_rows, size_t d_cols, uint64_t s)
    : family(f), n(n_rows), d(d_cols), seed(s) {
  if (n < 1) throw InputError("n must be >= 1");
  if (d < 2) throw InputError("d must be >= 2");
}

Table gen_eye_gauss(const GaussSpec& spec) {
  Rng rng(spec.seed);
  std::vector<double> values(spec.n * spec.d);
  for (double& v : values) v = rng.next_gaussian();
  return Table(gauss_schema(spec.d, false), std::move(values));
}

Table gen_corr_gauss(const GaussSpec& spec) {
  // Cholesky of the tridiagonal covariance (1 on the diagonal, 0.5 on the
  // first off-diagonals) is lower bidiagonal; the factor follows the two-term
  // recurrence below.
  const size_t d = spec.d;
  std::vector<double> diag(d), sub(d, 0.0);
  diag[0] = 1.0;
  for (size_t i = 1; i < d; ++i) {
    sub[i] = 0.5 / diag[i - 1];
    const double rem = 1.0 - sub[i] * sub[i];
    if (rem <= 0.0) throw std::runtime_error("covariance is not positive definite");
    diag[i] = std::sqrt(rem);
  }

  Rng rng(spec.seed);
  std::vector<double> values(spec.n * d);
  std::vector<double> z(d);
  for (size_t r = 0; r < spec.n; ++r) {
    for (size_t c = 0; c < d; ++c) z[c] = rng.next_gaussian();
    values[r * d] = diag[0] * z[0];
    for (size_t c = 1; c < d; ++c) {
      values[r * d + c] = sub[c] * z[c - 1] + diag[c] * z[c];
    }
  }
  return Table(gauss_schema(d, false), std::move(values));
}

size_t mix_label_ring_position(size_t label) {
  return (2 * label) % kMixComponents + (label >= kMixComponents / 2 ? 1 : 0);
}

Table gen_mix_gauss(const GaussSpec& spec) {
  if (spec.family != GaussFamily::mix_unsup && spec.family != GaussFamily::mix_sup) {
    throw InputError("gen_mix_gauss needs a mix family");
  }
  const bool supervised = spec.family == GaussFamily::mix_sup;
  const size_t d = spec.d;
  const size_t width = d + (supervised ? 1 : 0);

  std::vector<size_t> position_of_label(kMixComponents);
  for (size_t k = 0; k < kMixComponents; ++k) position_of_label[k] = mix_label_ring_position(k);

  Rng rng(spec.seed);
  std::vector<double> values(spec.n * width);
  for (size_t r = 0; r < spec.n; ++r) {
    const size_t label = rng.next_index(kMixComponents);
    const size_t pos = position_of_label[label];
    const double angle = 2.0 * kPi * static_cast<double>(pos) / kMixComponents;
    values[r * width] = kMixRingRadius * std::cos(angle) + kMixComponentStd * rng.next_gaussian();
    values[r * width + 1] =
        kMixRingRadius * std::sin(angle) + kMixComponentStd * rng.next_gaussian();
    for (size_t c = 2; c < d; ++c) values[r * width + c] = rng.next_gaussian();
    if (supervised) values[r * width + d] = static_cast<double>(label);
  }
  return Table(gauss_schema(d, supervised), std::move(values));
}

Table generate(const GaussSpec& spec) {
  switch (spec.family) {
    case GaussFamily::eye: return gen_eye_gauss(spec);
    case GaussFamily::corr: return gen_corr_gauss(spec);
    default: return gen_mix_gauss(spec);
  }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field.push_back('"');
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        field.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (ch != '\r') {
      field.push_back(ch);
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += "\"\"";
    else out.push_back(ch);
  }
  out.push_back('"');
  return out;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

Table load_csv(const std::string& path, const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw InputError("empty file: " + path);
  const auto header = split_csv_line(line);
  if (header.size() != schema.width()) {
    throw InputError("header width does not match schema in " + path);
  }
  for (size_t c = 0; c < schema.width(); ++c) {
    if (header[c] != schema[c].name) {
      throw InputError("header mismatch at column " + std::to_string(c) + ": expected " +
                       schema[c].name + ", got " + header[c]);
    }
  }

  std::vector<double> values;
  size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++row;
    const auto fields = split_csv_line(line);
    if (fields.size() != schema.width()) {
      throw InputError("row " + std::to_string(row) + ": expected " +
                       std::to_string(schema.width()) + " fields, got " +
                       std::to_string(fields.size()));
    }
    for (size_t c = 0; c < schema.width(); ++c) {
      const auto& col = schema[c];
      const std::string& f = fields[c];
      const std::string where = "row " + std::to_string(row) + ", column " + col.name;
      if (col.is_categorical() && !col.labels.empty()) {
        const auto it = std::find(col.labels.begin(), col.labels.end(), f);
        if (it == col.labels.end()) throw InputError("unknown category '" + f + "' at " + where);
        values.push_back(static_cast<double>(it - col.labels.begin()));
      } else {
        try {
          size_t pos = 0;
          const double v = std::stod(f, &pos);
          if (pos != f.size()) throw std::invalid_argument(f);
          if (col.is_categorical() &&
              (v < 0.0 || v >= static_cast<double>(col.cardinality) || v != std::floor(v))) {
            throw InputError("category code out of range at " + where);
          }
          values.push_back(v);
        } catch (const InputError&) {
          throw;
        } catch (const std::exception&) {
          throw InputError("cannot parse '" + f + "' at " + where);
        }
      }
    }
  }
  if (row == 0) throw InputError("no data rows in " + path);
  return Table(schema, std::move(values));
}

void write_csv(const Table& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write file: " + path);
  const Schema& schema = table.schema();
  for (size_t c = 0; c < schema.width(); ++c) {
    out << (c ? "," : "") << csv_escape(schema[c].name);
  }
  out << "\n";
  for (size_t r = 0; r < table.rows(); ++r) {
    for (size_t c = 0; c < schema.width(); ++c) {
      if (c) out << ",";
      const auto& col = schema[c];
      const double v = table.at(r, c);
      if (col.is_categorical() && !col.labels.empty()) {
        out << csv_escape(col.labels[static_cast<size_t>(v)]);
      } else if (col.is_categorical()) {
        out << static_cast<long long>(v);
      } else {
        out << format_double(v);
      }
    }
    out << "\n";
  }
}

std::pair<Table, Table> split(const Table& table, double test_fraction, uint64_t seed) {
  if (!(test_fraction > 0.0) || !(test_fraction < 1.0)) {
    throw InputError("test fraction must be in (0, 1)");
  }
  const size_t n = table.rows();
  const size_t n_test = static_cast<size_t>(std::llround(test_fraction * static_cast<double>(n)));
  if (n_test == 0 || n_test == n) throw InputError("split leaves one side empty");

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (size_t i = n; i-- > 1;) {
    std::swap(order[i], order[rng.next_index(i + 1)]);
  }

  const size_t d = table.cols();
  std::vector<double> test_values, train_values;
  test_values.reserve(n_test * d);
  train_values.reserve((n - n_test) * d);
  for (size_t i = 0; i < n; ++i) {
    auto& dst = i < n_test ? test_values : train_values;
    const size_t r = order[i];
    for (size_t c = 0; c < d; ++c) dst.push_back(table.at(r, c));
  }
  return {Table(table.schema(), std::move(train_values)),
          Table(table.schema(), std::move(test_values))};
}

}  // namespace dpsynth
