#ifndef DPSYNTH_DATAGEN_HPP
#define DPSYNTH_DATAGEN_HPP

#include <string>
#include <utility>

#include "dpsynth/table.hpp"

namespace dpsynth {

enum class GaussFamily { eye, corr, mix_unsup, mix_sup };

GaussFamily gauss_family_from_string(const std::string& name);
std::string to_string(GaussFamily family);

struct GaussSpec {
  GaussFamily family = GaussFamily::eye;
  size_t n = 1;
  size_t d = 2;
  uint64_t seed = 0;

  GaussSpec() = default;
  GaussSpec(GaussFamily f, size_t n_rows, size_t d_cols, uint64_t s);
};

// Columns of i.i.d. standard normals; declared bounds [-6, 6].
Table gen_eye_gauss(const GaussSpec& spec);

// Multivariate normal with unit variances, correlation 0.5 on neighboring
// columns and 0 elsewhere, sampled via Cholesky of the tridiagonal covariance.
Table gen_corr_gauss(const GaussSpec& spec);

// Columns 0-1: equal-weight mixture of six Gaussians on a ring (radius 5,
// component std 0.5); remaining columns i.i.d. N(0,1). The mix_sup family
// appends a 6-label categorical target, label k placed at ring position
// (2k mod 6) + [k >= 3] so adjacent ring components never carry adjacent
// labels.
Table gen_mix_gauss(const GaussSpec& spec);

Table generate(const GaussSpec& spec);

constexpr double kMixRingRadius = 5.0;
constexpr double kMixComponentStd = 0.5;
constexpr size_t kMixComponents = 6;

// Ring position of label k for the mix_sup target.
size_t mix_label_ring_position(size_t label);

// CSV ingestion: header must match schema names; categorical strings are
// mapped through the schema's declared label lists (or parsed as codes when
// no labels are declared). Parse failures name the row and column.
Table load_csv(const std::string& path, const Schema& schema);
void write_csv(const Table& table, const std::string& path);

// Seeded disjoint row partition with |test| = round(n * test_fraction).
std::pair<Table, Table> split(const Table& table, double test_fraction, uint64_t seed);

}  // namespace dpsynth

#endif  // DPSYNTH_DATAGEN_HPP
