#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <map>
#include <vector>

#include "dpsynth/datagen.hpp"

using namespace dpsynth;

namespace {

double column_mean(const Table& t, size_t c) {
  double s = 0.0;
  for (size_t r = 0; r < t.rows(); ++r) s += t.at(r, c);
  return s / t.rows();
}

double column_correlation(const Table& t, size_t a, size_t b) {
  const double ma = column_mean(t, a), mb = column_mean(t, b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (size_t r = 0; r < t.rows(); ++r) {
    const double xa = t.at(r, a) - ma, xb = t.at(r, b) - mb;
    sab += xa * xb;
    saa += xa * xa;
    sbb += xb * xb;
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST_CASE("eye gauss moments") {
  Table t = gen_eye_gauss(GaussSpec(GaussFamily::eye, 100000, 8, 17));
  for (size_t c = 0; c < 8; ++c) {
    CHECK(std::abs(column_mean(t, c)) < 0.02);
    double var = 0.0;
    const double m = column_mean(t, c);
    for (size_t r = 0; r < t.rows(); ++r) var += (t.at(r, c) - m) * (t.at(r, c) - m);
    var /= t.rows();
    CHECK(var == doctest::Approx(1.0).epsilon(0.03));
  }
  CHECK(std::abs(column_correlation(t, 0, 5)) < 0.02);
  CHECK(std::abs(column_correlation(t, 2, 7)) < 0.02);
}

TEST_CASE("generators are deterministic under a fixed seed") {
  const GaussSpec spec(GaussFamily::corr, 500, 8, 99);
  Table a = gen_corr_gauss(spec);
  Table b = gen_corr_gauss(spec);
  CHECK(a.values() == b.values());

  Table c = gen_mix_gauss(GaussSpec(GaussFamily::mix_sup, 300, 4, 7));
  Table d = gen_mix_gauss(GaussSpec(GaussFamily::mix_sup, 300, 4, 7));
  CHECK(c.values() == d.values());
}

TEST_CASE("corr gauss covariance structure") {
  Table t = gen_corr_gauss(GaussSpec(GaussFamily::corr, 100000, 8, 23));
  for (size_t c = 0; c + 1 < 8; ++c) {
    CHECK(column_correlation(t, c, c + 1) == doctest::Approx(0.5).epsilon(0.04));
  }
  CHECK(std::abs(column_correlation(t, 0, 2)) < 0.02);
  CHECK(std::abs(column_correlation(t, 1, 6)) < 0.02);
  for (size_t c = 0; c < 8; ++c) {
    double var = 0.0;
    const double m = column_mean(t, c);
    for (size_t r = 0; r < t.rows(); ++r) var += (t.at(r, c) - m) * (t.at(r, c) - m);
    var /= t.rows();
    CHECK(var == doctest::Approx(1.0).epsilon(0.03));
  }
}

TEST_CASE("mix gauss ring components") {
  const size_t n = 60000;
  Table t = gen_mix_gauss(GaussSpec(GaussFamily::mix_sup, n, 4, 29));
  CHECK(t.cols() == 5);
  CHECK(t.schema().target_index == 4);

  // Assign each row to its ring label and verify component means.
  std::map<int, std::vector<std::pair<double, double>>> by_label;
  for (size_t r = 0; r < n; ++r) {
    by_label[static_cast<int>(t.at(r, 4))].push_back({t.at(r, 0), t.at(r, 1)});
  }
  CHECK(by_label.size() == 6);
  for (const auto& [label, pts] : by_label) {
    CHECK(std::abs(pts.size() / static_cast<double>(n) - 1.0 / 6.0) < 0.01);
    double mx = 0.0, my = 0.0;
    for (const auto& [x, y] : pts) {
      mx += x;
      my += y;
    }
    mx /= pts.size();
    my /= pts.size();
    const double angle = 2.0 * 3.14159265358979323846 *
                         mix_label_ring_position(label) / kMixComponents;
    CHECK(std::abs(mx - kMixRingRadius * std::cos(angle)) < 0.05);
    CHECK(std::abs(my - kMixRingRadius * std::sin(angle)) < 0.05);
  }

  // Noise columns are uncorrelated with the signal columns.
  CHECK(std::abs(column_correlation(t, 0, 2)) < 0.02);
  CHECK(std::abs(column_correlation(t, 1, 3)) < 0.02);
}

TEST_CASE("mix label ring positions form a permutation with no adjacent pair") {
  std::vector<bool> seen(6, false);
  for (size_t k = 0; k < 6; ++k) {
    const size_t p = mix_label_ring_position(k);
    CHECK(!seen[p]);
    seen[p] = true;
  }
  // Labels of neighboring ring positions always differ by more than 1.
  std::vector<size_t> label_at(6);
  for (size_t k = 0; k < 6; ++k) label_at[mix_label_ring_position(k)] = k;
  for (size_t p = 0; p < 6; ++p) {
    const size_t a = label_at[p], b = label_at[(p + 1) % 6];
    CHECK(std::abs(static_cast<long>(a) - static_cast<long>(b)) > 1);
  }
}

TEST_CASE("csv round trip") {
  Schema schema({ColumnDomain::continuous("x", -10.0, 10.0),
                 ColumnDomain::categorical("c", {"red", "green", "blue"})});
  Table t(schema, {1.5, 0.0, -2.25, 2.0, 0.1234567891234567, 1.0});
  const std::string path = "datagen_roundtrip.csv";
  write_csv(t, path);
  Table back = load_csv(path, schema);
  CHECK(back.rows() == 3);
  CHECK(back.values() == t.values());
  std::remove(path.c_str());
}

TEST_CASE("csv errors name row and column") {
  const std::string path = "datagen_bad.csv";
  {
    FILE* f = std::fopen(path.c_str(), "w");
    std::fputs("x,c\n1.5,purple\n", f);
    std::fclose(f);
  }
  Schema schema({ColumnDomain::continuous("x", -10.0, 10.0),
                 ColumnDomain::categorical("c", {"red", "green", "blue"})});
  CHECK_THROWS_WITH_AS(load_csv(path, schema),
                       "unknown category 'purple' at row 1, column c", InputError);
  {
    FILE* f = std::fopen(path.c_str(), "w");
    std::fputs("x,c\nnotanumber,red\n", f);
    std::fclose(f);
  }
  CHECK_THROWS_WITH_AS(load_csv(path, schema),
                       "cannot parse 'notanumber' at row 1, column x", InputError);
  std::remove(path.c_str());
}

TEST_CASE("split partitions rows") {
  Table t = gen_eye_gauss(GaussSpec(GaussFamily::eye, 10, 2, 3));
  auto [train, test] = split(t, 0.2, 11);
  CHECK(train.rows() == 8);
  CHECK(test.rows() == 2);

  auto [train2, test2] = split(t, 0.2, 11);
  CHECK(train.values() == train2.values());
  CHECK(test.values() == test2.values());

  // Union of the parts is the original multiset of rows.
  auto row_key = [](const Table& tab, size_t r) {
    std::vector<double> key;
    for (size_t c = 0; c < tab.cols(); ++c) key.push_back(tab.at(r, c));
    return key;
  };
  std::map<std::vector<double>, int> counts;
  for (size_t r = 0; r < t.rows(); ++r) counts[row_key(t, r)]++;
  for (size_t r = 0; r < train.rows(); ++r) counts[row_key(train, r)]--;
  for (size_t r = 0; r < test.rows(); ++r) counts[row_key(test, r)]--;
  for (const auto& [k, v] : counts) CHECK(v == 0);

  CHECK_THROWS_AS(split(t, 0.01, 1), InputError);
  CHECK_THROWS_AS(split(t, 1.5, 1), InputError);
}
