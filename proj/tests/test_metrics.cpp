#include <doctest.h>

#include <random>

#include "hyconex/error.hpp"
#include "hyconex/metrics.hpp"
#include "support.hpp"

using namespace hcx;

namespace {

GroupIndex numeric_groups(int d) {
  GroupIndex g;
  for (int i = 0; i < d; ++i) g.push_back(FeatureGroup{i, i, 1, ColumnKind::Numeric});
  return g;
}

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) out(i++) = d;
  return out;
}

}  // namespace

TEST_CASE("coverage and validity by definition") {
  CounterfactualBatch b;
  b.num_classes = 2;
  b.predicted.assign(10, 0);
  for (int i = 0; i < 10; ++i) {
    b.source.push_back(i);
    b.target.push_back(1);
    b.cf_predicted.push_back(i == 3 ? 0 : 1);
    b.valid.push_back(i == 3 ? 0 : 1);
  }
  const CoverageValidity cv = coverage_validity(b);
  CHECK(cv.coverage == 1.0);
  CHECK(cv.validity == doctest::Approx(0.9));
  CHECK_THROWS_AS(coverage_validity(CounterfactualBatch{}), Error);
}

TEST_CASE("proximity examples") {
  RowVector a(2), b(2);
  a << 1, 2;
  b << 4, -2;
  const Proximity same = proximity(a, a, numeric_groups(2));
  CHECK((same.l1 == 0.0 && same.l2 == 0.0 && same.hamming == 0.0));
  const Proximity p = proximity(a, b, numeric_groups(2));
  CHECK(p.l1 == 7.0);
  CHECK(p.l2 == 5.0);

  GroupIndex g{FeatureGroup{0, 0, 2, ColumnKind::Categorical}, FeatureGroup{1, 2, 2, ColumnKind::Categorical},
               FeatureGroup{2, 4, 3, ColumnKind::Categorical}, FeatureGroup{3, 7, 1, ColumnKind::Numeric}};
  RowVector x(8), y(8);
  x << 1, 0, 0, 1, 0, 0, 1, 0.5;
  y << 1, 0, 1, 0, 0, 0, 1, 0.5;
  const Proximity h = proximity(x, y, g);
  CHECK(h.hamming == doctest::Approx(1.0 / 3.0));
  CHECK(h.l1 == 0.0);
}

TEST_CASE("proximity matches the direct definition and is a metric") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Matrix m = fixture::gaussian(3, 5, seed);
    const GroupIndex g = numeric_groups(5);
    const RowVector a = m.row(0), b = m.row(1), c = m.row(2);
    double l1 = 0.0, l2 = 0.0;
    for (int j = 0; j < 5; ++j) l1 += std::abs(a(j) - b(j)), l2 += (a(j) - b(j)) * (a(j) - b(j));
    CHECK(std::abs(proximity(a, b, g).l1 - l1) < 1e-9);
    CHECK(std::abs(proximity(a, b, g).l2 - std::sqrt(l2)) < 1e-9);
    CHECK(proximity(a, b, g).l2 == proximity(b, a, g).l2);
    CHECK(proximity(a, c, g).l1 <= proximity(a, b, g).l1 + proximity(b, c, g).l1 + 1e-12);
    CHECK(proximity(a, c, g).l2 <= proximity(a, b, g).l2 + proximity(b, c, g).l2 + 1e-12);
  }
}

TEST_CASE("probabilistic plausibility counts strictly-above-threshold densities") {
  const double d = -1.3;
  const Plausibility p = plausibility(vec({d + 1, d + 1, d + 1, d - 1}), d);
  CHECK(p.p_plaus == 0.75);
  CHECK(p.log_dens == doctest::Approx(d + 0.5));
}

TEST_CASE("LOF matches the brute-force definition on small random sets") {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const int n = 24 + static_cast<int>(seed * 3);  // up to 57 reference points
    const int d = 1 + static_cast<int>(seed % 4);
    const int k = 2 + static_cast<int>(seed % 6);
    const Matrix ref = fixture::gaussian(n, d, seed + 1);
    Matrix q = fixture::gaussian(7, d, seed + 2, 1.5);
    q.row(0) = ref.row(3);  // a query coinciding with a reference point
    const LofIndex idx(ref, k);
    const Vector got = idx.score(q);
    const auto want = oracle::lof(ref, k, q);
    for (Eigen::Index i = 0; i < q.rows(); ++i) CHECK(std::abs(got(i) - want[static_cast<std::size_t>(i)]) < 1e-9);
  }
}

TEST_CASE("LOF on a uniform lattice interior is exactly one") {
  Matrix line(21, 1);
  for (int i = 0; i < 21; ++i) line(i, 0) = i;
  const LofIndex one_d(line, 2);
  Matrix q(15, 1);
  for (int i = 0; i < 15; ++i) q(i, 0) = i + 3;
  for (Eigen::Index i = 0; i < q.rows(); ++i) CHECK(std::abs(one_d.score(q)(i) - 1.0) < 1e-9);

  Matrix grid(15 * 15, 2);
  for (int i = 0; i < 15; ++i)
    for (int j = 0; j < 15; ++j) grid(i * 15 + j, 0) = i, grid(i * 15 + j, 1) = j;
  const LofIndex two_d(grid, 4);
  Matrix inner(1, 2);
  inner << 7, 7;
  CHECK(std::abs(two_d.score(inner)(0) - 1.0) < 1e-9);
}

TEST_CASE("LOF flags a far outlier") {
  const Matrix ref = fixture::gaussian(100, 2, 4);
  Matrix far(1, 2);
  far << 10, 0;
  CHECK(LofIndex(ref, 20).score(far)(0) > 1.5);
}

TEST_CASE("LOF needs k below the reference size") {
  CHECK_THROWS_AS(LofIndex(fixture::gaussian(5, 2, 1), 5), Error);
}

TEST_CASE("isolation forest normalisation constant") {
  CHECK(isolation_c(2) == 1.0);
  const double euler = 0.5772156649;
  const double h = std::log(255.0) + euler;
  CHECK(isolation_c(256) == doctest::Approx(2 * h - 2.0 * 255 / 256).epsilon(1e-12));
}

TEST_CASE("isolation forest score is the normalised path transform") {
  const IsoForest f(fixture::gaussian(300, 2, 3), 7);
  CHECK(f.subsample_size() == 256);
  CHECK(f.height_limit() == 8);
  const Matrix q = fixture::gaussian(20, 2, 8, 2.0);
  const Vector e = f.path_lengths(q);
  const Vector s = f.score(q);
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    CHECK(s(i) == doctest::Approx(0.5 - std::pow(2.0, -e(i) / isolation_c(256))).epsilon(1e-12));
    CHECK(s(i) > -0.5);
    CHECK(s(i) <= 0.5);
  }
  CHECK(IsoForest(fixture::gaussian(40, 2, 3), 1).subsample_size() == 40);
}

TEST_CASE("isolation forest ranks inliers above a far outlier on 20 seeded clouds") {
  int ordered = 0, positive = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Matrix cloud = fixture::gaussian(500, 2, seed);
    const IsoForest f(cloud, seed);
    Matrix probe(2, 2);
    probe << 0, 0, 10, 0;
    const Vector s = f.score(probe);
    ordered += s(0) > s(1);
    positive += f.mean_score(cloud.topRows(256)) > 0.0;
  }
  CHECK(ordered > 10);
  CHECK(positive > 10);
}

TEST_CASE("AUROC examples and ties") {
  CHECK(auroc(vec({0.9, 0.8, 0.2, 0.1}), {1, 1, 0, 0}) == 1.0);
  CHECK(auroc(vec({0.9, 0.2}), {0, 1}) == 0.0);
  CHECK(auroc(vec({0.5, 0.5, 0.5}), {0, 1, 1}) == 0.5);
  CHECK_THROWS_AS(auroc(vec({0.1, 0.2}), {1, 1}), Error);
}

TEST_CASE("AUROC matches pair counting and ignores monotone transforms") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 gen(seed);
    const int n = 10 + static_cast<int>(seed % 50);
    Vector s(n);
    std::vector<int> y(static_cast<std::size_t>(n));
    std::uniform_int_distribution<int> coarse(0, 6);  // coarse scores force ties
    for (int i = 0; i < n; ++i) {
      s(i) = coarse(gen) / 6.0;
      y[static_cast<std::size_t>(i)] = i % 3 == 0 ? 1 : 0;
    }
    const std::vector<double> sv(s.data(), s.data() + n);
    CHECK(std::abs(auroc(s, y) - oracle::auroc_pairs(sv, y)) < 1e-9);
    // scalar exp so equal scores stay bitwise equal (packet and tail paths can differ by an ulp)
    Vector t(n);
    for (int i = 0; i < n; ++i) t(i) = std::exp(3.0 * s(i));
    CHECK(std::abs(auroc(t, y) - auroc(s, y)) < 1e-12);
  }
}

TEST_CASE("multiclass AUROC is the macro one-vs-rest average; binary uses column 1") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Matrix p = softmax_rows(fixture::gaussian(40, 3, seed));
    std::vector<int> y;
    for (int i = 0; i < 40; ++i) y.push_back(static_cast<int>((i * 7 + seed) % 3));
    CHECK(std::abs(auroc(p, y) - oracle::auroc_macro(p, y)) < 1e-9);
  }
  const Matrix p2 = softmax_rows(fixture::gaussian(30, 2, 1));
  std::vector<int> y2;
  for (int i = 0; i < 30; ++i) y2.push_back(i % 2);
  CHECK(auroc(p2, y2) == auroc(Vector(p2.col(1)), y2));
}

TEST_CASE("timing an empty run is near zero") {
  CHECK(timed([] {}) < 0.01);
}

TEST_CASE("report table follows the published column order") {
  CFReport r;
  r.coverage = 1.0;
  const std::string t = format_cf_table({{"m", r}});
  const char* cols[] = {"Method", "Cover.", "Valid.", "L1", "L2", "P.Plaus.", "LogDens", "LOF", "IsoForest", "Time(s)"};
  std::size_t at = 0;
  for (const char* c : cols) {
    const auto next = t.find(c, at);
    CHECK_MESSAGE(next != std::string::npos, c);
    at = next;
  }
  CHECK(t.find("Ham.") == std::string::npos);
  r.categorical = true;
  CHECK(format_cf_table({{"m", r}}).find("Ham.") != std::string::npos);
}
