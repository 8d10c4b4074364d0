#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "hyconex/csv.hpp"
#include "hyconex/error.hpp"
#include "hyconex/kmeans.hpp"
#include "hyconex/preprocessor.hpp"
#include "hyconex/sampling.hpp"
#include "hyconex/synthetic.hpp"
#include "support.hpp"

using namespace hcx;
namespace fs = std::filesystem;

namespace {

fs::path write_file(const std::string& name, const std::string& text) {
  const fs::path dir = fs::temp_directory_path() / "hyconex_dataio";
  fs::create_directories(dir);
  const fs::path p = dir / name;
  std::ofstream(p) << text;
  return p;
}

std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

RawDataset numeric_column(const std::vector<double>& values) {
  RawDataset d;
  d.schema.columns = {Column{"v", ColumnKind::Numeric, {}}};
  d.schema.target = "y";
  d.schema.class_labels = {"a", "b"};
  for (std::size_t i = 0; i < values.size(); ++i) {
    d.rows.push_back({values[i]});
    d.labels.push_back(static_cast<int>(i % 2));
  }
  return d;
}

RawDataset colours(std::size_t n) {
  RawDataset d;
  d.schema.columns = {Column{"v", ColumnKind::Numeric, {}}, Column{"colour", ColumnKind::Categorical, {"red", "green", "blue"}}};
  d.schema.target = "y";
  d.schema.class_labels = {"a", "b"};
  const char* names[] = {"red", "green", "blue"};
  for (std::size_t i = 0; i < n; ++i) {
    d.rows.push_back({static_cast<double>(i), std::string(names[i % 3])});
    d.labels.push_back(static_cast<int>(i % 2));
  }
  return d;
}

std::map<int, int> counts(const std::vector<int>& labels) {
  std::map<int, int> c;
  for (int y : labels) ++c[y];
  return c;
}

}  // namespace

TEST_CASE("load_csv parses a numeric table and infers the classes") {
  const auto p = write_file("num.csv", "x1,x2,label\n1.5,2,a\n-3,4e-1,b\n");
  const RawDataset d = load_csv(p);
  CHECK(d.size() == 2);
  CHECK(d.schema.columns.size() == 2);
  CHECK(d.schema.target == "label");
  CHECK(d.schema.num_classes() == 2);
  CHECK(std::get<double>(d.rows[1][1]) == 0.4);
  CHECK(d.labels == std::vector<int>{0, 1});
}

TEST_CASE("load_csv infers categorical columns with their vocabulary") {
  const auto p = write_file("cat.csv", "c,x,label\nb,1,0\na,2,1\nb,3,0\n");
  const RawDataset d = load_csv(p);
  REQUIRE(d.schema.columns[0].kind == ColumnKind::Categorical);
  CHECK(d.schema.columns[0].categories == std::vector<std::string>{"a", "b"});
  CHECK(d.schema.encoded_dim() == 3);
}

TEST_CASE("load_csv errors carry the location") {
  CHECK(error_of([] { load_csv(write_file("ragged.csv", "a,b,label\n1,2,x\n1,2,3,x\n")); }).find("row 3") !=
        std::string::npos);
  CHECK(error_of([] { load_csv(write_file("missing.csv", "a,b,label\n1,,x\n1,2,y\n")); }).find("missing") !=
        std::string::npos);
  CsvOptions o;
  o.target = "nope";
  CHECK(error_of([&] { load_csv(write_file("t.csv", "a,label\n1,x\n2,y\n"), o); }).find("nope") != std::string::npos);
  CHECK_THROWS_AS(load_csv(fs::path("/nonexistent/file.csv")), IoError);
}

TEST_CASE("load_csv with a schema rejects unparseable numbers") {
  const auto good = write_file("s.csv", "a,label\n1,x\n2,y\n");
  const Schema s = load_csv(good).schema;
  const auto bad = write_file("s_bad.csv", "a,label\n1,x\nabc,y\n");
  CHECK(error_of([&] { load_csv(bad, s); }).find("abc") != std::string::npos);
}

TEST_CASE("csv and manifest round trip") {
  const RawDataset d = colours(9);
  const fs::path p = fs::temp_directory_path() / "hyconex_dataio" / "round.csv";
  write_csv(d, p);
  write_manifest(p, d.schema, {{"seed", 3}});
  const auto m = read_manifest(p);
  CHECK(m.at("seed") == 3);
  const RawDataset back = load_csv(p, m.at("schema").get<Schema>());
  CHECK(back.schema == d.schema);
  CHECK(back.rows == d.rows);
  CHECK(back.labels == d.labels);
}

TEST_CASE("preprocessor statistics use the population std") {
  const Preprocessor p = Preprocessor::fit(numeric_column({1, 2, 3}));
  CHECK(p.means()(0) == doctest::Approx(2.0));
  CHECK(p.stds()(0) == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-12));
  CHECK(p.transform(RawRow{3.0})(0) == doctest::Approx(1.0 / std::sqrt(2.0 / 3.0)));
  CHECK(p.transform(RawRow{3.0})(0) == doctest::Approx(1.2247).epsilon(1e-4));
}

TEST_CASE("standardised columns keep zero mean and unit std") {
  const Preprocessor p = Preprocessor::fit(numeric_column({-1, 1, -1, 1}));
  CHECK(p.means()(0) == doctest::Approx(0.0));
  CHECK(p.stds()(0) == doctest::Approx(1.0));
}

TEST_CASE("min-max scaling maps the training range onto [0, 1]") {
  const Preprocessor p = Preprocessor::fit(numeric_column({2, 4, 10}), 0.05, Scaling::MinMax);
  CHECK(p.transform(RawRow{2.0})(0) == 0.0);
  CHECK(p.transform(RawRow{10.0})(0) == 1.0);
  CHECK(p.transform(RawRow{4.0})(0) == doctest::Approx(0.25));
}

TEST_CASE("constant numeric columns are rejected by name") {
  CHECK(error_of([] { Preprocessor::fit(numeric_column({5, 5, 5})); }).find("'v'") != std::string::npos);
}

TEST_CASE("one-hot encoding and unseen categories") {
  const Preprocessor p = Preprocessor::fit(colours(6));
  const RowVector r = p.transform(RawRow{1.0, std::string("red")});
  CHECK(r.size() == 4);
  CHECK(r.tail(3) == RowVector::Unit(3, 0));
  const std::string msg = error_of([&] { (void)p.transform(RawRow{1.0, std::string("purple")}); });
  CHECK(msg.find("purple") != std::string::npos);
  CHECK(msg.find("colour") != std::string::npos);
}

TEST_CASE("inverse transform undoes the numeric scaling") {
  const RawDataset d = colours(30);
  for (Scaling s : {Scaling::Standard, Scaling::MinMax}) {
    const Preprocessor p = Preprocessor::fit(d, 0.05, s);
    for (const auto& row : d.rows) {
      const RawRow back = p.inverse_transform(p.transform(row));
      CHECK(std::abs(std::get<double>(back[0]) - std::get<double>(row[0])) < 1e-9);
      CHECK(std::get<std::string>(back[1]) == std::get<std::string>(row[1]));
    }
  }
}

TEST_CASE("encoded dimension and group index tile the encoded space") {
  const Schema s = colours(3).schema;
  CHECK(s.encoded_dim() == 1 + 3);
  const GroupIndex g = s.groups();
  int next = 0;
  for (const auto& grp : g) {
    CHECK(grp.offset == next);
    next += grp.width;
  }
  CHECK(next == s.encoded_dim());
}

TEST_CASE("dequantization noise touches one-hot coordinates only and rarely flips the argmax") {
  const Preprocessor p = Preprocessor::fit(colours(6), 0.05);
  const Dataset clean = p.encode(colours(300));
  for (Eigen::Index i = 0; i < clean.x.rows(); ++i) CHECK(clean.x.row(i).tail(3).sum() == 1.0);
  int flips = 0, total = 0;
  for (std::uint64_t seed = 0; seed < 334; ++seed) {
    Matrix x = clean.x;
    p.add_dequantization_noise(x, seed);
    CHECK(x.col(0) == clean.x.col(0));
    for (Eigen::Index i = 0; i < x.rows(); ++i, ++total) {
      Eigen::Index a = 0, b = 0;
      x.row(i).tail(3).maxCoeff(&a);
      clean.x.row(i).tail(3).maxCoeff(&b);
      flips += a != b;
    }
  }
  CHECK(total >= 100000);
  CHECK(static_cast<double>(flips) / total <= 1e-3);
}

TEST_CASE("downsampling equalises class counts") {
  RawDataset d = numeric_column(std::vector<double>(140, 1.0));
  d.labels.assign(140, 0);
  for (int i = 0; i < 40; ++i) d.labels[static_cast<std::size_t>(i)] = 1;
  const auto c = counts(downsample_balance(d, 3).labels);
  CHECK(c.at(0) == 40);
  CHECK(c.at(1) == 40);

  std::vector<int> three;
  for (int i = 0; i < 50; ++i) three.push_back(0);
  for (int i = 0; i < 30; ++i) three.push_back(1);
  for (int i = 0; i < 20; ++i) three.push_back(2);
  const auto idx = balanced_indices(three, 3, 5);
  std::vector<int> picked;
  for (auto i : idx) picked.push_back(three[i]);
  const auto c3 = counts(picked);
  CHECK((c3.at(0) == 20 && c3.at(1) == 20 && c3.at(2) == 20));
  CHECK(balanced_indices(three, 3, 5) == idx);
}

TEST_CASE("balanced data is a fixed point of downsampling") {
  const std::vector<int> y{0, 1, 0, 1, 1, 0};
  auto idx = balanced_indices(y, 2, 9);
  std::sort(idx.begin(), idx.end());
  CHECK(idx == std::vector<std::size_t>{0, 1, 2, 3, 4, 5});
}

TEST_CASE("noise-free moons lie on the unit half circle and its shifted twin") {
  const RawDataset d = make_moons(200, 0.0, 1);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double x = std::get<double>(d.rows[i][0]), y = std::get<double>(d.rows[i][1]);
    if (d.labels[i] == 0) {
      CHECK(std::abs(x * x + y * y - 1.0) < 1e-12);
      CHECK(y >= -1e-12);  // pi*i/(n-1) can land one ulp past pi
    } else {
      CHECK(std::abs((x - 1) * (x - 1) + (y - 0.5) * (y - 0.5) - 1.0) < 1e-12);
      CHECK(y <= 0.5 + 1e-12);
    }
  }
}

TEST_CASE("blobs allocate equally and keep centres apart") {
  const RawDataset d = make_blobs(300, 3, 4);
  const auto c = counts(d.labels);
  CHECK((c.at(0) == 100 && c.at(1) == 100 && c.at(2) == 100));
  std::vector<std::array<double, 2>> mean(3, {0.0, 0.0});
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (int j = 0; j < 2; ++j) mean[static_cast<std::size_t>(d.labels[i])][static_cast<std::size_t>(j)] += std::get<double>(d.rows[i][static_cast<std::size_t>(j)]) / 100.0;
  }
  for (int a = 0; a < 3; ++a) {
    for (int b = a + 1; b < 3; ++b) {
      const double dx = mean[static_cast<std::size_t>(a)][0] - mean[static_cast<std::size_t>(b)][0];
      const double dy = mean[static_cast<std::size_t>(a)][1] - mean[static_cast<std::size_t>(b)][1];
      CHECK(std::hypot(dx, dy) > 5.0);  // centres 6 apart, sample means within a few tenths
    }
  }
}

TEST_CASE("generators are deterministic under the seed") {
  CHECK(make_moons(100, 0.1, 5).rows == make_moons(100, 0.1, 5).rows);
  CHECK(make_blobs(90, 3, 5).rows == make_blobs(90, 3, 5).rows);
  CHECK(make_moons(100, 0.1, 5).rows != make_moons(100, 0.1, 6).rows);
}

TEST_CASE("stratified split partitions and preserves ratios") {
  std::vector<int> y;
  for (int i = 0; i < 100; ++i) y.push_back(i < 70 ? 0 : 1);
  const auto s = stratified_split(y, 2, 0.2, 1);
  CHECK(s.train.size() == 80);
  CHECK(s.test.size() == 20);
  std::set<std::size_t> all(s.train.begin(), s.train.end());
  for (auto i : s.test) CHECK(all.insert(i).second);
  CHECK(all.size() == 100);
  int test_zero = 0;
  for (auto i : s.test) test_zero += y[i] == 0;
  CHECK(std::abs(test_zero - 14) <= 1);
  CHECK(stratified_split(y, 2, 0.2, 1).test == s.test);
}

TEST_CASE("split rejects tiny classes and bad fractions") {
  CHECK_THROWS_AS(stratified_split({0, 0, 0, 1}, 2, 0.5, 1), DataError);
  CHECK_THROWS_AS(stratified_split({0, 0, 1, 1}, 2, 1.0, 1), DataError);
}

TEST_CASE("k-means on {0, 1, 10, 11} finds the brute-force optimum") {
  Matrix p(4, 1);
  p << 0, 1, 10, 11;
  // Brute force over all 2-partitions.
  double best = 1e300;
  std::vector<double> best_centres;
  for (int mask = 1; mask < 15; ++mask) {
    double s[2] = {0, 0}, n[2] = {0, 0};
    for (int i = 0; i < 4; ++i) s[(mask >> i) & 1] += p(i, 0), n[(mask >> i) & 1] += 1;
    double sse = 0;
    for (int i = 0; i < 4; ++i) {
      const int c = (mask >> i) & 1;
      sse += std::pow(p(i, 0) - s[c] / n[c], 2);
    }
    if (sse < best) best = sse, best_centres = {std::min(s[0] / n[0], s[1] / n[1]), std::max(s[0] / n[0], s[1] / n[1])};
  }
  const auto r = kmeans(p, 2, 3);
  std::vector<double> c{r.centers(0, 0), r.centers(1, 0)};
  std::sort(c.begin(), c.end());
  CHECK(c[0] == doctest::Approx(best_centres[0]));
  CHECK(c[1] == doctest::Approx(best_centres[1]));
  CHECK(c[0] == doctest::Approx(0.5));
}

TEST_CASE("k-means with one cluster returns the mean; SSE never increases") {
  const Matrix p = fixture::gaussian(50, 3, 2);
  const auto one = kmeans(p, 1, 0);
  CHECK((one.centers.row(0) - p.colwise().mean()).cwiseAbs().maxCoeff() < 1e-12);
  const auto r = kmeans(fixture::gaussian(200, 2, 7), 5, 11);
  for (std::size_t i = 1; i < r.sse.size(); ++i) CHECK(r.sse[i] <= r.sse[i - 1] + 1e-12);
  const auto again = kmeans(fixture::gaussian(200, 2, 7), 5, 11);
  CHECK(again.centers == r.centers);
}

TEST_CASE("nearest alternative centre and its tie rule") {
  ClusterIndex idx;
  Matrix c(2, 2);
  c << 0, 0, 10, 0;
  idx.centers = {c, Matrix::Constant(1, 2, 7.0)};
  RowVector x(2);
  x << 1, 1;
  CHECK(idx.nearest(x, 0) == c.row(0));
  x << 5, 0;
  CHECK(idx.nearest_index(x, 0) == 0);
  x << -100, 3;
  CHECK(idx.nearest(x, 1) == Matrix::Constant(1, 2, 7.0).row(0));
}

TEST_CASE("per-class k-means builds k centres per class") {
  const RawDataset raw = make_blobs(150, 3, 1);
  const Dataset d = Preprocessor::fit(raw).encode(raw);
  const ClusterIndex idx = kmeans_per_class(d, 4, 2);
  CHECK(idx.num_classes() == 3);
  for (const auto& c : idx.centers) {
    CHECK(c.rows() == 4);
    CHECK(c.allFinite());
  }
}
