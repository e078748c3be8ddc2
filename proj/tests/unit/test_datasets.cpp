#include <cmath>
#include <numbers>
#include <sstream>

#include "coda/datasets.hpp"
#include "doctest.h"

using namespace coda;

TEST_CASE("moons domain has balanced labels") {
  const DomainDataset d = make_moons_domain(200, 0, 0.1, 1);
  CHECK(d.rows() == 200);
  CHECK(d.feature_count() == 2);
  int ones = 0;
  for (double y : d.labels()) ones += y == 1.0;
  CHECK(ones == 100);
  CHECK_THROWS(make_moons_domain(0, 0, 0.1, 1));
  CHECK_THROWS(make_moons_domain(7, 0, 0.1, 1));
}

TEST_CASE("moons rotation is exact without noise") {
  const DomainDataset base = make_moons_domain(40, 0, 0.0, 3);
  for (int idx : {5, 10, 3}) {
    const DomainDataset rot = make_moons_domain(40, idx, 0.0, 3);
    const double theta = 18.0 * idx * std::numbers::pi / 180.0;
    for (std::size_t i = 0; i < base.rows(); ++i) {
      const double x = base.features().at(i, 0), y = base.features().at(i, 1);
      CHECK(rot.features().at(i, 0) ==
            doctest::Approx(std::cos(theta) * x - std::sin(theta) * y).epsilon(1e-12));
      CHECK(rot.features().at(i, 1) ==
            doctest::Approx(std::sin(theta) * x + std::cos(theta) * y).epsilon(1e-12));
      CHECK(rot.labels()[i] == base.labels()[i]);
    }
  }
  // quarter turn and half turn
  const DomainDataset q = make_moons_domain(40, 5, 0.0, 3);
  const DomainDataset h = make_moons_domain(40, 10, 0.0, 3);
  for (std::size_t i = 0; i < base.rows(); ++i) {
    CHECK(q.features().at(i, 0) == doctest::Approx(-base.features().at(i, 1)));
    CHECK(q.features().at(i, 1) == doctest::Approx(base.features().at(i, 0)));
    CHECK(h.features().at(i, 0) == doctest::Approx(-base.features().at(i, 0)));
    CHECK(h.features().at(i, 1) == doctest::Approx(-base.features().at(i, 1)));
  }
}

TEST_CASE("moons stream layout and determinism") {
  const DomainStream s = make_moons_stream(10, 200, 0.1, 7);
  CHECK(s.sources.size() == 9);
  std::size_t total = s.target.rows();
  for (const auto& d : s.sources) total += d.rows();
  CHECK(total == 2000);
  CHECK(s.target.domain_index() == 9);

  const DomainStream small = make_moons_stream(3, 10, 0.1, 7);
  CHECK(small.sources.size() == 2);
  CHECK_THROWS(make_moons_stream(2, 10, 0.1, 7));

  const DomainStream again = make_moons_stream(10, 200, 0.1, 7);
  for (std::size_t i = 0; i < s.sources.size(); ++i) {
    CHECK(s.sources[i].features().values() == again.sources[i].features().values());
  }
}

TEST_CASE("dataset invariants") {
  CHECK_THROWS_AS(DomainDataset(0, Tensor({1, 2}), {0.0}, Task::kClassification), DataError);
  CHECK_THROWS_AS(DomainDataset(0, Tensor({2, 2}), {0.0, 0.5}, Task::kClassification),
                  DataError);
  CHECK_NOTHROW(DomainDataset(0, Tensor({2, 2}), {0.0, 0.5}, Task::kRegression));
  Tensor bad({2, 1});
  bad[0] = std::nan("");
  CHECK_THROWS_AS(DomainDataset(0, bad, {0.0, 1.0}, Task::kClassification), DataError);
}

TEST_CASE("csv ingestion groups rows by domain") {
  std::istringstream in(
      "domain,a,b,label\n"
      "0,1,2,0\n0,3,4,1\n1,5,6,0\n1,7,8,1\n2,9,10,0\n2,11,12,1\n");
  const DomainStream s = parse_csv_stream(in, {});
  CHECK(s.sources.size() == 2);
  CHECK(s.target.rows() == 2);
  CHECK(s.sources[1].features().at(1, 1) == 8.0);
  CHECK(s.sources[0].feature_names() == std::vector<std::string>{"a", "b"});
}

TEST_CASE("csv rows are sorted by domain index") {
  std::istringstream in("label,x,t\n1,0.5,3\n0,0.1,1\n1,0.2,1\n0,0.3,3\n0,1,2\n1,2,2\n");
  const DomainStream s = parse_csv_stream(in, {.domain_column = "t"});
  CHECK(s.sources[0].domain_index() == 1);
  CHECK(s.sources[1].domain_index() == 2);
  CHECK(s.target.domain_index() == 3);
}

TEST_CASE("csv error contract") {
  std::istringstream bad_cell("domain,a,label\n0,1,0\n0,oops,1\n1,1,0\n1,2,1\n");
  try {
    parse_csv_stream(bad_cell, {});
    FAIL("expected an error");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("line 3") != std::string::npos);
    CHECK(msg.find("'a'") != std::string::npos);
  }
  std::istringstream missing("domain,a\n0,1\n");
  CHECK_THROWS_AS(parse_csv_stream(missing, {}), DataError);
  std::istringstream gap("domain,a,label\n0,1,0\n0,,1\n1,1,0\n1,2,1\n");
  CHECK_THROWS_AS(parse_csv_stream(gap, {}), DataError);
  std::istringstream tiny("domain,a,label\n0,1,0\n0,2,1\n1,2,1\n");
  CHECK_THROWS_AS(parse_csv_stream(tiny, {}), DataError);
  std::istringstream empty("domain,a,label\n");
  CHECK_THROWS_AS(parse_csv_stream(empty, {}), DataError);
  std::istringstream frac("domain,a,label\n0.5,1,0\n0.5,2,1\n1,2,1\n1,3,0\n");
  CHECK_THROWS_AS(parse_csv_stream(frac, {}), DataError);
}

TEST_CASE("csv round trip of a generated stream") {
  const DomainStream s = make_moons_stream(4, 20, 0.1, 2);
  std::stringstream csv;
  write_domain_csv(csv, s.sources[0]);
  std::string body;
  for (std::size_t i = 1; i < s.sources.size(); ++i) {
    std::stringstream part;
    write_domain_csv(part, s.sources[i]);
    std::string line;
    std::getline(part, line);  // header
    while (std::getline(part, line)) csv << line << '\n';
  }
  std::stringstream tail;
  write_domain_csv(tail, s.target.reveal_for_evaluation());
  std::string line;
  std::getline(tail, line);
  while (std::getline(tail, line)) csv << line << '\n';

  const DomainStream back = parse_csv_stream(csv, {});
  REQUIRE(back.sources.size() == s.sources.size());
  for (std::size_t i = 0; i < s.sources.size(); ++i) {
    CHECK(back.sources[i].features().values() == s.sources[i].features().values());
    CHECK(back.sources[i].labels() == s.sources[i].labels());
  }
  CHECK(back.target.reveal_for_evaluation().features().values() ==
        s.target.reveal_for_evaluation().features().values());
}

TEST_CASE("elec2-shaped stream splits 29 plus 1") {
  std::ostringstream out;
  out << "domain";
  for (int j = 0; j < 8; ++j) out << ",f" << j;
  out << ",label\n";
  for (int t = 0; t < 30; ++t) {
    for (int r = 0; r < 4; ++r) {
      out << t;
      for (int j = 0; j < 8; ++j) out << ',' << (t * 0.1 + r * 0.37 + j);
      out << ',' << (r % 2) << '\n';
    }
  }
  std::istringstream in(out.str());
  const DomainStream s = parse_csv_stream(in, {});
  CHECK(s.sources.size() == 29);
  CHECK(s.feature_count() == 8);
}

TEST_CASE("min-max normalization") {
  Tensor x = Tensor::matrix(3, 2, {0, 1, 5, 1, 10, 1});
  DomainDataset a(0, x, {0, 1, 0}, Task::kClassification, {"wide", "flat"});
  DomainDataset b(1, Tensor::matrix(2, 2, {5, 1, 20, 1}), {1, 0}, Task::kClassification,
                  {"wide", "flat"});
  DomainDataset target(2, Tensor::matrix(2, 2, {5, 3, 0, 1}), {1, 0}, Task::kClassification,
                       {"wide", "flat"});
  const DomainStream s = DomainStream::create({a, b}, target);
  const NormalizedStream ns = fit_apply_normalization(s);
  CHECK(ns.stats.dropped_names == std::vector<std::string>{"flat"});
  CHECK(ns.stream.feature_count() == 1);
  // source range [0, 20]: 10 is the midpoint
  CHECK(ns.stream.sources[0].features().at(2, 0) == doctest::Approx(0.0));
  for (const auto& d : ns.stream.sources) {
    for (double v : d.features().values()) {
      CHECK(v >= -1.0);
      CHECK(v <= 1.0);
    }
  }
  const Tensor& z = ns.stream.sources[1].features();
  const Tensor back = ns.stats.invert_features(z);
  CHECK(std::fabs(back.at(1, 0) - 20.0) < 1e-12);
}

TEST_CASE("normalization round trip and degenerate columns") {
  const DomainStream s = make_moons_stream(5, 30, 0.1, 4);
  for (auto method : {NormalizationMethod::kMinMax, NormalizationMethod::kZScore}) {
    const NormalizedStream ns = fit_apply_normalization(s, method);
    for (std::size_t i = 0; i < s.sources.size(); ++i) {
      const Tensor back = ns.stats.invert_features(ns.stream.sources[i].features());
      for (std::size_t k = 0; k < back.size(); ++k) {
        CHECK(std::fabs(back[k] - s.sources[i].features()[k]) < 1e-12);
      }
    }
  }
  DomainDataset c(0, Tensor({2, 2}, 1.0), {0, 1}, Task::kClassification);
  DomainDataset t(1, Tensor({2, 2}, 3.0), {0, 1}, Task::kClassification);
  CHECK_THROWS_AS(fit_apply_normalization(DomainStream::create({c}, t)), DataError);
}

TEST_CASE("regression labels share the normalization and invert") {
  DomainDataset a(0, Tensor::matrix(2, 1, {0, 1}), {10, 30}, Task::kRegression);
  DomainDataset t(1, Tensor::matrix(2, 1, {0, 1}), {20, 40}, Task::kRegression);
  const NormalizedStream ns = fit_apply_normalization(DomainStream::create({a}, t));
  CHECK(ns.stats.label_normalized);
  CHECK(ns.stream.sources[0].labels()[1] == doctest::Approx(1.0));
  CHECK(ns.stats.invert_label(0.0) == doctest::Approx(20.0));
}

TEST_CASE("validation split promotes the last source") {
  const DomainStream s = make_moons_stream(6, 10, 0.1, 1);
  const DomainStream v = s.validation_split();
  CHECK(v.sources.size() == 4);
  CHECK(v.target.domain_index() == 4);
}
