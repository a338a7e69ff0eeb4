#include <doctest.h>

#include <filesystem>
#include <limits>
#include <sstream>

#include "abmuq/csv.hpp"
#include "abmuq/errors.hpp"
#include "abmuq/random.hpp"

using namespace abmuq;

TEST_CASE("parse header and rows, ignoring blank lines and CR") {
  std::istringstream in("a,b,c\r\n1,2,3\n\n4,,6\n");
  const csv::Table t = csv::parse(in);
  CHECK(t.header == std::vector<std::string>{"a", "b", "c"});
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[1][1].empty());
  CHECK(t.column("c") == 2);
  CHECK_THROWS_AS(t.column("d"), ConfigError);
}

TEST_CASE("ragged rows and empty input are rejected") {
  std::istringstream ragged("a,b\n1\n");
  CHECK_THROWS_AS(csv::parse(ragged), ConfigError);
  std::istringstream empty("");
  CHECK_THROWS_WITH_AS(csv::parse(empty, "runs.csv"), doctest::Contains("0 rows"), ConfigError);
}

TEST_CASE("doubles round-trip exactly through format") {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double v = (uniform01(rng) - 0.5) * std::pow(10.0, static_cast<int>(uniform_index(rng, 40)) - 20);
    CHECK(csv::to_double(csv::format(v), "t") == v);
  }
  CHECK(csv::format(0.25) == "0.25");
  CHECK(csv::format(3.0) == "3");
}

TEST_CASE("field conversions report context") {
  CHECK(csv::to_u64("18446744073709551615", "x") == std::numeric_limits<std::uint64_t>::max());
  CHECK(csv::to_int("-12", "x") == -12);
  CHECK_THROWS_WITH_AS(csv::to_double("1.5x", "runs.csv:3"), doctest::Contains("runs.csv:3"), ConfigError);
  CHECK_THROWS_AS(csv::to_u64("-1", "x"), ConfigError);
}

TEST_CASE("write then read") {
  const auto dir = std::filesystem::temp_directory_path() / "abmuq_csv_test" / "nested";
  std::filesystem::remove_all(dir.parent_path());
  csv::Table t{{"x1", "x2"}, {{"0.1", "0.2"}, {"1", "2"}}};
  csv::write(dir / "t.csv", t);
  const csv::Table back = csv::read(dir / "t.csv");
  CHECK(back.header == t.header);
  CHECK(back.rows == t.rows);
  std::filesystem::remove_all(dir.parent_path());
  CHECK_THROWS_AS(csv::read(dir / "missing.csv"), ConfigError);
}
