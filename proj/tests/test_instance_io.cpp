#include <doctest.h>

#include "riskprof/instance_io.hpp"

using namespace riskprof;

namespace {

const char* kCoin = R"({
  "m1": 0,
  "m2": 1,
  "mu": 100.0,
  "stocks": [
    {
      "name": "A",
      "probs": [
        0.5,
        0.5
      ]
    },
    {
      "name": "B",
      "probs": [
        "0.25",
        "0.75"
      ]
    }
  ]
})";

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return ErrorCode::InvariantViolation;
}

}  // namespace

TEST_CASE("instance parsing accepts numbers and decimal strings") {
    const Instance inst = parse_instance_text(kCoin);
    CHECK(inst.grid.mu == 100.0);
    REQUIRE(inst.stocks.size() == 2);
    CHECK(inst.stocks[1].name == "B");
    CHECK(inst.stocks[1].dist.probs[1] == 0.75);
    CHECK(inst.marginals().size() == 2);
}

TEST_CASE("instance round trip is byte-identical") {
    const Instance inst = parse_instance_text(kCoin);
    CHECK(instance_to_json(inst).dump(2) == std::string(kCoin));
    const Instance again = parse_instance(instance_to_json(inst));
    CHECK(instance_to_json(again).dump(2) == std::string(kCoin));
}

TEST_CASE("instance errors") {
    CHECK(code_of([] { parse_instance_text("{"); }) == ErrorCode::ParseError);
    CHECK(code_of([] { parse_instance_text(R"({"mu":1,"m1":0,"stocks":[]})"); }) == ErrorCode::ParseError);
    CHECK(code_of([] { parse_instance_text(R"({"mu":1,"m1":0,"m2":1,"stocks":[]})"); }) == ErrorCode::ParseError);
    CHECK(code_of([] { parse_instance_text(R"({"mu":0,"m1":0,"m2":1,"stocks":[{"probs":[1,0]}]})"); }) ==
          ErrorCode::InvalidGrid);
    CHECK(code_of([] { parse_instance_text(R"({"mu":1,"m1":0,"m2":1,"stocks":[{"probs":["x",1]}]})"); }) ==
          ErrorCode::ParseError);
    try {
        parse_instance_text(R"({"mu":1,"m1":0,"m2":1,"stocks":[{"name":"ok","probs":[1,0]},{"name":"Z","probs":[0.6,0.5]}]})");
        FAIL("no throw");
    } catch (const InstanceError& e) {
        CHECK(e.code() == ErrorCode::SumNotOne);
        CHECK(e.stock() == "Z");
        REQUIRE(e.deviation().has_value());
        CHECK(*e.deviation() == doctest::Approx(0.1));
    }
}

TEST_CASE("price CSV parsing with quotes") {
    const auto rows = parse_price_csv("date,ticker,price\r\n2020-01-01,\"AC,ME\",100\n2020-01-02,\"Q\"\"T\",\"12.5\"\n");
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].ticker == "AC,ME");
    CHECK(rows[1].ticker == "Q\"T");
    CHECK(rows[1].price == 12.5);
    CHECK(code_of([] { parse_price_csv("day,ticker,price\n"); }) == ErrorCode::ParseError);
    CHECK(code_of([] { parse_price_csv("date,ticker,price\n2020,A\n"); }) == ErrorCode::ParseError);
    CHECK(code_of([] { parse_price_csv("date,ticker,price\n2020,A,abc\n"); }) == ErrorCode::ParseError);
    CHECK(code_of([] { parse_price_csv("date,ticker,price\n2020,\"A,1\n"); }) == ErrorCode::ParseError);
}

TEST_CASE("ingest examples") {
    const ReturnGrid g(1.0, 0, 200);
    {
        const auto r = ingest_prices({{"d1", "X", 100}, {"d2", "X", 150}}, 1, g);
        CHECK(r.instance.stocks[0].dist.at_level(150) == 1.0);
        CHECK(r.warnings.empty());
    }
    {
        const auto r = ingest_prices({{"d1", "X", 100}, {"d2", "X", 100}}, 1, g);
        CHECK(r.instance.stocks[0].dist.at_level(100) == 1.0);
    }
    {
        const auto r = ingest_prices({{"d1", "X", 100}, {"d2", "X", 150}, {"d3", "X", 150}}, 1, g);
        CHECK(r.instance.stocks[0].dist.at_level(150) == 0.5);
        CHECK(r.instance.stocks[0].dist.at_level(100) == 0.5);
    }
    {
        // Period two skips the middle observation.
        const auto r = ingest_prices({{"d1", "X", 100}, {"d2", "X", 150}, {"d3", "X", 120}}, 2, g);
        CHECK(r.instance.stocks[0].dist.at_level(120) == 1.0);
    }
}

TEST_CASE("ingest rounding, clamping and errors") {
    CHECK(round_to_level(102.5, ReturnGrid(5.0, 0, 40)) == 20);   // exact level
    CHECK(round_to_level(102.5, ReturnGrid(1.0, 0, 200)) == 102); // tie goes down
    CHECK(round_to_level(102.6, ReturnGrid(1.0, 0, 200)) == 103);
    CHECK(round_to_level(-2.5, ReturnGrid(1.0, -5, 5)) == -3);

    const ReturnGrid g(10.0, 5, 15);
    const auto r = ingest_prices({{"a", "X", 100}, {"b", "X", 300}, {"c", "Y", 10}, {"d", "Y", 1}}, 1, g);
    CHECK(r.instance.stocks[0].dist.at_level(15) == 1.0);
    CHECK(r.instance.stocks[1].dist.at_level(5) == 1.0);
    CHECK(r.warnings.size() == 2);
    CHECK(r.instance.stocks[1].name == "Y");

    CHECK(code_of([&] { ingest_prices({{"a", "X", 100}}, 1, g); }) == ErrorCode::InsufficientData);
    CHECK(code_of([&] { ingest_prices({{"a", "X", 100}, {"b", "X", 90}}, 2, g); }) == ErrorCode::InsufficientData);
    CHECK(code_of([&] { ingest_prices({{"a", "X", 100}, {"b", "X", 0}}, 1, g); }) == ErrorCode::NonPositivePrice);
    CHECK(code_of([&] { ingest_prices({{"b", "X", 100}, {"a", "X", 90}}, 1, g); }) == ErrorCode::ParseError);
    CHECK(code_of([&] { ingest_prices({}, 1, g); }) == ErrorCode::InsufficientData);
}
