#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include <json.hpp>

#include "riskprof/cli.hpp"

using nlohmann::json;
using riskprof::run_command;

namespace {

namespace fs = std::filesystem;

struct Run {
    int code;
    std::string out;
    std::string err;

    json report() const { return json::parse(out); }
    json error() const { return json::parse(err); }
};

Run run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = run_command(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch() {
    const fs::path dir = fs::temp_directory_path() / ("riskprof_cli_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    return dir;
}

std::string write(const std::string& name, const std::string& text) {
    const fs::path p = scratch() / name;
    std::ofstream(p) << text;
    return p.string();
}

const char* kCoin = R"({"mu": 100, "m1": 0, "m2": 1, "stocks": [
  {"name": "A", "probs": [0.5, 0.5]}, {"name": "B", "probs": [0.5, 0.5]}]})";

const char* kThree = R"({"mu": 1, "m1": 0, "m2": 2, "stocks": [
  {"name": "A", "probs": [0.2, 0.3, 0.5]}, {"name": "B", "probs": [0.5, 0.5, 0]},
  {"name": "C", "probs": ["0.1", "0.6", "0.3"]}]})";

}  // namespace

TEST_CASE("validate reports the offending stock") {
    const auto ok = run({"validate", "--stocks", write("coin.json", kCoin)});
    CHECK(ok.code == 0);
    CHECK(ok.report()["results"]["valid"] == true);

    const auto bad = run({"validate", "--stocks",
                          write("bad.json", R"({"mu":1,"m1":0,"m2":1,"stocks":[{"name":"S","probs":[0.6,0.5]}]})")});
    CHECK(bad.code == 2);
    CHECK(bad.out.empty());
    const json e = bad.error();
    CHECK(e["error"] == "SumNotOne");
    CHECK(e["stock"] == "S");
    CHECK(e["deviation"].get<double>() == doctest::Approx(0.1));
}

TEST_CASE("report layout") {
    const auto r = run({"eval", "--stocks", write("coin.json", kCoin), "--alpha", "50", "--x", "0.5,0.5",
                        "--objective", "ra_w"});
    REQUIRE(r.code == 0);
    const json rep = r.report();
    for (const char* key : {"command", "digest", "seed", "results", "timing_ms"}) CHECK(rep.contains(key));
    CHECK(rep.size() == 5);
    CHECK(rep["results"]["value"].get<double>() == doctest::Approx(1.0));
    CHECK(rep["digest"].get<std::string>().size() == 64);
}

TEST_CASE("digest tracks input bytes") {
    const std::string a = write("a.json", kCoin);
    const std::string b = write("b.json", std::string(kCoin) + " ");
    const auto ra = run({"validate", "--stocks", a}).report();
    const auto ra2 = run({"validate", "--stocks", a}).report();
    const auto rb = run({"validate", "--stocks", b}).report();
    CHECK(ra["digest"] == ra2["digest"]);
    CHECK(ra["digest"] != rb["digest"]);
    CHECK(riskprof::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("eval with witness and oracle") {
    const auto r = run({"eval", "--stocks", write("coin.json", kCoin), "--alpha", "50", "--x", "0.5,0.5",
                        "--objective", "ra_b", "--witness", "--oracle"});
    REQUIRE(r.code == 0);
    const json res = r.report()["results"];
    CHECK(res["value"].get<double>() == doctest::Approx(0.5));
    CHECK(res["oracle"].get<double>() == doctest::Approx(0.5));
    CHECK(res["witness"]["table"].size() == 2);
}

TEST_CASE("eval input errors exit 2") {
    const std::string coin = write("coin.json", kCoin);
    CHECK(run({"eval", "--stocks", coin, "--alpha", "50", "--x", "0.5,0.6"}).code == 2);
    CHECK(run({"eval", "--stocks", coin, "--alpha", "50", "--x", "1"}).code == 2);
    CHECK(run({"eval", "--stocks", coin, "--alpha", "50", "--x", "0.5,0.5", "--objective", "nope"}).code == 2);
    CHECK(run({"eval", "--stocks", coin, "--x", "0.5,0.5"}).code == 2);
    CHECK(run({"eval", "--stocks", (scratch() / "missing.json").string(), "--alpha", "1", "--x", "1,0"}).code == 2);
    CHECK(run({"frobnicate"}).code == 2);
    CHECK(run({}).code == 2);
}

TEST_CASE("optimize writes a plot") {
    const std::string plot = (scratch() / "sweep.dat").string();
    const auto r = run({"optimize", "--stocks", write("coin.json", kCoin), "--alpha", "50", "--objective", "ra_w",
                        "--plot", plot, "--oracle"});
    REQUIRE(r.code == 0);
    const json res = r.report()["results"];
    CHECK(res["value"].get<double>() == doctest::Approx(res["oracle"].get<double>()));
    std::ifstream in(plot);
    std::string header;
    std::getline(in, header);
    CHECK(header.rfind("# x1", 0) == 0);
    int lines = 0;
    for (std::string line; std::getline(in, line);) ++lines;
    CHECK(lines == 5);  // 0, 1/4, 1/2, 3/4, 1
}

TEST_CASE("avg echoes N and short-circuits outside the grid") {
    const auto r = run({"avg", "--stocks", write("coin.json", kCoin), "--alpha", "-10", "--x", "0.5,0.5", "--eps",
                        "0.05", "--delta", "0.1", "--seed", "42"});
    REQUIRE(r.code == 0);
    const json res = r.report()["results"];
    CHECK(res["estimate"] == 0.0);
    CHECK(res["N"] == 400000);
    CHECK(res.contains("chains"));
    CHECK(res.contains("steps_per_sample"));
    CHECK(run({"avg", "--stocks", write("coin.json", kCoin), "--alpha", "50", "--x", "0.5,0.5", "--objective",
               "ra_w"})
              .code == 2);
}

TEST_CASE("RISKPROF_SEED overrides --seed") {
    const std::string coin = write("coin.json", kCoin);
    const std::vector<std::string> args{"avg", "--stocks", coin, "--alpha", "50", "--x", "0.5,0.5",
                                        "--eps", "0.2", "--delta", "0.5", "--seed", "5"};
    ::setenv("RISKPROF_SEED", "77", 1);
    const auto a = run(args);
    ::unsetenv("RISKPROF_SEED");
    const auto b = run(args);
    REQUIRE(a.code == 0);
    REQUIRE(b.code == 0);
    CHECK(a.report()["seed"] == 77);
    CHECK(b.report()["seed"] == 5);
    // Same seed, same sample sequence.
    const auto c = run(args);
    CHECK(b.report()["results"]["estimate"] == c.report()["results"]["estimate"]);
}

TEST_CASE("eval-k methods agree on a lattice portfolio") {
    const std::string three = write("three.json", kThree);
    const std::vector<std::string> base{"eval-k", "--stocks", three, "--alpha", "1", "--x", "0.5,0.25,0.25"};
    auto with = [&](std::vector<std::string> extra) {
        auto args = base;
        args.insert(args.end(), extra.begin(), extra.end());
        return run(args);
    };
    const auto exact = with({"--exact"});
    const auto cents = with({"--cents", "4", "--oracle"});
    const auto strip = with({"--striping", "0.25"});
    REQUIRE(exact.code == 0);
    REQUIRE(cents.code == 0);
    REQUIRE(strip.code == 0);
    const double v = exact.report()["results"]["value"].get<double>();
    CHECK(cents.report()["results"]["value"].get<double>() == doctest::Approx(v));
    CHECK(cents.report()["results"]["oracle"].get<double>() == doctest::Approx(v));
    CHECK(strip.report()["results"]["method"] == "striping");
    CHECK(with({"--cents", "3"}).code == 2);
    CHECK(with({"--cents", "4", "--striping", "0.1"}).code == 2);
}

TEST_CASE("optimize-k modes") {
    const std::string three = write("three.json", kThree);
    const auto cents =
        run({"optimize-k", "--stocks", three, "--alpha", "1", "--mode", "cents", "--c", "4", "--objective", "ra_w"});
    const auto hyper = run({"optimize-k", "--stocks", three, "--alpha", "1", "--mode", "hyperplanes"});
    REQUIRE(cents.code == 0);
    REQUIRE(hyper.code == 0);
    CHECK(cents.report()["results"]["candidates"] == 15);
    CHECK(hyper.report()["results"]["value"].get<double>() <=
          cents.report()["results"]["value"].get<double>() + 1e-9);
    CHECK(run({"optimize-k", "--stocks", three, "--alpha", "1", "--mode", "bogus"}).code == 2);
}

TEST_CASE("ingest builds a valid instance") {
    const std::string csv = write("prices.csv",
                                  "date,ticker,price\n2020-01,X,100\n2020-02,X,150\n2020-03,X,150\n"
                                  "2020-01,Y,50\n2020-02,Y,25\n2020-03,Y,500\n");
    const std::string out = (scratch() / "ingested.json").string();
    const auto r = run({"ingest", "--prices", csv, "--mu", "1", "--m1", "0", "--m2", "200", "--out", out});
    REQUIRE(r.code == 0);
    const json res = r.report()["results"];
    CHECK(res["warnings"].size() == 1);
    CHECK(res["instance"]["stocks"].size() == 2);
    const auto v = run({"validate", "--stocks", out});
    CHECK(v.code == 0);

    const std::string bad = write("bad.csv", "date,ticker,price\n2020-01,X,100\n2020-02,X,-1\n");
    const auto b = run({"ingest", "--prices", bad});
    CHECK(b.code == 2);
    CHECK(b.error()["error"] == "NonPositivePrice");
}
