#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "cli/app.hpp"
#include "cli/io.hpp"

namespace fs = std::filesystem;
using namespace flipscale::cli;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("flipscale-cli-test-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void expect_all_valid(const fs::path& dir) {
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    ++files;
    const auto problems = validate_file(e.path());
    INFO(e.path().string());
    CHECK(problems.empty());
    for (const auto& p : problems) MESSAGE(p);
  }
  CHECK(files > 0);
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("csv quoting and parsing round trip") {
    Table t{{"name", "v"}, {}};
    t.add({std::string("plain"), 1.5});
    t.add({std::string("with,comma"), std::int64_t{2}});
    t.add({std::string("say \"hi\"\nnext"), Cell{}});
    const auto text = to_csv(t);
    CHECK(text.find("\"with,comma\"") != std::string::npos);
    CHECK(text.find("\"say \"\"hi\"\"\nnext\"") != std::string::npos);
    const auto records = parse_csv(text);
    REQUIRE(records.size() == 4);
    CHECK(records[2][0] == "with,comma");
    CHECK(records[3][0] == "say \"hi\"\nnext");
    CHECK(records[3][1].empty());
  }

  TEST_CASE("number formatting round trips") {
    for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17}) {
      CHECK(std::stod(format_double(v)) == v);
    }
    CHECK(format_double(-1.0 / 0.0) == "-inf");
  }

  TEST_CASE("sha256 known digest") {
    CHECK(sha256_hex("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  }

  TEST_CASE("limit tables") {
    const auto dir = scratch("limit");
    auto r = invoke({"--out", dir.string(), "limit", "--family", "itermaj", "--m", "3",
                     "--xgrid", "-3:3:0.1"});
    REQUIRE(r.code == 0);
    const auto rows = parse_csv(read_file(dir / "limit.csv"));
    REQUIRE(rows.size() == 62);
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const double F = std::stod(rows[i][1]);
      CHECK(F > 0);
      CHECK(F < 1);
      const double Fm = std::stod(rows[rows.size() - i][1]);
      CHECK(F + Fm == doctest::Approx(1.0).epsilon(1e-9));
    }
    CHECK(rows[31][0] == "0");
    CHECK(std::stod(rows[31][1]) == doctest::Approx(0.5).epsilon(1e-12));

    r = invoke({"--out", dir.string(), "--prefix", "tribes", "limit", "--family", "tribes",
                "--n", "65536", "--xgrid", "-2:4:0.5"});
    REQUIRE(r.code == 0);
    const auto tr = parse_csv(read_file(dir / "tribes.csv"));
    REQUIRE(tr.size() == 14);
    for (std::size_t i = 1; i < tr.size(); ++i) {
      const double x = std::stod(tr[i][0]);
      CHECK(std::stod(tr[i][1]) == doctest::Approx(1 - std::exp(-std::exp(x))).epsilon(1e-12));
    }

    r = invoke({"--out", dir.string(), "--prefix", "dict", "--format", "json", "limit",
                "--family", "dictator"});
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(read_file(dir / "dict.json"));
    REQUIRE(j["rows"].size() == 11);
    for (const auto& row : j["rows"]) CHECK(row[1].get<double>() == doctest::Approx(row[0].get<double>()));
    expect_all_valid(dir);
  }

  TEST_CASE("unsupported limit is a validation error") {
    const auto dir = scratch("unsupported");
    const auto r = invoke({"--out", dir.string(), "limit", "--family", "circular-tribes", "--n", "64"});
    CHECK(r.code == kExitValidation);
    CHECK(!r.err.empty());
  }

  TEST_CASE("sample reruns are byte identical and replay") {
    const auto dir = scratch("sample");
    const std::vector<std::string> tail = {"sample", "--family", "majority", "--n", "501", "--N", "3000"};
    auto args = std::vector<std::string>{"--out", (dir / "a").string(), "--seed", "11"};
    args.insert(args.end(), tail.begin(), tail.end());
    REQUIRE(invoke(args).code == 0);
    args[1] = (dir / "b").string();
    args[3] = "11";
    REQUIRE(invoke(args).code == 0);
    CHECK(read_file(dir / "a" / "sample.csv") == read_file(dir / "b" / "sample.csv"));

    // the worker count must not change the output
    args[1] = (dir / "c").string();
    args.insert(args.begin(), {"--workers", "3"});
    REQUIRE(invoke(args).code == 0);
    CHECK(read_file(dir / "a" / "sample.csv") == read_file(dir / "c" / "sample.csv"));

    const auto manifest = nlohmann::json::parse(read_file(dir / "a" / "sample.manifest.json"));
    CHECK(manifest["seed"] == 11);
    CHECK(manifest["summary"]["check"]["pass"] == true);
    CHECK(manifest["outputs"][0]["sha256"] == sha256_hex(read_file(dir / "a" / "sample.csv")));

    const auto rep = invoke({"replay", (dir / "a" / "sample.manifest.json").string()});
    CHECK(rep.code == 0);
    CHECK(read_file(dir / "a" / "replay" / "sample.csv") == read_file(dir / "a" / "sample.csv"));

    // a tampered output makes the replay report a mismatch
    write_file(dir / "b" / "sample.manifest.json",
               [&] {
                 auto m = manifest;
                 m["outputs"][0]["sha256"] = std::string(64, '0');
                 return m.dump(2);
               }());
    CHECK(invoke({"replay", (dir / "b" / "sample.manifest.json").string()}).code == kExitFailure);
    CHECK(!validate_file(dir / "b" / "sample.manifest.json").empty());
    fs::remove(dir / "b" / "sample.manifest.json");
    expect_all_valid(dir);
  }

  TEST_CASE("constant function exits with the no-flip code") {
    const auto dir = scratch("noflip");
    const auto r = invoke({"--out", dir.string(), "sample", "--family", "constant", "--n", "8", "--N", "10"});
    CHECK(r.code == kExitNoFlip);
    CHECK(r.err.find("constant") != std::string::npos);
  }

  TEST_CASE("parse errors and bad values exit with the validation code") {
    CHECK(invoke({"sample", "--nope"}).code == kExitValidation);
    CHECK(invoke({"--format", "xml", "limit"}).code == kExitValidation);
    CHECK(invoke({"limit", "--xgrid", "3:1:0.5"}).code == kExitValidation);
    CHECK(invoke({}).code == kExitValidation);
    CHECK(invoke({"--help"}).code == kExitOk);
  }

  TEST_CASE("construct writes the descriptor and rejects malformed measures") {
    const auto dir = scratch("construct");
    auto r = invoke({"--out", dir.string(), "construct", "--atoms", "-1:0.5,1:0.5", "--n", "4096",
                     "--a-n", "16", "--N", "500"});
    REQUIRE(r.code == 0);
    auto d = nlohmann::json::parse(read_file(dir / "construct.function.json"));
    CHECK(d["mode"] == "plain");
    CHECK(d["block"] == 16);
    REQUIRE(d["quantiles"].size() == 2);
    CHECK(d["quantiles"][0].get<double>() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(d["quantiles"][1] == "-inf");
    CHECK(d["global_counts"].size() == 2);
    CHECK(d["block_counts"].size() == 2);

    write_file(dir / "measure.json", R"({"atoms": [{"x": -1, "q": 0.5}, {"x": 1, "q": 0.5}]})");
    r = invoke({"--out", dir.string(), "--prefix", "tr", "construct", "--measure",
                (dir / "measure.json").string(), "--mode", "transitive", "--n", "4096", "--a-n",
                "40", "--calibration-N", "2000", "--N", "200"});
    REQUIRE(r.code == 0);
    d = nlohmann::json::parse(read_file(dir / "tr.function.json"));
    CHECK(d["mode"] == "transitive");
    CHECK(d["window_length"] == 24);
    REQUIRE(d["thresholds"].size() == 2);
    CHECK(d["thresholds"][0]["bits"].get<std::string>().size() == 24);
    CHECK(d["thresholds"][1]["value"] == 0);
    const auto rep = invoke({"replay", (dir / "tr.manifest.json").string()});
    CHECK(rep.code == 0);

    fs::remove(dir / "measure.json");
    expect_all_valid(dir);

    CHECK(invoke({"--out", dir.string(), "construct", "--atoms", "-1:0.5,1:0.4"}).code == kExitValidation);
    CHECK(invoke({"--out", dir.string(), "construct", "--atoms", "1:0.5,-1:0.5"}).code == kExitValidation);
    write_file(dir / "bad.json", R"({"atoms": [{"x": 0}]})");
    CHECK(invoke({"--out", dir.string(), "construct", "--measure", (dir / "bad.json").string()}).code ==
          kExitValidation);
  }

  TEST_CASE("percolation subcommands") {
    const auto dir = scratch("percolation");
    auto r = invoke({"--out", dir.string(), "percolation", "--n", "16", "--N", "2000", "f-of-lambda",
                     "--lambdas", "-1.5:1.5:0.25"});
    REQUIRE(r.code == 0);
    const auto rows = parse_csv(read_file(dir / "percolation-f-of-lambda.csv"));
    REQUIRE(rows.size() == 14);
    for (std::size_t i = 2; i < rows.size(); ++i) CHECK(std::stod(rows[i][1]) >= std::stod(rows[i - 1][1]));

    CHECK(invoke({"--out", dir.string(), "percolation", "--n", "16", "--N", "200", "pivotal"}).code == 0);
    CHECK(invoke({"--out", dir.string(), "--format", "json", "percolation", "--n", "16", "--N", "500",
                  "flip", "--bins", "10"})
              .code == 0);
    CHECK(invoke({"--out", dir.string(), "percolation", "--n", "16", "--N", "200", "--r", "0.1",
                  "g-of-t", "--ts", "0,1,2"})
              .code == 0);
    CHECK(invoke({"replay", (dir / "percolation-flip.manifest.json").string()}).code == 0);
    expect_all_valid(dir);
  }

  TEST_CASE("config file, environment and flag precedence") {
    const auto dir = scratch("config");
    write_file(dir / "run.toml", "seed = 7\nprefix = \"cfg\"\n[sample]\nfamily = \"tribes\"\nn = 64\nN = 50\n");
    const std::vector<std::string> base = {"--out", dir.string(), "--config", (dir / "run.toml").string()};
    auto seed_of = [&](std::vector<std::string> extra) {
      auto args = base;
      args.insert(args.end(), extra.begin(), extra.end());
      args.push_back("sample");
      REQUIRE(invoke(args).code == 0);
      return nlohmann::json::parse(read_file(dir / "cfg.manifest.json"));
    };
    ::unsetenv(kSeedEnv);
    auto m = seed_of({});
    CHECK(m["seed"] == 7);
    CHECK(m["parameters"]["family"] == "tribes");
    CHECK(m["parameters"]["N"] == "50");
    ::setenv(kSeedEnv, "9", 1);
    CHECK(seed_of({})["seed"] == 9);
    CHECK(seed_of({"--seed", "3"})["seed"] == 3);
    ::unsetenv(kSeedEnv);
    // flags override config values
    auto args = base;
    args.insert(args.end(), {"sample", "--N", "80"});
    REQUIRE(invoke(args).code == 0);
    CHECK(nlohmann::json::parse(read_file(dir / "cfg.manifest.json"))["parameters"]["N"] == "80");
  }

  TEST_CASE("validator rejects malformed files") {
    const auto dir = scratch("validator");
    write_file(dir / "ragged.csv", "a,b\n1,2\n3\n");
    write_file(dir / "dup.csv", "a,a\n1,2\n");
    write_file(dir / "quote.csv", "a,b\n\"x,2\n");
    write_file(dir / "noschema.json", "{\"columns\": []}");
    write_file(dir / "table.json", R"({"schema": "flipscale.table/1", "columns": ["a"], "rows": [[1, 2]]})");
    for (const char* f : {"ragged.csv", "dup.csv", "quote.csv", "noschema.json", "table.json"}) {
      INFO(f);
      CHECK(!validate_file(dir / f).empty());
    }
    CHECK(invoke({"validate", (dir / "dup.csv").string()}).code == kExitValidation);
  }
}
