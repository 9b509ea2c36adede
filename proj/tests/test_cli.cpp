#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "afp/json_io.hpp"

using Catch::Approx;
using afp::json;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out, err;
};

fs::path workdir() {
    static fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / ("afp_cli_test_" + std::to_string(::getpid()));
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Run afp_run(const std::string& args) {
    const char* bin = std::getenv("AFP_BIN");
    REQUIRE(bin != nullptr);
    fs::path out = workdir() / "stdout.txt", err = workdir() / "stderr.txt";
    std::string cmd = "cd " + workdir().string() + " && " + bin + " " + args + " >" + out.string() + " 2>" + err.string();
    int status = std::system(cmd.c_str());
    REQUIRE(WIFEXITED(status));
    return {WEXITSTATUS(status), slurp(out), slurp(err)};
}

void write_file(const std::string& name, const std::string& text) {
    std::ofstream(workdir() / name) << text;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
    std::vector<std::vector<std::string>> rows;
    std::ifstream in(p);
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

// Two-atom model with z = 10 and frequency jumps y1 = y2 = 0.3.
const std::string kFixture = R"({"z": 10,
  "mech1": {"b": 0, "c": 0, "m": [[4.285714285714286, 1.0]]},
  "mech2": {"b": 0, "c": 0, "m": [[4.285714285714286, 1.2]]}})";
const std::string kNegative = R"({"z": 10,
  "mech1": {"b": 0, "c": 0, "m": [[4.285714285714286, 1.2]]},
  "mech2": {"b": 0, "c": 0, "m": [[4.285714285714286, 1.0]]}})";

struct Files {
    Files() {
        write_file("fixture.json", kFixture);
        write_file("negative.json", kNegative);
    }
};

} // namespace

TEST_CASE_METHOD(Files, "usage errors exit with 1") {
    auto bad = afp_run("simulate-afp --model fixture.json --out x.csv --bogus 3");
    CHECK(bad.code == 1);
    CHECK(bad.err.find("--bogus") != std::string::npos);
    CHECK(bad.err.find("Usage") != std::string::npos);
    CHECK(afp_run("").code == 1);
    CHECK(afp_run("no-such-command").code == 1);
    auto missing = afp_run("simulate-afp --model missing.json --out never.csv");
    CHECK(missing.code == 1);
    CHECK(json::parse(missing.out)["status"] == "config-error");
    CHECK_FALSE(fs::exists(workdir() / "never.csv"));
    write_file("broken.json", "{\"z\": 10, \"mech1\": ");
    CHECK(afp_run("dual-rates --model broken.json --out r.csv").code == 1);
}

TEST_CASE_METHOD(Files, "simulate-afp emits only the two displacement families") {
    auto r = afp_run("simulate-afp --model fixture.json --r0 0.5 --dt 1e-4 --horizon 1 --out path.csv");
    REQUIRE(r.code == 0);
    auto summary = json::parse(r.out);
    CHECK(summary["status"] == "ok");
    auto rows = read_csv(workdir() / "path.csv");
    REQUIRE(rows.front() == std::vector<std::string>{"t", "value"});
    auto events = read_csv(workdir() / "path.csv.events.csv");
    REQUIRE(events.front() == std::vector<std::string>{"t", "kind", "mark"});
    CHECK(events.size() - 1 == summary["events"].get<std::size_t>());
    long checked = 0;
    for (std::size_t i = 2; i < rows.size(); ++i) {
        double a = std::stod(rows[i - 1][1]), b = std::stod(rows[i][1]);
        if (a == b) continue;
        bool up = std::abs(b - (a + 0.3 * (1 - a))) < 1e-12;
        bool down = std::abs(b - (a - 0.3 * a)) < 1e-12;
        double t0 = std::stod(rows[i - 1][0]), t1 = std::stod(rows[i][0]);
        long inside = 0;
        for (std::size_t e = 1; e < events.size(); ++e) {
            double te = std::stod(events[e][0]);
            if (te > t0 && te <= t1) ++inside;
        }
        if (inside == 1) {
            CHECK((up || down));
            ++checked;
        }
    }
    CHECK(checked > 0);
}

TEST_CASE_METHOD(Files, "outputs are deterministic and JSONL records carry provenance") {
    REQUIRE(afp_run("simulate-afp --model fixture.json --out a.jsonl --format jsonl --seed 11").code == 0);
    REQUIRE(afp_run("simulate-afp --model fixture.json --out b.jsonl --format jsonl --seed 11").code == 0);
    CHECK(slurp(workdir() / "a.jsonl") == slurp(workdir() / "b.jsonl"));
    std::ifstream in(workdir() / "a.jsonl");
    std::string line;
    long n = 0;
    while (std::getline(in, line)) {
        auto rec = json::parse(line);
        CHECK(rec["seed"] == 11);
        CHECK(rec.contains("stream_id"));
        CHECK(rec.contains("config_digest"));
        ++n;
    }
    CHECK(n > 1);
    REQUIRE(afp_run("simulate-afp --model fixture.json --out c.jsonl --format jsonl --seed 12").code == 0);
    CHECK(slurp(workdir() / "a.jsonl") != slurp(workdir() / "c.jsonl"));
}

TEST_CASE_METHOD(Files, "dual-rates") {
    auto r = afp_run("dual-rates --model fixture.json --nmax 4 --out rates.csv");
    REQUIRE(r.code == 0);
    auto rows = read_csv(workdir() / "rates.csv");
    REQUIRE(rows.front() == std::vector<std::string>{"i", "j", "rate"});
    bool found = false;
    for (const auto& row : rows)
        if (row[0] == "2" && row[1] == "1") {
            CHECK(std::stod(row[2]) == Approx(10 * 0.3 * 0.3).epsilon(1e-12));
            found = true;
        }
    CHECK(found);
    auto neg = afp_run("dual-rates --model negative.json --nmax 4 --out neg.csv");
    CHECK(neg.code == 3);
    CHECK(json::parse(neg.out)["negative_rates"].size() > 0);
}

TEST_CASE_METHOD(Files, "verify-duality exit codes") {
    auto ok = afp_run("verify-duality --model fixture.json --paths 4000 --out report.json");
    CHECK(ok.code == 0);
    auto report = json::parse(slurp(workdir() / "report.json"));
    CHECK(report["pass"] == true);
    CHECK(report["cells"].size() == 12);
    auto neg = afp_run("verify-duality --model negative.json --paths 4000 --out neg_report.json");
    CHECK(neg.code == 3);
    CHECK(json::parse(slurp(workdir() / "neg_report.json"))["available"] == false);
}

TEST_CASE_METHOD(Files, "config files supply options and flags override them") {
    write_file("cfg.json", R"({"schema": "afp/simulate-afp/v1", "model": "fixture.json", "horizon": 0.5, "out": "cfg.csv"})");
    REQUIRE(afp_run("simulate-afp --config cfg.json").code == 0);
    CHECK(read_csv(workdir() / "cfg.csv").back()[0] == "0.5");
    REQUIRE(afp_run("simulate-afp --config cfg.json --horizon 0.25").code == 0);
    CHECK(read_csv(workdir() / "cfg.csv").back()[0] == "0.25");
    write_file("wrong.json", R"({"schema": "afp/dual-rates/v1", "model": "fixture.json", "out": "w.csv"})");
    CHECK(afp_run("simulate-afp --config wrong.json").code == 1);
}

TEST_CASE_METHOD(Files, "map-homeo and continuity-probe") {
    write_file("mech.json", R"({"b": 0, "c": 0, "m": [[1.0, 3.0]]})");
    REQUIRE(afp_run("map-homeo --direction to-lambda --z 1 --in mech.json --out lambda.json").code == 0);
    auto L = json::parse(slurp(workdir() / "lambda.json"));
    CHECK(L["atoms"][0][0] == 0.5);
    CHECK(L["atoms"][0][1] == 0.75);
    REQUIRE(afp_run("map-homeo --direction from-lambda --z 1 --in lambda.json --out back.json").code == 0);
    auto back = json::parse(slurp(workdir() / "back.json"));
    CHECK(back["m"]["atoms"][0][0] == 1.0);
    CHECK(back["m"]["atoms"][0][1] == 3.0);

    REQUIRE(afp_run("continuity-probe --epsilon-gap --z 1e4 --s 1 --eps 1e-3,1e-4 --nmax 6 --out gap.json").code == 0);
    auto gap = json::parse(slurp(workdir() / "gap.json"));
    CHECK(gap["rows"][1]["max_branching_error"].get<double>() < 1e-6);
}

TEST_CASE_METHOD(Files, "numerical failures exit with 4") {
    write_file("growth.json", R"({"b": -3, "c": 0, "m": []})");
    auto r = afp_run("simulate-cbi --mech growth.json --x0 1 --horizon 20 --cap 5 --out cbi.csv");
    CHECK(r.code == 4);
    CHECK(json::parse(r.out)["exploded"] == true);
}

TEST_CASE_METHOD(Files, "simulation subcommands write headed CSV files") {
    REQUIRE(afp_run("simulate-dual --model fixture.json --n0 3 --horizon 1 --out dual.csv").code == 0);
    CHECK(read_csv(workdir() / "dual.csv").front() == std::vector<std::string>{"t", "state"});
    REQUIRE(afp_run("culling-converge --model fixture.json --n 4,16 --paths 500 --out cull.csv").code == 0);
    auto cull = read_csv(workdir() / "cull.csv");
    CHECK(cull.front() == std::vector<std::string>{"n", "t", "mean", "stderr", "ks_vs_afp"});
    CHECK(cull.size() == 3);
    REQUIRE(afp_run("large-pop --model fixture.json --z 100,1000 --paths 200 --out lp.csv").code == 0);
    auto lp = read_csv(workdir() / "lp.csv");
    CHECK(lp.front() == std::vector<std::string>{"z", "t", "mc_mean", "logistic", "sup_abs_err"});
    CHECK(lp.size() == 7);
    REQUIRE(afp_run("fluctuations --model fixture.json --z 1000 --paths 200 --out fl.csv").code == 0);
    CHECK(read_csv(workdir() / "fl.csv").front() == std::vector<std::string>{"t", "emp_var", "analytic_var", "n_paths"});
}

TEST_CASE("acceptance subcommand passes with default seeds") {
    auto r = afp_run("acceptance");
    CHECK(r.code == 0);
    CHECK(json::parse(r.out)["status"] == "pass");
}
