#include <catch2/catch_amalgamated.hpp>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string cli_bin() {
    if (const char* p = std::getenv("GEVLAB_CLI_BIN")) return p;
    return GEVLAB_CLI_BIN;
}

int run(const std::string& args) {
    const std::string cmd = cli_bin() + " " + args;
    const int rc = std::system(cmd.c_str());
    REQUIRE(rc != -1);
    REQUIRE(WIFEXITED(rc));
    return WEXITSTATUS(rc);
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("gevlab_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json solve_config() {
    json j;
    j["equation"] = "gkdv";
    j["power"] = 4;
    j["n"] = 64;
    j["length"] = 20.0;
    j["dt"] = 1e-3;
    j["t_end"] = 0.02;
    j["stride"] = 4;
    j["data"] = "sech";
    j["amplitude"] = 0.4;
    j["width"] = 1.5;
    j["sigmas"] = {0.0, 0.2};
    j["edge_floor"] = 1.0;
    return j;
}

} // namespace

TEST_CASE("usage errors exit with the config code", "[cli]") {
    const fs::path dir = fresh_dir("usage");
    REQUIRE(run("> /dev/null 2>&1") == 2);
    REQUIRE(run("solve > /dev/null 2>&1") == 2); // --config is required
    REQUIRE(run("--help > /dev/null 2>&1") == 0);
}

TEST_CASE("config rejection leaves no artifacts behind", "[cli]") {
    const fs::path dir = fresh_dir("badcfg");
    json j = solve_config();
    j["bogus"] = 1;
    write_file(dir / "cfg.json", j.dump());
    REQUIRE(run("solve --config " + (dir / "cfg.json").string() + " --out "
                + (dir / "out").string() + " > /dev/null 2>&1")
            == 2);
    REQUIRE_FALSE(fs::exists(dir / "out" / "manifest.json"));

    json bad_eq = solve_config();
    bad_eq["equation"] = "heat";
    write_file(dir / "eq.json", bad_eq.dump());
    REQUIRE(run("solve --config " + (dir / "eq.json").string() + " --out "
                + (dir / "out2").string() + " > /dev/null 2>&1")
            == 2);
    REQUIRE_FALSE(fs::exists(dir / "out2"));
}

TEST_CASE("identity battery passes and writes its report", "[cli][slow]") {
    const fs::path dir = fresh_dir("verify");
    const int rc = run("verify --out " + dir.string() + " > " + (dir / "stdout.txt").string()
                       + " 2> /dev/null");
    REQUIRE(rc == 0);
    const std::string out = slurp(dir / "stdout.txt");
    REQUIRE(out.find("[PASS]") != std::string::npos);
    REQUIRE(out.find("[FAIL]") == std::string::npos);
    const json report = json::parse(slurp(dir / "verify.json"));
    REQUIRE(report.at("all_passed").get<bool>());
    REQUIRE(report.at("checks").size() >= 10);
}

TEST_CASE("trajectory run writes its artifact set", "[cli][slow]") {
    const fs::path dir = fresh_dir("solve");
    write_file(dir / "cfg.json", solve_config().dump());
    const int rc = run("solve --config " + (dir / "cfg.json").string() + " --out "
                       + (dir / "out").string() + " > /dev/null 2>&1");
    REQUIRE(rc == 0);
    REQUIRE(fs::exists(dir / "out" / "run.csv"));
    REQUIRE(fs::exists(dir / "out" / "spectrum.dat"));
    const std::string csv = slurp(dir / "out" / "run.csv");
    REQUIRE(csv.rfind("t,mass,energy", 0) == 0);
    const json man = json::parse(slurp(dir / "out" / "manifest.json"));
    REQUIRE(man.at("subcommand") == "solve");
    REQUIRE_FALSE(man.at("derived").at("aborted").get<bool>());

    SECTION("manifest replay reproduces every byte") {
        const int rc2 = run("--from-manifest " + (dir / "out" / "manifest.json").string()
                            + " --out " + (dir / "replay").string() + " > /dev/null 2>&1");
        REQUIRE(rc2 == 0);
        REQUIRE(slurp(dir / "replay" / "run.csv") == csv);
        REQUIRE(slurp(dir / "replay" / "spectrum.dat")
                == slurp(dir / "out" / "spectrum.dat"));
        REQUIRE(slurp(dir / "replay" / "manifest.json")
                == slurp(dir / "out" / "manifest.json"));
    }
    SECTION("worker thread count does not change the numbers") {
        const int rc4 = run("solve --config " + (dir / "cfg.json").string() + " --threads 4"
                            + " --out " + (dir / "t4").string() + " > /dev/null 2>&1");
        REQUIRE(rc4 == 0);
        REQUIRE(slurp(dir / "t4" / "run.csv") == csv);
        REQUIRE(slurp(dir / "t4" / "spectrum.dat")
                == slurp(dir / "out" / "spectrum.dat"));
    }
}

TEST_CASE("sampling scan is thread-invariant", "[cli][slow]") {
    const fs::path dir = fresh_dir("mult");
    json j;
    j["weight"] = "smooth";
    j["arity"] = 2;
    j["theta"] = 1.5;
    j["samples"] = 10000;
    write_file(dir / "cfg.json", j.dump());
    const int rc1 = run("multiplier-scan --config " + (dir / "cfg.json").string()
                        + " --out " + (dir / "t1").string() + " > /dev/null 2>&1");
    const int rc4 = run("multiplier-scan --config " + (dir / "cfg.json").string()
                        + " --threads 4 --out " + (dir / "t4").string()
                        + " > /dev/null 2>&1");
    REQUIRE(rc1 == 0);
    REQUIRE(rc4 == 0);
    REQUIRE(slurp(dir / "t1" / "summary.json") == slurp(dir / "t4" / "summary.json"));
    REQUIRE(slurp(dir / "t1" / "defect.csv") == slurp(dir / "t4" / "defect.csv"));
}

TEST_CASE("numerical abort keeps partial artifacts and exit code 3", "[cli]") {
    const fs::path dir = fresh_dir("abort");
    json j = solve_config();
    j["edge_floor"] = 1e-12; // sech tails on this box sit far above it
    write_file(dir / "cfg.json", j.dump());
    const int rc = run("solve --config " + (dir / "cfg.json").string() + " --out "
                       + (dir / "out").string() + " > /dev/null 2>&1");
    REQUIRE(rc == 3);
    REQUIRE(fs::exists(dir / "out" / "run.csv"));
    const json man = json::parse(slurp(dir / "out" / "manifest.json"));
    REQUIRE(man.at("derived").at("aborted").get<bool>());
    REQUIRE(man.at("derived").at("abort_reason") == "edge floor violated");
}

TEST_CASE("seed-unstable scan completes but is flagged", "[cli][slow]") {
    // at this sample count the two half-sample exponents disagree; the scan
    // still writes everything and reports through the exit code
    const fs::path dir = fresh_dir("flagged");
    json j;
    j["entry"] = "nls_a";
    j["theta"] = 1.5;
    j["lambda"] = {1, 1, 1};
    j["M_min"] = 1.0;
    j["M_max"] = 100.0;
    j["M_count"] = 9;
    j["samples"] = 1000;
    write_file(dir / "cfg.json", j.dump());
    const int rc = run("fre-scan --config " + (dir / "cfg.json").string() + " --out "
                       + (dir / "out").string() + " > /dev/null 2>&1");
    REQUIRE(rc == 4);
    REQUIRE(fs::exists(dir / "out" / "sup.csv"));
    const json summary = json::parse(slurp(dir / "out" / "summary.json"));
    REQUIRE(summary.at("scaling_valid").get<bool>());
    REQUIRE_FALSE(summary.at("stable").get<bool>());
}
