#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "randpost/experiment.hpp"

using namespace randpost;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kSource = RANDPOST_SOURCE_DIR;

json minimal()
{
    return json::parse(R"({
        "problem": {"dim": 1, "bounds": [[-1, 1]], "nodes_per_dim": 16},
        "forward": {"out_dim": 1, "kind": "affine", "params": [1.0, 0.0]},
        "data": {"y": [0.5]},
        "sweep": {"Ns": [1, 2, 4], "M": 4}
    })");
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name)
{
    const auto dir = fs::current_path() / "scratch" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string config_error(const json& doc)
{
    try {
        parse_config(doc);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

int run_cli(const std::string& args)
{
    const std::string cmd = std::string(RANDPOST_CLI) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("minimal config gets the documented defaults")
{
    const auto c = parse_config(minimal());
    CHECK(c.exponents.q1 == 2.0);
    CHECK(c.exponents.q2 == 2.0);
    CHECK(c.exponents.p1 == 2.0);
    CHECK(c.exponents.p2 == 2.0);
    CHECK(c.exponents.p3 == 2.0);
    CHECK(c.exponents.rho_star == 3.0);
    CHECK(c.master_seed == 0);
    CHECK(c.rule == QuadratureRule::gauss_legendre);
    CHECK(c.family == FamilyKind::sketched_quadratic);
    CHECK(c.sketch.kind == SketchKind::rademacher);
    CHECK(c.checks == std::vector<CheckKind>{CheckKind::thm1, CheckKind::thm2, CheckKind::corollary});
    CHECK(c.gamma.isIdentity());
}

TEST_CASE("config errors name the offending key")
{
    auto doc = minimal();
    doc["noise"] = {{"gamma", {{1.0}}}};
    doc["forward"]["out_dim"] = 2;
    doc["forward"]["params"] = {1.0, 1.0, 0.0, 0.0};
    doc["data"]["y"] = {0.0, 0.0};
    doc["noise"]["gamma"] = {{1.0, 2.0}, {2.0, 1.0}};
    CHECK(config_error(doc).find("noise.gamma") != std::string::npos);
    doc["noise"]["gamma"] = {{1.0, 0.5}, {0.0, 1.0}};
    CHECK(config_error(doc).find("noise.gamma") != std::string::npos);

    doc = minimal();
    doc["data"]["y"] = {0.5, 0.5};
    CHECK(config_error(doc).find("data.y") != std::string::npos);

    doc = minimal();
    doc["surprise"] = 1;
    CHECK(config_error(doc).find("surprise") != std::string::npos);

    doc = minimal();
    doc["sweep"]["m"] = 4;
    CHECK(config_error(doc).find("sweep.m") != std::string::npos);

    doc = minimal();
    doc.erase("data");
    CHECK(config_error(doc).find("data") != std::string::npos);

    doc = minimal();
    doc["sweep"]["Ns"] = {4, 2};
    CHECK(config_error(doc).find("sweep.Ns") != std::string::npos);

    doc = minimal();
    doc["sweep"]["M"] = 1;
    CHECK(config_error(doc).find("sweep.M") != std::string::npos);

    doc = minimal();
    doc["problem"]["bounds"] = {{-1, 1}, {0, 1}};
    CHECK(config_error(doc).find("problem.bounds") != std::string::npos);

    doc = minimal();
    doc["checks"] = {"forward"};
    CHECK(config_error(doc).find("checks") != std::string::npos);

    doc = minimal();
    doc["forward"]["params"] = {1.0};
    CHECK(config_error(doc).find("forward") != std::string::npos);

    doc = minimal();
    doc["sweep"]["C3"] = 1.0;
    CHECK(config_error(doc).find("sweep.C3") != std::string::npos);

    CHECK_THROWS_AS(parse_config_text("{\"problem\": "), ConfigError);
    CHECK_THROWS_AS(parse_config_file("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("config hash is stable under parsing and key order")
{
    const auto path = kSource / "configs" / "tp2.json";
    const auto a = parse_config_file(path), b = parse_config_file(path);
    CHECK(a.hash() == b.hash());
    CHECK(a.hash().size() == 64);

    const auto text = minimal().dump();
    const std::string reordered = R"({"sweep": {"M": 4, "Ns": [1, 2, 4]}, "data": {"y": [0.5]},
        "forward": {"params": [1.0, 0.0], "kind": "affine", "out_dim": 1},
        "problem": {"nodes_per_dim": 16, "bounds": [[-1, 1]], "dim": 1}})";
    CHECK(parse_config_text(text).hash() == parse_config_text(reordered).hash());

    auto seeded = minimal();
    seeded["master_seed"] = 99;
    CHECK(parse_config(seeded).hash() != parse_config(minimal()).hash());
    // canonical form round-trips
    CHECK(parse_config(a.canonical()).hash() == a.hash());
}

TEST_CASE("number formatting")
{
    CHECK(format_number(0.1) == "0.10000000000000001");
    CHECK(format_number(2.0) == "2");
    CHECK(format_number(kInf) == "inf");
    CHECK(format_number(-kInf) == "-inf");
    CHECK(format_number(std::nan("")) == "nan");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("exact family: every verdict passes and the tables match the golden files")
{
    auto cfg = parse_config_file(kSource / "configs" / "exact.json");
    cfg.output_dir = scratch("exact");
    const auto man = run_experiment(cfg);
    CHECK(man.exit_code == exit_pass);
    for (const auto& [check, v] : man.verdicts) CHECK(v == "pass");
    for (const char* name : {"thm1.csv", "thm2.csv", "corollary.csv"}) {
        CHECK(slurp(cfg.output_dir / name) == slurp(kSource / "tests" / "golden" / name));
    }
    const auto res = verify_manifest(cfg.output_dir / "manifest.json");
    CHECK(res.ok);
    CHECK(res.exit_code == exit_pass);
}

TEST_CASE("CSV header and unused columns")
{
    auto cfg = parse_config_file(kSource / "configs" / "exact.json");
    cfg.output_dir = scratch("header");
    run_experiment(cfg);
    const auto csv = slurp(cfg.output_dir / "thm1.csv");
    CHECK(csv.rfind("N,M,check,lhs,rhs,ratio,lhs_se,rhs_se,D1,D2,C1,C2,C3_lo,C3_hi,N_star,slope_lhs,slope_rhs,verdict\n", 0) == 0);
    // C1..C3 are not part of the random-posterior check
    CHECK(csv.find(",,,,,") != std::string::npos);
}

TEST_CASE("reruns are byte-identical across thread counts")
{
    auto cfg = parse_config_file(kSource / "configs" / "tp2.json");
    cfg.ns = {2, 8, 32};
    cfg.m = 200;
    cfg.write_plotdata = true;
    cfg.output_dir = scratch("det1");
    const auto a = run_experiment(cfg, {1, std::nullopt});
    cfg.output_dir = scratch("det4");
    const auto b = run_experiment(cfg, {4, std::nullopt});
    REQUIRE(a.files.size() == b.files.size());
    for (std::size_t i = 0; i < a.files.size(); ++i) {
        CHECK(a.files[i].name == b.files[i].name);
        CHECK(a.files[i].sha256 == b.files[i].sha256);
    }
    CHECK(a.config_hash == b.config_hash);
}

TEST_CASE("exit codes for failing and indeterminate runs")
{
    auto doc = minimal();
    doc["family"] = {{"kind", "direct_perturbation"}, {"scale", 4000.0}, {"noise", "shift"}};
    doc["checks"] = {"thm1"};
    auto cfg = parse_config(doc);
    cfg.output_dir = scratch("fail");
    CHECK(run_experiment(cfg).exit_code == exit_fail);

    doc = minimal();
    doc["family"] = {{"kind", "sketched_quadratic"}, {"sketch", "gaussian"}};
    doc["checks"] = {"corollary"};
    doc["sweep"]["C3"] = 1.0 / 0.78288926 + 1e-6;
    doc["problem"]["nodes_per_dim"] = 64;
    cfg = parse_config(doc);
    cfg.output_dir = scratch("indeterminate");
    const auto man = run_experiment(cfg);
    CHECK(man.exit_code == exit_indeterminate);
    CHECK(verify_manifest(cfg.output_dir / "manifest.json").exit_code == exit_indeterminate);

    std::vector<BoundReport> mixed(2);
    mixed[0].verdict = Verdict::indeterminate;
    mixed[1].verdict = Verdict::fail;
    CHECK(exit_code_for(mixed) == exit_fail);
}

TEST_CASE("write failures raise I/O errors")
{
    const auto dir = scratch("io");
    std::ofstream(dir / "blocker") << "x";
    auto cfg = parse_config(minimal());
    cfg.output_dir = dir / "blocker" / "out";
    CHECK_THROWS_AS(run_experiment(cfg), IoError);
}

TEST_CASE("verify catches tampering")
{
    auto cfg = parse_config_file(kSource / "configs" / "exact.json");
    cfg.output_dir = scratch("tamper");
    run_experiment(cfg);
    {
        std::ofstream out(cfg.output_dir / "thm2.csv", std::ios::app);
        out << "1,4,thm2,0,0,0,0,0,,,,,,,,,,fail\n";
    }
    const auto res = verify_manifest(cfg.output_dir / "manifest.json");
    CHECK(!res.ok);
    CHECK(res.problems.size() >= 2);
}

TEST_CASE("command line exit codes")
{
    const auto dir = scratch("cli");
    const auto exact = (kSource / "configs" / "exact.json").string();
    CHECK(run_cli("run --config " + exact + " --out " + (dir / "a").string()) == 0);
    CHECK(run_cli("verify " + (dir / "a" / "manifest.json").string()) == 0);
    CHECK(run_cli("sweep --config " + exact + " --check thm2 --out " + (dir / "b").string()) == 0);
    CHECK(fs::exists(dir / "b" / "thm2.csv"));
    CHECK(!fs::exists(dir / "b" / "thm1.csv"));
    CHECK(run_cli("sweep --config " + exact + " --check forward --out " + (dir / "c").string()) == 2);
    CHECK(run_cli("run --config /nonexistent.json") == 2);
    std::ofstream(dir / "bad.json") << "{\"problem\": 3";
    CHECK(run_cli("run --config " + (dir / "bad.json").string()) == 2);
    std::ofstream(dir / "blocker") << "x";
    CHECK(run_cli("run --config " + exact + " --out " + (dir / "blocker" / "x").string()) == 4);
    CHECK(run_cli("run") == 2);
}
