#pragma once

// Experiment configuration, orchestration of bound checks, CSV and manifest
// emission, and manifest verification.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "randpost/bounds.hpp"
#include "randpost/measure.hpp"
#include "randpost/misfit.hpp"

namespace randpost {

inline constexpr std::string_view kToolVersion = "1.0.0";

/// Exit codes of the command line tool.
enum ExitCode : int {
    exit_pass = 0,
    exit_fail = 1,
    exit_config = 2,
    exit_indeterminate = 3,
    exit_io = 4,
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
    std::uint64_t master_seed = 0;

    int dim = 1;
    std::vector<Interval> bounds;
    int nodes_per_dim = 64;
    QuadratureRule rule = QuadratureRule::gauss_legendre;

    std::string prior_kind = "uniform";
    std::vector<double> prior_mean;
    std::vector<double> prior_std;

    int out_dim = 1;
    std::vector<ForwardTerm> forward_terms;
    Eigen::MatrixXd gamma;
    Eigen::VectorXd y;

    FamilyKind family = FamilyKind::sketched_quadratic;
    SketchDistribution sketch;
    double scale = 0.0;
    PerturbationNoise noise = PerturbationNoise::uniform;

    std::vector<int> ns;
    std::size_t m = 2;
    ExponentSet exponents;
    std::optional<double> c3;
    std::vector<CheckKind> checks;

    std::filesystem::path output_dir = "out";
    bool write_csv = true;
    bool write_plotdata = false;

    /// The validated configuration with every default filled in. Object keys
    /// are sorted, so its dump is independent of the input key order.
    nlohmann::json canonical() const;
    /// SHA-256 of canonical().dump().
    std::string hash() const;
};

/// Parses and validates a configuration. Throws ConfigError naming the
/// offending key on any problem; unknown keys are rejected.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig parse_config_file(const std::filesystem::path& path);
ExperimentConfig parse_config_text(std::string_view text);

ProblemPtr build_problem(const ExperimentConfig& config);
RandomMisfitFamily build_family(const ExperimentConfig& config, ProblemPtr problem);

struct ManifestFile {
    std::string name;
    std::string sha256;
};

struct RunManifest {
    std::string config_hash;
    std::string tool_version;
    std::string started;
    std::string finished;
    std::uint64_t master_seed = 0;
    int threads = 1;
    std::vector<ManifestFile> files;
    std::map<std::string, std::string> verdicts;  // check -> pass | fail | indeterminate
    nlohmann::json details;
    int exit_code = exit_pass;

    nlohmann::json to_json() const;
};

struct RunOptions {
    int threads = 1;
    std::optional<std::vector<CheckKind>> only;  // restrict to these checks
};

/// Runs the configured checks, writes <out>/<check>.csv (and plot data when
/// requested) plus <out>/manifest.json. Throws IoError on write failures.
RunManifest run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

int exit_code_for(const std::vector<BoundReport>& reports);

/// Number formatting used in every output file: 17 significant digits,
/// "inf"/"-inf"/"nan" for non-finite values.
std::string format_number(double x);

/// The sweep table for one report, header included.
std::string report_csv(const BoundReport& report);
/// (log N, log value) pairs of lhs and rhs for external plotting.
std::string report_plotdata(const BoundReport& report);

std::string sha256_hex(std::string_view bytes);

struct VerifyResult {
    bool ok = true;
    std::vector<std::string> problems;
    int exit_code = exit_pass;  // recomputed from the recorded verdicts
};

/// Re-hashes every file listed in a manifest and re-derives each check's
/// verdict from its CSV.
VerifyResult verify_manifest(const std::filesystem::path& manifest_path);

}  // namespace randpost
