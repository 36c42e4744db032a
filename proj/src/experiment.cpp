#include "randpost/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

#include <openssl/evp.h>

namespace randpost {

using nlohmann::json;

namespace {

/// Walks one JSON object, remembering which keys were consumed so that
/// anything left over can be rejected.
class ObjectReader {
public:
    ObjectReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path))
    {
        if (!obj_.is_object()) fail("", "expected an object");
    }

    bool has(const std::string& key) const { return obj_.contains(key); }

    const json& at(const std::string& key)
    {
        seen_.insert(key);
        if (!obj_.contains(key)) fail(key, "missing required key");
        return obj_.at(key);
    }

    const json* find(const std::string& key)
    {
        seen_.insert(key);
        const auto it = obj_.find(key);
        return it == obj_.end() ? nullptr : &*it;
    }

    std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    [[noreturn]] void fail(const std::string& key, const std::string& what) const
    {
        const auto where = key.empty() ? (path_.empty() ? std::string("<root>") : path_) : key_path(key);
        throw ConfigError(where + ": " + what);
    }

    void finish() const
    {
        for (const auto& [key, value] : obj_.items()) {
            if (!seen_.contains(key)) fail(key, "unknown key");
        }
    }

private:
    const json& obj_;
    std::string path_;
    std::set<std::string> seen_;
};

double as_number(const json& v, const std::string& where)
{
    if (!v.is_number()) throw ConfigError(where + ": expected a number");
    return v.get<double>();
}

long long as_integer(const json& v, const std::string& where)
{
    if (!v.is_number_integer()) throw ConfigError(where + ": expected an integer");
    return v.get<long long>();
}

std::string as_string(const json& v, const std::string& where)
{
    if (!v.is_string()) throw ConfigError(where + ": expected a string");
    return v.get<std::string>();
}

std::vector<double> as_vector(const json& v, const std::string& where)
{
    if (!v.is_array()) throw ConfigError(where + ": expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_number(v[i], where + "[" + std::to_string(i) + "]"));
    return out;
}

template <class F>
auto translate(const std::string& where, F&& f) -> decltype(f())
{
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(where + ": " + e.what());
    }
}

std::vector<CheckKind> default_checks(FamilyKind family)
{
    std::vector<CheckKind> out{CheckKind::thm1, CheckKind::thm2, CheckKind::corollary};
    if (family == FamilyKind::perturbed_forward) out.push_back(CheckKind::forward);
    return out;
}

ForwardTerm parse_term(const json& v, const std::string& where)
{
    ObjectReader r(v, where);
    ForwardTerm term;
    term.kind = translate(r.key_path("kind"), [&] { return parse_forward_kind(as_string(r.at("kind"), r.key_path("kind"))); });
    term.params = as_vector(r.at("params"), r.key_path("params"));
    r.finish();
    return term;
}

void parse_problem(ExperimentConfig& c, const json& v)
{
    ObjectReader r(v, "problem");
    c.dim = static_cast<int>(as_integer(r.at("dim"), "problem.dim"));
    if (c.dim < 1 || c.dim > 3) r.fail("dim", "must be 1, 2 or 3");

    const json& b = r.at("bounds");
    if (!b.is_array() || b.empty()) r.fail("bounds", "expected [lo, hi] or a list of [lo, hi] pairs");
    if (b[0].is_number()) {
        const auto pair = as_vector(b, "problem.bounds");
        if (pair.size() != 2) r.fail("bounds", "expected [lo, hi]");
        c.bounds.assign(static_cast<std::size_t>(c.dim), Interval{pair[0], pair[1]});
    } else {
        for (std::size_t i = 0; i < b.size(); ++i) {
            const auto pair = as_vector(b[i], "problem.bounds[" + std::to_string(i) + "]");
            if (pair.size() != 2) r.fail("bounds", "each entry must be [lo, hi]");
            c.bounds.push_back({pair[0], pair[1]});
        }
    }
    if (static_cast<int>(c.bounds.size()) != c.dim) r.fail("bounds", "needs one interval per dimension");
    for (const auto& iv : c.bounds) {
        if (!(iv.lo < iv.hi) || !std::isfinite(iv.lo) || !std::isfinite(iv.hi)) r.fail("bounds", "need finite lo < hi");
    }
    if (const auto* n = r.find("nodes_per_dim")) c.nodes_per_dim = static_cast<int>(as_integer(*n, "problem.nodes_per_dim"));
    if (c.nodes_per_dim < 2) r.fail("nodes_per_dim", "must be at least 2");
    if (const auto* q = r.find("quadrature_rule")) {
        c.rule = translate("problem.quadrature_rule",
                           [&] { return parse_quadrature_rule(as_string(*q, "problem.quadrature_rule")); });
    }
    r.finish();
}

void parse_prior(ExperimentConfig& c, const json* v)
{
    if (v == nullptr) return;
    ObjectReader r(*v, "prior");
    if (const auto* k = r.find("kind")) c.prior_kind = as_string(*k, "prior.kind");
    if (c.prior_kind == "uniform") {
        // nothing else
    } else if (c.prior_kind == "truncated_gaussian") {
        c.prior_mean = as_vector(r.at("mean"), "prior.mean");
        c.prior_std = as_vector(r.at("std"), "prior.std");
        const auto d = static_cast<std::size_t>(c.dim);
        if (c.prior_mean.size() != d) r.fail("mean", "needs one entry per dimension");
        if (c.prior_std.size() != d) r.fail("std", "needs one entry per dimension");
        for (double s : c.prior_std) {
            if (!(s > 0.0)) r.fail("std", "entries must be positive");
        }
    } else {
        r.fail("kind", "must be uniform or truncated_gaussian");
    }
    r.finish();
}

void parse_forward(ExperimentConfig& c, const json& v)
{
    ObjectReader r(v, "forward");
    c.out_dim = static_cast<int>(as_integer(r.at("out_dim"), "forward.out_dim"));
    if (c.out_dim < 1) r.fail("out_dim", "must be positive");
    const bool has_terms = r.has("terms");
    const bool has_kind = r.has("kind") || r.has("params");
    if (has_terms == has_kind) r.fail("", "give either kind/params or a terms list");
    if (has_terms) {
        const json& terms = r.at("terms");
        if (!terms.is_array() || terms.empty()) r.fail("terms", "expected a nonempty array");
        for (std::size_t i = 0; i < terms.size(); ++i) {
            c.forward_terms.push_back(parse_term(terms[i], "forward.terms[" + std::to_string(i) + "]"));
        }
    } else {
        ForwardTerm term;
        term.kind = translate("forward.kind", [&] { return parse_forward_kind(as_string(r.at("kind"), "forward.kind")); });
        term.params = as_vector(r.at("params"), "forward.params");
        c.forward_terms.push_back(std::move(term));
    }
    r.finish();
}

void parse_noise(ExperimentConfig& c, const json* v)
{
    const auto d = c.out_dim;
    c.gamma = Eigen::MatrixXd::Identity(d, d);
    if (v == nullptr) return;
    ObjectReader r(*v, "noise");
    if (const auto* g = r.find("gamma")) {
        if (g->is_number()) {
            c.gamma = as_number(*g, "noise.gamma") * Eigen::MatrixXd::Identity(d, d);
        } else {
            if (!g->is_array() || static_cast<int>(g->size()) != d) r.fail("gamma", "must be a d x d matrix with d = out_dim");
            for (int i = 0; i < d; ++i) {
                const auto row = as_vector((*g)[static_cast<std::size_t>(i)], "noise.gamma[" + std::to_string(i) + "]");
                if (static_cast<int>(row.size()) != d) r.fail("gamma", "must be a d x d matrix with d = out_dim");
                for (int j = 0; j < d; ++j) c.gamma(i, j) = row[static_cast<std::size_t>(j)];
            }
        }
    }
    r.finish();
    translate("noise.gamma", [&] { return GaussianNoise(c.gamma).dim(); });
}

void parse_data(ExperimentConfig& c, const json& v)
{
    ObjectReader r(v, "data");
    const auto y = as_vector(r.at("y"), "data.y");
    if (static_cast<int>(y.size()) != c.out_dim) r.fail("y", "length must equal forward.out_dim");
    c.y = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
    if (!c.y.allFinite()) r.fail("y", "entries must be finite");
    r.finish();
}

void parse_family(ExperimentConfig& c, const json* v)
{
    if (v == nullptr) return;
    ObjectReader r(*v, "family");
    if (const auto* k = r.find("kind")) {
        c.family = translate("family.kind", [&] { return parse_family_kind(as_string(*k, "family.kind")); });
    }
    if (const auto* s = r.find("sketch")) {
        c.sketch.kind = translate("family.sketch", [&] { return parse_sketch_kind(as_string(*s, "family.sketch")); });
    }
    if (const auto* e = r.find("ell")) c.sketch.ell = as_number(*e, "family.ell");
    translate("family.ell", [&] {
        c.sketch.validate();
        return 0;
    });
    if (const auto* s = r.find("scale")) c.scale = as_number(*s, "family.scale");
    if (!(c.scale >= 0.0) || !std::isfinite(c.scale)) r.fail("scale", "must be finite and nonnegative");
    if (const auto* n = r.find("noise")) {
        c.noise = translate("family.noise", [&] { return parse_perturbation_noise(as_string(*n, "family.noise")); });
    }
    r.finish();
}

void parse_sweep(ExperimentConfig& c, const json& v)
{
    ObjectReader r(v, "sweep");
    const json& ns = r.at("Ns");
    if (!ns.is_array() || ns.empty()) r.fail("Ns", "expected a nonempty array of integers");
    for (std::size_t i = 0; i < ns.size(); ++i) {
        const auto n = as_integer(ns[i], "sweep.Ns[" + std::to_string(i) + "]");
        if (n < 1) r.fail("Ns", "entries must be positive");
        if (!c.ns.empty() && n <= c.ns.back()) r.fail("Ns", "must be strictly ascending");
        c.ns.push_back(static_cast<int>(n));
    }
    const auto m = as_integer(r.at("M"), "sweep.M");
    if (m < 2) r.fail("M", "must be at least 2");
    c.m = static_cast<std::size_t>(m);
    if (const auto* c3 = r.find("C3")) c.c3 = as_number(*c3, "sweep.C3");
    r.finish();
}

void parse_exponents(ExperimentConfig& c, const json* v)
{
    if (v == nullptr) return;
    ObjectReader r(*v, "exponents");
    const std::pair<const char*, double*> fields[] = {
        {"q1", &c.exponents.q1}, {"q2", &c.exponents.q2}, {"p1", &c.exponents.p1},
        {"p2", &c.exponents.p2}, {"p3", &c.exponents.p3}, {"rho_star", &c.exponents.rho_star},
    };
    for (const auto& [key, dst] : fields) {
        if (const auto* x = r.find(key)) *dst = as_number(*x, r.key_path(key));
    }
    r.finish();
    translate("exponents", [&] {
        c.exponents.validate();
        return 0;
    });
}

void parse_checks(ExperimentConfig& c, const json* v)
{
    if (v == nullptr) {
        c.checks = default_checks(c.family);
        return;
    }
    if (!v->is_array() || v->empty()) throw ConfigError("checks: expected a nonempty array");
    for (std::size_t i = 0; i < v->size(); ++i) {
        const auto where = "checks[" + std::to_string(i) + "]";
        const auto kind = translate(where, [&] { return parse_check_kind(as_string((*v)[i], where)); });
        if (std::find(c.checks.begin(), c.checks.end(), kind) != c.checks.end()) throw ConfigError(where + ": duplicate");
        c.checks.push_back(kind);
    }
    const bool wants_forward = std::find(c.checks.begin(), c.checks.end(), CheckKind::forward) != c.checks.end();
    if (wants_forward && c.family != FamilyKind::perturbed_forward) {
        throw ConfigError("checks: forward needs family.kind = perturbed_forward");
    }
}

void parse_output(ExperimentConfig& c, const json* v)
{
    if (v == nullptr) return;
    ObjectReader r(*v, "output");
    if (const auto* d = r.find("directory")) c.output_dir = as_string(*d, "output.directory");
    if (const auto* f = r.find("formats")) {
        if (!f->is_array()) r.fail("formats", "expected an array");
        c.write_csv = false;
        for (const auto& item : *f) {
            const auto tag = as_string(item, "output.formats");
            if (tag == "csv") c.write_csv = true;
            else if (tag == "plotdata") c.write_plotdata = true;
            else r.fail("formats", "unknown format '" + tag + "'");
        }
        // the sweep table is what verify checks; it is always written
        c.write_csv = true;
    }
    r.finish();
}

std::string utc_now()
{
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_file(const std::filesystem::path& path, const std::string& content)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.close();
    if (!out) throw IoError("failed writing " + path.string());
}

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string cell(double x) { return std::isnan(x) ? std::string() : format_number(x); }

json rate_json(const RateFit& f)
{
    return json{{"slope", f.slope}, {"intercept", f.intercept}, {"r_squared", f.r_squared}, {"points", f.points}};
}

json report_details(const BoundReport& r)
{
    json d;
    d["verdict"] = std::string(to_string(r.verdict));
    d["N_star"] = r.n_star ? json(*r.n_star) : json(nullptr);
    d["rates"] = json::object();
    for (const auto& [name, fit] : r.rates) d["rates"][name] = rate_json(fit);
    d["summary"] = json::object();
    for (const auto& [name, v] : r.summary) d["summary"][name] = v;
    d["findings"] = r.findings;
    return d;
}

int exit_code_for_verdicts(const std::vector<std::string>& verdicts)
{
    bool indeterminate = false;
    for (const auto& v : verdicts) {
        if (v == "fail") return exit_fail;
        if (v == "indeterminate") indeterminate = true;
    }
    return indeterminate ? exit_indeterminate : exit_pass;
}

}  // namespace

// ---------------------------------------------------------------------------
// config

ExperimentConfig parse_config(const json& doc)
{
    ObjectReader r(doc, "");
    ExperimentConfig c;
    if (const auto* s = r.find("master_seed")) {
        const bool ok = s->is_number_unsigned() || (s->is_number_integer() && s->get<std::int64_t>() >= 0);
        if (!ok) r.fail("master_seed", "expected a nonnegative 64-bit integer");
        c.master_seed = s->get<std::uint64_t>();
    }
    parse_problem(c, r.at("problem"));
    parse_prior(c, r.find("prior"));
    parse_forward(c, r.at("forward"));
    parse_noise(c, r.find("noise"));
    parse_data(c, r.at("data"));
    parse_family(c, r.find("family"));
    parse_sweep(c, r.at("sweep"));
    parse_exponents(c, r.find("exponents"));
    parse_checks(c, r.find("checks"));
    parse_output(c, r.find("output"));
    r.finish();

    // cross-field checks that need the assembled objects
    const auto problem = build_problem(c);
    if (c.c3) {
        const double z = true_posterior(*problem).normalizer();
        if (!(*c.c3 > std::max(z, 1.0 / z))) {
            throw ConfigError("sweep.C3: must exceed max(Z, 1/Z) = " + format_number(std::max(z, 1.0 / z)));
        }
    }
    return c;
}

ExperimentConfig parse_config_text(std::string_view text)
{
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("malformed JSON: ") + e.what());
    }
    return parse_config(doc);
}

ExperimentConfig parse_config_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

json ExperimentConfig::canonical() const
{
    json j;
    j["master_seed"] = master_seed;

    json b = json::array();
    for (const auto& iv : bounds) b.push_back({iv.lo, iv.hi});
    j["problem"] = {{"dim", dim}, {"bounds", b}, {"nodes_per_dim", nodes_per_dim},
                    {"quadrature_rule", std::string(to_string(rule))}};

    j["prior"] = {{"kind", prior_kind}};
    if (prior_kind == "truncated_gaussian") {
        j["prior"]["mean"] = prior_mean;
        j["prior"]["std"] = prior_std;
    }

    json terms = json::array();
    for (const auto& t : forward_terms) terms.push_back({{"kind", std::string(to_string(t.kind))}, {"params", t.params}});
    j["forward"] = {{"out_dim", out_dim}, {"terms", terms}};

    json g = json::array();
    for (Eigen::Index i = 0; i < gamma.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index k = 0; k < gamma.cols(); ++k) row.push_back(gamma(i, k));
        g.push_back(row);
    }
    j["noise"] = {{"gamma", g}};
    j["data"] = {{"y", std::vector<double>(y.data(), y.data() + y.size())}};

    j["family"] = {{"kind", std::string(to_string(family))}, {"sketch", std::string(to_string(sketch.kind))},
                   {"ell", sketch.ell}, {"scale", scale}, {"noise", std::string(to_string(noise))}};
    j["sweep"] = {{"Ns", ns}, {"M", m}};
    if (c3) j["sweep"]["C3"] = *c3;
    j["exponents"] = {{"q1", exponents.q1}, {"q2", exponents.q2}, {"p1", exponents.p1},
                      {"p2", exponents.p2}, {"p3", exponents.p3}, {"rho_star", exponents.rho_star}};
    json checks_json = json::array();
    for (auto k : checks) checks_json.push_back(std::string(to_string(k)));
    j["checks"] = checks_json;

    json formats = json::array({"csv"});
    if (write_plotdata) formats.push_back("plotdata");
    j["output"] = {{"directory", output_dir.generic_string()}, {"formats", formats}};
    return j;
}

std::string ExperimentConfig::hash() const
{
    // the output directory is where results go, not what they are
    json j = canonical();
    j["output"].erase("directory");
    return sha256_hex(j.dump());
}

ProblemPtr build_problem(const ExperimentConfig& c)
{
    const auto grid = translate("problem", [&] { return GridSpace::build(c.dim, c.bounds, c.nodes_per_dim, c.rule); });
    const auto prior = translate("prior", [&] {
        return c.prior_kind == "truncated_gaussian" ? PriorDensity::truncated_gaussian(grid, c.prior_mean, c.prior_std)
                                                    : PriorDensity::uniform(grid);
    });
    auto forward = translate("forward", [&] { return ForwardModel(c.dim, c.out_dim, c.forward_terms, grid); });
    auto noise = translate("noise.gamma", [&] { return GaussianNoise(c.gamma); });
    return translate("problem", [&] {
        return std::make_shared<const InverseProblem>(prior, std::move(forward), std::move(noise), c.y);
    });
}

RandomMisfitFamily build_family(const ExperimentConfig& c, ProblemPtr problem)
{
    return translate("family", [&] {
        switch (c.family) {
        case FamilyKind::sketched_quadratic: return RandomMisfitFamily::sketched(problem, c.sketch, c.master_seed);
        case FamilyKind::perturbed_forward: return RandomMisfitFamily::perturbed_forward(problem, c.scale, c.master_seed);
        case FamilyKind::direct_perturbation: break;
        }
        return RandomMisfitFamily::direct(problem, c.scale, c.noise, c.master_seed);
    });
}

// ---------------------------------------------------------------------------
// output

std::string format_number(double x)
{
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string report_csv(const BoundReport& report)
{
    std::string out = "N,M,check,lhs,rhs,ratio,lhs_se,rhs_se,D1,D2,C1,C2,C3_lo,C3_hi,N_star,slope_lhs,slope_rhs,verdict\n";
    for (const auto& r : report.rows) {
        const double nums[] = {r.lhs, r.rhs, r.ratio, r.lhs_se, r.rhs_se, r.d1, r.d2, r.c1, r.c2, r.c3_lo, r.c3_hi};
        out += std::to_string(r.n) + "," + std::to_string(r.m) + "," + r.check;
        for (double v : nums) out += "," + cell(v);
        out += "," + (r.n_star ? std::to_string(*r.n_star) : std::string());
        out += "," + cell(r.slope_lhs) + "," + cell(r.slope_rhs) + "," + r.verdict + "\n";
    }
    return out;
}

std::string report_plotdata(const BoundReport& report)
{
    std::string out = "check,series,log_N,log_value\n";
    for (const char* series : {"lhs", "rhs"}) {
        for (const auto& r : report.rows) {
            const double v = std::string_view(series) == "lhs" ? r.lhs : r.rhs;
            if (r.verdict == "error" || !(v > 0.0) || !std::isfinite(v)) continue;
            out += r.check + "," + series + "," + format_number(std::log(static_cast<double>(r.n))) + "," +
                   format_number(std::log(v)) + "\n";
        }
    }
    return out;
}

std::string sha256_hex(std::string_view bytes)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("SHA-256 computation failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

json RunManifest::to_json() const
{
    json files_json = json::array();
    for (const auto& f : files) files_json.push_back({{"name", f.name}, {"sha256", f.sha256}});
    return json{{"config_hash", config_hash}, {"tool_version", tool_version}, {"started", started},
                {"finished", finished},       {"master_seed", master_seed},   {"threads", threads},
                {"files", files_json},        {"verdicts", verdicts},         {"details", details},
                {"exit_code", exit_code}};
}

int exit_code_for(const std::vector<BoundReport>& reports)
{
    std::vector<std::string> v;
    for (const auto& r : reports) v.emplace_back(to_string(r.verdict));
    return exit_code_for_verdicts(v);
}

RunManifest run_experiment(const ExperimentConfig& config, const RunOptions& options)
{
    RunManifest man;
    man.started = utc_now();
    man.config_hash = config.hash();
    man.tool_version = std::string(kToolVersion);
    man.master_seed = config.master_seed;
    man.threads = options.threads;

    const auto problem = build_problem(config);
    const auto family = build_family(config, problem);
    SweepOptions sw;
    sw.ns = config.ns;
    sw.m = config.m;
    sw.exps = config.exponents;
    sw.c3 = config.c3;
    sw.threads = std::max(1, options.threads);
    const auto checks = options.only.value_or(config.checks);
    const auto reports = sweep(family, checks, sw);

    std::error_code ec;
    std::filesystem::create_directories(config.output_dir, ec);
    if (ec) throw IoError("cannot create " + config.output_dir.string() + ": " + ec.message());

    man.details = json::object();
    man.details["config"] = config.canonical();
    man.details["checks"] = json::object();
    for (const auto& rep : reports) {
        const auto name = std::string(to_string(rep.kind));
        const auto csv = report_csv(rep);
        write_file(config.output_dir / (name + ".csv"), csv);
        man.files.push_back({name + ".csv", sha256_hex(csv)});
        if (config.write_plotdata) {
            const auto plot = report_plotdata(rep);
            write_file(config.output_dir / ("plotdata_" + name + ".csv"), plot);
            man.files.push_back({"plotdata_" + name + ".csv", sha256_hex(plot)});
        }
        man.verdicts[name] = std::string(to_string(rep.verdict));
        man.details["checks"][name] = report_details(rep);
    }
    man.exit_code = exit_code_for(reports);
    man.finished = utc_now();
    write_file(config.output_dir / "manifest.json", man.to_json().dump(2) + "\n");
    return man;
}

// ---------------------------------------------------------------------------
// verify

VerifyResult verify_manifest(const std::filesystem::path& manifest_path)
{
    VerifyResult res;
    const auto problem = [&res](std::string what) {
        res.ok = false;
        res.problems.push_back(std::move(what));
    };
    json man;
    try {
        man = json::parse(read_file(manifest_path));
    } catch (const json::parse_error& e) {
        throw IoError(std::string("manifest is not valid JSON: ") + e.what());
    }
    const auto dir = manifest_path.parent_path();

    try {
        const auto cfg = parse_config(man.at("details").at("config"));
        if (cfg.hash() != man.at("config_hash").get<std::string>()) problem("config hash does not match the recorded config");
    } catch (const std::exception& e) {
        problem(std::string("recorded config is invalid: ") + e.what());
    }

    for (const auto& f : man.at("files")) {
        const auto name = f.at("name").get<std::string>();
        std::string content;
        try {
            content = read_file(dir / name);
        } catch (const IoError&) {
            problem(name + ": missing");
            continue;
        }
        if (sha256_hex(content) != f.at("sha256").get<std::string>()) problem(name + ": hash mismatch");
    }

    std::vector<std::string> verdicts;
    for (const auto& [check, v] : man.at("verdicts").items()) {
        const auto verdict = v.get<std::string>();
        verdicts.push_back(verdict);
        std::string csv;
        try {
            csv = read_file(dir / (check + ".csv"));
        } catch (const IoError&) {
            continue;  // already reported above if listed
        }
        std::istringstream in(csv);
        std::string line;
        std::getline(in, line);
        bool bad_row = false, any_counted = false;
        while (std::getline(in, line)) {
            const auto rv = line.substr(line.rfind(',') + 1);
            bad_row = bad_row || rv == "fail" || rv == "error";
            any_counted = any_counted || rv == "pass";
        }
        if (verdict == "pass" && (bad_row || !any_counted)) problem(check + ": recorded pass but the table disagrees");
        if (verdict == "indeterminate" && any_counted) problem(check + ": recorded indeterminate but rows were assessed");
    }
    res.exit_code = exit_code_for_verdicts(verdicts);
    if (man.contains("exit_code") && man.at("exit_code").get<int>() != res.exit_code) {
        problem("recorded exit code disagrees with the verdicts");
    }
    return res;
}

}  // namespace randpost
