#pragma once

// The riskpool command line: measure, limit, premium-curve and verify.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "riskpool/asymptotics.hpp"
#include "riskpool/config.hpp"
#include "riskpool/mc_engine.hpp"
#include "riskpool/preferences.hpp"
#include "riskpool/risk_measures.hpp"
#include "riskpool/verify.hpp"

namespace riskpool::cli {

enum ExitCode : int {
    kOk = 0,
    kConfigError = 2,
    kTrendFailure = 3,
    kDomainAbort = 4,
    kPropertyViolation = 5,
};

namespace detail {

inline std::string fmt12(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline std::string utc_timestamp(std::chrono::system_clock::time_point tp) {
    const std::time_t t = std::chrono::system_clock::to_time_t(tp);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline std::optional<std::uint64_t> env_seed() {
    const char* raw = std::getenv("RISKPOOL_SEED");
    if (raw == nullptr || *raw == '\0') {
        return std::nullopt;
    }
    try {
        std::size_t used = 0;
        const std::string s(raw);
        const unsigned long long v = std::stoull(s, &used);
        if (used != s.size()) {
            throw std::invalid_argument("trailing characters");
        }
        return static_cast<std::uint64_t>(v);
    } catch (const std::exception&) {
        throw ConfigError("RISKPOOL_SEED", "expected an unsigned 64-bit integer");
    }
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    f << text;
}

struct Globals {
    std::optional<std::uint64_t> seed;
    bool json = false;
    std::string out_dir = ".";
    unsigned threads = 1;

    [[nodiscard]] unsigned worker_count() const {
        if (threads == 0) {
            return std::max(1u, std::thread::hardware_concurrency());
        }
        return threads;
    }
};

struct MeasureArgs {
    std::string dist;
    std::optional<double> lambda;
    std::string mu;
    std::string family;
    std::string utility;
};

inline int run_measure(const Globals& g, const MeasureArgs& a, std::ostream& out) {
    const Distribution dist = parse_distribution_arg(a.dist, "dist");
    if (!a.lambda && a.mu.empty() && a.family.empty()) {
        throw ConfigError("", "one of --lambda, --mu or --family is required");
    }
    std::optional<UtilityFunction> u;
    if (!a.utility.empty()) {
        u = parse_utility_arg(a.utility, "utility");
    }

    Json result = Json::object();
    std::vector<std::string> lines;
    if (a.lambda) {
        double v = 0.0;
        try {
            v = avar(dist, *a.lambda);
        } catch (const std::invalid_argument& e) {
            throw ConfigError("lambda", e.what());
        }
        result["avar"] = v;
        lines.push_back("avar " + fmt12(v));
    }
    if (!a.mu.empty()) {
        const MixtureMeasure mu = parse_mixture_arg(a.mu, "mu");
        const double v = mixture_value(dist, mu);
        result["mixture"] = v;
        result["log_condition"] = check_log_condition(mu);
        lines.push_back("mixture " + fmt12(v));
        if (u) {
            const double ce = certainty_equivalent(dist, mu, *u);
            result["certainty_equivalent"] = ce;
            lines.push_back("certainty_equivalent " + fmt12(ce));
        }
    }
    if (!a.family.empty()) {
        const KusuokaFamily fam = parse_family_arg(a.family, "family");
        const KusuokaValue kv = kusuoka_value(dist, fam);
        result["kusuoka"] = {{"value", kv.value}, {"argmin", kv.argmin}};
        result["family_condition"] = check_family_condition(fam);
        lines.push_back("kusuoka " + fmt12(kv.value) + " argmin " + std::to_string(kv.argmin));
        if (u) {
            const double ce = certainty_equivalent_family(dist, fam, *u);
            result["certainty_equivalent_family"] = ce;
            lines.push_back("certainty_equivalent_family " + fmt12(ce));
        }
    }
    if (g.json) {
        out << result.dump(2) << "\n";
    } else {
        for (const auto& l : lines) {
            out << l << "\n";
        }
    }
    return kOk;
}

inline int run_limit(const Globals& g, double sigma, const std::string& mu_text, const std::string& family_text, std::ostream& out) {
    if (mu_text.empty() == family_text.empty()) {
        throw ConfigError("", "exactly one of --mu and --family is required");
    }
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
        throw ConfigError("sigma", "must be a nonnegative finite number");
    }
    Json result;
    double value = 0.0;
    if (!mu_text.empty()) {
        const MixtureMeasure mu = parse_mixture_arg(mu_text, "mu");
        value = theorem1_limit(sigma, mu);
        result = {{"limit", value}, {"kind", "mixture"}, {"log_condition", check_log_condition(mu)}};
    } else {
        const KusuokaFamily fam = parse_family_arg(family_text, "family");
        value = theorem2_limit(sigma, fam);
        result = {{"limit", value}, {"kind", "kusuoka_sup"}, {"family_condition", check_family_condition(fam)}};
    }
    if (g.json) {
        out << result.dump(2) << "\n";
    } else {
        out << "limit " << fmt12(value) << "\n";
    }
    return kOk;
}

inline int run_premium_curve(const Globals& g, const std::string& config_path, std::ostream& out, std::ostream& err) {
    std::ifstream in(config_path);
    if (!in) {
        throw ConfigError("config", "cannot read " + config_path);
    }
    Json j;
    try {
        j = Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ConfigError("config", std::string("invalid JSON: ") + e.what());
    }
    ExperimentConfig config = config_from_json(j);
    if (g.seed) {
        config.seed = *g.seed;
    } else if (!j.contains("seed")) {
        if (auto s = env_seed()) {
            config.seed = *s;
        }
    }

    const auto started = std::chrono::system_clock::now();
    PremiumCurve curve;
    try {
        curve = run_experiment(config, RunOptions{g.worker_count()});
    } catch (const CellDomainError& e) {
        err << "error: utility domain violation at n = " << e.n() << ": " << e.what() << "\n";
        return kDomainAbort;
    }
    const auto finished = std::chrono::system_clock::now();

    const std::filesystem::path dir(g.out_dir);
    std::filesystem::create_directories(dir);
    write_file(dir / "curve.csv", curve_csv(curve));
    write_file(dir / "curve.json", curve_to_json(curve).dump(2) + "\n");
    const Json manifest = {{"config", config_to_json(config)},
                           {"tool_version", std::string(kToolVersion)},
                           {"master_seed", config.seed},
                           {"rng", std::string(RngSpec::algorithm)},
                           {"threads", g.worker_count()},
                           {"started_at", utc_timestamp(started)},
                           {"finished_at", utc_timestamp(finished)},
                           {"config_hash", hex64(curve.config_hash)}};
    write_file(dir / "manifest.json", manifest.dump(2) + "\n");

    const LimitComparison cmp = compare_to_limit(curve);
    if (g.json) {
        out << curve_to_json(curve).dump(2) << "\n";
    } else {
        out << curve_csv(curve);
        out << "limit " << fmt12(curve.limit) << "\n";
        if (curve.rate_fit) {
            out << "rate_fit slope " << fmt12(curve.rate_fit->slope) << " r_squared " << fmt12(curve.rate_fit->r_squared) << "\n";
        } else {
            out << "rate_fit skipped: " << curve.rate_fit_note << "\n";
        }
        out << "trend " << (cmp.trend_ok ? "ok" : "FAILED") << "\n";
    }
    if (!cmp.trend_ok) {
        err << "warning: |estimate - limit| is not nonincreasing over the last three pool sizes\n";
        return kTrendFailure;
    }
    return kOk;
}

struct VerifyArgs {
    std::string suite = "all";
    std::size_t trials = 1000;
    std::size_t max_atoms = 64;
    bool inject_fault = false;
};

inline int run_verify(const Globals& g, const VerifyArgs& a, std::ostream& out, std::ostream& err) {
    VerifyOptions opt;
    opt.trials = a.trials;
    opt.max_atoms = a.max_atoms;
    opt.inject_fault = a.inject_fault;
    if (g.seed) {
        opt.seed = *g.seed;
    } else if (auto s = env_seed()) {
        opt.seed = *s;
    }
    if (a.max_atoms == 0) {
        throw ConfigError("max-atoms", "must be positive");
    }
    if (a.trials == 0) {
        err << "warning: --trials 0 runs no checks; vacuous pass\n";
    }

    std::vector<PropertyOutcome> outcomes;
    if (a.suite == "duality" || a.suite == "all") {
        auto d = verify_duality(opt);
        outcomes.insert(outcomes.end(), d.begin(), d.end());
    }
    if (a.suite == "properties" || a.suite == "all") {
        auto p = verify_properties(opt);
        outcomes.insert(outcomes.end(), p.begin(), p.end());
    }

    bool ok = true;
    Json report = Json::array();
    for (const auto& o : outcomes) {
        ok = ok && o.passed();
        Json row = {{"property", o.name}, {"trials", o.trials}, {"failures", o.failures}, {"passed", o.passed()}};
        if (o.counterexample) {
            row["counterexample"] = *o.counterexample;
        }
        report.push_back(row);
        if (!g.json) {
            out << o.name << ": " << (o.trials - o.failures) << "/" << o.trials << " " << (o.passed() ? "pass" : "FAIL") << "\n";
        }
    }
    if (g.json) {
        out << Json{{"seed", opt.seed}, {"results", report}, {"passed", ok}}.dump(2) << "\n";
    }
    if (!ok) {
        for (const auto& o : outcomes) {
            if (o.counterexample) {
                err << "counterexample [" << o.name << "]: " << *o.counterexample << "\n";
            }
        }
        return kPropertyViolation;
    }
    return kOk;
}

} // namespace detail

/// Runs the command line; argv[0] is the program name.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Law-invariant risk measures and pooled risk premia"};
    app.require_subcommand(1);
    app.fallthrough();

    detail::Globals g;
    std::uint64_t seed_value = 0;
    auto* seed_opt = app.add_option("--seed", seed_value, "Master seed (falls back to RISKPOOL_SEED)");
    app.add_flag("--json", g.json, "Machine-readable output");
    app.add_option("--out-dir", g.out_dir, "Directory for result files");
    app.add_option("--threads", g.threads, "Worker threads (0 = all cores); never changes results");

    detail::MeasureArgs margs;
    double lambda_value = 0.0;
    auto* measure = app.add_subcommand("measure", "Evaluate a tail average, mixture or Kusuoka family");
    measure->add_option("--dist", margs.dist, "Distribution as JSON or 'normal01'")->required();
    auto* lambda_opt = measure->add_option("--lambda", lambda_value, "Tail level in (0,1]");
    measure->add_option("--mu", margs.mu, "Mixing measure: JSON, 'delta1' or 'w@lambda + w@lambda'");
    measure->add_option("--family", margs.family, "Kusuoka family: JSON or '{delta0.3, delta0.7}'");
    measure->add_option("--utility", margs.utility, "Utility as JSON; also prints the certainty equivalent");

    double sigma = 1.0;
    std::string limit_mu;
    std::string limit_family;
    auto* limit = app.add_subcommand("limit", "Limit of sqrt(n) times the pooled risk premium");
    limit->add_option("--sigma", sigma, "Standard deviation of a single risk")->required();
    limit->add_option("--mu", limit_mu, "Mixing measure");
    limit->add_option("--family", limit_family, "Kusuoka family");

    std::string config_path;
    auto* curve = app.add_subcommand("premium-curve", "Run a premium-curve experiment and write CSV/JSON results");
    curve->add_option("--config", config_path, "Experiment configuration (JSON)")->required();

    detail::VerifyArgs vargs;
    auto* verify = app.add_subcommand("verify", "Randomised duality and property checks");
    verify->add_option("suite", vargs.suite, "duality | properties | all")->check(CLI::IsMember({"duality", "properties", "all"}));
    verify->add_option("--trials", vargs.trials, "Trials per property");
    verify->add_option("--max-atoms", vargs.max_atoms, "Largest random law");
    verify->add_flag("--inject-fault", vargs.inject_fault, "Harness self-check with a deliberately wrong functional")->group("");

    std::vector<const char*> argv;
    argv.reserve(args.size());
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kConfigError;
    }
    if (seed_opt->count() > 0) {
        g.seed = seed_value;
    }
    if (lambda_opt->count() > 0) {
        margs.lambda = lambda_value;
    }

    try {
        if (measure->parsed()) {
            return detail::run_measure(g, margs, out);
        }
        if (limit->parsed()) {
            return detail::run_limit(g, sigma, limit_mu, limit_family, out);
        }
        if (curve->parsed()) {
            return detail::run_premium_curve(g, config_path, out, err);
        }
        if (verify->parsed()) {
            return detail::run_verify(g, vargs, out, err);
        }
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kConfigError;
    } catch (const UtilityDomainError& e) {
        err << "error: " << e.what() << "\n";
        return kDomainAbort;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return kConfigError;
    }
    return kConfigError;
}

} // namespace riskpool::cli
