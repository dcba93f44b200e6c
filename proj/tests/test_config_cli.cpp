#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "riskpool/cli.hpp"
#include "riskpool/config.hpp"

using namespace riskpool;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int code = 0;
    std::string out;
    std::string err;
};

CliResult invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "riskpool");
    std::ostringstream out;
    std::ostringstream err;
    const int code = riskpool::cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

class TempDir {
public:
    TempDir() {
        static int counter = 0;
        path_ = fs::temp_directory_path() /
                ("riskpool_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    [[nodiscard]] const fs::path& path() const { return path_; }

    [[nodiscard]] std::string write(const std::string& name, const std::string& text) const {
        std::ofstream(path_ / name) << text;
        return (path_ / name).string();
    }

private:
    fs::path path_;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

ConfigError config_error(const Json& j) {
    try {
        (void)config_from_json(j);
    } catch (const ConfigError& e) {
        return e;
    }
    ADD_FAILURE() << "expected ConfigError for " << j.dump();
    return ConfigError("", "");
}

const char* kSmallMc = R"({
  "distribution": {"family": "two_point", "x_lo": 0, "x_hi": 1, "p": 0.5},
  "mu": {"atoms": [{"lambda": 0.5, "weight": 1}]},
  "utility": {"family": "cara", "alpha": 0.5},
  "n_grid": [2, 4, 8, 16],
  "replications": 2000,
  "batches": 20,
  "seed": 5
})";

} // namespace

TEST(Config, RoundTrip) {
    const Json j = Json::parse(kSmallMc);
    const ExperimentConfig c = config_from_json(j);
    EXPECT_EQ(c.n_grid, (std::vector<std::size_t>{2, 4, 8, 16}));
    EXPECT_EQ(c.seed, 5u);
    EXPECT_EQ(c.replications, 2000u);
    const Json back = config_to_json(c);
    const ExperimentConfig again = config_from_json(back);
    EXPECT_EQ(config_to_json(again), back);
    EXPECT_EQ(config_hash(again), config_hash(c));
    EXPECT_EQ(hex64(config_hash(c)).size(), 16u);
}

TEST(Config, SignedIntegersAccepted) {
    Json j = Json::parse(kSmallMc);
    j["n_grid"] = {1, 2, 3};
    j["replications"] = 40;
    EXPECT_EQ(config_from_json(j).n_grid, (std::vector<std::size_t>{1, 2, 3}));
}

TEST(Config, HashTracksContent) {
    ExperimentConfig a = config_from_json(Json::parse(kSmallMc));
    ExperimentConfig b = a;
    b.replications = 4000;
    EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(Config, ErrorsCarryFieldPaths) {
    Json j = Json::parse(kSmallMc);
    j["distribution"]["p"] = 1.5;
    EXPECT_EQ(config_error(j).path(), "distribution");

    j = Json::parse(kSmallMc);
    j["distribution"]["family"] = "cauchy";
    EXPECT_EQ(config_error(j).path(), "distribution.family");

    j = Json::parse(kSmallMc);
    j["family"] = {{"members", Json::array({{{"atoms", Json::array({{{"lambda", 0.5}, {"weight", 1}}})}}})}};
    EXPECT_EQ(config_error(j).path(), "family");

    j = Json::parse(kSmallMc);
    j["n_grid"] = {4, -1};
    EXPECT_EQ(config_error(j).path(), "n_grid[1]");

    j = Json::parse(kSmallMc);
    j["n_grid"] = {8, 4};
    EXPECT_EQ(config_error(j).path(), "n_grid");

    j = Json::parse(kSmallMc);
    j["replications"] = 2001;
    EXPECT_EQ(config_error(j).path(), "replications");

    j = Json::parse(kSmallMc);
    j["batches"] = -20;
    EXPECT_EQ(config_error(j).path(), "batches");

    j = Json::parse(kSmallMc);
    j["seed"] = 1.5;
    EXPECT_EQ(config_error(j).path(), "seed");

    j = Json::parse(kSmallMc);
    j["colour"] = "blue";
    EXPECT_NE(std::string(config_error(j).what()).find("colour"), std::string::npos);

    j = Json::parse(kSmallMc);
    j["path"] = "exact";
    EXPECT_EQ(config_error(j).path(), "path");

    j = Json::parse(kSmallMc);
    j.erase("distribution");
    EXPECT_EQ(config_error(j).path(), "distribution");
}

TEST(Config, DistributionRoundTrip) {
    const std::vector<std::string> texts{
        R"({"family":"normal","mean":1,"sd":2})",          R"({"family":"uniform","a":-1,"b":3})",
        R"({"family":"bernoulli","p":0.3,"loc":1,"scale":2})", R"({"family":"exponential","rate":2,"loc":1})",
        R"({"family":"two_point","x_lo":0,"x_hi":1,"p":0.9})", R"({"family":"discrete","outcomes":[3,1],"probs":[0.5,0.5]})",
        R"({"family":"empirical","values":[2,1,3]})"};
    for (const auto& t : texts) {
        const Distribution d = parse_distribution_arg(t);
        const Distribution again = distribution_from_json(distribution_to_json(d));
        EXPECT_EQ(mean(d), mean(again)) << t;
        EXPECT_EQ(variance(d), variance(again)) << t;
    }
    EXPECT_EQ(variance(parse_distribution_arg("normal01")), 1.0);
    EXPECT_THROW(parse_distribution_arg("{not json"), ConfigError);
    EXPECT_THROW(parse_distribution_arg(R"({"family":"normal","sd":-1})"), ConfigError);
}

TEST(Config, MeasureShorthands) {
    EXPECT_EQ(parse_mixture_arg("delta0.5"), MixtureMeasure::dirac(0.5));
    EXPECT_EQ(parse_mixture_arg("\xCE\xB4" "1"), MixtureMeasure::dirac(1.0));
    EXPECT_EQ(parse_mixture_arg("0.5@0.5 + 0.5@1"), MixtureMeasure({{0.5, 0.5}, {1.0, 0.5}}));
    EXPECT_EQ(parse_mixture_arg(R"({"atoms":[{"lambda":0.3,"weight":1}]})"), MixtureMeasure::dirac(0.3));
    EXPECT_EQ(parse_family_arg("{delta0.3, delta0.7}"),
              KusuokaFamily({MixtureMeasure::dirac(0.3), MixtureMeasure::dirac(0.7)}));
    EXPECT_EQ(parse_family_arg("{\xCE\xB4" "0.3, 0.5@0.5 + 0.5@1}"),
              KusuokaFamily({MixtureMeasure::dirac(0.3), MixtureMeasure({{0.5, 0.5}, {1.0, 0.5}})}));
    EXPECT_THROW(parse_mixture_arg("delta0"), ConfigError);
    EXPECT_THROW(parse_mixture_arg("0.5@0.5"), ConfigError);
    EXPECT_THROW(parse_mixture_arg("half"), ConfigError);
    EXPECT_THROW(parse_family_arg("{delta2}"), ConfigError);
    const MixtureMeasure mu({{0.2, 0.25}, {1.0, 0.75}});
    EXPECT_EQ(mixture_from_json(mixture_to_json(mu)), mu);
}

TEST(Config, UtilityRoundTrip) {
    EXPECT_TRUE(parse_utility_arg("linear").is_linear());
    const UtilityFunction u = parse_utility_arg(R"({"family":"crra","gamma":3,"c":1})");
    EXPECT_EQ(utility_from_json(utility_to_json(u)).apply(2.0), u.apply(2.0));
    EXPECT_THROW(parse_utility_arg(R"({"family":"cara","alpha":-1})"), ConfigError);
    EXPECT_THROW(parse_utility_arg(R"({"family":"cara"})"), ConfigError);
}

TEST(Config, FormatReal) {
    EXPECT_EQ(format_real(0.1), "0.10000000000000001");
    EXPECT_EQ(format_real(std::numeric_limits<double>::infinity()), "inf");
    EXPECT_EQ(format_real(-std::numeric_limits<double>::infinity()), "-inf");
    EXPECT_EQ(format_real(std::nan("")), "nan");
}

// ---------------------------------------------------------------------------
// Command line

TEST(Cli, MeasureOutputs) {
    const auto four = R"({"family":"discrete","outcomes":[1,2,3,4],"probs":[0.25,0.25,0.25,0.25]})";
    auto r = invoke({"measure", "--dist", four, "--lambda", "0.5"});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out, "avar 1.5\n");

    r = invoke({"measure", "--dist", "normal01", "--family", "{delta0.3, delta0.7}"});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out, "kusuoka -1.15897538067 argmin 0\n");

    r = invoke({"--json", "measure", "--dist", "normal01", "--mu", "0.5@0.5 + 0.5@1", "--utility", R"({"family":"cara","alpha":1})"});
    EXPECT_EQ(r.code, 0) << r.err;
    const Json j = Json::parse(r.out);
    EXPECT_NEAR(j.at("mixture").get<double>(), -0.398942280401432678, 1e-12);
    EXPECT_TRUE(j.contains("certainty_equivalent"));
}

TEST(Cli, LimitOutputs) {
    auto r = invoke({"limit", "--sigma", "1", "--mu", "delta0.5"});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out, "limit 0.797884560803\n");
    r = invoke({"limit", "--sigma", "0.5", "--family", "{delta0.3, delta0.7}"});
    EXPECT_EQ(r.out, "limit 0.579487690333\n");
    r = invoke({"limit", "--sigma", "2", "--mu", "delta1", "--json"});
    EXPECT_EQ(Json::parse(r.out).at("limit").get<double>(), 0.0);
}

TEST(Cli, ConfigErrorsExitTwo) {
    EXPECT_EQ(invoke({}).code, 2);
    EXPECT_EQ(invoke({"bogus"}).code, 2);
    EXPECT_EQ(invoke({"limit", "--sigma", "1"}).code, 2);
    EXPECT_EQ(invoke({"limit", "--sigma", "1", "--mu", "delta0.5", "--family", "{delta0.5}"}).code, 2);
    EXPECT_EQ(invoke({"limit", "--sigma", "-1", "--mu", "delta0.5"}).code, 2);
    EXPECT_EQ(invoke({"measure", "--dist", "normal01", "--lambda", "0"}).code, 2);
    EXPECT_EQ(invoke({"measure", "--dist", "normal01"}).code, 2);
    EXPECT_EQ(invoke({"premium-curve", "--config", "/nonexistent/config.json"}).code, 2);
    EXPECT_EQ(invoke({"verify", "everything"}).code, 2);
    const auto r = invoke({"measure", "--dist", R"({"family":"normal","sd":0})", "--lambda", "0.5"});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("dist"), std::string::npos);
    EXPECT_EQ(invoke({"--help"}).code, 0);
}

TEST(Cli, DomainViolationExitsFour) {
    const auto r = invoke({"measure", "--dist", "normal01", "--mu", "delta1", "--utility", R"({"family":"log","c":0})"});
    EXPECT_EQ(r.code, 4);

    TempDir dir;
    Json j = Json::parse(kSmallMc);
    j["distribution"]["x_lo"] = -1;
    j["utility"] = {{"family", "log"}, {"c", 0}};
    const auto path = dir.write("config.json", j.dump());
    const auto c = invoke({"--out-dir", dir.path().string(), "premium-curve", "--config", path});
    EXPECT_EQ(c.code, 4);
    EXPECT_NE(c.err.find("n = 2"), std::string::npos) << c.err;
}

TEST(Cli, PremiumCurveWritesResults) {
    TempDir dir;
    const auto path = dir.write("config.json", kSmallMc);
    const auto r = invoke({"--out-dir", (dir.path() / "run").string(), "premium-curve", "--config", path});
    EXPECT_EQ(r.code, 0) << r.err;
    const std::string csv = slurp(dir.path() / "run" / "curve.csv");
    EXPECT_EQ(csv.rfind("n,estimate,stderr,limit,abs_gap,z_score\n", 0), 0u);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
    const Json curve = Json::parse(slurp(dir.path() / "run" / "curve.json"));
    EXPECT_EQ(curve.at("records").size(), 4u);
    EXPECT_EQ(curve.at("provenance").at("seed").get<std::uint64_t>(), 5u);
    const Json manifest = Json::parse(slurp(dir.path() / "run" / "manifest.json"));
    EXPECT_EQ(manifest.at("master_seed").get<std::uint64_t>(), 5u);
    EXPECT_EQ(manifest.at("rng").get<std::string>(), "philox4x32-10");
    EXPECT_EQ(manifest.at("config_hash"), curve.at("provenance").at("config_hash"));
    for (const char* key : {"config", "tool_version", "threads", "started_at", "finished_at"}) {
        EXPECT_TRUE(manifest.contains(key)) << key;
    }
}

TEST(Cli, PremiumCurveSeedPrecedence) {
    TempDir dir;
    const auto path = dir.write("config.json", kSmallMc);
    const auto out = (dir.path() / "run").string();
    ASSERT_EQ(invoke({"--seed", "9", "--out-dir", out, "premium-curve", "--config", path}).code, 0);
    EXPECT_EQ(Json::parse(slurp(dir.path() / "run" / "manifest.json")).at("master_seed").get<std::uint64_t>(), 9u);

    Json j = Json::parse(kSmallMc);
    j.erase("seed");
    const auto unseeded = dir.write("unseeded.json", j.dump());
    ::setenv("RISKPOOL_SEED", "77", 1);
    const int code = invoke({"--out-dir", out, "premium-curve", "--config", unseeded}).code;
    ::unsetenv("RISKPOOL_SEED");
    ASSERT_EQ(code, 0);
    EXPECT_EQ(Json::parse(slurp(dir.path() / "run" / "manifest.json")).at("master_seed").get<std::uint64_t>(), 77u);
}

TEST(Cli, PremiumCurveIdenticalAcrossThreadCounts) {
    TempDir dir;
    const auto path = dir.write("config.json", kSmallMc);
    const auto a = (dir.path() / "a").string();
    const auto b = (dir.path() / "b").string();
    ASSERT_EQ(invoke({"--threads", "1", "--out-dir", a, "premium-curve", "--config", path}).code, 0);
    ASSERT_EQ(invoke({"--threads", "4", "--out-dir", b, "premium-curve", "--config", path}).code, 0);
    EXPECT_EQ(slurp(fs::path(a) / "curve.csv"), slurp(fs::path(b) / "curve.csv"));
}

TEST(Cli, TrendFailureExitsThree) {
    // Lattice effects make |estimate - limit| jump between n = 1, 2, 3 here.
    TempDir dir;
    Json j = Json::parse(kSmallMc);
    j["distribution"]["p"] = 0.9;
    j["mu"] = {{"atoms", Json::array({{{"lambda", 0.2}, {"weight", 1}}})}};
    j.erase("utility");
    j["n_grid"] = {1, 2, 3};
    j["replications"] = 20000;
    const auto path = dir.write("config.json", j.dump());
    const auto r = invoke({"--out-dir", dir.path().string(), "premium-curve", "--config", path});
    EXPECT_EQ(r.code, 3) << r.out;
    EXPECT_TRUE(fs::exists(dir.path() / "curve.csv"));
}

TEST(Cli, VerifyPassesAndReportsFaults) {
    auto r = invoke({"verify", "all", "--trials", "50"});
    EXPECT_EQ(r.code, 0) << r.out << r.err;
    EXPECT_NE(r.out.find("primal_dual_equality: 50/50 pass"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("superadditivity: 50/50 pass"), std::string::npos) << r.out;

    r = invoke({"verify", "duality", "--trials", "0"});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.err.find("vacuous"), std::string::npos);

    r = invoke({"verify", "all", "--trials", "50", "--inject-fault"});
    EXPECT_EQ(r.code, 5);
    EXPECT_NE(r.err.find("counterexample"), std::string::npos);
}
