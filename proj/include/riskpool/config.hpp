#pragma once

// JSON and command-line forms of distributions, mixing measures, utilities
// and experiment configurations, plus the CSV/JSON writers for premium curves.

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "riskpool/asymptotics.hpp"
#include "riskpool/distribution.hpp"
#include "riskpool/mc_engine.hpp"
#include "riskpool/preferences.hpp"
#include "riskpool/risk_measures.hpp"

namespace riskpool {

using Json = nlohmann::json;

inline constexpr std::string_view kToolVersion = "0.1.0";

/// Invalid configuration; `path` names the offending field, e.g. "distribution.sd".
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string path, const std::string& message)
        : std::runtime_error(path.empty() ? message : path + ": " + message), path_(std::move(path)) {}

    [[nodiscard]] const std::string& path() const { return path_; }

private:
    std::string path_;
};

namespace detail {

inline std::string join_path(const std::string& base, const std::string& key) { return base.empty() ? key : base + "." + key; }

inline std::string index_path(const std::string& base, std::size_t i) { return base + "[" + std::to_string(i) + "]"; }

inline const Json& require_object(const Json& j, const std::string& path) {
    if (!j.is_object()) {
        throw ConfigError(path, "expected an object");
    }
    return j;
}

inline void reject_unknown_keys(const Json& j, const std::string& path, std::initializer_list<std::string_view> allowed) {
    for (const auto& item : j.items()) {
        bool known = false;
        for (auto a : allowed) {
            known = known || item.key() == a;
        }
        if (!known) {
            throw ConfigError(join_path(path, item.key()), "unknown field");
        }
    }
}

inline double get_number(const Json& j, const std::string& key, const std::string& path, std::optional<double> fallback = std::nullopt) {
    const auto it = j.find(key);
    if (it == j.end()) {
        if (fallback) {
            return *fallback;
        }
        throw ConfigError(join_path(path, key), "missing required number");
    }
    if (!it->is_number()) {
        throw ConfigError(join_path(path, key), "expected a number");
    }
    return it->get<double>();
}

inline std::uint64_t get_unsigned(const Json& j, const std::string& key, const std::string& path, std::uint64_t fallback) {
    const auto it = j.find(key);
    if (it == j.end()) {
        return fallback;
    }
    if (!it->is_number_integer() || (!it->is_number_unsigned() && it->get<std::int64_t>() < 0)) {
        throw ConfigError(join_path(path, key), "expected a nonnegative integer");
    }
    return it->get<std::uint64_t>();
}

inline std::vector<double> get_number_array(const Json& j, const std::string& key, const std::string& path) {
    const auto it = j.find(key);
    if (it == j.end() || !it->is_array()) {
        throw ConfigError(join_path(path, key), "expected an array of numbers");
    }
    std::vector<double> out;
    for (std::size_t i = 0; i < it->size(); ++i) {
        if (!(*it)[i].is_number()) {
            throw ConfigError(index_path(join_path(path, key), i), "expected a number");
        }
        out.push_back((*it)[i].get<double>());
    }
    return out;
}

inline std::string get_string(const Json& j, const std::string& key, const std::string& path) {
    const auto it = j.find(key);
    if (it == j.end() || !it->is_string()) {
        throw ConfigError(join_path(path, key), "expected a string");
    }
    return it->get<std::string>();
}

template <class F>
auto wrap_invalid(const std::string& path, F&& build) -> decltype(build()) {
    try {
        return build();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(path, e.what());
    }
}

inline std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b])) != 0) {
        ++b;
    }
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1])) != 0) {
        --e;
    }
    return std::string(s.substr(b, e - b));
}

inline double parse_real(std::string_view text, const std::string& path) {
    const std::string s = trim(text);
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw ConfigError(path, "cannot parse number '" + s + "'");
    }
    if (used != s.size()) {
        throw ConfigError(path, "cannot parse number '" + s + "'");
    }
    return v;
}

inline std::vector<std::string> split_top_level(std::string_view s, char sep) {
    std::vector<std::string> parts;
    int depth = 0;
    std::size_t start = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        if (c == '{' || c == '[' || c == '(') {
            ++depth;
        } else if (c == '}' || c == ']' || c == ')') {
            --depth;
        } else if (c == sep && depth == 0) {
            parts.emplace_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    parts.emplace_back(s.substr(start));
    return parts;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Distributions

inline Distribution distribution_from_json(const Json& j, const std::string& path = "distribution") {
    detail::require_object(j, path);
    const std::string family = detail::get_string(j, "family", path);
    return detail::wrap_invalid(path, [&]() -> Distribution {
        using detail::get_number;
        if (family == "normal") {
            detail::reject_unknown_keys(j, path, {"family", "mean", "sd"});
            return ParametricDistribution(NormalLaw{get_number(j, "mean", path, 0.0), get_number(j, "sd", path)});
        }
        if (family == "uniform") {
            detail::reject_unknown_keys(j, path, {"family", "a", "b"});
            return ParametricDistribution(UniformLaw{get_number(j, "a", path), get_number(j, "b", path)});
        }
        if (family == "bernoulli") {
            detail::reject_unknown_keys(j, path, {"family", "p", "loc", "scale"});
            return ParametricDistribution(
                BernoulliLaw{get_number(j, "p", path), get_number(j, "loc", path, 0.0), get_number(j, "scale", path, 1.0)});
        }
        if (family == "exponential") {
            detail::reject_unknown_keys(j, path, {"family", "rate", "loc"});
            return ParametricDistribution(ExponentialLaw{get_number(j, "rate", path), get_number(j, "loc", path, 0.0)});
        }
        if (family == "two_point") {
            detail::reject_unknown_keys(j, path, {"family", "x_lo", "x_hi", "p"});
            return ParametricDistribution(
                TwoPointLaw{get_number(j, "x_lo", path), get_number(j, "x_hi", path), get_number(j, "p", path)});
        }
        if (family == "discrete") {
            detail::reject_unknown_keys(j, path, {"family", "outcomes", "probs"});
            return DiscreteDistribution(detail::get_number_array(j, "outcomes", path), detail::get_number_array(j, "probs", path));
        }
        if (family == "empirical") {
            detail::reject_unknown_keys(j, path, {"family", "values"});
            return EmpiricalSample(detail::get_number_array(j, "values", path));
        }
        throw ConfigError(detail::join_path(path, "family"), "unknown distribution family '" + family + "'");
    });
}

inline Json distribution_to_json(const Distribution& dist) {
    return std::visit(
        [](const auto& d) -> Json {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, DiscreteDistribution>) {
                return {{"family", "discrete"},
                        {"outcomes", std::vector<double>(d.outcomes().begin(), d.outcomes().end())},
                        {"probs", std::vector<double>(d.probabilities().begin(), d.probabilities().end())}};
            } else if constexpr (std::is_same_v<T, EmpiricalSample>) {
                return {{"family", "empirical"}, {"values", std::vector<double>(d.values().begin(), d.values().end())}};
            } else {
                return std::visit(
                    [](const auto& law) -> Json {
                        using L = std::decay_t<decltype(law)>;
                        if constexpr (std::is_same_v<L, NormalLaw>) {
                            return {{"family", "normal"}, {"mean", law.mean}, {"sd", law.sd}};
                        } else if constexpr (std::is_same_v<L, UniformLaw>) {
                            return {{"family", "uniform"}, {"a", law.a}, {"b", law.b}};
                        } else if constexpr (std::is_same_v<L, BernoulliLaw>) {
                            return {{"family", "bernoulli"}, {"p", law.p}, {"loc", law.loc}, {"scale", law.scale}};
                        } else if constexpr (std::is_same_v<L, ExponentialLaw>) {
                            return {{"family", "exponential"}, {"rate", law.rate}, {"loc", law.loc}};
                        } else {
                            return {{"family", "two_point"}, {"x_lo", law.x_lo}, {"x_hi", law.x_hi}, {"p", law.p}};
                        }
                    },
                    d.family());
            }
        },
        dist);
}

/// JSON text, or the shorthand "normal01".
inline Distribution parse_distribution_arg(const std::string& text, const std::string& path = "dist") {
    const std::string s = detail::trim(text);
    if (s == "normal01") {
        return ParametricDistribution(NormalLaw{0.0, 1.0});
    }
    Json j;
    try {
        j = Json::parse(s);
    } catch (const Json::parse_error& e) {
        throw ConfigError(path, std::string("invalid JSON: ") + e.what());
    }
    return distribution_from_json(j, path);
}

// ---------------------------------------------------------------------------
// Mixing measures and families

inline MixtureMeasure mixture_from_json(const Json& j, const std::string& path = "mu") {
    detail::require_object(j, path);
    detail::reject_unknown_keys(j, path, {"atoms"});
    const auto it = j.find("atoms");
    if (it == j.end() || !it->is_array()) {
        throw ConfigError(detail::join_path(path, "atoms"), "expected an array of {lambda, weight}");
    }
    std::vector<MixtureAtom> atoms;
    for (std::size_t i = 0; i < it->size(); ++i) {
        const std::string ap = detail::index_path(detail::join_path(path, "atoms"), i);
        const Json& a = detail::require_object((*it)[i], ap);
        detail::reject_unknown_keys(a, ap, {"lambda", "weight"});
        atoms.push_back({detail::get_number(a, "lambda", ap), detail::get_number(a, "weight", ap)});
    }
    return detail::wrap_invalid(path, [&] { return MixtureMeasure(std::move(atoms)); });
}

inline Json mixture_to_json(const MixtureMeasure& mu) {
    Json atoms = Json::array();
    for (const auto& a : mu.atoms()) {
        atoms.push_back({{"lambda", a.lambda}, {"weight", a.weight}});
    }
    return {{"atoms", atoms}};
}

inline KusuokaFamily family_from_json(const Json& j, const std::string& path = "family") {
    detail::require_object(j, path);
    detail::reject_unknown_keys(j, path, {"members"});
    const auto it = j.find("members");
    if (it == j.end() || !it->is_array()) {
        throw ConfigError(detail::join_path(path, "members"), "expected an array of mixing measures");
    }
    std::vector<MixtureMeasure> members;
    for (std::size_t i = 0; i < it->size(); ++i) {
        members.push_back(mixture_from_json((*it)[i], detail::index_path(detail::join_path(path, "members"), i)));
    }
    return detail::wrap_invalid(path, [&] { return KusuokaFamily(std::move(members)); });
}

inline Json family_to_json(const KusuokaFamily& family) {
    Json members = Json::array();
    for (const auto& m : family.members()) {
        members.push_back(mixture_to_json(m));
    }
    return {{"members", members}};
}

/// Shorthand mixing measure: "delta1", "delta0.5", "δ0.5", or a sum of
/// weighted atoms "0.5@0.5 + 0.5@1". JSON is accepted as well.
inline MixtureMeasure parse_mixture_arg(const std::string& text, const std::string& path = "mu") {
    const std::string s = detail::trim(text);
    if (!s.empty() && s.front() == '{') {
        Json j;
        try {
            j = Json::parse(s);
        } catch (const Json::parse_error& e) {
            throw ConfigError(path, std::string("invalid JSON: ") + e.what());
        }
        return mixture_from_json(j, path);
    }
    for (std::string_view prefix : {"delta", "\xCE\xB4"}) {
        if (s.rfind(prefix, 0) == 0) {
            const double lambda = detail::parse_real(std::string_view(s).substr(prefix.size()), path);
            return detail::wrap_invalid(path, [&] { return MixtureMeasure::dirac(lambda); });
        }
    }
    std::vector<MixtureAtom> atoms;
    for (const auto& term : detail::split_top_level(s, '+')) {
        const auto at = term.find('@');
        if (at == std::string::npos) {
            throw ConfigError(path, "expected terms of the form weight@lambda, got '" + detail::trim(term) + "'");
        }
        atoms.push_back({detail::parse_real(std::string_view(term).substr(at + 1), path),
                         detail::parse_real(std::string_view(term).substr(0, at), path)});
    }
    return detail::wrap_invalid(path, [&] { return MixtureMeasure(std::move(atoms)); });
}

/// Shorthand family "{δ0.3, δ0.7}" (members in any mixture shorthand) or JSON.
inline KusuokaFamily parse_family_arg(const std::string& text, const std::string& path = "family") {
    const std::string s = detail::trim(text);
    try {
        const Json j = Json::parse(s);
        return family_from_json(j, path);
    } catch (const Json::parse_error&) {
    }
    std::string_view body(s);
    if (body.size() >= 2 && body.front() == '{' && body.back() == '}') {
        body = body.substr(1, body.size() - 2);
    }
    std::vector<MixtureMeasure> members;
    const auto parts = detail::split_top_level(body, ',');
    for (std::size_t i = 0; i < parts.size(); ++i) {
        members.push_back(parse_mixture_arg(parts[i], detail::index_path(detail::join_path(path, "members"), i)));
    }
    return detail::wrap_invalid(path, [&] { return KusuokaFamily(std::move(members)); });
}

// ---------------------------------------------------------------------------
// Utilities

inline UtilityFunction utility_from_json(const Json& j, const std::string& path = "utility") {
    detail::require_object(j, path);
    const std::string family = detail::get_string(j, "family", path);
    return detail::wrap_invalid(path, [&]() -> UtilityFunction {
        using detail::get_number;
        if (family == "linear") {
            detail::reject_unknown_keys(j, path, {"family", "a", "b"});
            return LinearUtility{get_number(j, "a", path, 1.0), get_number(j, "b", path, 0.0)};
        }
        if (family == "cara") {
            detail::reject_unknown_keys(j, path, {"family", "alpha"});
            return CaraUtility{get_number(j, "alpha", path)};
        }
        if (family == "log") {
            detail::reject_unknown_keys(j, path, {"family", "c"});
            return LogUtility{get_number(j, "c", path, 0.0)};
        }
        if (family == "crra") {
            detail::reject_unknown_keys(j, path, {"family", "gamma", "c"});
            return CrraUtility{get_number(j, "gamma", path), get_number(j, "c", path, 0.0)};
        }
        throw ConfigError(detail::join_path(path, "family"), "unknown utility family '" + family + "'");
    });
}

inline Json utility_to_json(const UtilityFunction& u) {
    return std::visit(
        [](const auto& f) -> Json {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, LinearUtility>) {
                return {{"family", "linear"}, {"a", f.a}, {"b", f.b}};
            } else if constexpr (std::is_same_v<T, CaraUtility>) {
                return {{"family", "cara"}, {"alpha", f.alpha}};
            } else if constexpr (std::is_same_v<T, LogUtility>) {
                return {{"family", "log"}, {"c", f.c}};
            } else {
                return {{"family", "crra"}, {"gamma", f.gamma}, {"c", f.c}};
            }
        },
        u.family());
}

inline UtilityFunction parse_utility_arg(const std::string& text, const std::string& path = "utility") {
    const std::string s = detail::trim(text);
    if (s == "linear") {
        return LinearUtility{};
    }
    Json j;
    try {
        j = Json::parse(s);
    } catch (const Json::parse_error& e) {
        throw ConfigError(path, std::string("invalid JSON: ") + e.what());
    }
    return utility_from_json(j, path);
}

// ---------------------------------------------------------------------------
// Experiment configuration

inline std::string_view path_mode_name(PathMode m) {
    switch (m) {
    case PathMode::Exact:
        return "exact";
    case PathMode::MonteCarlo:
        return "mc";
    case PathMode::Auto:
        break;
    }
    return "auto";
}

inline ExperimentConfig config_from_json(const Json& j) {
    detail::require_object(j, "");
    detail::reject_unknown_keys(j, "", {"distribution", "mu", "family", "utility", "wealth", "n_grid", "replications", "batches",
                                        "seed", "path", "quantile_grid", "fit_drop_smallest"});
    ExperimentConfig c;
    if (!j.contains("distribution")) {
        throw ConfigError("distribution", "missing required field");
    }
    c.distribution = distribution_from_json(j.at("distribution"), "distribution");

    const bool has_mu = j.contains("mu");
    const bool has_family = j.contains("family");
    if (has_mu == has_family) {
        throw ConfigError(has_mu ? "family" : "mu", "exactly one of 'mu' and 'family' must be given");
    }
    if (has_mu) {
        c.measure = mixture_from_json(j.at("mu"), "mu");
    } else {
        c.measure = family_from_json(j.at("family"), "family");
    }
    if (j.contains("utility")) {
        c.utility = utility_from_json(j.at("utility"), "utility");
    }
    c.wealth = detail::get_number(j, "wealth", "", 0.0);
    if (j.contains("n_grid")) {
        const Json& g = j.at("n_grid");
        if (!g.is_array()) {
            throw ConfigError("n_grid", "expected an array of positive integers");
        }
        c.n_grid.clear();
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (!g[i].is_number_integer() || (g[i].is_number_unsigned() ? g[i].get<std::uint64_t>() == 0 : g[i].get<std::int64_t>() <= 0)) {
                throw ConfigError(detail::index_path("n_grid", i), "expected a positive integer");
            }
            c.n_grid.push_back(static_cast<std::size_t>(g[i].get<std::uint64_t>()));
        }
    }
    c.replications = static_cast<std::size_t>(detail::get_unsigned(j, "replications", "", c.replications));
    c.batches = static_cast<std::size_t>(detail::get_unsigned(j, "batches", "", c.batches));
    c.seed = detail::get_unsigned(j, "seed", "", c.seed);
    c.quantile_grid = static_cast<std::size_t>(detail::get_unsigned(j, "quantile_grid", "", c.quantile_grid));
    c.fit_drop_smallest = static_cast<std::size_t>(detail::get_unsigned(j, "fit_drop_smallest", "", c.fit_drop_smallest));
    if (j.contains("path")) {
        const std::string p = detail::get_string(j, "path", "");
        if (p == "auto") {
            c.path = PathMode::Auto;
        } else if (p == "exact") {
            c.path = PathMode::Exact;
        } else if (p == "mc") {
            c.path = PathMode::MonteCarlo;
        } else {
            throw ConfigError("path", "expected one of auto, exact, mc");
        }
    }

    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        const auto colon = msg.find(':');
        throw ConfigError(colon == std::string::npos ? "" : msg.substr(0, colon),
                          colon == std::string::npos ? msg : detail::trim(msg.substr(colon + 1)));
    }
    return c;
}

inline Json config_to_json(const ExperimentConfig& c) {
    Json j;
    j["distribution"] = distribution_to_json(c.distribution);
    if (const auto* mu = std::get_if<MixtureMeasure>(&c.measure)) {
        j["mu"] = mixture_to_json(*mu);
    } else {
        j["family"] = family_to_json(std::get<KusuokaFamily>(c.measure));
    }
    j["utility"] = utility_to_json(c.utility);
    j["wealth"] = c.wealth;
    j["n_grid"] = c.n_grid;
    j["replications"] = c.replications;
    j["batches"] = c.batches;
    j["seed"] = c.seed;
    j["path"] = std::string(path_mode_name(c.path));
    j["quantile_grid"] = c.quantile_grid;
    j["fit_drop_smallest"] = c.fit_drop_smallest;
    return j;
}

/// FNV-1a over the canonical (key-sorted) JSON form.
inline std::uint64_t config_hash(const ExperimentConfig& c) {
    const std::string text = config_to_json(c).dump();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// ---------------------------------------------------------------------------
// Result writers

/// %.17g, with "inf", "-inf" and "nan" spelled out.
inline std::string format_real(double v) {
    if (std::isnan(v)) {
        return "nan";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string curve_csv(const PremiumCurve& curve) {
    const LimitComparison cmp = compare_to_limit(curve);
    std::string out = "n,estimate,stderr,limit,abs_gap,z_score\n";
    for (const auto& r : cmp.rows) {
        out += std::to_string(r.n) + "," + format_real(r.estimate) + "," + format_real(r.stderr_) + "," + format_real(r.limit) +
               "," + format_real(r.abs_gap) + "," + format_real(r.z_score) + "\n";
    }
    return out;
}

inline Json json_real(double v) {
    if (std::isfinite(v)) {
        return v;
    }
    return format_real(v);
}

inline Json curve_to_json(const PremiumCurve& curve) {
    const LimitComparison cmp = compare_to_limit(curve);
    Json records = Json::array();
    for (std::size_t i = 0; i < curve.records.size(); ++i) {
        const auto& r = curve.records[i];
        records.push_back({{"n", r.n},
                           {"estimate", r.estimate},
                           {"stderr", r.stderr_},
                           {"replications", r.replications},
                           {"exact", r.exact},
                           {"unscaled_premium", r.unscaled()},
                           {"abs_gap", cmp.rows[i].abs_gap},
                           {"z_score", json_real(cmp.rows[i].z_score)},
                           {"batch_estimates", r.batch_estimates}});
    }
    Json j;
    j["records"] = records;
    j["sigma"] = curve.sigma;
    j["limit"] = curve.limit;
    j["limit_kind"] = curve.family_limit ? "kusuoka_sup" : "mixture";
    if (curve.rate_fit) {
        Json pts = Json::array();
        for (const auto& p : curve.rate_fit->points) {
            pts.push_back({{"n", p.n}, {"premium", p.premium}});
        }
        j["rate_fit"] = {{"slope", curve.rate_fit->slope},
                         {"intercept", curve.rate_fit->intercept},
                         {"r_squared", curve.rate_fit->r_squared},
                         {"points", pts},
                         {"note", "fit grid and tolerances are engineering choices"}};
    } else {
        j["rate_fit"] = nullptr;
        j["rate_fit_note"] = curve.rate_fit_note;
    }
    j["trend_ok"] = cmp.trend_ok;
    j["final_within_tolerance"] = cmp.final_within_tolerance;
    j["tolerance_note"] = "acceptance tolerances are engineering choices, not derived error bars";
    j["provenance"] = {{"seed", curve.seed}, {"config_hash", hex64(curve.config_hash)}};
    return j;
}

/// run_curve with the provenance hash filled in.
inline PremiumCurve run_experiment(const ExperimentConfig& config, const RunOptions& options = {}) {
    PremiumCurve curve = run_curve(config, options);
    curve.config_hash = config_hash(config);
    return curve;
}

} // namespace riskpool
