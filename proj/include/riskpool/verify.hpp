#pragma once

// Randomised property suites over seeded discrete laws: primal/dual equality
// of the tail average and the structural properties of mixtures
// (translation invariance, positive homogeneity, superadditivity,
// comonotonic additivity, the Jensen bound and monotonicity in lambda).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "riskpool/distribution.hpp"
#include "riskpool/preferences.hpp"
#include "riskpool/risk_measures.hpp"
#include "riskpool/rng.hpp"

namespace riskpool {

struct VerifyOptions {
    std::size_t trials = 1000;
    std::size_t max_atoms = 64;
    /// Laws up to this size are also checked against vertex enumeration.
    std::size_t enumeration_atoms = 5;
    std::uint64_t seed = 1;
    double tolerance = 1e-10;
    double duality_tolerance = 1e-12;
    /// Harness self-check: replaces the lower-tail average by the mirrored
    /// upper-tail average, which must be caught.
    bool inject_fault = false;
};

struct PropertyOutcome {
    explicit PropertyOutcome(std::string property) : name(std::move(property)) {}

    std::string name;
    std::size_t trials = 0;
    std::size_t failures = 0;
    /// Smallest failing instance (by atom count), if any.
    std::optional<std::string> counterexample;
    std::size_t counterexample_atoms = 0;

    [[nodiscard]] bool passed() const { return failures == 0; }

    void record_failure(std::size_t atoms, const std::string& description) {
        ++failures;
        if (!counterexample || atoms < counterexample_atoms) {
            counterexample = description;
            counterexample_atoms = atoms;
        }
    }
};

namespace detail {

/// Draws trial inputs from the stream keyed by (seed, suite, trial).
class TrialSource {
public:
    TrialSource(std::uint64_t seed, std::uint64_t suite, std::uint64_t trial) : stream_(RngSpec{seed, suite}.substream(trial)) {}

    double uniform() { return stream_.next(); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    std::size_t index(std::size_t count) { return std::min(count - 1, static_cast<std::size_t>(uniform() * static_cast<double>(count))); }

    std::vector<double> probabilities(std::size_t k) {
        std::vector<double> p(k);
        double total = 0.0;
        for (double& x : p) {
            x = 0.05 + uniform();
            total += x;
        }
        for (double& x : p) {
            x /= total;
        }
        return p;
    }

    std::vector<double> values(std::size_t k, double scale = 10.0) {
        std::vector<double> v(k);
        for (double& x : v) {
            x = uniform(-scale, scale);
        }
        return v;
    }

    DiscreteDistribution law(std::size_t max_atoms) {
        const std::size_t k = 1 + index(max_atoms);
        return DiscreteDistribution(values(k), probabilities(k));
    }

    double lambda() {
        // lambda = 1 now and then
        const double u = uniform();
        if (u < 0.05) {
            return 1.0;
        }
        return 0.005 + 0.995 * uniform();
    }

    MixtureMeasure mixture() {
        const std::size_t k = 1 + index(4);
        std::vector<MixtureAtom> atoms;
        const auto w = probabilities(k);
        for (std::size_t i = 0; i < k; ++i) {
            atoms.push_back({uniform() < 0.2 ? 1.0 : 0.005 + 0.995 * uniform(), w[i]});
        }
        return MixtureMeasure(std::move(atoms));
    }

private:
    UniformStream stream_;
};

inline std::string num(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

inline std::string describe(const DiscreteDistribution& d) {
    std::ostringstream os;
    os.precision(17);
    os << "outcomes=[";
    for (std::size_t i = 0; i < d.size(); ++i) {
        os << (i ? "," : "") << d.outcomes()[i];
    }
    os << "] probs=[";
    for (std::size_t i = 0; i < d.size(); ++i) {
        os << (i ? "," : "") << d.probabilities()[i];
    }
    os << "]";
    return os.str();
}

inline std::string describe(const MixtureMeasure& mu) {
    std::ostringstream os;
    os.precision(17);
    os << "mu=";
    for (std::size_t i = 0; i < mu.atoms().size(); ++i) {
        os << (i ? " + " : "") << mu.atoms()[i].weight << "@" << mu.atoms()[i].lambda;
    }
    return os.str();
}

/// The tail-average functional under test.
struct TailAverage {
    bool mirrored = false;

    [[nodiscard]] double operator()(const DiscreteDistribution& d, double lambda) const {
        if (!mirrored) {
            return avar(Distribution(d), lambda);
        }
        std::vector<double> neg(d.outcomes().begin(), d.outcomes().end());
        for (double& x : neg) {
            x = -x;
        }
        const DiscreteDistribution flipped(std::move(neg), std::vector<double>(d.probabilities().begin(), d.probabilities().end()));
        return -avar(Distribution(flipped), lambda);
    }

    [[nodiscard]] double mixture(const DiscreteDistribution& d, const MixtureMeasure& mu) const {
        double acc = 0.0;
        for (const auto& a : mu.atoms()) {
            acc += a.weight * (*this)(d, a.lambda);
        }
        return acc;
    }
};

inline DiscreteDistribution mapped(const DiscreteDistribution& d, const std::function<double(double)>& f) {
    return std::get<DiscreteDistribution>(map_atoms(Distribution(d), f));
}

inline bool close(double a, double b, double tol) { return std::abs(a - b) <= tol * std::max(1.0, std::max(std::abs(a), std::abs(b))); }

} // namespace detail

/// Greedy dual versus primal on random laws, plus vertex enumeration of the
/// density polytope on a law of at most `enumeration_atoms` atoms per trial.
inline std::vector<PropertyOutcome> verify_duality(const VerifyOptions& opt) {
    const detail::TailAverage primal{opt.inject_fault};
    PropertyOutcome eq{"primal_dual_equality"};
    PropertyOutcome feas{"dual_feasibility"};
    PropertyOutcome vert{"vertex_enumeration"};
    const double tol = opt.duality_tolerance;
    for (std::size_t t = 0; t < opt.trials; ++t) {
        detail::TrialSource src(opt.seed, 101, t);
        const auto law = src.law(std::max<std::size_t>(1, opt.max_atoms));
        double lambda = src.lambda();
        if (src.uniform() < 0.1 && law.size() > 1) {
            // put lambda exactly on a cumulative probability
            double cum = 0.0;
            const std::size_t stop = src.index(law.size() - 1);
            for (std::size_t i = 0; i <= stop; ++i) {
                cum += law.probabilities()[i];
            }
            lambda = std::clamp(cum, 1e-3, 1.0);
        }
        const std::string where = detail::describe(law) + " lambda=" + detail::num(lambda);

        const DualSolution dual = dual_avar_discrete(law, lambda);
        const double p_val = primal(law, lambda);
        ++eq.trials;
        if (std::abs(dual.value - p_val) > tol) {
            eq.record_failure(law.size(), where + " primal=" + detail::num(p_val) + " dual=" + detail::num(dual.value));
        }

        ++feas.trials;
        double mass = 0.0;
        bool bounds_ok = true;
        for (std::size_t i = 0; i < law.size(); ++i) {
            mass += dual.density[i] * law.probabilities()[i];
            bounds_ok = bounds_ok && dual.density[i] >= -tol && dual.density[i] <= 1.0 / lambda + tol;
        }
        if (!bounds_ok || std::abs(mass - 1.0) > tol) {
            feas.record_failure(law.size(), where + " Q-mass=" + detail::num(mass));
        }

        if (opt.enumeration_atoms == 0) {
            continue;
        }
        // large laws get a separate small one so every trial reaches the enumeration check
        const bool small = law.size() <= opt.enumeration_atoms;
        const DiscreteDistribution small_law = small ? law : src.law(opt.enumeration_atoms);
        const double small_lambda = small ? lambda : src.lambda();
        const double small_primal = small ? p_val : primal(small_law, small_lambda);
        const double small_dual = small ? dual.value : dual_avar_discrete(small_law, small_lambda).value;
        ++vert.trials;
        const DualSolution brute = dual_avar_vertex_enumeration(small_law, small_lambda);
        if (std::abs(brute.value - small_primal) > tol || std::abs(brute.value - small_dual) > tol) {
            vert.record_failure(small_law.size(), detail::describe(small_law) + " lambda=" + detail::num(small_lambda) +
                                                      " primal=" + detail::num(small_primal) +
                                                      " vertex=" + detail::num(brute.value));
        }
    }
    return {eq, feas, vert};
}

inline std::vector<PropertyOutcome> verify_properties(const VerifyOptions& opt) {
    const detail::TailAverage U{opt.inject_fault};
    const double tol = opt.tolerance;
    const std::size_t max_atoms = std::max<std::size_t>(1, opt.max_atoms);

    PropertyOutcome translation{"translation_invariance"};
    PropertyOutcome homogeneity{"positive_homogeneity"};
    PropertyOutcome superadd{"superadditivity"};
    PropertyOutcome comonotone{"comonotonic_additivity"};
    PropertyOutcome jensen{"jensen_bound"};
    PropertyOutcome monotone{"monotonicity_in_lambda"};

    for (std::size_t t = 0; t < opt.trials; ++t) {
        {
            detail::TrialSource src(opt.seed, 201, t);
            const auto x = src.law(max_atoms);
            const auto mu = src.mixture();
            const double c = src.uniform(-5.0, 5.0);
            const double lhs = U.mixture(detail::mapped(x, [c](double v) { return v + c; }), mu);
            const double rhs = U.mixture(x, mu) + c;
            ++translation.trials;
            if (!detail::close(lhs, rhs, tol)) {
                translation.record_failure(x.size(), detail::describe(x) + " " + detail::describe(mu) + " c=" + detail::num(c));
            }
        }
        {
            detail::TrialSource src(opt.seed, 202, t);
            const auto x = src.law(max_atoms);
            const auto mu = src.mixture();
            const double c = src.uniform() < 0.05 ? 0.0 : src.uniform(0.0, 5.0);
            const double lhs = U.mixture(detail::mapped(x, [c](double v) { return c * v; }), mu);
            const double rhs = c * U.mixture(x, mu);
            ++homogeneity.trials;
            if (!detail::close(lhs, rhs, tol)) {
                homogeneity.record_failure(x.size(), detail::describe(x) + " " + detail::describe(mu) + " c=" + detail::num(c));
            }
        }
        {
            detail::TrialSource src(opt.seed, 203, t);
            const std::size_t k = 1 + src.index(max_atoms);
            const auto p = src.probabilities(k);
            const auto xv = src.values(k);
            const auto yv = src.values(k);
            std::vector<double> sv(k);
            for (std::size_t i = 0; i < k; ++i) {
                sv[i] = xv[i] + yv[i];
            }
            const auto x = DiscreteDistribution::on_sample_space(xv, p);
            const auto y = DiscreteDistribution::on_sample_space(yv, p);
            const auto s = DiscreteDistribution::on_sample_space(sv, p);
            const auto mu = src.mixture();
            const double lhs = U.mixture(s, mu);
            const double rhs = U.mixture(x, mu) + U.mixture(y, mu);
            ++superadd.trials;
            if (lhs < rhs - tol * std::max(1.0, std::abs(rhs))) {
                superadd.record_failure(k, "X " + detail::describe(x) + " Y " + detail::describe(y) + " " + detail::describe(mu));
            }
        }
        {
            detail::TrialSource src(opt.seed, 204, t);
            const auto x = src.law(max_atoms);
            const auto mu = src.mixture();
            const double a = src.uniform(0.0, 2.0);
            const double b = src.uniform(0.0, 2.0);
            const double kink = src.uniform(-10.0, 10.0);
            const auto f = [a, b, kink](double v) { return a * v + b * std::max(v - kink, 0.0); };
            const auto fx = detail::mapped(x, f);
            const auto sum = detail::mapped(x, [&f](double v) { return v + f(v); });
            const double lhs = U.mixture(sum, mu);
            const double rhs = U.mixture(x, mu) + U.mixture(fx, mu);
            ++comonotone.trials;
            if (!detail::close(lhs, rhs, tol)) {
                comonotone.record_failure(x.size(), detail::describe(x) + " " + detail::describe(mu) + " f(v)=" + detail::num(a) +
                                                        "v+" + detail::num(b) + "(v-" + detail::num(kink) + ")+");
            }
        }
        {
            detail::TrialSource src(opt.seed, 205, t);
            const auto x = src.law(max_atoms);
            const auto mu = src.mixture();
            const UtilityFunction u = CaraUtility{src.uniform(0.01, 0.5)};
            // certainty equivalent through the functional under test
            const double ce = u.invert(U.mixture(detail::mapped(x, [&u](double v) { return u.apply(v); }), mu));
            const double premium = x.mean() - ce;
            const double tail_gap = x.mean() - U.mixture(x, mu);
            ++jensen.trials;
            if (premium < -tol * std::max(1.0, std::abs(ce)) || tail_gap < -tol * std::max(1.0, std::abs(x.mean()))) {
                jensen.record_failure(x.size(), detail::describe(x) + " " + detail::describe(mu) + " premium=" + detail::num(premium) +
                                                    " mean_minus_U=" + detail::num(tail_gap));
            }
        }
        {
            detail::TrialSource src(opt.seed, 206, t);
            const auto x = src.law(max_atoms);
            double l1 = 0.005 + 0.995 * src.uniform();
            double l2 = src.uniform() < 0.1 ? 1.0 : 0.005 + 0.995 * src.uniform();
            if (l1 > l2) {
                std::swap(l1, l2);
            }
            const double v1 = U(x, l1);
            const double v2 = U(x, l2);
            ++monotone.trials;
            if (v1 > v2 + tol * std::max(1.0, std::abs(v2))) {
                monotone.record_failure(x.size(), detail::describe(x) + " lambda1=" + detail::num(l1) + " lambda2=" + detail::num(l2));
            }
        }
    }
    return {translation, homogeneity, superadd, comonotone, jensen, monotone};
}

} // namespace riskpool
