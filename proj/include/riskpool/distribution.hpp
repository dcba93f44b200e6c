#pragma once

// Laws of a single risk and of pooled averages.
//
// A Distribution is one of three representations: a finite discrete law, a
// parametric family, or an empirical sample. All of them expose the
// left-continuous quantile q(t) = inf{m : P[X <= m] >= t} and the exact lower
// quantile integral int_0^lambda q(t) dt, which is the primitive every risk
// measure in this library is built from.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "riskpool/normal.hpp"
#include "riskpool/rng.hpp"

namespace riskpool {

inline constexpr double kProbabilityTolerance = 1e-12;

namespace detail {

inline void require_level(double t, const char* what) {
    if (!(t >= 0.0 && t <= 1.0)) {
        throw std::invalid_argument(std::string(what) + ": level must lie in [0,1]");
    }
}

inline void require_tail_level(double lambda, const char* what) {
    if (!(lambda > 0.0 && lambda <= 1.0)) {
        throw std::invalid_argument(std::string(what) + ": lambda must lie in (0,1]");
    }
}

} // namespace detail

// ---------------------------------------------------------------------------
// DiscreteDistribution

class DiscreteDistribution {
public:
    /// Sorts the atoms and merges duplicate outcomes. Probabilities must be
    /// strictly positive and sum to one within 1e-12.
    DiscreteDistribution(std::vector<double> outcomes, std::vector<double> probabilities) {
        if (outcomes.empty() || outcomes.size() != probabilities.size()) {
            throw std::invalid_argument("DiscreteDistribution: outcomes and probabilities must be nonempty and of equal length");
        }
        double total = 0.0;
        for (std::size_t i = 0; i < outcomes.size(); ++i) {
            if (!std::isfinite(outcomes[i])) {
                throw std::invalid_argument("DiscreteDistribution: outcomes must be finite");
            }
            if (!(probabilities[i] > 0.0) || !std::isfinite(probabilities[i])) {
                throw std::invalid_argument("DiscreteDistribution: probabilities must be strictly positive");
            }
            total += probabilities[i];
        }
        if (std::abs(total - 1.0) > kProbabilityTolerance) {
            throw std::invalid_argument("DiscreteDistribution: probabilities must sum to 1");
        }

        std::vector<std::size_t> order(outcomes.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return outcomes[a] < outcomes[b]; });
        for (std::size_t idx : order) {
            if (!outcomes_.empty() && outcomes_.back() == outcomes[idx]) {
                probabilities_.back() += probabilities[idx];
            } else {
                outcomes_.push_back(outcomes[idx]);
                probabilities_.push_back(probabilities[idx]);
            }
        }
        cumulative_.resize(probabilities_.size());
        std::partial_sum(probabilities_.begin(), probabilities_.end(), cumulative_.begin());
    }

    /// Point mass at c.
    static DiscreteDistribution degenerate(double c) { return DiscreteDistribution({c}, {1.0}); }

    /// Builds a law from values on a finite sample space with the given
    /// state probabilities (values may repeat and be unsorted).
    static DiscreteDistribution on_sample_space(std::span<const double> values, std::span<const double> state_probs) {
        return DiscreteDistribution(std::vector<double>(values.begin(), values.end()),
                                    std::vector<double>(state_probs.begin(), state_probs.end()));
    }

    [[nodiscard]] std::span<const double> outcomes() const { return outcomes_; }
    [[nodiscard]] std::span<const double> probabilities() const { return probabilities_; }
    [[nodiscard]] std::size_t size() const { return outcomes_.size(); }

    [[nodiscard]] double quantile(double t) const {
        detail::require_level(t, "quantile");
        if (t == 0.0) {
            return outcomes_.front();
        }
        const auto it = std::lower_bound(cumulative_.begin(), cumulative_.end(), t);
        if (it == cumulative_.end()) {
            return outcomes_.back();
        }
        return outcomes_[static_cast<std::size_t>(it - cumulative_.begin())];
    }

    [[nodiscard]] double lower_quantile_integral(double lambda) const {
        detail::require_tail_level(lambda, "lower_quantile_integral");
        if (lambda == 1.0) {
            return mean();
        }
        double used = 0.0;
        double acc = 0.0;
        for (std::size_t i = 0; i < outcomes_.size(); ++i) {
            const double take = std::min(probabilities_[i], lambda - used);
            if (take <= 0.0) {
                break;
            }
            acc += take * outcomes_[i];
            used += take;
        }
        return acc;
    }

    [[nodiscard]] double mean() const {
        double acc = 0.0;
        for (std::size_t i = 0; i < outcomes_.size(); ++i) {
            acc += probabilities_[i] * outcomes_[i];
        }
        return acc;
    }

    [[nodiscard]] double variance() const {
        const double m = mean();
        double acc = 0.0;
        for (std::size_t i = 0; i < outcomes_.size(); ++i) {
            const double d = outcomes_[i] - m;
            acc += probabilities_[i] * d * d;
        }
        return acc;
    }

    /// Inverse-transform draw for a uniform u in (0,1).
    [[nodiscard]] double draw(double u) const {
        const auto it = std::lower_bound(cumulative_.begin(), cumulative_.end(), u);
        return it == cumulative_.end() ? outcomes_.back() : outcomes_[static_cast<std::size_t>(it - cumulative_.begin())];
    }

private:
    std::vector<double> outcomes_;
    std::vector<double> probabilities_;
    std::vector<double> cumulative_;
};

// ---------------------------------------------------------------------------
// ParametricDistribution

struct NormalLaw {
    double mean = 0.0;
    double sd = 1.0;
};

struct UniformLaw {
    double a = 0.0;
    double b = 1.0;
};

/// loc + scale * B with B ~ Bernoulli(p).
struct BernoulliLaw {
    double p = 0.5;
    double loc = 0.0;
    double scale = 1.0;
};

/// loc + E with E ~ Exponential(rate).
struct ExponentialLaw {
    double rate = 1.0;
    double loc = 0.0;
};

/// x_hi with probability p, x_lo otherwise.
struct TwoPointLaw {
    double x_lo = 0.0;
    double x_hi = 1.0;
    double p = 0.5;
};

class ParametricDistribution {
public:
    using Family = std::variant<NormalLaw, UniformLaw, BernoulliLaw, ExponentialLaw, TwoPointLaw>;

    ParametricDistribution(Family family) : family_(family) { validate(); } // NOLINT(google-explicit-constructor)

    [[nodiscard]] const Family& family() const { return family_; }

    [[nodiscard]] bool is_normal() const { return std::holds_alternative<NormalLaw>(family_); }
    [[nodiscard]] bool bounded_below() const { return !is_normal(); }

    /// Bernoulli and two-point families as an explicit discrete law.
    [[nodiscard]] std::optional<DiscreteDistribution> as_discrete() const {
        if (const auto* b = std::get_if<BernoulliLaw>(&family_)) {
            return DiscreteDistribution({b->loc, b->loc + b->scale}, {1.0 - b->p, b->p});
        }
        if (const auto* t = std::get_if<TwoPointLaw>(&family_)) {
            return DiscreteDistribution({t->x_lo, t->x_hi}, {1.0 - t->p, t->p});
        }
        return std::nullopt;
    }

    [[nodiscard]] double quantile(double t) const {
        detail::require_level(t, "quantile");
        return std::visit(
            [t](const auto& law) -> double {
                using T = std::decay_t<decltype(law)>;
                if constexpr (std::is_same_v<T, NormalLaw>) {
                    if (t == 0.0) {
                        throw std::domain_error("quantile: the essential infimum of a normal law is -infinity");
                    }
                    if (t == 1.0) {
                        return std::numeric_limits<double>::infinity();
                    }
                    return law.mean + law.sd * inv_normal_cdf(t);
                } else if constexpr (std::is_same_v<T, UniformLaw>) {
                    return law.a + (law.b - law.a) * t;
                } else if constexpr (std::is_same_v<T, BernoulliLaw>) {
                    return t <= 1.0 - law.p ? law.loc : law.loc + law.scale;
                } else if constexpr (std::is_same_v<T, ExponentialLaw>) {
                    if (t == 1.0) {
                        return std::numeric_limits<double>::infinity();
                    }
                    return law.loc - std::log1p(-t) / law.rate;
                } else {
                    return t <= 1.0 - law.p ? law.x_lo : law.x_hi;
                }
            },
            family_);
    }

    [[nodiscard]] double lower_quantile_integral(double lambda) const {
        detail::require_tail_level(lambda, "lower_quantile_integral");
        return std::visit(
            [lambda](const auto& law) -> double {
                using T = std::decay_t<decltype(law)>;
                if constexpr (std::is_same_v<T, NormalLaw>) {
                    return lambda * law.mean - law.sd * normal_pdf_at_quantile(lambda);
                } else if constexpr (std::is_same_v<T, UniformLaw>) {
                    return law.a * lambda + 0.5 * (law.b - law.a) * lambda * lambda;
                } else if constexpr (std::is_same_v<T, BernoulliLaw>) {
                    const double low = 1.0 - law.p;
                    return law.loc * lambda + law.scale * std::max(0.0, lambda - low);
                } else if constexpr (std::is_same_v<T, ExponentialLaw>) {
                    // int_0^lambda -log(1-t) dt = lambda + (1-lambda) log(1-lambda)
                    const double tail = lambda == 1.0 ? 0.0 : (1.0 - lambda) * std::log1p(-lambda);
                    return law.loc * lambda + (lambda + tail) / law.rate;
                } else {
                    const double low = 1.0 - law.p;
                    return law.x_lo * std::min(lambda, low) + law.x_hi * std::max(0.0, lambda - low);
                }
            },
            family_);
    }

    [[nodiscard]] double mean() const {
        return std::visit(
            [](const auto& law) -> double {
                using T = std::decay_t<decltype(law)>;
                if constexpr (std::is_same_v<T, NormalLaw>) {
                    return law.mean;
                } else if constexpr (std::is_same_v<T, UniformLaw>) {
                    return 0.5 * (law.a + law.b);
                } else if constexpr (std::is_same_v<T, BernoulliLaw>) {
                    return law.loc + law.scale * law.p;
                } else if constexpr (std::is_same_v<T, ExponentialLaw>) {
                    return law.loc + 1.0 / law.rate;
                } else {
                    return law.x_lo + (law.x_hi - law.x_lo) * law.p;
                }
            },
            family_);
    }

    [[nodiscard]] double variance() const {
        return std::visit(
            [](const auto& law) -> double {
                using T = std::decay_t<decltype(law)>;
                if constexpr (std::is_same_v<T, NormalLaw>) {
                    return law.sd * law.sd;
                } else if constexpr (std::is_same_v<T, UniformLaw>) {
                    const double w = law.b - law.a;
                    return w * w / 12.0;
                } else if constexpr (std::is_same_v<T, BernoulliLaw>) {
                    return law.scale * law.scale * law.p * (1.0 - law.p);
                } else if constexpr (std::is_same_v<T, ExponentialLaw>) {
                    return 1.0 / (law.rate * law.rate);
                } else {
                    const double w = law.x_hi - law.x_lo;
                    return w * w * law.p * (1.0 - law.p);
                }
            },
            family_);
    }

    [[nodiscard]] double draw(double u) const {
        return std::visit(
            [u](const auto& law) -> double {
                using T = std::decay_t<decltype(law)>;
                if constexpr (std::is_same_v<T, NormalLaw>) {
                    return law.mean + law.sd * inv_normal_cdf(u);
                } else if constexpr (std::is_same_v<T, UniformLaw>) {
                    return law.a + (law.b - law.a) * u;
                } else if constexpr (std::is_same_v<T, BernoulliLaw>) {
                    return u <= 1.0 - law.p ? law.loc : law.loc + law.scale;
                } else if constexpr (std::is_same_v<T, ExponentialLaw>) {
                    return law.loc - std::log1p(-u) / law.rate;
                } else {
                    return u <= 1.0 - law.p ? law.x_lo : law.x_hi;
                }
            },
            family_);
    }

    /// Law of X + c.
    [[nodiscard]] ParametricDistribution translated(double c) const {
        return std::visit(
            [c](auto law) -> ParametricDistribution {
                using T = std::decay_t<decltype(law)>;
                if constexpr (std::is_same_v<T, NormalLaw>) {
                    law.mean += c;
                } else if constexpr (std::is_same_v<T, UniformLaw>) {
                    law.a += c;
                    law.b += c;
                } else if constexpr (std::is_same_v<T, BernoulliLaw> || std::is_same_v<T, ExponentialLaw>) {
                    law.loc += c;
                } else {
                    law.x_lo += c;
                    law.x_hi += c;
                }
                return ParametricDistribution(law);
            },
            family_);
    }

private:
    void validate() const {
        std::visit(
            [](const auto& law) {
                using T = std::decay_t<decltype(law)>;
                if constexpr (std::is_same_v<T, NormalLaw>) {
                    if (!std::isfinite(law.mean) || !(law.sd > 0.0) || !std::isfinite(law.sd)) {
                        throw std::invalid_argument("normal: sd must be positive and finite");
                    }
                } else if constexpr (std::is_same_v<T, UniformLaw>) {
                    if (!std::isfinite(law.a) || !std::isfinite(law.b) || !(law.b > law.a)) {
                        throw std::invalid_argument("uniform: requires b > a");
                    }
                } else if constexpr (std::is_same_v<T, BernoulliLaw>) {
                    if (!(law.p > 0.0 && law.p < 1.0)) {
                        throw std::invalid_argument("bernoulli: requires 0 < p < 1");
                    }
                    if (!std::isfinite(law.loc) || !(law.scale > 0.0) || !std::isfinite(law.scale)) {
                        throw std::invalid_argument("bernoulli: scale must be positive and finite");
                    }
                } else if constexpr (std::is_same_v<T, ExponentialLaw>) {
                    if (!(law.rate > 0.0) || !std::isfinite(law.rate) || !std::isfinite(law.loc)) {
                        throw std::invalid_argument("exponential: rate must be positive and finite");
                    }
                } else {
                    if (!(law.p > 0.0 && law.p < 1.0)) {
                        throw std::invalid_argument("two_point: requires 0 < p < 1");
                    }
                    if (!std::isfinite(law.x_lo) || !std::isfinite(law.x_hi) || !(law.x_hi > law.x_lo)) {
                        throw std::invalid_argument("two_point: requires x_lo < x_hi");
                    }
                }
            },
            family_);
    }

    Family family_;
};

// ---------------------------------------------------------------------------
// EmpiricalSample

/// Equal-weight law on a finite sample. The quantile at level t is the
/// ceil(t k)-th order statistic (1-based) and integrals are taken exactly
/// over that step function.
class EmpiricalSample {
public:
    explicit EmpiricalSample(std::vector<double> values) : values_(std::move(values)) {
        if (values_.empty()) {
            throw std::invalid_argument("EmpiricalSample: at least one value is required");
        }
        for (double v : values_) {
            if (!std::isfinite(v)) {
                throw std::invalid_argument("EmpiricalSample: values must be finite");
            }
        }
        std::sort(values_.begin(), values_.end());
    }

    [[nodiscard]] std::span<const double> values() const { return values_; }
    [[nodiscard]] std::size_t size() const { return values_.size(); }

    [[nodiscard]] double quantile(double t) const {
        detail::require_level(t, "quantile");
        const auto k = static_cast<double>(values_.size());
        const auto idx = static_cast<std::size_t>(std::ceil(t * k));
        return values_[idx == 0 ? 0 : std::min(idx, values_.size()) - 1];
    }

    [[nodiscard]] double lower_quantile_integral(double lambda) const {
        detail::require_tail_level(lambda, "lower_quantile_integral");
        if (lambda == 1.0) {
            return mean();
        }
        const auto k = static_cast<double>(values_.size());
        const double scaled = lambda * k;
        const auto full = std::min(static_cast<std::size_t>(std::floor(scaled)), values_.size());
        double acc = 0.0;
        for (std::size_t i = 0; i < full; ++i) {
            acc += values_[i];
        }
        const double frac = scaled - static_cast<double>(full);
        if (frac > 0.0 && full < values_.size()) {
            acc += frac * values_[full];
        }
        return acc / k;
    }

    [[nodiscard]] double mean() const {
        return std::accumulate(values_.begin(), values_.end(), 0.0) / static_cast<double>(values_.size());
    }

    /// Variance of the empirical law (divisor k).
    [[nodiscard]] double variance() const {
        const double m = mean();
        double acc = 0.0;
        for (double v : values_) {
            acc += (v - m) * (v - m);
        }
        return acc / static_cast<double>(values_.size());
    }

    /// Bootstrap draw.
    [[nodiscard]] double draw(double u) const {
        const auto idx = static_cast<std::size_t>(u * static_cast<double>(values_.size()));
        return values_[std::min(idx, values_.size() - 1)];
    }

private:
    std::vector<double> values_;
};

// ---------------------------------------------------------------------------
// Uniform interface over the closed union

using Distribution = std::variant<DiscreteDistribution, ParametricDistribution, EmpiricalSample>;

inline double quantile(const Distribution& dist, double t) {
    return std::visit([t](const auto& d) { return d.quantile(t); }, dist);
}

/// int_0^lambda q(t) dt.
inline double lower_quantile_integral(const Distribution& dist, double lambda) {
    return std::visit([lambda](const auto& d) { return d.lower_quantile_integral(lambda); }, dist);
}

inline double mean(const Distribution& dist) {
    return std::visit([](const auto& d) { return d.mean(); }, dist);
}

inline double variance(const Distribution& dist) {
    return std::visit([](const auto& d) { return d.variance(); }, dist);
}

/// q(0); throws for laws unbounded below.
inline double essential_infimum(const Distribution& dist) { return quantile(dist, 0.0); }

inline bool bounded_below(const Distribution& dist) {
    const auto* p = std::get_if<ParametricDistribution>(&dist);
    return p == nullptr || p->bounded_below();
}

/// Law of X + c.
inline Distribution translate(const Distribution& dist, double c) {
    return std::visit(
        [c](const auto& d) -> Distribution {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, DiscreteDistribution>) {
                std::vector<double> out(d.outcomes().begin(), d.outcomes().end());
                for (double& x : out) {
                    x += c;
                }
                return DiscreteDistribution(std::move(out), std::vector<double>(d.probabilities().begin(), d.probabilities().end()));
            } else if constexpr (std::is_same_v<T, ParametricDistribution>) {
                return d.translated(c);
            } else {
                std::vector<double> out(d.values().begin(), d.values().end());
                for (double& x : out) {
                    x += c;
                }
                return EmpiricalSample(std::move(out));
            }
        },
        dist);
}

/// Applies a nondecreasing map to every atom of a discrete or empirical law.
/// The quantile function of f(X) is f composed with q_X, so the result is
/// exact. Parametric laws are rejected.
template <class F>
Distribution map_atoms(const Distribution& dist, F&& f) {
    if (const auto* d = std::get_if<DiscreteDistribution>(&dist)) {
        std::vector<double> out;
        out.reserve(d->size());
        for (double x : d->outcomes()) {
            out.push_back(f(x));
        }
        return DiscreteDistribution(std::move(out), std::vector<double>(d->probabilities().begin(), d->probabilities().end()));
    }
    if (const auto* e = std::get_if<EmpiricalSample>(&dist)) {
        std::vector<double> out;
        out.reserve(e->size());
        for (double x : e->values()) {
            out.push_back(f(x));
        }
        return EmpiricalSample(std::move(out));
    }
    throw std::invalid_argument("map_atoms: parametric laws have no atoms");
}

// ---------------------------------------------------------------------------
// Sampling

inline double draw(const Distribution& dist, double u) {
    return std::visit([u](const auto& d) { return d.draw(u); }, dist);
}

/// count i.i.d. draws by inverse transform; draw j uses index j of the stream.
inline EmpiricalSample sample(const Distribution& dist, RngSpec rng, std::size_t count) {
    if (count == 0) {
        throw std::invalid_argument("sample: count must be positive");
    }
    UniformStream stream(rng);
    std::vector<double> out(count);
    for (double& x : out) {
        x = draw(dist, stream.next());
    }
    return EmpiricalSample(std::move(out));
}

/// Result of pooling: either replicates of S_n/n or, for normal risks, the
/// exact law N(m, sd/sqrt(n)).
struct PoolAverage {
    std::variant<EmpiricalSample, ParametricDistribution> law;

    [[nodiscard]] bool exact() const { return std::holds_alternative<ParametricDistribution>(law); }
    [[nodiscard]] Distribution as_distribution() const {
        return std::visit([](const auto& l) -> Distribution { return l; }, law);
    }
};

/// Exact law of S_n/n when X_1 is normal.
inline std::optional<ParametricDistribution> exact_pool_law(const Distribution& dist, std::size_t n) {
    const auto* p = std::get_if<ParametricDistribution>(&dist);
    if (p == nullptr || !p->is_normal()) {
        return std::nullopt;
    }
    const auto& law = std::get<NormalLaw>(p->family());
    return ParametricDistribution(NormalLaw{law.mean, law.sd / std::sqrt(static_cast<double>(n))});
}

/// Replicate r of S_n/n sums draws 0..n-1 of substream r, so the first n'
/// summands are shared between pool sizes n' < n under a common seed.
inline EmpiricalSample pool_average_draws(const Distribution& dist, std::size_t n, std::size_t replications, RngSpec rng) {
    if (n == 0 || replications == 0) {
        throw std::invalid_argument("pool_average_sample: n and replications must be positive");
    }
    std::vector<double> out(replications);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t r = 0; r < replications; ++r) {
        UniformStream stream(rng.substream(r));
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            sum += draw(dist, stream.next());
        }
        out[r] = sum * inv_n;
    }
    return EmpiricalSample(std::move(out));
}

inline PoolAverage pool_average_sample(const Distribution& dist, std::size_t n, std::size_t replications, RngSpec rng) {
    if (n == 0) {
        throw std::invalid_argument("pool_average_sample: n must be positive");
    }
    if (replications < 2) {
        throw std::invalid_argument("pool_average_sample: at least two replications are required");
    }
    if (auto exact = exact_pool_law(dist, n)) {
        return PoolAverage{*exact};
    }
    return PoolAverage{pool_average_draws(dist, n, replications, rng)};
}

} // namespace riskpool
