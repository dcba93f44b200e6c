#pragma once

// Utility functions, rank-dependent certainty equivalents
//
//     V(X) = u^{-1}( U(u(X)) ),   U a mixture or Kusuoka functional,
//
// and the risk premium of an equally shared pool.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "riskpool/distribution.hpp"
#include "riskpool/normal.hpp"
#include "riskpool/risk_measures.hpp"

namespace riskpool {

/// Raised when a law puts mass outside the domain of a utility function.
class UtilityDomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// u(x) = a x + b.
struct LinearUtility {
    double a = 1.0;
    double b = 0.0;
};

/// u(x) = (1 - exp(-alpha x)) / alpha.
struct CaraUtility {
    double alpha = 1.0;
};

/// u(x) = log(x + c) on x > -c.
struct LogUtility {
    double c = 0.0;
};

/// u(x) = ((x + c)^(1-gamma) - 1) / (1 - gamma) on x > -c.
struct CrraUtility {
    double gamma = 2.0;
    double c = 0.0;
};

class UtilityFunction {
public:
    using Family = std::variant<LinearUtility, CaraUtility, LogUtility, CrraUtility>;

    template <class T>
        requires std::constructible_from<Family, T>
    UtilityFunction(T family) : family_(std::move(family)) { validate(); } // NOLINT(google-explicit-constructor)

    [[nodiscard]] const Family& family() const { return family_; }

    [[nodiscard]] bool is_linear() const { return std::holds_alternative<LinearUtility>(family_); }

    [[nodiscard]] bool is_concave() const {
        if (const auto* crra = std::get_if<CrraUtility>(&family_)) {
            return crra->gamma >= 0.0;
        }
        return true;
    }

    /// Open lower end of the domain (-infinity for linear and CARA).
    [[nodiscard]] double domain_lower() const {
        if (const auto* l = std::get_if<LogUtility>(&family_)) {
            return -l->c;
        }
        if (const auto* p = std::get_if<CrraUtility>(&family_)) {
            return -p->c;
        }
        return -std::numeric_limits<double>::infinity();
    }

    [[nodiscard]] bool in_domain(double x) const { return std::isfinite(x) && x > domain_lower(); }

    [[nodiscard]] double apply(double x) const {
        require_domain(x);
        return std::visit(
            [x](const auto& u) -> double {
                using T = std::decay_t<decltype(u)>;
                if constexpr (std::is_same_v<T, LinearUtility>) {
                    return u.a * x + u.b;
                } else if constexpr (std::is_same_v<T, CaraUtility>) {
                    return -std::expm1(-u.alpha * x) / u.alpha;
                } else if constexpr (std::is_same_v<T, LogUtility>) {
                    return std::log(x + u.c);
                } else {
                    const double e = 1.0 - u.gamma;
                    return std::expm1(e * std::log(x + u.c)) / e;
                }
            },
            family_);
    }

    [[nodiscard]] double derivative(double x) const {
        require_domain(x);
        return std::visit(
            [x](const auto& u) -> double {
                using T = std::decay_t<decltype(u)>;
                if constexpr (std::is_same_v<T, LinearUtility>) {
                    return u.a;
                } else if constexpr (std::is_same_v<T, CaraUtility>) {
                    return std::exp(-u.alpha * x);
                } else if constexpr (std::is_same_v<T, LogUtility>) {
                    return 1.0 / (x + u.c);
                } else {
                    return std::pow(x + u.c, -u.gamma);
                }
            },
            family_);
    }

    [[nodiscard]] double invert(double y) const {
        return std::visit(
            [y](const auto& u) -> double {
                using T = std::decay_t<decltype(u)>;
                if constexpr (std::is_same_v<T, LinearUtility>) {
                    return (y - u.b) / u.a;
                } else if constexpr (std::is_same_v<T, CaraUtility>) {
                    if (!(u.alpha * y < 1.0)) {
                        throw UtilityDomainError("cara utility: value outside the range of u");
                    }
                    return -std::log1p(-u.alpha * y) / u.alpha;
                } else if constexpr (std::is_same_v<T, LogUtility>) {
                    return std::exp(y) - u.c;
                } else {
                    const double e = 1.0 - u.gamma;
                    const double base = e * y;
                    if (!(base > -1.0)) {
                        throw UtilityDomainError("crra utility: value outside the range of u");
                    }
                    return std::exp(std::log1p(base) / e) - u.c;
                }
            },
            family_);
    }

private:
    void require_domain(double x) const {
        if (!in_domain(x)) {
            throw UtilityDomainError("utility evaluated outside its domain at x = " + std::to_string(x));
        }
    }

    void validate() const {
        std::visit(
            [](const auto& u) {
                using T = std::decay_t<decltype(u)>;
                if constexpr (std::is_same_v<T, LinearUtility>) {
                    if (!(u.a > 0.0) || !std::isfinite(u.a) || !std::isfinite(u.b)) {
                        throw std::invalid_argument("linear utility: slope must be positive");
                    }
                } else if constexpr (std::is_same_v<T, CaraUtility>) {
                    if (!(u.alpha > 0.0) || !std::isfinite(u.alpha)) {
                        throw std::invalid_argument("cara utility: alpha must be positive");
                    }
                } else if constexpr (std::is_same_v<T, LogUtility>) {
                    if (!std::isfinite(u.c)) {
                        throw std::invalid_argument("log utility: shift must be finite");
                    }
                } else {
                    if (!std::isfinite(u.gamma) || u.gamma == 1.0 || !std::isfinite(u.c)) {
                        throw std::invalid_argument("crra utility: gamma must be finite and different from 1");
                    }
                }
            },
            family_);
    }

    Family family_;
};

inline constexpr std::size_t kDefaultQuantileGrid = std::size_t{1} << 14;

namespace detail {

inline void require_support(const Distribution& dist, const UtilityFunction& u) {
    const double lower = u.domain_lower();
    if (!std::isfinite(lower)) {
        return;
    }
    if (!bounded_below(dist)) {
        throw UtilityDomainError("law is unbounded below but the utility is only defined on x > " + std::to_string(lower));
    }
    const double inf = essential_infimum(dist);
    if (!(inf > lower)) {
        throw UtilityDomainError("law puts mass at x = " + std::to_string(inf) + ", outside the utility domain x > " +
                                 std::to_string(lower));
    }
}

/// Certainty equivalent for X ~ N(m, s^2) and CARA u, using
/// int_0^lambda exp(-alpha q(t)) dt = exp(-alpha m + alpha^2 s^2 / 2) Phi(Phi^{-1}(lambda) + alpha s).
/// Worked in log space so large wealth does not cancel against 1/alpha.
inline double cara_normal_mixture(const NormalLaw& law, double alpha, const MixtureMeasure& mu) {
    const double base = -alpha * law.mean + 0.5 * alpha * alpha * law.sd * law.sd;
    std::vector<double> logs;
    logs.reserve(mu.atoms().size());
    for (const auto& a : mu.atoms()) {
        double log_ratio = 0.0;
        if (a.lambda < 1.0) {
            log_ratio = std::log(normal_cdf(inv_normal_cdf(a.lambda) + alpha * law.sd) / a.lambda);
        }
        logs.push_back(std::log(a.weight) + log_ratio);
    }
    const double top = *std::max_element(logs.begin(), logs.end());
    double acc = 0.0;
    for (double l : logs) {
        acc += std::exp(l - top);
    }
    return -(base + top + std::log(acc)) / alpha;
}

inline double cara_normal_measure(const NormalLaw& law, double alpha, const MeasureSpec& spec) {
    if (const auto* mu = std::get_if<MixtureMeasure>(&spec)) {
        return cara_normal_mixture(law, alpha, *mu);
    }
    double best = std::numeric_limits<double>::infinity();
    for (const auto& m : std::get<KusuokaFamily>(spec).members()) {
        best = std::min(best, cara_normal_mixture(law, alpha, m));
    }
    return best;
}

/// u(q(t)) on the midpoints of N equal-probability cells.
inline EmpiricalSample transformed_quantile_grid(const ParametricDistribution& dist, const UtilityFunction& u, std::size_t grid) {
    std::vector<double> values(grid);
    const auto n = static_cast<double>(grid);
    for (std::size_t i = 0; i < grid; ++i) {
        values[i] = u.apply(dist.quantile((static_cast<double>(i) + 0.5) / n));
    }
    return EmpiricalSample(std::move(values));
}

} // namespace detail

/// True when certainty_equivalent has a closed form for this law and utility.
inline bool has_closed_form_certainty_equivalent(const Distribution& dist, const UtilityFunction& u) {
    const auto* p = std::get_if<ParametricDistribution>(&dist);
    if (p == nullptr) {
        return true;
    }
    return u.is_linear() || p->as_discrete().has_value() || (p->is_normal() && std::holds_alternative<CaraUtility>(u.family()));
}

/// u^{-1}(U(u(X))). Discrete and empirical laws are transformed atom by atom;
/// parametric laws use a closed form when one exists and otherwise an
/// equal-probability quantile grid of `grid` points.
inline double certainty_equivalent(const Distribution& dist, const MeasureSpec& spec, const UtilityFunction& u,
                                   std::size_t grid = kDefaultQuantileGrid) {
    detail::require_support(dist, u);
    if (const auto* p = std::get_if<ParametricDistribution>(&dist)) {
        if (u.is_linear()) {
            return measure_value(dist, spec);
        }
        if (auto discrete = p->as_discrete()) {
            return certainty_equivalent(Distribution(*discrete), spec, u, grid);
        }
        if (const auto* cara = std::get_if<CaraUtility>(&u.family()); cara != nullptr && p->is_normal()) {
            return detail::cara_normal_measure(std::get<NormalLaw>(p->family()), cara->alpha, spec);
        }
        if (grid == 0) {
            throw std::invalid_argument("certainty_equivalent: quantile grid must be nonempty");
        }
        return u.invert(measure_value(detail::transformed_quantile_grid(*p, u, grid), spec));
    }
    const Distribution transformed = map_atoms(dist, [&u](double x) { return u.apply(x); });
    return u.invert(measure_value(transformed, spec));
}

inline double certainty_equivalent(const Distribution& dist, const MixtureMeasure& mu, const UtilityFunction& u,
                                   std::size_t grid = kDefaultQuantileGrid) {
    return certainty_equivalent(dist, MeasureSpec(mu), u, grid);
}

inline double certainty_equivalent_family(const Distribution& dist, const KusuokaFamily& family, const UtilityFunction& u,
                                          std::size_t grid = kDefaultQuantileGrid) {
    return certainty_equivalent(dist, MeasureSpec(family), u, grid);
}

/// pi = v + E[X_1] - V(v + S_n/n). E[X_1] is the single-risk mean, supplied
/// by the caller rather than estimated from the pool.
inline double risk_premium(double wealth, const Distribution& pool, double single_risk_mean, const MeasureSpec& spec,
                           const UtilityFunction& u, std::size_t grid = kDefaultQuantileGrid) {
    const Distribution shifted = wealth == 0.0 ? pool : translate(pool, wealth);
    return wealth + single_risk_mean - certainty_equivalent(shifted, spec, u, grid);
}

/// pi_bar = v - V(v + S_n/n), the solution of U(u(v + S_n/n)) = u(v - pi_bar).
inline double equivalent_utility_premium(double wealth, const Distribution& pool, const MeasureSpec& spec,
                                         const UtilityFunction& u, std::size_t grid = kDefaultQuantileGrid) {
    const Distribution shifted = wealth == 0.0 ? pool : translate(pool, wealth);
    return wealth - certainty_equivalent(shifted, spec, u, grid);
}

} // namespace riskpool
