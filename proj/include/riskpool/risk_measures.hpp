#pragma once

// Law-invariant risk functionals built from the lower-tail average
//
//     U_lambda(X) = (1/lambda) int_0^lambda q_X(t) dt,   lambda in (0,1],
//
// their mixtures U_mu = sum_i w_i U_{lambda_i} over atomic mixing measures,
// and Kusuoka-type infima U_M = min_{mu in M} U_mu over finite families.
// Sign convention: larger is better, U_1 = E and U_lambda(X) <= E[X].

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "riskpool/distribution.hpp"
#include "riskpool/normal.hpp"

namespace riskpool {

/// One atom of a mixing measure: weight placed on tail level lambda.
struct MixtureAtom {
    double lambda = 1.0;
    double weight = 1.0;

    friend bool operator==(const MixtureAtom&, const MixtureAtom&) = default;
};

/// Finite probability measure on (0,1]. Atoms are merged on equal lambda and
/// kept sorted by lambda.
class MixtureMeasure {
public:
    explicit MixtureMeasure(std::vector<MixtureAtom> atoms) {
        if (atoms.empty()) {
            throw std::invalid_argument("mixture measure needs at least one atom");
        }
        double total = 0.0;
        for (const auto& a : atoms) {
            if (a.lambda == 0.0) {
                throw std::invalid_argument("mixture measure must be supported on (0,1]: an atom at lambda = 0 is not admissible");
            }
            if (!(a.lambda > 0.0 && a.lambda <= 1.0)) {
                throw std::invalid_argument("mixture measure must be supported on (0,1]: lambda out of range");
            }
            if (!(a.weight > 0.0) || !std::isfinite(a.weight)) {
                throw std::invalid_argument("mixture measure weights must be strictly positive");
            }
            total += a.weight;
        }
        if (std::abs(total - 1.0) > kProbabilityTolerance) {
            throw std::invalid_argument("mixture measure weights must sum to 1");
        }
        std::stable_sort(atoms.begin(), atoms.end(), [](const MixtureAtom& a, const MixtureAtom& b) { return a.lambda < b.lambda; });
        for (const auto& a : atoms) {
            if (!atoms_.empty() && atoms_.back().lambda == a.lambda) {
                atoms_.back().weight += a.weight;
            } else {
                atoms_.push_back(a);
            }
        }
    }

    static MixtureMeasure dirac(double lambda) { return MixtureMeasure({{lambda, 1.0}}); }

    [[nodiscard]] std::span<const MixtureAtom> atoms() const { return atoms_; }

    /// True for the expected-value measure delta_1.
    [[nodiscard]] bool is_expectation() const { return atoms_.size() == 1 && atoms_.front().lambda == 1.0; }

    friend bool operator==(const MixtureMeasure&, const MixtureMeasure&) = default;

private:
    std::vector<MixtureAtom> atoms_;
};

/// Nonempty finite set of mixing measures, in declaration order.
class KusuokaFamily {
public:
    explicit KusuokaFamily(std::vector<MixtureMeasure> members) : members_(std::move(members)) {
        if (members_.empty()) {
            throw std::invalid_argument("Kusuoka family needs at least one member");
        }
    }

    [[nodiscard]] std::span<const MixtureMeasure> members() const { return members_; }
    [[nodiscard]] std::size_t size() const { return members_.size(); }

    /// Union of two families, this family's members first.
    [[nodiscard]] KusuokaFamily joined(const KusuokaFamily& other) const {
        std::vector<MixtureMeasure> all = members_;
        all.insert(all.end(), other.members_.begin(), other.members_.end());
        return KusuokaFamily(std::move(all));
    }

    friend bool operator==(const KusuokaFamily&, const KusuokaFamily&) = default;

private:
    std::vector<MixtureMeasure> members_;
};

/// Either a single mixture or a Kusuoka family.
using MeasureSpec = std::variant<MixtureMeasure, KusuokaFamily>;

// ---------------------------------------------------------------------------
// Building blocks

/// U_lambda(X); U_1 is the mean.
inline double avar(const Distribution& dist, double lambda) {
    detail::require_tail_level(lambda, "avar");
    if (lambda == 1.0) {
        return mean(dist);
    }
    return lower_quantile_integral(dist, lambda) / lambda;
}

/// U_0(X) = ess inf X. Not admissible inside a MixtureMeasure.
inline double avar_zero(const Distribution& dist) { return essential_infimum(dist); }

/// U_lambda(N(m, sigma^2)) = m - sigma phi(Phi^{-1}(lambda)) / lambda.
inline double avar_normal_closed_form(double m, double sigma, double lambda) {
    detail::require_tail_level(lambda, "avar_normal_closed_form");
    if (lambda == 1.0) {
        return m;
    }
    return m - sigma * normal_pdf_at_quantile(lambda) / lambda;
}

inline double mixture_value(const Distribution& dist, const MixtureMeasure& mu) {
    double acc = 0.0;
    for (const auto& a : mu.atoms()) {
        acc += a.weight * avar(dist, a.lambda);
    }
    return acc;
}

struct KusuokaValue {
    double value = 0.0;
    std::size_t argmin = 0;
};

/// min over members; ties go to the earliest member.
inline KusuokaValue kusuoka_value(const Distribution& dist, const KusuokaFamily& family) {
    KusuokaValue best{std::numeric_limits<double>::infinity(), 0};
    for (std::size_t i = 0; i < family.size(); ++i) {
        const double v = mixture_value(dist, family.members()[i]);
        if (v < best.value) {
            best = {v, i};
        }
    }
    return best;
}

inline double measure_value(const Distribution& dist, const MeasureSpec& spec) {
    return std::visit(
        [&dist](const auto& m) -> double {
            if constexpr (std::is_same_v<std::decay_t<decltype(m)>, MixtureMeasure>) {
                return mixture_value(dist, m);
            } else {
                return kusuoka_value(dist, m).value;
            }
        },
        spec);
}

// ---------------------------------------------------------------------------
// Dual representation on discrete laws

/// A density dQ/dP per atom together with E_Q[X].
struct DualSolution {
    std::vector<double> density;
    double value = 0.0;
};

/// Minimises E_Q[X] over densities bounded by 1/lambda by filling the
/// smallest outcomes first. Each atom can carry at most p_i / lambda of
/// Q-mass; the marginal atom gets a fractional density.
inline DualSolution dual_avar_discrete(const DiscreteDistribution& dist, double lambda) {
    detail::require_tail_level(lambda, "dual_avar_discrete");
    const auto x = dist.outcomes();
    const auto p = dist.probabilities();
    DualSolution sol;
    sol.density.assign(x.size(), 0.0);
    if (lambda == 1.0) {
        std::fill(sol.density.begin(), sol.density.end(), 1.0);
        sol.value = dist.mean();
        return sol;
    }
    const double cap = 1.0 / lambda;
    double p_used = 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double p_take = std::min(p[i], lambda - p_used);
        if (p_take <= 0.0) {
            break;
        }
        sol.density[i] = p_take == p[i] ? cap : p_take / (lambda * p[i]);
        acc += p_take * x[i];
        p_used += p_take;
    }
    sol.value = acc / lambda;
    return sol;
}

/// Brute-force dual: every vertex of {0 <= d_i <= 1/lambda, sum p_i d_i = 1}
/// has all but at most one coordinate at a bound. Exponential in the atom
/// count, intended as an oracle for small laws.
inline DualSolution dual_avar_vertex_enumeration(const DiscreteDistribution& dist, double lambda) {
    detail::require_tail_level(lambda, "dual_avar_vertex_enumeration");
    const auto x = dist.outcomes();
    const auto p = dist.probabilities();
    const std::size_t k = x.size();
    if (k > 20) {
        throw std::invalid_argument("dual_avar_vertex_enumeration: too many atoms");
    }
    const double cap = 1.0 / lambda;
    constexpr double tol = 1e-12;

    DualSolution best;
    best.value = std::numeric_limits<double>::infinity();
    std::vector<double> d(k);
    for (std::size_t free = 0; free < k; ++free) {
        const std::size_t patterns = std::size_t{1} << (k - 1);
        for (std::size_t mask = 0; mask < patterns; ++mask) {
            double mass = 0.0;
            std::size_t bit = 0;
            for (std::size_t i = 0; i < k; ++i) {
                if (i == free) {
                    continue;
                }
                d[i] = ((mask >> bit) & 1u) != 0 ? cap : 0.0;
                mass += p[i] * d[i];
                ++bit;
            }
            d[free] = (1.0 - mass) / p[free];
            if (d[free] < -tol || d[free] > cap + tol) {
                continue;
            }
            d[free] = std::clamp(d[free], 0.0, cap);
            double value = 0.0;
            for (std::size_t i = 0; i < k; ++i) {
                value += p[i] * d[i] * x[i];
            }
            if (value < best.value) {
                best.value = value;
                best.density = d;
            }
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Admissibility diagnostics

/// int log(1/lambda) mu(d lambda); finite for every atomic measure on (0,1].
inline double check_log_condition(const MixtureMeasure& mu) {
    double acc = 0.0;
    for (const auto& a : mu.atoms()) {
        acc -= a.weight * std::log(a.lambda);
    }
    return acc;
}

/// sup over members of check_log_condition.
inline double check_family_condition(const KusuokaFamily& family) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& m : family.members()) {
        best = std::max(best, check_log_condition(m));
    }
    return best;
}

} // namespace riskpool
