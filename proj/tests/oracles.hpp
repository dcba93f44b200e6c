#pragma once

// Test-only reference computations. Nothing here calls the library's
// quantile integration, tail-average or inverse-normal code paths.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <utility>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

namespace oracle {

inline double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// Phi^{-1}(p) by bisection on Phi, to 1e-12 in x.
inline double inv_normal_bisection(double p) {
    double lo = -40.0;
    double hi = 40.0;
    while (hi - lo > 1e-12) {
        const double mid = 0.5 * (lo + hi);
        (std_normal_cdf(mid) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

/// int_0^lambda q(t) dt by tanh-sinh quadrature (handles the endpoint singularity).
inline double quantile_integral(const std::function<double(double)>& q, double lo, double hi) {
    boost::math::quadrature::tanh_sinh<double> integrator;
    return integrator.integrate(q, lo, hi);
}

inline double quantile_integral(const std::function<double(double)>& q, double lambda) { return quantile_integral(q, 0.0, lambda); }

/// Same, split at the jump points of a step quantile.
inline double quantile_integral(const std::function<double(double)>& q, double lambda, std::vector<double> breaks) {
    breaks.push_back(lambda);
    double total = 0.0;
    double lo = 0.0;
    for (double b : breaks) {
        if (b <= lo || b > lambda) {
            continue;
        }
        total += quantile_integral(q, lo, b);
        lo = b;
    }
    return total;
}

/// int_0^lambda Phi^{-1}(t) dt using Boost's normal quantile.
inline double normal_lower_integral(double m, double sd, double lambda) {
    const boost::math::normal_distribution<double> law(m, sd);
    return quantile_integral([&law](double t) { return boost::math::quantile(law, t); }, lambda);
}

/// Tail average of a discrete law through the Rockafellar-Uryasev form
/// U_lambda(X) = max_m { m - E[(m - X)^+] / lambda }, the max being attained on an atom.
inline double tail_average_ru(const std::vector<double>& x, const std::vector<double>& p, double lambda) {
    double best = -std::numeric_limits<double>::infinity();
    for (double m : x) {
        double shortfall = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            shortfall += p[i] * std::max(m - x[i], 0.0);
        }
        best = std::max(best, m - shortfall / lambda);
    }
    return best;
}

/// Law of the average of n i.i.d. two-point risks, by walking all 2^n outcomes.
inline std::pair<std::vector<double>, std::vector<double>> enumerate_two_point_pool(double lo, double hi, double p_hi, unsigned n) {
    std::map<double, double> law;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
        double sum = 0.0;
        double prob = 1.0;
        for (unsigned i = 0; i < n; ++i) {
            const bool up = ((mask >> i) & 1u) != 0;
            sum += up ? hi : lo;
            prob *= up ? p_hi : 1.0 - p_hi;
        }
        law[sum / n] += prob;
    }
    std::vector<double> xs;
    std::vector<double> ps;
    for (const auto& [x, p] : law) {
        xs.push_back(x);
        ps.push_back(p);
    }
    return {xs, ps};
}

/// Random discrete law generated with std::mt19937_64 (independent of the library RNG).
struct RandomLaw {
    std::vector<double> x;
    std::vector<double> p;
};

inline RandomLaw random_law(std::mt19937_64& gen, std::size_t max_atoms, double scale = 10.0) {
    std::uniform_int_distribution<std::size_t> count(1, max_atoms);
    std::uniform_real_distribution<double> value(-scale, scale);
    std::uniform_real_distribution<double> weight(0.05, 1.05);
    RandomLaw law;
    const std::size_t k = count(gen);
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        law.x.push_back(value(gen));
        law.p.push_back(weight(gen));
        total += law.p.back();
    }
    for (double& w : law.p) {
        w /= total;
    }
    return law;
}

} // namespace oracle
