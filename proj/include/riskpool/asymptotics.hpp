#pragma once

// Limit constants of the scaled pool premium sqrt(n) * pi_n and log-log rate
// fitting for finite-n premium curves.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "riskpool/normal.hpp"
#include "riskpool/risk_measures.hpp"

namespace riskpool {

/// phi(Phi^{-1}(lambda)) / lambda = -U_lambda(Z); zero at lambda = 1.
inline double normal_avar_constant(double lambda) {
    detail::require_tail_level(lambda, "normal_avar_constant");
    if (lambda == 1.0) {
        return 0.0;
    }
    return normal_pdf_at_quantile(lambda) / lambda;
}

/// sigma * sum_i w_i phi(Phi^{-1}(lambda_i)) / lambda_i.
inline double theorem1_limit(double sigma, const MixtureMeasure& mu) {
    if (!(sigma >= 0.0)) {
        throw std::invalid_argument("theorem1_limit: sigma must be nonnegative");
    }
    if (sigma == 0.0) {
        return 0.0;
    }
    double acc = 0.0;
    for (const auto& a : mu.atoms()) {
        acc += a.weight * normal_avar_constant(a.lambda);
    }
    return sigma * acc;
}

/// sigma * sup over members of the mixed normal constant.
inline double theorem2_limit(double sigma, const KusuokaFamily& family) {
    double best = 0.0;
    for (const auto& mu : family.members()) {
        best = std::max(best, theorem1_limit(sigma, mu));
    }
    return best;
}

inline double limit_constant(double sigma, const MeasureSpec& spec) {
    if (const auto* mu = std::get_if<MixtureMeasure>(&spec)) {
        return theorem1_limit(sigma, *mu);
    }
    return theorem2_limit(sigma, std::get<KusuokaFamily>(spec));
}

// ---------------------------------------------------------------------------
// Rate fitting

struct RatePoint {
    double n = 0.0;
    double premium = 0.0;
};

/// Least-squares fit of log(premium) = intercept + slope * log(n).
struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    std::vector<RatePoint> points;
};

inline RateFit fit_rate(std::vector<RatePoint> points) {
    if (points.size() < 3) {
        throw std::invalid_argument("fit_rate: at least three points are required");
    }
    for (const auto& p : points) {
        if (!(p.premium > 0.0) || !std::isfinite(p.premium)) {
            throw std::domain_error("fit_rate: premiums must be strictly positive");
        }
        if (!(p.n > 0.0)) {
            throw std::invalid_argument("fit_rate: n must be positive");
        }
    }
    std::vector<double> ns;
    ns.reserve(points.size());
    for (const auto& p : points) {
        ns.push_back(p.n);
    }
    std::sort(ns.begin(), ns.end());
    if (std::adjacent_find(ns.begin(), ns.end()) != ns.end()) {
        throw std::invalid_argument("fit_rate: pool sizes must be distinct");
    }

    const auto k = static_cast<double>(points.size());
    double mx = 0.0;
    double my = 0.0;
    for (const auto& p : points) {
        mx += std::log(p.n);
        my += std::log(p.premium);
    }
    mx /= k;
    my /= k;
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (const auto& p : points) {
        const double dx = std::log(p.n) - mx;
        const double dy = std::log(p.premium) - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    RateFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.r_squared = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
    fit.points = std::move(points);
    return fit;
}

} // namespace riskpool
