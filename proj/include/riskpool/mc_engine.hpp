#pragma once

// Premium-curve experiments.
//
// For each pool size n the engine estimates sqrt(n) * (v + E[X_1] - V(v + S_n/n))
// either analytically (normal risks with a closed-form certainty equivalent)
// or by Monte Carlo with batch means. Replicate r of batch b always consumes
// the counter-based stream keyed by (seed, b, r), whatever n is and whichever
// thread runs it, so curves are reproducible and share random numbers across
// pool sizes and utility choices.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "riskpool/asymptotics.hpp"
#include "riskpool/distribution.hpp"
#include "riskpool/preferences.hpp"
#include "riskpool/risk_measures.hpp"
#include "riskpool/rng.hpp"

namespace riskpool {

enum class PathMode { Auto, Exact, MonteCarlo };

struct ExperimentConfig {
    Distribution distribution = ParametricDistribution(NormalLaw{0.0, 1.0});
    MeasureSpec measure = MixtureMeasure::dirac(1.0);
    UtilityFunction utility = LinearUtility{};
    double wealth = 0.0;
    std::vector<std::size_t> n_grid{4, 16, 64, 256, 1024, 4096};
    std::size_t replications = 100000;
    std::size_t batches = 20;
    std::uint64_t seed = 0;
    PathMode path = PathMode::Auto;
    std::size_t quantile_grid = kDefaultQuantileGrid;
    /// Smallest pool sizes left out of the rate fit.
    std::size_t fit_drop_smallest = 1;

    void validate() const {
        if (n_grid.empty()) {
            throw std::invalid_argument("n_grid: must be nonempty");
        }
        for (std::size_t i = 0; i < n_grid.size(); ++i) {
            if (n_grid[i] == 0) {
                throw std::invalid_argument("n_grid: pool sizes must be positive");
            }
            if (i > 0 && n_grid[i] <= n_grid[i - 1]) {
                throw std::invalid_argument("n_grid: must be strictly increasing");
            }
        }
        if (batches < 2) {
            throw std::invalid_argument("batches: at least two batches are required");
        }
        if (replications == 0 || replications % batches != 0) {
            throw std::invalid_argument("replications: must be a positive multiple of batches");
        }
        if (replications / batches < 2) {
            throw std::invalid_argument("replications: each batch needs at least two replicates");
        }
        if (quantile_grid == 0) {
            throw std::invalid_argument("quantile_grid: must be positive");
        }
        if (!std::isfinite(wealth)) {
            throw std::invalid_argument("wealth: must be finite");
        }
        if (path == PathMode::Exact && !exact_path_available()) {
            throw std::invalid_argument("path: the exact path needs normal risks and a linear or CARA utility");
        }
    }

    [[nodiscard]] bool exact_path_available() const {
        const auto* p = std::get_if<ParametricDistribution>(&distribution);
        if (p == nullptr || !p->is_normal()) {
            return false;
        }
        return utility.is_linear() || std::holds_alternative<CaraUtility>(utility.family());
    }

    [[nodiscard]] bool uses_exact_path() const {
        switch (path) {
        case PathMode::Exact:
            return true;
        case PathMode::MonteCarlo:
            return false;
        case PathMode::Auto:
            break;
        }
        const auto* p = std::get_if<ParametricDistribution>(&distribution);
        return p != nullptr && p->is_normal() && utility.is_linear();
    }
};

/// A utility-domain violation inside one n-cell.
class CellDomainError : public UtilityDomainError {
public:
    CellDomainError(std::size_t n, const std::string& what)
        : UtilityDomainError("pool size n = " + std::to_string(n) + ": " + what), n_(n) {}

    [[nodiscard]] std::size_t n() const { return n_; }

private:
    std::size_t n_;
};

struct PremiumRecord {
    std::size_t n = 0;
    double estimate = 0.0; ///< sqrt(n) * premium
    double stderr_ = 0.0;  ///< batch-means standard error; 0 on the exact path
    std::size_t replications = 0;
    bool exact = false;
    std::vector<double> batch_estimates;

    [[nodiscard]] double unscaled() const { return estimate / std::sqrt(static_cast<double>(n)); }
};

struct PremiumCurve {
    std::vector<PremiumRecord> records;
    double sigma = 0.0;
    double limit = 0.0;
    bool family_limit = false; ///< limit from the Kusuoka sup rather than a single mixture
    std::optional<RateFit> rate_fit;
    std::string rate_fit_note;
    std::uint64_t seed = 0;
    std::uint64_t config_hash = 0;
};

struct RunOptions {
    unsigned threads = 1;
};

namespace detail {

/// Runs body(i) for i in [0, count) on up to `threads` workers and rethrows
/// the exception of the lowest failing index.
template <class Body>
void parallel_for_ordered(std::size_t count, unsigned threads, Body&& body) {
    std::vector<std::exception_ptr> errors(count);
    auto run_one = [&](std::size_t i) {
        try {
            body(i);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };
    const std::size_t workers = std::min<std::size_t>(std::max(1u, threads), count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            run_one(i);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < count; i = next++) {
                    run_one(i);
                }
            });
        }
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

inline double mean_of(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) {
        acc += x;
    }
    return acc / static_cast<double>(v.size());
}

inline double batch_standard_error(const std::vector<double>& v) {
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) {
        ss += (x - m) * (x - m);
    }
    const auto b = static_cast<double>(v.size());
    return std::sqrt(ss / (b - 1.0) / b);
}

} // namespace detail

/// sqrt(n) * premium for one pool size.
inline PremiumRecord estimate_scaled_premium(const ExperimentConfig& config, std::size_t n, const RunOptions& options = {}) {
    config.validate();
    const double root_n = std::sqrt(static_cast<double>(n));
    const double single_mean = mean(config.distribution);

    PremiumRecord rec;
    rec.n = n;
    try {
        if (config.uses_exact_path()) {
            if (!config.exact_path_available()) {
                throw std::invalid_argument("exact path unavailable for this configuration");
            }
            const Distribution pool = *exact_pool_law(config.distribution, n);
            rec.estimate = root_n * risk_premium(config.wealth, pool, single_mean, config.measure, config.utility, config.quantile_grid);
            rec.exact = true;
            rec.replications = 0;
            return rec;
        }

        const std::size_t per_batch = config.replications / config.batches;
        rec.batch_estimates.assign(config.batches, 0.0);
        detail::parallel_for_ordered(config.batches, options.threads, [&](std::size_t b) {
            const RngSpec rng{config.seed, static_cast<std::uint64_t>(b)};
            const PoolAverage pooled = pool_average_sample(config.distribution, n, per_batch, rng);
            const Distribution pool = pooled.exact() ? Distribution(sample(pooled.as_distribution(), rng, per_batch))
                                                     : pooled.as_distribution();
            rec.batch_estimates[b] =
                root_n * risk_premium(config.wealth, pool, single_mean, config.measure, config.utility, config.quantile_grid);
        });
    } catch (const UtilityDomainError& e) {
        throw CellDomainError(n, e.what());
    }
    rec.estimate = detail::mean_of(rec.batch_estimates);
    rec.stderr_ = detail::batch_standard_error(rec.batch_estimates);
    rec.replications = config.replications;
    return rec;
}

inline PremiumCurve run_curve(const ExperimentConfig& config, const RunOptions& options = {}) {
    config.validate();
    PremiumCurve curve;
    curve.seed = config.seed;
    curve.sigma = std::sqrt(variance(config.distribution));
    curve.limit = limit_constant(curve.sigma, config.measure);
    curve.family_limit = std::holds_alternative<KusuokaFamily>(config.measure);

    for (std::size_t n : config.n_grid) {
        curve.records.push_back(estimate_scaled_premium(config, n, options));
    }

    std::vector<RatePoint> points;
    for (std::size_t i = config.fit_drop_smallest; i < curve.records.size(); ++i) {
        points.push_back({static_cast<double>(curve.records[i].n), curve.records[i].unscaled()});
    }
    if (points.size() < 3) {
        curve.rate_fit_note = "fewer than three pool sizes after dropping the smallest";
    } else if (std::any_of(points.begin(), points.end(), [](const RatePoint& p) { return !(p.premium > 0.0); })) {
        curve.rate_fit_note = "nonpositive premium; rate fit skipped";
    } else {
        curve.rate_fit = fit_rate(std::move(points));
    }
    return curve;
}

// ---------------------------------------------------------------------------
// Comparison against the limit

struct LimitRow {
    std::size_t n = 0;
    double estimate = 0.0;
    double stderr_ = 0.0;
    double limit = 0.0;
    double abs_gap = 0.0;
    double z_score = 0.0;
};

struct LimitComparison {
    std::vector<LimitRow> rows;
    /// |estimate - limit| nonincreasing over the last three pool sizes, up to
    /// 2 * (stderr_k + stderr_{k+1}) per step.
    bool trend_ok = true;
    /// |estimate - limit| <= max(4 stderr, 0.02 |limit| + 1e-3) at the largest n.
    bool final_within_tolerance = true;
};

inline double z_score(double gap, double stderr_) {
    if (stderr_ > 0.0) {
        return gap / stderr_;
    }
    if (std::abs(gap) <= 1e-12) {
        return 0.0;
    }
    return gap > 0.0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
}

inline LimitComparison compare_to_limit(const PremiumCurve& curve) {
    LimitComparison report;
    for (const auto& r : curve.records) {
        const double gap = r.estimate - curve.limit;
        report.rows.push_back({r.n, r.estimate, r.stderr_, curve.limit, std::abs(gap), z_score(gap, r.stderr_)});
    }
    const std::size_t count = report.rows.size();
    const std::size_t first = count >= 3 ? count - 3 : 0;
    const double slack_floor = 1e-12 * std::max(1.0, std::abs(curve.limit));
    for (std::size_t k = first; k + 1 < count; ++k) {
        const auto& a = report.rows[k];
        const auto& b = report.rows[k + 1];
        if (b.abs_gap > a.abs_gap + 2.0 * (a.stderr_ + b.stderr_) + slack_floor) {
            report.trend_ok = false;
        }
    }
    if (count > 0) {
        const auto& last = report.rows.back();
        report.final_within_tolerance = last.abs_gap <= std::max(4.0 * last.stderr_, 0.02 * std::abs(curve.limit) + 1e-3);
    }
    return report;
}

} // namespace riskpool
