#pragma once

// Crossover iteration N*, alpha_c extrapolation and delta-P phase labels.

#include <cmath>
#include <string>
#include <vector>

#include "sbnrg/errors.hpp"
#include "sbnrg/nrg.hpp"
#include "sbnrg/numerics.hpp"

namespace sbnrg::criticality {

inline constexpr double kDefaultThreshold = 0.3;
inline constexpr int kTrackedLevel = 1; // first excited state

// The tracked level never reaches the threshold within the recorded flow.
class NoCrossing : public NumericalError {
public:
    using NumericalError::NumericalError;
};

struct CrossoverPoint {
    double alpha = 0.0;
    double n_star = 0.0;
    double threshold = kDefaultThreshold;
};

namespace detail {

inline double level_of(const nrg::FlowRecord& r, int level) {
    require(static_cast<int>(r.levels.size()) > level,
            "extract_nstar: iteration " + std::to_string(r.iteration) + " records fewer than " +
                std::to_string(level + 1) + " levels");
    return r.levels[static_cast<std::size_t>(level)];
}

} // namespace detail

// First upward crossing of the threshold by level 1, linearly interpolated
// between bracketing iterations. Returns 0 if the flow starts at or above it.
inline double extract_nstar(const nrg::NrgFlow& flow, double threshold = kDefaultThreshold,
                            int level = kTrackedLevel) {
    require(flow.size() >= 2, "extract_nstar: need at least two iterations");
    require(std::isfinite(threshold) && threshold > 0.0, "extract_nstar: threshold must be > 0");
    double prev = detail::level_of(flow.front(), level);
    if (prev >= threshold) return 0.0;
    for (std::size_t k = 1; k < flow.size(); ++k) {
        const double cur = detail::level_of(flow[k], level);
        if (cur >= threshold) {
            const double n0 = flow[k - 1].iteration;
            const double n1 = flow[k].iteration;
            return n0 + (n1 - n0) * (threshold - prev) / (cur - prev);
        }
        prev = cur;
    }
    throw NoCrossing("extract_nstar: level " + std::to_string(level) + " stays below " +
                     std::to_string(threshold) + " for all " + std::to_string(flow.size()) +
                     " recorded iterations (extend n_iter)");
}

// Number of times level 1 passes the threshold, in either direction.
inline int count_crossings(const nrg::NrgFlow& flow, double threshold = kDefaultThreshold,
                           int level = kTrackedLevel) {
    int n = 0;
    for (std::size_t k = 1; k < flow.size(); ++k) {
        const bool below_prev = detail::level_of(flow[k - 1], level) < threshold;
        const bool below_cur = detail::level_of(flow[k], level) < threshold;
        if (below_prev != below_cur) ++n;
    }
    return n;
}

struct CriticalFit {
    std::vector<CrossoverPoint> points;
    double a = 0.0;
    double b = 0.0;
    double alpha_c = 0.0;
    double rss = 0.0;
};

// N*(alpha) = a + b / (alpha_c - alpha) at fixed Delta.
inline CriticalFit fit_alpha_c(const std::vector<CrossoverPoint>& points,
                               const numerics::Tolerances& tol = numerics::kTolerances) {
    std::vector<numerics::FitPoint> pts;
    pts.reserve(points.size());
    for (const auto& p : points) pts.push_back({p.alpha, p.n_star});
    const auto f = numerics::fit_divergence(pts, tol);
    return {points, f.a, f.b, f.alpha_c, f.rss};
}

// Fixed alpha, varying Delta: ln T* = -N* ln(Lambda) + const is linear in
// ln Delta with slope 1 / (alpha_c - alpha). Returns that alpha_c estimate.
struct DeltaScanPoint {
    double delta;
    double n_star;
};

inline double alpha_c_from_delta_scan(double alpha, const std::vector<DeltaScanPoint>& pts, double lambda) {
    require(pts.size() >= 2, "alpha_c_from_delta_scan: need at least two points");
    require(lambda > 1.0, "alpha_c_from_delta_scan: lambda must be > 1");
    double mx = 0.0, my = 0.0;
    for (const auto& p : pts) {
        require(p.delta > 0.0, "alpha_c_from_delta_scan: delta must be > 0");
        mx += std::log(p.delta);
        my += -p.n_star * std::log(lambda);
    }
    mx /= static_cast<double>(pts.size());
    my /= static_cast<double>(pts.size());
    double sxx = 0.0, sxy = 0.0;
    for (const auto& p : pts) {
        const double dx = std::log(p.delta) - mx;
        sxx += dx * dx;
        sxy += dx * (-p.n_star * std::log(lambda) - my);
    }
    require(sxx > 0.0, "alpha_c_from_delta_scan: delta values must differ");
    const double slope = sxy / sxx;
    if (!(slope > 0.0)) throw NumericalError("alpha_c_from_delta_scan: non-positive slope");
    return alpha + 1.0 / slope;
}

enum class Phase { delocalized, localized, undetermined };

inline const char* to_string(Phase p) {
    switch (p) {
    case Phase::delocalized: return "delocalized";
    case Phase::localized: return "localized";
    default: return "undetermined";
    }
}

struct PhaseDiagnosis {
    double delta_p = 0.0;
    Phase label = Phase::undetermined;
};

inline constexpr double kDelocalizedBelow = 0.05;
inline constexpr double kLocalizedAbove = 0.45;

inline PhaseDiagnosis classify_phase(double delta_p, double lo = kDelocalizedBelow, double hi = kLocalizedAbove) {
    require(std::isfinite(delta_p) && delta_p >= 0.0 && delta_p <= 0.5, "classify_phase: delta_p must lie in [0, 0.5]");
    require(lo <= hi, "classify_phase: lo must not exceed hi");
    if (delta_p < lo) return {delta_p, Phase::delocalized};
    if (delta_p > hi) return {delta_p, Phase::localized};
    return {delta_p, Phase::undetermined};
}

} // namespace sbnrg::criticality
