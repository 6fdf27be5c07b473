#pragma once

// Continuous bath -> logarithmic star discretization -> Wilson chain.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "sbnrg/errors.hpp"
#include "sbnrg/model.hpp"
#include "sbnrg/numerics.hpp"

namespace sbnrg::bath {

// J(omega) = 2 pi alpha omega^s omega_c^(1-s), hard cutoff at omega_c = 1.
inline double spectral_density(const SpinBosonParams& p, double omega) {
    require(std::isfinite(omega) && omega >= 0.0, "spectral_density: omega must be >= 0");
    if (omega == 0.0 || omega > 1.0) return 0.0;
    return 2.0 * std::numbers::pi * p.alpha * std::pow(omega, p.s);
}

struct StarMode {
    double xi;    // mode energy
    double gamma; // coupling to the spin
};

struct StarBath {
    std::vector<StarMode> modes; // ordered by decreasing xi
    double alpha = 0.0;
    double s = 1.0;
    double lambda = 2.0;

    double coupling_sum() const {
        double acc = 0.0;
        for (const auto& m : modes) acc += m.gamma * m.gamma;
        return acc;
    }
};

// Interval I_n = [Lambda^-(n+1), Lambda^-n]:
//   gamma_n^2 = (1/pi) int_{I_n} J,   xi_n = int_{I_n} J w / int_{I_n} J.
inline StarBath discretize(const SpinBosonParams& p, double lambda, int n_star) {
    p.validate();
    require(std::isfinite(lambda) && lambda > 1.0, "discretize: Lambda must be > 1");
    require(n_star >= 1, "discretize: N_star must be >= 1");

    StarBath star;
    star.alpha = p.alpha;
    star.s = p.s;
    star.lambda = lambda;
    star.modes.reserve(static_cast<std::size_t>(n_star));

    if (p.s == 1.0) {
        const double shape_xi = (2.0 / 3.0) * (1.0 - std::pow(lambda, -3.0)) / (1.0 - std::pow(lambda, -2.0));
        const double shape_g2 = 1.0 - std::pow(lambda, -2.0);
        for (int n = 0; n < n_star; ++n) {
            const double scale = std::pow(lambda, -n);
            star.modes.push_back({shape_xi * scale, std::sqrt(p.alpha * shape_g2) * scale});
        }
        return star;
    }

    // Generic exponent: quadrature of the alpha-free shape 2 pi w^s.
    const double s = p.s;
    auto shape = [s](double w) { return 2.0 * std::numbers::pi * std::pow(w, s); };
    for (int n = 0; n < n_star; ++n) {
        const double hi = std::pow(lambda, -n);
        const double lo = hi / lambda;
        const double j0 = numerics::integrate(shape, lo, hi);
        const double j1 = numerics::integrate([&](double w) { return shape(w) * w; }, lo, hi);
        star.modes.push_back({j1 / j0, std::sqrt(p.alpha * j0 / std::numbers::pi)});
    }
    return star;
}

struct WilsonChain {
    double c0 = 0.0;          // spin - site 0 coupling
    std::vector<double> eps;  // on-site energies
    std::vector<double> t;    // hoppings, size eps.size() - 1

    std::size_t size() const { return eps.size(); }
    bool empty() const { return eps.empty(); }
};

namespace detail {

using boost::multiprecision::cpp_bin_float;
using boost::multiprecision::number;

template <unsigned Digits>
using Real = number<cpp_bin_float<Digits>>;

inline constexpr double kOrthogonalityTol = 1e-25;

// Lanczos tridiagonalization of diag(xi) from the normalized coupling vector,
// with two full Gram-Schmidt passes per step.
template <class R>
WilsonChain lanczos(const std::vector<StarMode>& modes, int digits) {
    const std::size_t n = modes.size();
    std::vector<R> xi(n);
    std::vector<R> v0(n);
    R norm2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        xi[i] = R(modes[i].xi);
        v0[i] = R(modes[i].gamma);
        norm2 += v0[i] * v0[i];
    }
    const R norm = sqrt(norm2);
    for (auto& x : v0) x /= norm;

    WilsonChain chain;
    chain.c0 = static_cast<double>(norm);

    R xmax = 0;
    for (const auto& x : xi) xmax = std::max<R>(xmax, abs(x));
    const R breakdown = xmax * pow(R(10), -(digits - 8));

    std::vector<std::vector<R>> basis;
    basis.reserve(n);
    basis.push_back(std::move(v0));
    std::vector<R> w(n);
    for (std::size_t j = 0; j < n; ++j) {
        const auto& v = basis[j];
        for (std::size_t i = 0; i < n; ++i) w[i] = xi[i] * v[i];
        R a = 0;
        for (std::size_t i = 0; i < n; ++i) a += v[i] * w[i];
        chain.eps.push_back(static_cast<double>(a));
        if (j + 1 == n) break;

        for (int pass = 0; pass < 2; ++pass) {
            for (const auto& u : basis) {
                R ov = 0;
                for (std::size_t i = 0; i < n; ++i) ov += u[i] * w[i];
                for (std::size_t i = 0; i < n; ++i) w[i] -= ov * u[i];
            }
        }
        R b2 = 0;
        for (const auto& x : w) b2 += x * x;
        const R b = sqrt(b2);
        if (b <= breakdown) break; // invariant subspace exhausted
        chain.t.push_back(static_cast<double>(b));
        std::vector<R> next(n);
        for (std::size_t i = 0; i < n; ++i) next[i] = w[i] / b;

        R worst = 0;
        for (const auto& u : basis) {
            R ov = 0;
            for (std::size_t i = 0; i < n; ++i) ov += u[i] * next[i];
            worst = std::max<R>(worst, abs(ov));
        }
        if (worst > R(kOrthogonalityTol))
            throw NumericalError("chain_map: Lanczos orthogonality lost at site " + std::to_string(j + 1) +
                                 " (overlap " + std::to_string(static_cast<double>(worst)) + ")");
        basis.push_back(std::move(next));
    }
    return chain;
}

} // namespace detail

// Decimal digits needed to resolve the smallest mode next to the largest,
// plus the orthogonality target.
inline int chain_precision_digits(const StarBath& star) {
    double hi = 0.0, lo = std::numeric_limits<double>::infinity();
    for (const auto& m : star.modes) {
        hi = std::max(hi, m.xi);
        lo = std::min(lo, m.xi);
    }
    const double span = (lo > 0.0 && hi > 0.0) ? std::log10(hi / lo) : 0.0;
    return static_cast<int>(std::ceil(span)) + 35;
}

inline WilsonChain chain_map(const StarBath& star) {
    for (const auto& m : star.modes)
        require(std::isfinite(m.xi) && m.xi > 0.0 && std::isfinite(m.gamma) && m.gamma >= 0.0,
                "chain_map: star modes need xi > 0 and gamma >= 0");
    if (star.coupling_sum() <= 0.0) return {};

    const int digits = chain_precision_digits(star);
    if (digits <= 50) return detail::lanczos<detail::Real<50>>(star.modes, 50);
    if (digits <= 100) return detail::lanczos<detail::Real<100>>(star.modes, 100);
    if (digits <= 200) return detail::lanczos<detail::Real<200>>(star.modes, 200);
    throw NumericalError("chain_map: star spans " + std::to_string(digits - 35) +
                         " decades, beyond the supported working precision");
}

// Wilson chain of the unit-coupling (alpha = 1) bath. alpha only rescales every
// gamma_n by sqrt(alpha), so eps_n and t_n are alpha-independent and
// c0(alpha) = sqrt(alpha) * c0(1).
inline WilsonChain chain_geometry(double s, double lambda, int n_star) {
    SpinBosonParams unit;
    unit.alpha = 1.0;
    unit.s = s;
    return chain_map(discretize(unit, lambda, n_star));
}

inline WilsonChain with_alpha(WilsonChain geometry, double alpha) {
    require(std::isfinite(alpha) && alpha >= 0.0, "with_alpha: alpha must be >= 0");
    geometry.c0 *= std::sqrt(alpha);
    return geometry;
}

} // namespace sbnrg::bath
