#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "sbnrg/bath.hpp"

using namespace sbnrg;
using namespace sbnrg::bath;

namespace {

SpinBosonParams ohmic(double alpha, double s = 1.0) {
    SpinBosonParams p;
    p.alpha = alpha;
    p.s = s;
    return p;
}

// Eigenvalues of the tridiagonal chain matrix.
Eigen::VectorXd chain_spectrum(const WilsonChain& c) {
    const auto n = static_cast<Eigen::Index>(c.size());
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) t(i, i) = c.eps[static_cast<std::size_t>(i)];
    for (Eigen::Index i = 0; i + 1 < n; ++i) t(i, i + 1) = t(i + 1, i) = c.t[static_cast<std::size_t>(i)];
    return numerics::sym_eigvals(t);
}

// Least-squares slope of -ln t_n over n in [lo, hi].
double decay_rate(const WilsonChain& c, int lo, int hi) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const int n = hi - lo + 1;
    for (int k = lo; k <= hi; ++k) {
        const double y = -std::log(c.t[static_cast<std::size_t>(k)]);
        sx += k;
        sy += y;
        sxx += double(k) * k;
        sxy += k * y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

} // namespace

TEST(SpectralDensity, Examples) {
    const auto p = ohmic(0.1);
    EXPECT_EQ(spectral_density(p, 0.0), 0.0);
    EXPECT_NEAR(spectral_density(p, 0.5), 2.0 * std::numbers::pi * 0.1 * 0.5, 1e-15);
    EXPECT_NEAR(spectral_density(p, 0.5), 0.314159, 1e-6);
    EXPECT_EQ(spectral_density(p, 1.5), 0.0);
    EXPECT_THROW(spectral_density(p, -0.1), InvalidArgument);
}

TEST(Discretize, OhmicFirstIntervalAgainstQuadrature) {
    const auto p = ohmic(0.1);
    const auto star = discretize(p, 2.0, 10);
    ASSERT_EQ(star.modes.size(), 10u);
    EXPECT_NEAR(star.modes[0].gamma * star.modes[0].gamma, 0.075, 1e-15);
    EXPECT_NEAR(star.modes[0].xi, 7.0 / 9.0, 1e-15);

    // independent quadrature of the two defining integrals on every interval
    for (int n = 0; n < 10; ++n) {
        const double hi = std::pow(2.0, -n), lo = hi / 2.0;
        const auto j = [&](double w) { return spectral_density(p, w); };
        const double j0 = numerics::integrate(j, lo, hi);
        const double j1 = numerics::integrate([&](double w) { return j(w) * w; }, lo, hi);
        const auto& m = star.modes[static_cast<std::size_t>(n)];
        EXPECT_NEAR(m.gamma * m.gamma / (j0 / std::numbers::pi), 1.0, 1e-12);
        EXPECT_NEAR(m.xi / (j1 / j0), 1.0, 1e-12);
    }
}

TEST(Discretize, GeometricScaling) {
    for (double lambda : {1.5, 2.0, 3.0}) {
        const auto star = discretize(ohmic(0.3), lambda, 30);
        const auto& m0 = star.modes[0];
        for (std::size_t n = 1; n < star.modes.size(); ++n) {
            const auto& m = star.modes[n];
            EXPECT_NEAR(m.xi / m0.xi / std::pow(lambda, -double(n)), 1.0, 1e-12);
            EXPECT_NEAR(m.gamma * m.gamma / (m0.gamma * m0.gamma) / std::pow(lambda, -2.0 * n), 1.0, 1e-12);
            EXPECT_LT(m.xi, star.modes[n - 1].xi);
        }
    }
}

TEST(Discretize, SumRuleWithTailDeficit) {
    const double alpha = 0.37;
    const auto p = ohmic(alpha);
    const double total = numerics::integrate([&](double w) { return spectral_density(p, w); }, 0.0, 1.0) /
                         std::numbers::pi;
    EXPECT_NEAR(total, alpha, 1e-14);
    for (int n : {5, 20, 40}) {
        const auto star = discretize(p, 2.0, n);
        EXPECT_NEAR(star.coupling_sum(), total - alpha * std::pow(2.0, -2.0 * n), 1e-10 * alpha);
    }
}

TEST(Discretize, ZeroAlphaIsValid) {
    const auto star = discretize(ohmic(0.0), 2.0, 8);
    for (const auto& m : star.modes) {
        EXPECT_EQ(m.gamma, 0.0);
        EXPECT_GT(m.xi, 0.0);
    }
}

TEST(Discretize, SubOhmicUsesQuadrature) {
    const auto p = ohmic(0.2, 0.5);
    const auto star = discretize(p, 2.0, 6);
    for (int n = 0; n < 6; ++n) {
        const double hi = std::pow(2.0, -n), lo = hi / 2.0;
        // closed forms of the power-law integrals
        const double j0 = 2.0 * std::numbers::pi * 0.2 * (std::pow(hi, 1.5) - std::pow(lo, 1.5)) / 1.5;
        const double j1 = 2.0 * std::numbers::pi * 0.2 * (std::pow(hi, 2.5) - std::pow(lo, 2.5)) / 2.5;
        const auto& m = star.modes[static_cast<std::size_t>(n)];
        EXPECT_NEAR(m.gamma * m.gamma, j0 / std::numbers::pi, 1e-12);
        EXPECT_NEAR(m.xi, j1 / j0, 1e-12);
    }
}

TEST(Discretize, RejectsBadArguments) {
    EXPECT_THROW(discretize(ohmic(0.1), 1.0, 5), InvalidArgument);
    EXPECT_THROW(discretize(ohmic(0.1), 2.0, 0), InvalidArgument);
}

TEST(ChainMap, SingleMode) {
    StarBath star;
    star.modes = {{0.8, 0.3}};
    const auto c = chain_map(star);
    EXPECT_NEAR(c.c0, 0.3, 1e-15);
    ASSERT_EQ(c.eps.size(), 1u);
    EXPECT_NEAR(c.eps[0], 0.8, 1e-15);
    EXPECT_TRUE(c.t.empty());
}

TEST(ChainMap, TwoModesByHand) {
    StarBath star;
    star.modes = {{1.0, 1.0}, {0.5, 0.5}};
    const auto c = chain_map(star);
    EXPECT_NEAR(c.c0, std::sqrt(1.25), 1e-15);
    ASSERT_EQ(c.eps.size(), 2u);
    ASSERT_EQ(c.t.size(), 1u);
    EXPECT_NEAR(c.eps[0], 0.9, 1e-15);
    EXPECT_NEAR(c.eps[1], 0.6, 1e-15);
    EXPECT_NEAR(c.t[0], 0.2, 1e-15);
    EXPECT_NEAR(c.eps[0] + c.eps[1], 1.5, 1e-15);
}

TEST(ChainMap, EmptyCouplingGivesEmptyChain) {
    const auto c = chain_map(discretize(ohmic(0.0), 2.0, 10));
    EXPECT_TRUE(c.empty());
    EXPECT_EQ(c.c0, 0.0);
}

TEST(ChainMap, RejectsNonPositiveModes) {
    StarBath star;
    star.modes = {{0.0, 0.1}};
    EXPECT_THROW(chain_map(star), InvalidArgument);
}

TEST(ChainMap, InvariantsForOhmicStar) {
    for (double lambda : {1.8, 2.0, 3.0}) {
        const auto star = discretize(ohmic(0.6), lambda, 40);
        const auto c = chain_map(star);
        ASSERT_EQ(c.size(), 40u);
        ASSERT_EQ(c.t.size(), 39u);
        EXPECT_NEAR(c.c0 * c.c0 / star.coupling_sum(), 1.0, 1e-10);

        double tr_star = 0, tr_chain = 0;
        for (const auto& m : star.modes) tr_star += m.xi;
        for (double e : c.eps) {
            tr_chain += e;
            EXPECT_GT(e, 0.0);
        }
        EXPECT_NEAR(tr_chain / tr_star, 1.0, 1e-10);

        auto xi = std::vector<double>();
        for (const auto& m : star.modes) xi.push_back(m.xi);
        std::sort(xi.begin(), xi.end());
        const auto ev = chain_spectrum(c);
        for (std::size_t i = 0; i < xi.size(); ++i)
            EXPECT_NEAR(ev(static_cast<Eigen::Index>(i)), xi[i], 1e-9) << "lambda " << lambda << " i " << i;
    }
}

TEST(ChainMap, HoppingsDecayAtRateLnLambda) {
    const auto c = chain_map(discretize(ohmic(0.5), 2.0, 40));
    EXPECT_NEAR(decay_rate(c, 10, 35) / std::log(2.0), 1.0, 0.02);
    for (int n = 10; n < 35; ++n)
        EXPECT_NEAR(c.t[static_cast<std::size_t>(n)] / c.t[static_cast<std::size_t>(n + 1)], 2.0, 0.02);
}

TEST(ChainMap, LongChainsKeepPrecision) {
    // 200 modes span 60 decades; the hoppings at the far end must still be resolved
    const auto star = discretize(ohmic(1.0), 2.0, 200);
    EXPECT_GT(chain_precision_digits(star), 50);
    const auto c = chain_map(star);
    ASSERT_EQ(c.size(), 200u);
    EXPECT_NEAR(decay_rate(c, 20, 190) / std::log(2.0), 1.0, 0.02);
    for (double t : c.t) EXPECT_GT(t, 0.0);
}

TEST(ChainMap, Deterministic) {
    const auto star = discretize(ohmic(0.7), 2.0, 60);
    const auto a = chain_map(star);
    const auto b = chain_map(star);
    EXPECT_EQ(a.c0, b.c0);
    EXPECT_EQ(a.eps, b.eps);
    EXPECT_EQ(a.t, b.t);
}

TEST(ChainGeometry, AlphaOnlyScalesC0) {
    const auto geo = chain_geometry(1.0, 2.0, 30);
    const auto direct = chain_map(discretize(ohmic(0.45), 2.0, 30));
    const auto scaled = with_alpha(geo, 0.45);
    EXPECT_NEAR(scaled.c0, direct.c0, 1e-14);
    for (std::size_t i = 0; i < direct.eps.size(); ++i) EXPECT_NEAR(scaled.eps[i], direct.eps[i], 1e-14 * direct.eps[i]);
    for (std::size_t i = 0; i < direct.t.size(); ++i) EXPECT_NEAR(scaled.t[i], direct.t[i], 1e-12 * direct.t[i]);
    EXPECT_EQ(with_alpha(geo, 0.0).c0, 0.0);
    EXPECT_THROW(with_alpha(geo, -1.0), InvalidArgument);
}
