#pragma once

// Dense symmetric eigensolver, adaptive quadrature and the pole-divergence
// least-squares fit. Stateless; every routine is deterministic.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "sbnrg/errors.hpp"

namespace sbnrg::numerics {

struct Tolerances {
    double symmetry = 1e-12;        // max relative asymmetry accepted by SymMatrix
    double eig_residual = 1e-10;    // relative to max|A|
    double quad_rel = 1e-12;        // default integrate() target
    unsigned quad_max_depth = 30;
    double fit_window = 2.0;        // alpha_c searched in (max alpha, max alpha + window]
    std::size_t fit_grid = 600;
    double fit_rel_tol = 1e-13;
};

inline constexpr Tolerances kTolerances{};

// ---------------------------------------------------------------------------
// Symmetric eigenproblem

class SymMatrix {
public:
    SymMatrix() = default;

    explicit SymMatrix(Eigen::MatrixXd a, double tol = kTolerances.symmetry) : a_(std::move(a)) {
        require(a_.rows() == a_.cols(), "SymMatrix: matrix must be square");
        require(a_.allFinite(), "SymMatrix: non-finite entry");
        const double scale = std::max(a_.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
        const double asym = (a_ - a_.transpose()).cwiseAbs().maxCoeff();
        require(asym <= tol * scale, "SymMatrix: asymmetry " + std::to_string(asym / scale) +
                                         " exceeds tolerance");
        a_ = 0.5 * (a_ + a_.transpose());
    }

    static SymMatrix identity(Eigen::Index n) { return SymMatrix(Eigen::MatrixXd::Identity(n, n)); }

    Eigen::Index dim() const { return a_.rows(); }
    const Eigen::MatrixXd& matrix() const { return a_; }
    double operator()(Eigen::Index i, Eigen::Index j) const { return a_(i, j); }

private:
    Eigen::MatrixXd a_;
};

struct EigenDecomposition {
    Eigen::VectorXd values;   // ascending
    Eigen::MatrixXd vectors;  // columns, orthonormal
};

namespace detail {

// Flip each column so that its largest-magnitude entry is positive
// (first such entry on ties).
inline void fix_signs(Eigen::MatrixXd& v) {
    for (Eigen::Index j = 0; j < v.cols(); ++j) {
        Eigen::Index imax = 0;
        double best = -1.0;
        for (Eigen::Index i = 0; i < v.rows(); ++i) {
            const double m = std::abs(v(i, j));
            if (m > best * (1.0 + 1e-12)) {
                best = m;
                imax = i;
            }
        }
        if (v(imax, j) < 0.0) v.col(j) = -v.col(j);
    }
}

} // namespace detail

// Householder tridiagonalization + implicit QR (Eigen). Single-threaded.
inline EigenDecomposition sym_eig(const Eigen::MatrixXd& a) {
    require(a.rows() == a.cols(), "sym_eig: matrix must be square");
    require(a.allFinite(), "sym_eig: non-finite entry");
    EigenDecomposition out;
    if (a.rows() == 0) return out;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::ComputeEigenvectors);
    if (es.info() != Eigen::Success) throw NumericalError("sym_eig: QR iteration did not converge");
    out.values = es.eigenvalues();
    out.vectors = es.eigenvectors();
    detail::fix_signs(out.vectors);
    return out;
}

inline EigenDecomposition sym_eig(const SymMatrix& a) { return sym_eig(a.matrix()); }

// Eigenvalues only, for oracles and spectra checks.
inline Eigen::VectorXd sym_eigvals(const Eigen::MatrixXd& a) {
    require(a.allFinite(), "sym_eigvals: non-finite entry");
    if (a.rows() == 0) return {};
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericalError("sym_eigvals: QR iteration did not converge");
    return es.eigenvalues();
}

// ---------------------------------------------------------------------------
// Quadrature

// Adaptive 31-point Gauss-Kronrod. Throws NumericalError if the error estimate
// is still above tol after the depth limit.
template <class F>
double integrate(F&& f, double lo, double hi, double tol = kTolerances.quad_rel) {
    require(lo <= hi, "integrate: lo > hi");
    require(tol > 0.0, "integrate: tol must be positive");
    if (lo == hi) return 0.0;
    double err = 0.0;
    double l1 = 0.0;
    const double val = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
        f, lo, hi, kTolerances.quad_max_depth, tol, &err, &l1);
    if (!std::isfinite(val)) throw NumericalError("integrate: non-finite result");
    const double scale = std::max(std::abs(val), l1);
    if (err > tol * scale && err > 1e3 * std::numeric_limits<double>::epsilon() * scale)
        throw NumericalError("integrate: no convergence on [" + std::to_string(lo) + ", " +
                             std::to_string(hi) + "], error estimate " + std::to_string(err));
    return val;
}

// ---------------------------------------------------------------------------
// Divergence fit  n(alpha) = a + b / (alpha_c - alpha)

struct DivergenceFit {
    double a = 0.0;
    double b = 0.0;
    double alpha_c = 0.0;
    double rss = 0.0;
};

struct FitPoint {
    double alpha;
    double n_star;
};

namespace detail {

struct LinearFit {
    double a, b, rss;
};

// Least squares for (a, b) at fixed pole location, on mean-centred data.
inline LinearFit linear_at(std::span<const FitPoint> pts, double alpha_c) {
    const double n = static_cast<double>(pts.size());
    double mx = 0.0, my = 0.0;
    for (const auto& p : pts) {
        mx += 1.0 / (alpha_c - p.alpha);
        my += p.n_star;
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (const auto& p : pts) {
        const double dx = 1.0 / (alpha_c - p.alpha) - mx;
        sxx += dx * dx;
        sxy += dx * (p.n_star - my);
    }
    const double b = sxx > 0.0 ? sxy / sxx : 0.0;
    const double a = my - b * mx;
    double rss = 0.0;
    for (const auto& p : pts) {
        const double r = p.n_star - a - b / (alpha_c - p.alpha);
        rss += r * r;
    }
    return {a, b, rss};
}

inline double rss_of(std::span<const FitPoint> pts, double a, double b, double c) {
    double rss = 0.0;
    for (const auto& p : pts) {
        const double r = p.n_star - a - b / (c - p.alpha);
        rss += r * r;
    }
    return rss;
}

} // namespace detail

// Grid scan of the pole distance d = alpha_c - max(alpha) on a geometric grid,
// golden-section refinement in log d, then a Gauss-Newton polish of (a, b,
// alpha_c). Throws NumericalError when the data carry no resolvable pole.
inline DivergenceFit fit_divergence(std::span<const FitPoint> pts,
                                    const Tolerances& tol = kTolerances) {
    require(pts.size() >= 4, "fit_divergence: need at least 4 points");
    std::vector<double> alphas;
    for (const auto& p : pts) {
        require(std::isfinite(p.alpha) && std::isfinite(p.n_star), "fit_divergence: non-finite point");
        alphas.push_back(p.alpha);
    }
    std::sort(alphas.begin(), alphas.end());
    require(std::adjacent_find(alphas.begin(), alphas.end()) == alphas.end(),
            "fit_divergence: alpha values must be distinct");
    const double amax = alphas.back();
    const double span_alpha = alphas.back() - alphas.front();
    const double window = tol.fit_window;

    const double d_min = 1e-6 * std::max(span_alpha, 1e-3);
    const double log_lo = std::log(d_min);
    const double log_hi = std::log(window);
    const std::size_t ng = tol.fit_grid;

    auto rss_at_log = [&](double ld) { return detail::linear_at(pts, amax + std::exp(ld)).rss; };

    std::size_t best = 0;
    double best_rss = std::numeric_limits<double>::infinity();
    std::vector<double> grid(ng + 1);
    for (std::size_t i = 0; i <= ng; ++i) {
        grid[i] = log_lo + (log_hi - log_lo) * static_cast<double>(i) / static_cast<double>(ng);
        const double r = rss_at_log(grid[i]);
        if (r < best_rss) {
            best_rss = r;
            best = i;
        }
    }
    if (best == ng)
        throw NumericalError("fit_divergence: no pole within the search window (data show no divergence)");
    if (best == 0)
        throw NumericalError("fit_divergence: pole collapses onto the largest sampled alpha");

    // golden section in log d
    double lo = grid[best - 1], hi = grid[best + 1];
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
    double f1 = rss_at_log(x1), f2 = rss_at_log(x2);
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++it) {
        if (f1 <= f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = rss_at_log(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = rss_at_log(x2);
        }
    }
    double c = amax + std::exp(0.5 * (lo + hi));
    auto lin = detail::linear_at(pts, c);
    double a = lin.a, b = lin.b, rss = lin.rss;

    // Gauss-Newton on the full three-parameter model
    for (int it = 0; it < 50; ++it) {
        Eigen::MatrixXd jac(static_cast<Eigen::Index>(pts.size()), 3);
        Eigen::VectorXd res(static_cast<Eigen::Index>(pts.size()));
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const double inv = 1.0 / (c - pts[i].alpha);
            const auto k = static_cast<Eigen::Index>(i);
            res(k) = pts[i].n_star - a - b * inv;
            jac(k, 0) = 1.0;
            jac(k, 1) = inv;
            jac(k, 2) = -b * inv * inv;
        }
        const Eigen::VectorXd step = jac.colPivHouseholderQr().solve(res);
        if (!step.allFinite()) break;
        double lam = 1.0;
        bool accepted = false;
        for (int k = 0; k < 30; ++k, lam *= 0.5) {
            const double cn = c + lam * step(2);
            if (cn <= amax) continue;
            const double an = a + lam * step(0), bn = b + lam * step(1);
            const double rn = detail::rss_of(pts, an, bn, cn);
            if (rn <= rss) {
                const bool small = std::abs(lam * step(2)) <= tol.fit_rel_tol * std::abs(c);
                a = an;
                b = bn;
                c = cn;
                rss = rn;
                accepted = !small;
                break;
            }
        }
        if (!accepted) break;
    }

    if (!(b > 0.0))
        throw NumericalError("fit_divergence: non-positive amplitude b = " + std::to_string(b) +
                             " (data not diverging toward larger alpha)");
    if (!(c > amax)) throw NumericalError("fit_divergence: pole not beyond sampled alphas");
    return {a, b, c, rss};
}

} // namespace sbnrg::numerics
