#pragma once

// Brute-force exact diagonalization of a spin coupled to a handful of
// oscillator modes in star geometry:
//
//   H = -(delta/2) sx + (epsilon/2) sz + sum_n w_n a_n^dag a_n
//       + (sz/2) sum_n g_n (a_n + a_n^dag)
//
// Dense construction in the full occupation basis; no truncation other than
// the per-mode cutoff. Zero bias splits the matrix into two parity blocks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sbnrg/errors.hpp"
#include "sbnrg/numerics.hpp"

namespace sbnrg::oracle {

struct Mode {
    double frequency;
    double coupling;
};

inline constexpr std::size_t kMaxModes = 6;
inline constexpr double kMaxDimension = 1e6;
inline constexpr double kDegenerateGround = 1e-10;
inline constexpr double kConvergenceTol = 1e-10;
inline constexpr int kConvergenceStep = 5;

struct EdProblem {
    double delta = 0.0;
    double epsilon = 0.0;
    std::vector<Mode> modes;
    int n_max = 10;                 // occupations 0 .. n_max per mode
    bool check_convergence = true;  // repeat at n_max + 5

    double dimension(int cutoff) const {
        return 2.0 * std::pow(static_cast<double>(cutoff + 1), static_cast<double>(modes.size()));
    }

    void validate() const {
        require(std::isfinite(delta) && std::isfinite(epsilon), "oracle: delta and epsilon must be finite");
        require(modes.size() <= kMaxModes, "oracle: at most 6 modes");
        require(n_max >= 0, "oracle: n_max must be >= 0");
        for (const auto& m : modes)
            require(std::isfinite(m.frequency) && m.frequency > 0.0 && std::isfinite(m.coupling),
                    "oracle: mode frequencies must be > 0");
        require(dimension(n_max) <= kMaxDimension, "oracle: Hilbert space dimension exceeds 1e6");
    }
};

struct EdResult {
    double ground_energy = 0.0;
    double gap = 0.0;
    double sigma_z = 0.0;
    double sigma_x = 0.0;
    bool converged = false;
    std::vector<double> spectrum; // ascending
};

namespace detail {

struct Spectrum {
    Eigen::VectorXd values;
    double sigma_z = 0.0;
    double sigma_x = 0.0;
};

// Basis index = spin * prod(n_max+1) + mixed-radix occupation, with the spin
// in the sigma_x eigenbasis (0 = |+x>, 1 = |-x>). At zero bias the parity
// sigma_x (-1)^(total occupation) is conserved and the two parity blocks are
// diagonalized separately; otherwise the whole matrix is one block.
inline Spectrum solve(const EdProblem& p, int cutoff, bool with_observables = true) {
    const std::size_t nm = p.modes.size();
    const int base = cutoff + 1;
    std::int64_t nb = 1;
    for (std::size_t i = 0; i < nm; ++i) nb *= base;
    const auto dim = static_cast<Eigen::Index>(2 * nb);

    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXi sector(dim);
    std::vector<int> occ(nm);
    for (std::int64_t state = 0; state < nb; ++state) {
        std::int64_t rest = state;
        int total = 0;
        for (std::size_t i = 0; i < nm; ++i) {
            occ[i] = static_cast<int>(rest % base);
            total += occ[i];
            rest /= base;
        }
        double boson = 0.0;
        for (std::size_t i = 0; i < nm; ++i) boson += p.modes[i].frequency * occ[i];
        for (int s = 0; s < 2; ++s) {
            const double sx = s == 0 ? 1.0 : -1.0;
            const Eigen::Index row = s * nb + state;
            const Eigen::Index flip = (1 - s) * nb + state;
            h(row, row) = boson - 0.5 * p.delta * sx;
            h(row, flip) = 0.5 * p.epsilon; // sz flips the sigma_x label
            sector(row) = p.epsilon == 0.0 ? (s == 0) == (total % 2 == 0) : 1;
            // (sz/2) g_i (a_i + a_i^dag): spin flip with one quantum more
            std::int64_t stride = 1;
            for (std::size_t i = 0; i < nm; ++i) {
                if (occ[i] + 1 < base) {
                    const Eigen::Index col = (1 - s) * nb + state + stride;
                    const double v = 0.5 * p.modes[i].coupling * std::sqrt(occ[i] + 1.0);
                    h(col, row) += v;
                    h(row, col) += v;
                }
                stride *= base;
            }
        }
    }

    // per-sector diagonalization, eigenvalues merged ascending
    struct Block {
        std::vector<Eigen::Index> idx;
        numerics::EigenDecomposition eig;
    };
    std::vector<Block> blocks(2);
    for (Eigen::Index i = 0; i < dim; ++i) blocks[static_cast<std::size_t>(sector(i))].idx.push_back(i);
    std::vector<std::pair<double, std::pair<std::size_t, Eigen::Index>>> levels;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        auto& blk = blocks[b];
        const auto n = static_cast<Eigen::Index>(blk.idx.size());
        if (n == 0) continue;
        Eigen::MatrixXd sub(n, n);
        for (Eigen::Index r = 0; r < n; ++r)
            for (Eigen::Index c = 0; c < n; ++c) sub(r, c) = h(blk.idx[r], blk.idx[c]);
        if (with_observables)
            blk.eig = numerics::sym_eig(sub);
        else
            blk.eig.values = numerics::sym_eigvals(sub);
        for (Eigen::Index c = 0; c < n; ++c) levels.push_back({blk.eig.values(c), {b, c}});
    }
    std::stable_sort(levels.begin(), levels.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });

    Spectrum out;
    out.values.resize(dim);
    for (Eigen::Index i = 0; i < dim; ++i) out.values(i) = levels[static_cast<std::size_t>(i)].first;
    if (!with_observables) return out;

    Eigen::Index g = 1;
    while (g < dim && out.values(g) - out.values(0) <= kDegenerateGround) ++g;
    Eigen::MatrixXd ground = Eigen::MatrixXd::Zero(dim, g);
    for (Eigen::Index k = 0; k < g; ++k) {
        const auto [b, c] = levels[static_cast<std::size_t>(k)].second;
        const auto& blk = blocks[b];
        for (std::size_t r = 0; r < blk.idx.size(); ++r)
            ground(blk.idx[r], k) = blk.eig.vectors(static_cast<Eigen::Index>(r), c);
    }

    // sigma_z pairs |+x, n> with |-x, n>; sigma_x is diagonal
    auto sz_between = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
        return a.head(nb).dot(b.tail(nb)) + a.tail(nb).dot(b.head(nb));
    };
    auto sx_of = [&](const Eigen::VectorXd& v) { return v.head(nb).squaredNorm() - v.tail(nb).squaredNorm(); };

    Eigen::VectorXd v = ground.col(0);
    if (g > 1) {
        // extremal |<sz>| combination inside the ground multiplet
        Eigen::MatrixXd szg(g, g);
        for (Eigen::Index i = 0; i < g; ++i)
            for (Eigen::Index j = 0; j < g; ++j) szg(i, j) = sz_between(ground.col(i), ground.col(j));
        const auto mix = numerics::sym_eig(szg);
        Eigen::Index best = 0;
        for (Eigen::Index i = 1; i < g; ++i)
            if (std::abs(mix.values(i)) > std::abs(mix.values(best)) * (1.0 + 1e-12)) best = i;
        v = ground * mix.vectors.col(best);
    }
    out.sigma_z = sz_between(v, v);
    out.sigma_x = sx_of(v);
    return out;
}

} // namespace detail

inline EdResult exact_diag(const EdProblem& p) {
    p.validate();
    const auto s = detail::solve(p, p.n_max);
    EdResult r;
    r.ground_energy = s.values(0);
    r.gap = s.values.size() > 1 ? s.values(1) - s.values(0) : 0.0;
    r.sigma_z = s.sigma_z;
    r.sigma_x = s.sigma_x;
    r.spectrum.assign(s.values.data(), s.values.data() + s.values.size());
    if (p.check_convergence) {
        const int bigger = p.n_max + kConvergenceStep;
        if (p.modes.empty()) {
            r.converged = true;
        } else if (p.dimension(bigger) <= kMaxDimension) {
            const auto s2 = detail::solve(p, bigger, false);
            r.converged = std::abs(s2.values(0) - r.ground_energy) < kConvergenceTol;
        }
    }
    return r;
}

// Delta = 0 ground energy: each mode displaced by g / (2 w).
inline double polaron_energy(const std::vector<Mode>& modes) {
    double e = 0.0;
    for (const auto& m : modes) {
        require(std::isfinite(m.frequency) && m.frequency > 0.0, "polaron_energy: frequencies must be > 0");
        e -= m.coupling * m.coupling / (4.0 * m.frequency);
    }
    return e;
}

} // namespace sbnrg::oracle
