#pragma once

// Bosonic NRG: spin + Wilson chain diagonalized site by site with truncation.
//
// Energies inside NrgState are rescaled, ebar = Lambda^N (E - E_ground), so the
// recorded flow is directly the plotted quantity Lambda^N E_N. Product basis at
// every step is |kept state k> (x) |occupation m>, flat index k * n_b + m.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sbnrg/bath.hpp"
#include "sbnrg/errors.hpp"
#include "sbnrg/model.hpp"
#include "sbnrg/numerics.hpp"

namespace sbnrg::nrg {

enum class BosonBasis {
    dimension,      // n_b states per site: occupations 0 .. n_b - 1
    max_occupation, // occupations 0 .. n_b
};

inline const char* to_string(BosonBasis b) {
    return b == BosonBasis::dimension ? "dimension" : "max_occupation";
}

inline BosonBasis parse_boson_basis(const std::string& s) {
    if (s == "dimension") return BosonBasis::dimension;
    if (s == "max_occupation") return BosonBasis::max_occupation;
    throw InvalidArgument("unknown n_b_meaning '" + s + "' (expected dimension or max_occupation)");
}

inline constexpr double kHoppingFloor = 1e-30;

struct NrgConfig {
    double lambda = 2.0;
    int n_s = 100;
    int n_b = 6;
    BosonBasis n_b_meaning = BosonBasis::dimension;
    int n_iter = 100;
    double degeneracy_tol = 1e-8;
    double epsilon_break = 0.0;
    int flow_levels = 20;   // <= 0 records every kept level
    int n_star = 0;         // star modes; 0 selects 2 * n_iter

    int site_dim() const { return n_b_meaning == BosonBasis::dimension ? n_b : n_b + 1; }
    int star_modes() const { return n_star > 0 ? n_star : 2 * n_iter; }

    void validate() const {
        require(std::isfinite(lambda) && lambda > 1.0, "nrg: lambda must be > 1");
        require(n_s >= 2, "nrg: n_s must be >= 2");
        require(n_b >= 2, "nrg: n_b must be >= 2");
        require(n_iter >= 1, "nrg: n_iter must be >= 1");
        require(degeneracy_tol > 0.0 && degeneracy_tol < 1e-3, "nrg: degeneracy_tol must lie in (0, 1e-3)");
        require(std::isfinite(epsilon_break) && epsilon_break >= 0.0, "nrg: epsilon_break must be >= 0");
        require(n_star == 0 || n_star >= n_iter + 5, "nrg: n_star must be >= n_iter + 5");
    }
};

struct NrgState {
    int iteration = 0;
    Eigen::VectorXd energies;   // rescaled, ascending, energies(0) == 0
    Eigen::MatrixXd b_last;     // annihilator of the most recent chain site
    Eigen::MatrixXd sigma_z;
    Eigen::MatrixXd sigma_x;
    double ground_energy = 0.0; // accumulated absolute ground energy (omega_c units)
    double scale = 1.0;         // Lambda^-N: unscaled = scale * rescaled
    double degeneracy_tol = 1e-8;
    // +-1 eigenvalues of sigma_x (-1)^(total boson number) when the bias is
    // zero and that parity is conserved; 0 otherwise.
    Eigen::VectorXi parity;

    Eigen::Index kept() const { return energies.size(); }
};

struct FlowRecord {
    int iteration;
    int kept_count;
    std::vector<double> levels; // Lambda^N E, ascending from 0
};

using NrgFlow = std::vector<FlowRecord>;

struct NrgResult {
    NrgFlow flow;
    double sigma_z_gs = 0.0;
    double sigma_x_gs = 0.0;
    double delta_p = 0.0;
    double ground_energy = 0.0;
    int iterations = 0;
    bool stopped_early = false;
    SpinBosonParams params;
    NrgConfig config;
    std::string chain_digest;
    std::vector<std::string> warnings;
};

namespace detail {

// Single-site boson annihilator in the occupation basis.
inline Eigen::MatrixXd annihilator(int dim) {
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(dim, dim);
    for (int m = 1; m < dim; ++m) b(m - 1, m) = std::sqrt(static_cast<double>(m));
    return b;
}

// Kept-block size: n_s lowest states, extended over any multiplet straddling
// the cut.
inline Eigen::Index truncation_size(const Eigen::VectorXd& e, int n_s, double tol) {
    const Eigen::Index dim = e.size();
    Eigen::Index keep = std::min<Eigen::Index>(dim, n_s);
    while (keep < dim) {
        const double edge = e(keep - 1);
        if (std::abs(e(keep) - edge) <= tol * std::max(1.0, std::abs(edge)))
            ++keep;
        else
            break;
    }
    return keep;
}

// U^T (A (x) 1) U for columns of U in the k * nb + m layout.
inline Eigen::MatrixXd project_left(const Eigen::MatrixXd& a, const Eigen::MatrixXd& u, int nb) {
    const Eigen::Index k = a.rows();
    Eigen::MatrixXd au(u.rows(), u.cols());
    for (Eigen::Index c = 0; c < u.cols(); ++c) {
        Eigen::Map<const Eigen::MatrixXd> uc(u.col(c).data(), nb, k);
        Eigen::Map<Eigen::MatrixXd> out(au.col(c).data(), nb, k);
        out.noalias() = uc * a.transpose();
    }
    return u.transpose() * au;
}

// U^T (1 (x) B) U.
inline Eigen::MatrixXd project_right(const Eigen::MatrixXd& b, const Eigen::MatrixXd& u, int nb,
                                     Eigen::Index k) {
    Eigen::MatrixXd bu(u.rows(), u.cols());
    for (Eigen::Index c = 0; c < u.cols(); ++c) {
        Eigen::Map<const Eigen::MatrixXd> uc(u.col(c).data(), nb, k);
        Eigen::Map<Eigen::MatrixXd> out(bu.col(c).data(), nb, k);
        out.noalias() = b * uc;
    }
    return u.transpose() * bu;
}

// Eigen-decomposition of h, block-diagonal in the parity labels when those
// are non-zero. Eigenvalues are merged ascending (ties keep sector order);
// eigenvectors are embedded with exact zeros outside their sector.
struct SectorEig {
    Eigen::VectorXd values;
    Eigen::MatrixXd vectors;
    Eigen::VectorXi parity;
};

inline SectorEig sector_eig(const Eigen::MatrixXd& h, const Eigen::VectorXi& labels) {
    const Eigen::Index dim = h.rows();
    std::vector<int> sectors;
    for (Eigen::Index i = 0; i < dim; ++i)
        if (std::find(sectors.begin(), sectors.end(), labels(i)) == sectors.end()) sectors.push_back(labels(i));
    std::sort(sectors.begin(), sectors.end(), std::greater<>());

    struct Entry {
        double e;
        int sector;
        Eigen::Index col;
    };
    std::vector<Entry> entries;
    std::vector<std::vector<Eigen::Index>> idx(sectors.size());
    std::vector<numerics::EigenDecomposition> parts(sectors.size());
    for (std::size_t s = 0; s < sectors.size(); ++s) {
        for (Eigen::Index i = 0; i < dim; ++i)
            if (labels(i) == sectors[s]) idx[s].push_back(i);
        const auto n = static_cast<Eigen::Index>(idx[s].size());
        Eigen::MatrixXd block(n, n);
        for (Eigen::Index a = 0; a < n; ++a)
            for (Eigen::Index b = 0; b < n; ++b) block(a, b) = h(idx[s][a], idx[s][b]);
        parts[s] = numerics::sym_eig(block);
        for (Eigen::Index c = 0; c < n; ++c) entries.push_back({parts[s].values(c), static_cast<int>(s), c});
    }
    std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.e < b.e; });

    SectorEig out;
    out.values.resize(dim);
    out.vectors = Eigen::MatrixXd::Zero(dim, dim);
    out.parity.resize(dim);
    for (Eigen::Index c = 0; c < dim; ++c) {
        const auto& en = entries[static_cast<std::size_t>(c)];
        const auto s = static_cast<std::size_t>(en.sector);
        out.values(c) = en.e;
        out.parity(c) = sectors[s];
        for (std::size_t a = 0; a < idx[s].size(); ++a)
            out.vectors(idx[s][a], c) = parts[s].vectors(static_cast<Eigen::Index>(a), en.col);
    }
    return out;
}

// Diagonalize, shift, truncate, and rotate the operators of a freshly built
// Hamiltonian on the product basis |k> (x) |m>. sz_prev/sx_prev act on the
// previous block (k_prev states); labels are the product-basis parities.
inline NrgState finalize_step(const Eigen::MatrixXd& h, const Eigen::VectorXi& labels, int n_s, int nb,
                              Eigen::Index k_prev, const Eigen::MatrixXd& sz_prev,
                              const Eigen::MatrixXd& sx_prev, double tol) {
    const auto eig = sector_eig(h, labels);
    const double e0 = eig.values(0);
    const Eigen::VectorXd shifted = eig.values.array() - e0;
    const Eigen::Index keep = truncation_size(shifted, n_s, tol);
    if (keep > 2 * static_cast<Eigen::Index>(n_s))
        throw InvalidArgument("nrg: degenerate multiplet at the truncation edge pushes the kept set to " +
                              std::to_string(keep) + " > 2 n_s");
    const Eigen::MatrixXd u = eig.vectors.leftCols(keep);

    NrgState st;
    st.energies = shifted.head(keep);
    st.energies(0) = 0.0;
    st.parity = eig.parity.head(keep);
    st.b_last = project_right(annihilator(nb), u, nb, k_prev);
    st.sigma_z = project_left(sz_prev, u, nb);
    st.sigma_x = project_left(sx_prev, u, nb);
    st.ground_energy = e0; // caller rescales and accumulates
    st.degeneracy_tol = tol;
    return st;
}

inline std::string digest(const bath::WilsonChain& chain) {
    std::uint64_t hsh = 0xcbf29ce484222325ULL;
    auto feed = [&](double x) {
        unsigned char bytes[sizeof(double)];
        std::memcpy(bytes, &x, sizeof(double));
        for (unsigned char c : bytes) {
            hsh ^= c;
            hsh *= 0x100000001b3ULL;
        }
    };
    feed(chain.c0);
    for (double x : chain.eps) feed(x);
    for (double x : chain.t) feed(x);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hsh));
    return buf;
}

} // namespace detail

// Impurity site: spin times chain site 0. The spin is written in the sigma_x
// eigenbasis (|+x>, |-x>) so that, at zero bias, the parity
// sigma_x (-1)^n is diagonal in the product basis.
inline NrgState build_initial(const SpinBosonParams& p, const bath::WilsonChain& chain, const NrgConfig& cfg,
                              std::vector<std::string>* warnings = nullptr) {
    p.validate();
    cfg.validate();
    require(!chain.empty(), "build_initial: Wilson chain has no sites");
    const int nb = cfg.site_dim();
    const double eps0 = chain.eps[0];
    if (warnings && eps0 > 0.0 && chain.c0 / eps0 > std::sqrt(static_cast<double>(nb)))
        warnings->push_back("c0/eps0 = " + std::to_string(chain.c0 / eps0) +
                            " exceeds sqrt(n_b): boson basis truncation may bias results");

    Eigen::Matrix2d sz, sx;
    sx << 1.0, 0.0, 0.0, -1.0;
    sz << 0.0, 1.0, 1.0, 0.0;
    const Eigen::MatrixXd b = detail::annihilator(nb);
    const Eigen::MatrixXd x = b + b.transpose();
    const Eigen::MatrixXd n = b.transpose() * b;
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(nb, nb);

    auto kron = [&](const Eigen::Matrix2d& s, const Eigen::MatrixXd& m) {
        Eigen::MatrixXd out(2 * nb, 2 * nb);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) out.block(i * nb, j * nb, nb, nb) = s(i, j) * m;
        return out;
    };

    const double bias = p.epsilon + cfg.epsilon_break;
    const Eigen::MatrixXd h = -0.5 * p.delta * kron(sx, id) + 0.5 * bias * kron(sz, id) +
                              eps0 * kron(Eigen::Matrix2d::Identity(), n) + 0.5 * chain.c0 * kron(sz, x);

    Eigen::VectorXi labels = Eigen::VectorXi::Zero(2 * nb);
    if (bias == 0.0)
        for (int s = 0; s < 2; ++s)
            for (int m = 0; m < nb; ++m) labels(s * nb + m) = (s == 0 ? 1 : -1) * (m % 2 == 0 ? 1 : -1);

    // The spin plays the role of the "previous block" with k = 2.
    auto st = detail::finalize_step(h, labels, cfg.n_s, nb, 2, sz, sx, cfg.degeneracy_tol);
    st.iteration = 0;
    st.scale = 1.0;
    return st;
}

// Add chain site N+1: H_{N+1} = Lambda H_N + Lambda^{N+1} (site + hopping).
inline NrgState iterate(const NrgState& st, const bath::WilsonChain& chain, const NrgConfig& cfg) {
    const auto next = static_cast<std::size_t>(st.iteration + 1);
    require(next < chain.size(), "iterate: chain has no site " + std::to_string(next));
    const int nb = cfg.site_dim();
    const Eigen::Index k = st.kept();
    const double lam = cfg.lambda;
    const double scale_up = std::pow(lam, st.iteration + 1);
    const double onsite = scale_up * chain.eps[next];
    const double hop = scale_up * chain.t[next - 1];

    const Eigen::MatrixXd b = detail::annihilator(nb);
    const Eigen::Index dim = k * nb;
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
    for (Eigen::Index i = 0; i < k; ++i)
        for (int m = 0; m < nb; ++m) h(i * nb + m, i * nb + m) = lam * st.energies(i) + onsite * m;
    // hop * (b_N^dag (x) b + b_N (x) b^dag)
    for (Eigen::Index i = 0; i < k; ++i) {
        for (Eigen::Index j = 0; j < k; ++j) {
            const double bij = st.b_last(i, j); // <i| b_N |j>
            if (bij == 0.0) continue;
            for (int m = 1; m < nb; ++m) {
                // <i, m-1| b_N (x) b^dag ... > pieces: b_N (x) b^dag couples (j, m-1) -> (i, m)
                const double v = hop * bij * std::sqrt(static_cast<double>(m));
                h(i * nb + m, j * nb + m - 1) += v;
                h(j * nb + m - 1, i * nb + m) += v;
            }
        }
    }

    Eigen::VectorXi labels(dim);
    for (Eigen::Index i = 0; i < k; ++i)
        for (int m = 0; m < nb; ++m) labels(i * nb + m) = st.parity(i) * (m % 2 == 0 ? 1 : -1);

    auto out = detail::finalize_step(h, labels, cfg.n_s, nb, k, st.sigma_z, st.sigma_x, cfg.degeneracy_tol);
    out.iteration = st.iteration + 1;
    out.scale = st.scale / lam;
    out.ground_energy = st.ground_energy + out.ground_energy * out.scale;
    return out;
}

enum class Observable { sigma_z, sigma_x };

// Ground-state expectation. A ground multiplet (levels within degeneracy_tol
// of zero) reports the member with extremal |<sigma_z>|, i.e. the eigenvector
// of sigma_z restricted to the multiplet with largest |eigenvalue|.
inline double ground_observable(const NrgState& st, Observable which) {
    Eigen::Index g = 1;
    while (g < st.kept() && st.energies(g) <= st.degeneracy_tol) ++g;
    const Eigen::MatrixXd& op = which == Observable::sigma_z ? st.sigma_z : st.sigma_x;
    if (g == 1) return op(0, 0);
    const auto eig = numerics::sym_eig(Eigen::MatrixXd(st.sigma_z.topLeftCorner(g, g)));
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < g; ++i)
        if (std::abs(eig.values(i)) > std::abs(eig.values(best)) * (1.0 + 1e-12)) best = i;
    const Eigen::VectorXd v = eig.vectors.col(best);
    return v.dot(op.topLeftCorner(g, g) * v);
}

inline double delta_p(double sigma_z_gs) {
    require(std::isfinite(sigma_z_gs) && std::abs(sigma_z_gs) <= 1.0 + 1e-9,
            "delta_p: |<sigma_z>| must not exceed 1");
    return std::min(0.5, 0.5 * std::abs(sigma_z_gs));
}

inline FlowRecord record(const NrgState& st, int flow_levels) {
    const Eigen::Index n = flow_levels > 0 ? std::min<Eigen::Index>(flow_levels, st.kept()) : st.kept();
    FlowRecord r{st.iteration, static_cast<int>(st.kept()), {}};
    r.levels.assign(st.energies.data(), st.energies.data() + n);
    return r;
}

// Chain for (p, cfg): the unit-coupling geometry with c0 scaled by sqrt(alpha);
// alpha = 0 keeps the sites and sets c0 = 0.
inline bath::WilsonChain make_chain(const SpinBosonParams& p, const NrgConfig& cfg) {
    p.validate();
    cfg.validate();
    const int n_star = std::max(cfg.star_modes(), cfg.n_iter + 5);
    return bath::with_alpha(bath::chain_geometry(p.s, cfg.lambda, n_star), p.alpha);
}

inline NrgResult run(const SpinBosonParams& p, const NrgConfig& cfg, const bath::WilsonChain& chain) {
    p.validate();
    cfg.validate();
    NrgResult res;
    res.params = p;
    res.config = cfg;
    res.chain_digest = detail::digest(chain);

    NrgState st;
    try {
        st = build_initial(p, chain, cfg, &res.warnings);
    } catch (const NumericalError& e) {
        throw NumericalError(std::string("iteration 0: ") + e.what());
    }
    res.flow.push_back(record(st, cfg.flow_levels));
    for (int n = 1; n < cfg.n_iter; ++n) {
        const auto site = static_cast<std::size_t>(n);
        if (site >= chain.size()) {
            res.stopped_early = true;
            break;
        }
        if (chain.t[site - 1] < kHoppingFloor) {
            res.stopped_early = true;
            break;
        }
        try {
            st = iterate(st, chain, cfg);
        } catch (const NumericalError& e) {
            throw NumericalError("iteration " + std::to_string(n) + ": " + e.what());
        }
        res.flow.push_back(record(st, cfg.flow_levels));
    }
    res.iterations = st.iteration + 1;
    res.ground_energy = st.ground_energy;
    res.sigma_z_gs = ground_observable(st, Observable::sigma_z);
    res.sigma_x_gs = ground_observable(st, Observable::sigma_x);
    res.delta_p = delta_p(std::clamp(res.sigma_z_gs, -1.0, 1.0));
    return res;
}

inline NrgResult run(const SpinBosonParams& p, const NrgConfig& cfg) {
    return run(p, cfg, make_chain(p, cfg));
}

} // namespace sbnrg::nrg
