#pragma once

// Phase qubit capacitively coupled to a transmission line: SI-unit circuit
// description -> junction spectrum -> dimensionless spin-boson parameters.
// All SI <-> reduced-unit conversion lives in this header.

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "sbnrg/errors.hpp"
#include "sbnrg/model.hpp"

namespace sbnrg::circuit {

// CODATA 2018 (exact SI definitions).
struct PhysicalConstants {
    static constexpr double h = 6.62607015e-34;         // J s
    static constexpr double h_bar = h / (2.0 * std::numbers::pi);
    static constexpr double e_charge = 1.602176634e-19; // C
    static constexpr double flux_quantum = h / (2.0 * e_charge); // Wb
};

struct CircuitParams {
    double c_j = 0.0;  // junction capacitance, F
    double c_0 = 0.0;  // coupling capacitance, F
    double i_0 = 0.0;  // critical current, A
    double i_b = 0.0;  // dc bias current, A
    double l = 0.0;    // inductance per length, H/m
    double c = 0.0;    // capacitance per length, F/m

    double total_capacitance() const { return c_j + c_0; }
    double impedance() const { return std::sqrt(l / c); }

    void validate() const {
        require(std::isfinite(c_j) && c_j > 0.0, "circuit: c_j must be > 0");
        require(std::isfinite(c_0) && c_0 >= 0.0, "circuit: c_0 must be >= 0");
        require(std::isfinite(i_0) && i_0 > 0.0, "circuit: i_0 must be > 0");
        require(std::isfinite(i_b) && i_b > 0.0, "circuit: i_b must be > 0");
        require(i_b < i_0, "circuit: bias current must stay below the critical current (i_b < i_0)");
        require(std::isfinite(l) && l > 0.0, "circuit: l must be > 0");
        require(std::isfinite(c) && c > 0.0, "circuit: c must be > 0");
    }
};

// Which tunneling energy enters alpha and the mode couplings.
enum class DeltaConvention {
    omega10,      // Delta = hbar * omega_10 = 0.95 hbar * omega_p
    half_omega_p, // Delta = hbar * omega_p / 2
};

inline const char* to_string(DeltaConvention c) {
    return c == DeltaConvention::omega10 ? "omega10" : "half_omega_p";
}

inline DeltaConvention parse_delta_convention(const std::string& s) {
    if (s == "omega10") return DeltaConvention::omega10;
    if (s == "half_omega_p") return DeltaConvention::half_omega_p;
    throw InvalidArgument("unknown delta_convention '" + s + "' (expected omega10 or half_omega_p)");
}

inline constexpr double kOmega10OverOmegaP = 0.95;
inline constexpr double kDefaultEjEcRatio = 100.0;

struct QubitSpectrum {
    double omega_p = 0.0;       // rad/s
    double omega_10 = 0.0;      // rad/s
    double barrier = 0.0;       // Delta U, J
    double delta = 0.0;         // hbar * omega_10, J
    double e_j = 0.0;           // J
    double e_c = 0.0;           // J
    double barrier_ratio = 0.0; // Delta U / (hbar omega_p)
    bool phase_regime_ok = true; // E_J / E_C above the configured ratio
    std::vector<std::string> warnings;

    double tunneling_energy(DeltaConvention conv) const {
        return conv == DeltaConvention::omega10 ? delta
                                                : 0.5 * PhysicalConstants::h_bar * omega_p;
    }
};

inline QubitSpectrum qubit_spectrum(const CircuitParams& p, double min_ej_ec = kDefaultEjEcRatio) {
    p.validate();
    using K = PhysicalConstants;
    constexpr double pi = std::numbers::pi;
    const double cap = p.total_capacitance();
    const double x = 1.0 - p.i_b / p.i_0;

    QubitSpectrum q;
    q.barrier = (2.0 * std::numbers::sqrt2 * p.i_0 * K::flux_quantum / (3.0 * pi)) * std::pow(x, 1.5);
    q.omega_p = std::pow(2.0, 0.25) * std::sqrt(2.0 * pi * p.i_0 / (K::flux_quantum * cap)) *
                std::pow(x, 0.25);
    q.omega_10 = kOmega10OverOmegaP * q.omega_p;
    q.delta = K::h_bar * q.omega_10;
    q.e_j = K::flux_quantum * p.i_0 / (2.0 * pi);
    q.e_c = K::e_charge * K::e_charge / (2.0 * cap);
    q.barrier_ratio = q.omega_p > 0.0 ? q.barrier / (K::h_bar * q.omega_p) : 0.0;
    const double ratio = q.e_j / q.e_c;
    q.phase_regime_ok = ratio > min_ej_ec;
    if (!q.phase_regime_ok)
        q.warnings.push_back("E_J/E_C = " + std::to_string(ratio) + " is not >> 1 (threshold " +
                             std::to_string(min_ej_ec) + ")");
    return q;
}

inline constexpr double kAlphaWindowLo = 0.2;
inline constexpr double kAlphaWindowHi = 3.0;

struct SpinBosonMapping {
    SpinBosonParams params;
    QubitSpectrum spectrum;
    DeltaConvention convention = DeltaConvention::omega10;
    std::vector<std::string> warnings;
};

// alpha = (Delta / (pi hbar)) (C_0^2 / C) sqrt(l / c).
inline double dissipation_strength(const CircuitParams& p, const QubitSpectrum& q, DeltaConvention conv) {
    const double omega_delta = q.tunneling_energy(conv) / PhysicalConstants::h_bar;
    return omega_delta / std::numbers::pi * (p.c_0 * p.c_0 / p.total_capacitance()) * p.impedance();
}

inline SpinBosonMapping map_to_spin_boson(const CircuitParams& p, double omega_c,
                                          DeltaConvention conv = DeltaConvention::omega10,
                                          double min_ej_ec = kDefaultEjEcRatio) {
    SpinBosonMapping m;
    m.spectrum = qubit_spectrum(p, min_ej_ec);
    m.convention = conv;
    require(std::isfinite(omega_c), "map_to_spin_boson: omega_c must be finite");
    if (!(omega_c > m.spectrum.omega_10))
        throw InvalidArgument("map_to_spin_boson: cutoff omega_c must exceed omega_10 = " +
                              std::to_string(m.spectrum.omega_10) + " rad/s");
    m.params.alpha = dissipation_strength(p, m.spectrum, conv);
    m.params.delta = m.spectrum.tunneling_energy(conv) / (PhysicalConstants::h_bar * omega_c);
    m.params.epsilon = 0.0;
    m.params.s = 1.0;
    m.params.omega_c = omega_c;
    m.warnings = m.spectrum.warnings;
    if (m.params.alpha < kAlphaWindowLo || m.params.alpha > kAlphaWindowHi)
        m.warnings.push_back("alpha = " + std::to_string(m.params.alpha) +
                             " lies outside the experimentally accessible window [0.2, 3.0]");
    return m;
}

// Static microwave drive amplitude -> bias energy epsilon (J).
inline double microwave_bias(const CircuitParams& p, double i_uw) {
    const auto q = qubit_spectrum(p);
    require(std::isfinite(i_uw), "microwave_bias: drive amplitude must be finite");
    return std::sqrt(PhysicalConstants::h_bar / (2.0 * q.omega_10 * p.total_capacitance())) * i_uw;
}

struct LineMode {
    double omega;  // rad/s
    double lambda; // J
};

struct LineModes {
    std::vector<LineMode> modes; // n = 1..n_c
    double length = 0.0;         // m

    // Mode spacing pi / (L sqrt(l c)).
    double spacing = 0.0;
};

inline LineModes finite_line_modes(const CircuitParams& p, double length, int n_c,
                                   DeltaConvention conv = DeltaConvention::omega10) {
    require(std::isfinite(length) && length > 0.0, "finite_line_modes: L must be > 0");
    require(n_c >= 1, "finite_line_modes: n_c must be >= 1");
    const auto q = qubit_spectrum(p);
    const double delta = q.tunneling_energy(conv);
    const double cap = p.total_capacitance();
    LineModes out;
    out.length = length;
    out.spacing = std::numbers::pi / (length * std::sqrt(p.l * p.c));
    out.modes.reserve(static_cast<std::size_t>(n_c));
    for (int n = 1; n <= n_c; ++n) {
        const double w = n * out.spacing;
        const double lam =
            p.c_0 * std::sqrt(2.0 * delta * PhysicalConstants::h_bar * w / (cap * length * p.c));
        out.modes.push_back({w, lam});
    }
    return out;
}

// Modes in reduced units: frequency / omega_c and coupling / (hbar omega_c).
struct ReducedMode {
    double frequency;
    double coupling;
};

inline std::vector<ReducedMode> to_reduced(const LineModes& lm, double omega_c) {
    require(omega_c > 0.0, "to_reduced: omega_c must be > 0");
    std::vector<ReducedMode> out;
    out.reserve(lm.modes.size());
    for (const auto& m : lm.modes)
        out.push_back({m.omega / omega_c, m.lambda / (PhysicalConstants::h_bar * omega_c)});
    return out;
}

} // namespace sbnrg::circuit
