#pragma once

#include <cmath>

#include "sbnrg/errors.hpp"

namespace sbnrg {

// Dimensionless spin-boson parameters. Energies are in units of hbar*omega_c;
// omega_c itself (rad/s) is carried only for bookkeeping.
struct SpinBosonParams {
    double delta = 0.0;    // tunneling
    double epsilon = 0.0;  // static bias
    double alpha = 0.0;    // dissipation strength
    double s = 1.0;        // bath exponent
    double omega_c = 1.0;

    void validate() const {
        require(std::isfinite(delta) && delta >= 0.0, "model: delta must be >= 0");
        require(std::isfinite(epsilon), "model: epsilon must be finite");
        require(std::isfinite(alpha) && alpha >= 0.0, "model: alpha must be >= 0");
        require(s > 0.0 && s <= 1.0, "model: s must lie in (0, 1]");
        require(std::isfinite(omega_c) && omega_c > 0.0, "model: omega_c must be > 0");
    }
};

} // namespace sbnrg
