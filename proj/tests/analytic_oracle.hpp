#pragma once

// Test-only analytic oracle: boundary potentials of a two-layer concentric
// disc (inner radius a, conductivities sigma_in / sigma_out, tank radius R)
// driven by point electrodes on the boundary. Independent of the FEM path.

#include <cmath>
#include <numbers>

namespace oracle {

// Series sum S(psi) = sum_n (kappa_n / n) cos(n psi) with
// kappa_n = (1 + mu q^{2n}) / (1 - mu q^{2n}).
// kappa_n -> 1 geometrically, so split off the closed-form log kernel.
inline double layered_kernel(double psi, double mu, double q) {
    double s = -std::log(2.0 * std::fabs(std::sin(0.5 * psi)));
    double q2n = 1.0;
    for (int n = 1; n <= 400; ++n) {
        q2n *= q * q;
        double corr = 2.0 * mu * q2n / (1.0 - mu * q2n);
        s += corr / n * std::cos(n * psi);
    }
    return s;
}

// Potential at boundary angle phi for unit-scaled source/sink at theta_s/theta_k.
inline double boundary_potential(double phi, double theta_s, double theta_k, double current,
                                 double sigma_out, double sigma_in, double a, double R) {
    double mu = (sigma_out - sigma_in) / (sigma_out + sigma_in);
    double q = a / R;
    return current / (std::numbers::pi * sigma_out) *
           (layered_kernel(phi - theta_s, mu, q) - layered_kernel(phi - theta_k, mu, q));
}

}  // namespace oracle
