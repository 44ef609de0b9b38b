#pragma once

#include <cmath>
#include <numbers>

#include "fvdecay/errors.hpp"

namespace fvdecay {

/// Area of the unit n-sphere: 2, 2*pi, 4*pi, ... with the n=0 convention
/// set to 2 so one-dimensional integrals carry the same prefactor form.
inline double sphere_area(unsigned n) {
    if (n == 0)
        return 2.0;
    const double k = 0.5 * (static_cast<double>(n) + 1.0);
    return 2.0 * std::pow(std::numbers::pi, k) / std::tgamma(k);
}

/// Quartic scalar potential with a metastable (false) and a global (true)
/// minimum,
///
///   V(phi) = eta * (-phi^2/2 - lambda*phi^3/3 + phi^4/4) - V0,
///
/// with V0 fixed at construction so that V(phi_false) = 0. `lambda`
/// controls the asymmetry between the minima (lambda = 0 degenerates
/// them), `eta` the overall barrier scale.
class ScalarPotential {
  public:
    ScalarPotential(double eta, double lambda) : eta_(eta), lambda_(lambda) {
        if (!(eta > 0.0))
            throw ValidationError("ScalarPotential: eta must be positive");
        if (!(lambda >= 0.0))
            throw ValidationError(
                "ScalarPotential: lambda must be non-negative");
        const double disc = std::sqrt(lambda * lambda + 4.0);
        phi_false_ = 0.5 * (lambda - disc);
        phi_true_ = 0.5 * (lambda + disc);
        v_offset_ = unshifted(phi_false_);
    }

    double eta() const { return eta_; }
    double lambda() const { return lambda_; }
    double phi_false() const { return phi_false_; }
    double phi_true() const { return phi_true_; }
    double v_offset() const { return v_offset_; }

    /// V(phi), shifted so the false vacuum sits at zero energy.
    double value(double phi) const { return unshifted(phi) - v_offset_; }

    /// V'(phi) = eta * (-phi - lambda*phi^2 + phi^3).
    double deriv(double phi) const {
        return eta_ * (-phi - lambda_ * phi * phi + phi * phi * phi);
    }

    /// V''(phi) = eta * (-1 - 2*lambda*phi + 3*phi^2).
    double deriv2(double phi) const {
        return eta_ * (-1.0 - 2.0 * lambda_ * phi + 3.0 * phi * phi);
    }

  private:
    double unshifted(double phi) const {
        const double p2 = phi * phi;
        return eta_ * (-0.5 * p2 - lambda_ * p2 * phi / 3.0 + 0.25 * p2 * p2);
    }

    double eta_;
    double lambda_;
    double phi_false_;
    double phi_true_;
    double v_offset_;
};

} // namespace fvdecay
