#pragma once

#include <cmath>

#include "fvdecay/errors.hpp"
#include "fvdecay/potential.hpp"

namespace fvdecay {

enum class AnsatzKind {
    Symmetric,       // bubble profile even in the radius parameter R
    Asymmetric,      // same wall shape without the even-ness in R
    RDependentWidth, // wall width shrinking as sigma^2/(|R|+sigma)
};

namespace detail {
// sech^2 without overflow for large arguments.
inline double sech2(double x) {
    const double e = std::exp(-std::abs(x));
    const double s = 2.0 * e / (1.0 + e * e);
    return s * s;
}
} // namespace detail

/// One-parameter family of radial field profiles phi_R(r) interpolating
/// between the false vacuum (R = 0) and a true-vacuum bubble of radius
/// |R|. The family, its wall width sigma and the space dimension d fix
/// the reduced dynamics of R entirely.
///
/// All variants satisfy phi_0(r) = phi_false and phi_R(r) -> phi_false
/// (exponentially) as r -> infinity. For the symmetric variants the
/// R-derivative at exactly R = 0 is defined as the magnitude of its
/// two-sided limit, which keeps (d_R phi)^2 continuous there.
class AnsatzFamily {
  public:
    AnsatzFamily(AnsatzKind kind, ScalarPotential potential, double sigma,
                 unsigned dim)
        : kind_(kind), potential_(std::move(potential)), sigma_(sigma),
          dim_(dim) {
        if (!(sigma > 0.0))
            throw ValidationError("AnsatzFamily: sigma must be positive");
        if (dim < 1 || dim > 3)
            throw ValidationError("AnsatzFamily: dim must be 1, 2 or 3");
        half_gap_ = 0.5 * (potential_.phi_true() - potential_.phi_false());
    }

    AnsatzKind kind() const { return kind_; }
    const ScalarPotential &potential() const { return potential_; }
    double sigma() const { return sigma_; }
    unsigned dim() const { return dim_; }
    bool even_in_radius() const { return kind_ != AnsatzKind::Asymmetric; }

    AnsatzFamily with_sigma(double sigma) const {
        return AnsatzFamily(kind_, potential_, sigma, dim_);
    }

    double value(double R, double r) const {
        switch (kind_) {
        case AnsatzKind::Symmetric:
            return wall_value(std::abs(R), r, 1.0 / sigma_);
        case AnsatzKind::Asymmetric:
            return wall_value(R, r, 1.0 / sigma_);
        case AnsatzKind::RDependentWidth:
            return wall_value(std::abs(R), r, inv_width(R));
        }
        return 0.0;
    }

    double deriv_r(double R, double r) const {
        switch (kind_) {
        case AnsatzKind::Symmetric:
            return wall_dr(std::abs(R), r, 1.0 / sigma_);
        case AnsatzKind::Asymmetric:
            return wall_dr(R, r, 1.0 / sigma_);
        case AnsatzKind::RDependentWidth:
            return wall_dr(std::abs(R), r, inv_width(R));
        }
        return 0.0;
    }

    double deriv_R(double R, double r) const {
        switch (kind_) {
        case AnsatzKind::Symmetric: {
            const double g = wall_dR(std::abs(R), r, 1.0 / sigma_);
            return R < 0.0 ? -g : g;
        }
        case AnsatzKind::Asymmetric:
            return wall_dR(R, r, 1.0 / sigma_);
        case AnsatzKind::RDependentWidth: {
            const double a = inv_width(R);
            const double da = 1.0 / (sigma_ * sigma_);
            const double bp = r + std::abs(R);
            const double bm = r - std::abs(R);
            const double g =
                half_gap_ * (detail::sech2(a * bp) * (da * bp + a) -
                             detail::sech2(a * bm) * (da * bm - a));
            return R < 0.0 ? -g : g;
        }
        }
        return 0.0;
    }

    /// Radius beyond which |phi_R(r) - phi_false| stays below
    /// 1e-12 * |phi_true - phi_false|, plus a 10-sigma margin. Integrals
    /// over r can be truncated there.
    double tail_cutoff(double R) const {
        const double absR = std::abs(R);
        const double step = 0.25 * sigma_;
        const double threshold =
            1e-12 * std::abs(potential_.phi_true() - potential_.phi_false());
        double r = absR;
        while (std::abs(value(R, r) - potential_.phi_false()) >= threshold)
            r += step;
        return r + 10.0 * sigma_;
    }

  private:
    double inv_width(double R) const {
        return (std::abs(R) + sigma_) / (sigma_ * sigma_);
    }

    double wall_value(double R, double r, double a) const {
        return potential_.phi_false() +
               half_gap_ * (std::tanh(a * (r + R)) - std::tanh(a * (r - R)));
    }

    double wall_dr(double R, double r, double a) const {
        return half_gap_ * a *
               (detail::sech2(a * (r + R)) - detail::sech2(a * (r - R)));
    }

    double wall_dR(double R, double r, double a) const {
        return half_gap_ * a *
               (detail::sech2(a * (r + R)) + detail::sech2(a * (r - R)));
    }

    AnsatzKind kind_;
    ScalarPotential potential_;
    double sigma_;
    unsigned dim_;
    double half_gap_;
};

} // namespace fvdecay
