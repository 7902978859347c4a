#pragma once

#include <cmath>
#include <numbers>

#include "hsps/errors.hpp"

namespace hsps::units {

inline constexpr double speed_of_light = 299792458.0;  // m/s

// Ratio between the FWHM and the standard deviation of a Gaussian profile.
template <typename Scalar = double>
inline Scalar fwhm_per_sigma()
{
    return Scalar(2) * std::sqrt(Scalar(2) * std::numbers::ln2_v<Scalar>);
}

template <typename Scalar>
Scalar wavelength_nm_to_omega(Scalar wavelength_nm)
{
    if (!(wavelength_nm > 0)) {
        throw ValidationError("wavelength must be positive");
    }
    return Scalar(2) * std::numbers::pi_v<Scalar> * Scalar(speed_of_light) / (wavelength_nm * Scalar(1e-9));
}

template <typename Scalar>
Scalar omega_to_wavelength_nm(Scalar omega)
{
    if (!(omega > 0)) {
        throw ValidationError("angular frequency must be positive");
    }
    return Scalar(2) * std::numbers::pi_v<Scalar> * Scalar(speed_of_light) / omega * Scalar(1e9);
}

/// Gaussian standard deviation in angular frequency (rad/s) for a spectral
/// FWHM given in nanometres around `center_nm`.
template <typename Scalar>
Scalar fwhm_nm_to_sigma(Scalar fwhm_nm, Scalar center_nm)
{
    if (!(fwhm_nm > 0) || !(center_nm > 0)) {
        throw ValidationError("fwhm and center wavelength must be positive");
    }
    const Scalar delta_omega = Scalar(2) * std::numbers::pi_v<Scalar> * Scalar(speed_of_light) * fwhm_nm
                               / (center_nm * center_nm) * Scalar(1e9);
    return delta_omega / fwhm_per_sigma<Scalar>();
}

/// Inverse of fwhm_nm_to_sigma.
template <typename Scalar>
Scalar sigma_to_fwhm_nm(Scalar sigma, Scalar center_nm)
{
    if (!(sigma > 0) || !(center_nm > 0)) {
        throw ValidationError("sigma and center wavelength must be positive");
    }
    return sigma * fwhm_per_sigma<Scalar>() * center_nm * center_nm
           / (Scalar(2) * std::numbers::pi_v<Scalar> * Scalar(speed_of_light)) * Scalar(1e-9);
}

}  // namespace hsps::units
