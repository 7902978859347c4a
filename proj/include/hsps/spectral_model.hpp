#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include "hsps/errors.hpp"
#include "hsps/units.hpp"

namespace hsps {

struct PumpSpec {
    double center_wavelength_nm = 1538.19;
    double bandwidth_sigma = 1.0e11;  // rad/s
    double peak_power_w = 1.0;
    double repetition_rate_hz = 41.0e6;

    double center_omega() const { return units::wavelength_nm_to_omega(center_wavelength_nm); }
};

struct FiberSpec {
    double length_m = 20.0;
    double nonlinear_coefficient = 11.0;  // 1/(W km)
    double transmission = 1.0;
};

// Squared modulus of the SFWM gain amplitude. The global phase of G never
// enters a counting statistic, so the amplitude is taken real.
struct GainParameter {
    double g_squared = 0.0;

    double amplitude() const { return std::sqrt(g_squared); }
};

// Gaussian amplitude filter exp(-(w - w0)^2 / (2 sigma^2)) with peak
// transmission `transmission`.
struct FilterSpec {
    double center_wavelength_nm = 1544.53;
    double sigma = 1.0e11;  // rad/s
    double transmission = 1.0;

    double center_omega() const { return units::wavelength_nm_to_omega(center_wavelength_nm); }
};

struct DetectorSpec {
    double efficiency = 1.0;
    double dark_count_prob = 0.0;  // per gate
    int gate_divisor = 1;          // gates on every Nth pump pulse
    int dead_time_gates = 0;       // gates vetoed after a click
    double gate_width_ns = 2.5;
};

// Passive losses outside filter and fiber (coupler excess, splices).
struct ChannelExtras {
    double signal_extra = 1.0;
    double idler_extra = 1.0;
};

enum DetectorIndex : std::size_t { herald = 0, signal_arm_2 = 1, signal_arm_3 = 2 };

struct SourceConfig {
    PumpSpec pump;
    FiberSpec fiber;
    GainParameter gain;
    FilterSpec signal_filter;
    FilterSpec idler_filter;
    std::array<DetectorSpec, 3> detectors;  // SPD1 (idler/herald), SPD2, SPD3
    ChannelExtras channels;
    double energy_tolerance = 0.01;  // allowed filter-center detuning, in units of sigma_p
};

struct NormalizedBandwidths {
    double sigma_s_prime = 1.0;
    double sigma_i_prime = 1.0;
};

// Throws ValidationError on hard violations; returns soft warnings (energy
// conservation detuning, gain above the low-gain guard).
std::vector<std::string> validate(const SourceConfig& config);

NormalizedBandwidths normalize(const SourceConfig& config);

// Full passive transmission of each channel: filter peak x fiber x extras.
// The 50/50 split is not included.
double signal_transmission(const SourceConfig& config);
double idler_transmission(const SourceConfig& config);

// (w_s0 + w_i0 - 2 w_p0) / sigma_p for the configured filter centers.
double energy_detuning(const SourceConfig& config);

inline constexpr double low_gain_warning_threshold = 0.05;

// Pump-envelope joint spectral function.
template <typename Scalar>
Scalar phi(Scalar omega_s, Scalar omega_i, const PumpSpec& pump)
{
    const Scalar sigma = Scalar(pump.bandwidth_sigma);
    const Scalar detuning = omega_s + omega_i - Scalar(2) * Scalar(pump.center_omega());
    return std::exp(-detuning * detuning / (Scalar(4) * sigma * sigma));
}

// Same function with frequency sums already expressed in units of sigma_p.
template <typename Scalar>
Scalar phi_normalized(Scalar detuning_sum)
{
    return std::exp(-detuning_sum * detuning_sum / Scalar(4));
}

template <typename Scalar>
Scalar filter_amplitude(Scalar omega, const FilterSpec& filter)
{
    const Scalar offset = omega - Scalar(filter.center_omega());
    const Scalar sigma = Scalar(filter.sigma);
    return std::exp(-offset * offset / (Scalar(2) * sigma * sigma));
}

template <typename Scalar>
Scalar filter_amplitude_normalized(Scalar offset, Scalar sigma_prime)
{
    return std::exp(-offset * offset / (Scalar(2) * sigma_prime * sigma_prime));
}

// Partial sums of the broadband Bogoliubov kernels. h1 has an exact
// identity (delta) part for n = 0 that is not representable pointwise, so
// only its smooth n >= 1 part is returned and `h1_identity` flags the delta.
struct BogoliubovKernels {
    std::complex<double> h1_smooth;
    std::complex<double> h2;
    bool h1_identity = true;
    double h1_residual = 0.0;  // |last included h1 term|
    double h2_residual = 0.0;  // |last included h2 term|
    int n_terms = 0;
};

inline constexpr int default_kernel_terms = 8;

// h1(omega_a, omega_b) and h2(omega_a, omega_b), series truncated at n_terms.
// For h1 both arguments lie in the same band; for h2 they are conjugate.
BogoliubovKernels bogoliubov_kernels(double omega_a, double omega_b, const GainParameter& gain,
                                     const PumpSpec& pump, int n_terms = default_kernel_terms);

// Individual series terms (n-th) of h1 (n >= 1) and h2 (n >= 0).
double h1_term(int n, double omega_a, double omega_b, const GainParameter& gain, const PumpSpec& pump);
std::complex<double> h2_term(int n, double omega_a, double omega_b, const GainParameter& gain,
                             const PumpSpec& pump);

// Defect of [a_out(w), a_out^dag(w')] from the delta function when the
// output field is truncated at first order in G:
//   |G|^2 / sigma_p^2 * int dw'' phi(w, w'') phi(w', w'')
// evaluated by trapezoidal quadrature. Units 1/(rad/s).
double low_gain_commutator_defect(double omega, double omega_prime, const GainParameter& gain,
                                  const PumpSpec& pump, int quadrature_points = 2001);

}  // namespace hsps
