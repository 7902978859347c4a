#include "hsps/spectral_model.hpp"

#include <fmt/format.h>

#include "hsps/log.hpp"

namespace hsps {

namespace {

void require(bool condition, const char* message)
{
    if (!condition) {
        throw ValidationError(message);
    }
}

double factorial(int n)
{
    return std::tgamma(static_cast<double>(n) + 1.0);
}

}  // namespace

std::vector<std::string> validate(const SourceConfig& config)
{
    std::vector<std::string> warnings;

    const auto& pump = config.pump;
    require(pump.center_wavelength_nm > 0, "pump.center_wavelength must be positive");
    require(pump.bandwidth_sigma > 0, "pump.bandwidth_sigma must be positive");
    require(pump.peak_power_w > 0, "pump.peak_power must be positive");
    require(pump.repetition_rate_hz > 0, "pump.repetition_rate must be positive");
    require(pump.bandwidth_sigma < 0.1 * pump.center_omega(),
            "pump bandwidth must be much smaller than its center frequency (ratio < 0.1)");

    require(config.fiber.length_m > 0, "fiber.length must be positive");
    require(config.fiber.nonlinear_coefficient > 0, "fiber.nonlinear_coefficient must be positive");
    require(config.fiber.transmission > 0 && config.fiber.transmission <= 1,
            "fiber.transmission must lie in (0, 1]");

    require(config.gain.g_squared >= 0 && std::isfinite(config.gain.g_squared),
            "gain.g_squared must be finite and non-negative");
    if (config.gain.g_squared > low_gain_warning_threshold) {
        warnings.push_back(fmt::format("|G|^2 = {} exceeds the low-gain guard {}; closed forms lose accuracy",
                                       config.gain.g_squared, low_gain_warning_threshold));
    }

    for (const auto* filter : {&config.signal_filter, &config.idler_filter}) {
        require(filter->center_wavelength_nm > 0, "filter center wavelength must be positive");
        require(filter->sigma > 0, "filter sigma must be positive");
        require(filter->transmission > 0 && filter->transmission <= 1, "filter transmission must lie in (0, 1]");
    }

    for (const auto& det : config.detectors) {
        require(det.efficiency >= 0 && det.efficiency <= 1, "detector efficiency must lie in [0, 1]");
        require(det.dark_count_prob >= 0 && det.dark_count_prob < 1,
                "detector dark_count_prob must lie in [0, 1)");
        require(det.gate_divisor >= 1, "detector gate_divisor must be >= 1");
        require(det.dead_time_gates >= 0, "detector dead_time_gates must be >= 0");
        require(det.gate_width_ns > 0, "detector gate_width must be positive");
    }

    require(config.channels.signal_extra > 0 && config.channels.signal_extra <= 1,
            "channels.signal_extra must lie in (0, 1]");
    require(config.channels.idler_extra > 0 && config.channels.idler_extra <= 1,
            "channels.idler_extra must lie in (0, 1]");
    require(config.energy_tolerance >= 0, "energy tolerance must be non-negative");

    const double detuning = energy_detuning(config);
    if (std::abs(detuning) > config.energy_tolerance) {
        warnings.push_back(fmt::format(
            "filter centers violate energy conservation by {:.4g} sigma_p (tolerance {:.4g}); "
            "closed forms assume symmetric centers",
            detuning, config.energy_tolerance));
    }

    for (const auto& w : warnings) {
        logger().warn("{}", w);
    }
    return warnings;
}

NormalizedBandwidths normalize(const SourceConfig& config)
{
    if (!(config.pump.bandwidth_sigma > 0) || !(config.signal_filter.sigma > 0) || !(config.idler_filter.sigma > 0)) {
        throw ValidationError("bandwidths must be positive");
    }
    return {config.signal_filter.sigma / config.pump.bandwidth_sigma,
            config.idler_filter.sigma / config.pump.bandwidth_sigma};
}

double signal_transmission(const SourceConfig& config)
{
    return config.signal_filter.transmission * config.fiber.transmission * config.channels.signal_extra;
}

double idler_transmission(const SourceConfig& config)
{
    return config.idler_filter.transmission * config.fiber.transmission * config.channels.idler_extra;
}

double energy_detuning(const SourceConfig& config)
{
    const double sum = config.signal_filter.center_omega() + config.idler_filter.center_omega();
    return (sum - 2.0 * config.pump.center_omega()) / config.pump.bandwidth_sigma;
}

double h1_term(int n, double omega_a, double omega_b, const GainParameter& gain, const PumpSpec& pump)
{
    if (n < 1) {
        throw ValidationError("h1 smooth terms start at n = 1");
    }
    const double sigma = pump.bandwidth_sigma;
    const double two_n = 2.0 * n;
    const double diff = omega_a - omega_b;
    const double coeff = std::pow(gain.g_squared, n) / (std::sqrt(two_n) * factorial(2 * n));
    return coeff / (2.0 * std::sqrt(std::numbers::pi) * sigma) * std::exp(-diff * diff / (4.0 * sigma * sigma * two_n));
}

std::complex<double> h2_term(int n, double omega_a, double omega_b, const GainParameter& gain, const PumpSpec& pump)
{
    if (n < 0) {
        throw ValidationError("h2 terms start at n = 0");
    }
    const double sigma = pump.bandwidth_sigma;
    const double odd = 2.0 * n + 1.0;
    const double detuning = omega_a + omega_b - 2.0 * pump.center_omega();
    const double coeff = std::pow(gain.g_squared, n) * gain.amplitude() / (std::sqrt(odd) * factorial(2 * n + 1));
    return coeff / (2.0 * std::sqrt(std::numbers::pi) * sigma)
           * std::exp(-detuning * detuning / (4.0 * sigma * sigma * odd));
}

BogoliubovKernels bogoliubov_kernels(double omega_a, double omega_b, const GainParameter& gain, const PumpSpec& pump,
                                     int n_terms)
{
    if (n_terms < 1) {
        throw ValidationError("n_terms must be >= 1");
    }
    BogoliubovKernels k;
    k.n_terms = n_terms;
    for (int n = 1; n < n_terms; ++n) {
        const double term = h1_term(n, omega_a, omega_b, gain, pump);
        k.h1_smooth += term;
        k.h1_residual = std::abs(term);
    }
    for (int n = 0; n < n_terms; ++n) {
        const auto term = h2_term(n, omega_a, omega_b, gain, pump);
        k.h2 += term;
        k.h2_residual = std::abs(term);
    }
    return k;
}

double low_gain_commutator_defect(double omega, double omega_prime, const GainParameter& gain, const PumpSpec& pump,
                                  int quadrature_points)
{
    if (quadrature_points < 3) {
        throw ValidationError("quadrature needs at least 3 points");
    }
    const double sigma = pump.bandwidth_sigma;
    const double s1 = (omega - pump.center_omega()) / sigma;
    const double s2 = (omega_prime - pump.center_omega()) / sigma;
    // Integrand in v = (w'' - w_p0)/sigma_p peaks at v = -(s1 + s2)/2.
    const double center = -0.5 * (s1 + s2);
    const double half_width = 16.0;
    const double h = 2.0 * half_width / (quadrature_points - 1);
    double sum = 0.0;
    for (int k = 0; k < quadrature_points; ++k) {
        const double v = center - half_width + k * h;
        const double w = (k == 0 || k == quadrature_points - 1) ? 0.5 : 1.0;
        sum += w * phi_normalized(s1 + v) * phi_normalized(s2 + v);
    }
    // dw'' = sigma dv and the kernel carries G / sigma_p per factor.
    return gain.g_squared / sigma * sum * h;
}

}  // namespace hsps
