#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "hsps/spectral_model.hpp"

namespace hsps {

// JSON layout (all keys required unless marked optional):
//
//   pump      { center_nm, fwhm_nm, peak_power_w, rep_rate_hz }
//   fiber     { length_m, gamma_per_w_km, transmission }
//   gain      { g_squared }
//   filters   { signal { center_nm, fwhm_nm, transmission },
//               idler  { center_nm, fwhm_nm, transmission } }
//   detectors [ 3 x { efficiency, dark_count_prob, gate_divisor,
//                     dead_time_gates, gate_width_ns } ]   // SPD1, SPD2, SPD3
//   channels  { signal_extra, idler_extra }
//   energy_tolerance_sigma_p   (optional, default 0.01)
//
// Filters and pump may give `sigma_rad_s` instead of `fwhm_nm`.
SourceConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const SourceConfig& config);

// Reads and validates a config file; ValidationError names the offending key.
SourceConfig load_config(const std::filesystem::path& path);

// Typical experimental source: 0.3 nm pump at 1538.19 nm, 1.1/1.1 nm
// filters at 1544.53/1531.9 nm, 20/12/17 % detectors with 26-gate dead time.
SourceConfig demo_config();

// Idealized source: unit efficiencies, no dark counts, no gating, and the
// given normalized bandwidths and gain.
SourceConfig ideal_config(double sigma_s_prime, double sigma_i_prime, double g_squared);

}  // namespace hsps
