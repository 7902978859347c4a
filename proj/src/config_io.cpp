#include "hsps/config_io.hpp"

#include <fstream>

#include <fmt/format.h>

namespace hsps {

using nlohmann::json;

namespace {

const json& child(const json& doc, const char* key, const std::string& where)
{
    if (!doc.is_object() || !doc.contains(key)) {
        throw ValidationError(fmt::format("config: missing key '{}{}'", where, key));
    }
    return doc.at(key);
}

double number(const json& doc, const char* key, const std::string& where)
{
    const json& v = child(doc, key, where);
    if (!v.is_number()) {
        throw ValidationError(fmt::format("config: '{}{}' must be a number", where, key));
    }
    return v.get<double>();
}

int integer(const json& doc, const char* key, const std::string& where)
{
    const json& v = child(doc, key, where);
    if (!v.is_number_integer()) {
        throw ValidationError(fmt::format("config: '{}{}' must be an integer", where, key));
    }
    return v.get<int>();
}

double bandwidth(const json& doc, double center_nm, const std::string& where)
{
    if (doc.contains("sigma_rad_s")) {
        return number(doc, "sigma_rad_s", where);
    }
    const double fwhm = number(doc, "fwhm_nm", where);
    if (!(fwhm > 0)) {
        throw ValidationError(fmt::format("config: '{}fwhm_nm' must be positive", where));
    }
    return units::fwhm_nm_to_sigma(fwhm, center_nm);
}

FilterSpec filter_from_json(const json& doc, const std::string& where)
{
    FilterSpec f;
    f.center_wavelength_nm = number(doc, "center_nm", where);
    if (!(f.center_wavelength_nm > 0)) {
        throw ValidationError(fmt::format("config: '{}center_nm' must be positive", where));
    }
    f.sigma = bandwidth(doc, f.center_wavelength_nm, where);
    f.transmission = number(doc, "transmission", where);
    return f;
}

json filter_to_json(const FilterSpec& f)
{
    return {{"center_nm", f.center_wavelength_nm},
            {"fwhm_nm", units::sigma_to_fwhm_nm(f.sigma, f.center_wavelength_nm)},
            {"transmission", f.transmission}};
}

}  // namespace

SourceConfig config_from_json(const json& doc)
{
    SourceConfig c;

    const json& pump = child(doc, "pump", "");
    c.pump.center_wavelength_nm = number(pump, "center_nm", "pump.");
    if (!(c.pump.center_wavelength_nm > 0)) {
        throw ValidationError("config: 'pump.center_nm' must be positive");
    }
    c.pump.bandwidth_sigma = bandwidth(pump, c.pump.center_wavelength_nm, "pump.");
    c.pump.peak_power_w = number(pump, "peak_power_w", "pump.");
    c.pump.repetition_rate_hz = number(pump, "rep_rate_hz", "pump.");

    const json& fiber = child(doc, "fiber", "");
    c.fiber.length_m = number(fiber, "length_m", "fiber.");
    c.fiber.nonlinear_coefficient = number(fiber, "gamma_per_w_km", "fiber.");
    c.fiber.transmission = number(fiber, "transmission", "fiber.");

    c.gain.g_squared = number(child(doc, "gain", ""), "g_squared", "gain.");

    const json& filters = child(doc, "filters", "");
    c.signal_filter = filter_from_json(child(filters, "signal", "filters."), "filters.signal.");
    c.idler_filter = filter_from_json(child(filters, "idler", "filters."), "filters.idler.");

    const json& detectors = child(doc, "detectors", "");
    if (!detectors.is_array() || detectors.size() != 3) {
        throw ValidationError("config: 'detectors' must be an array of exactly 3 entries (SPD1, SPD2, SPD3)");
    }
    for (std::size_t k = 0; k < 3; ++k) {
        const std::string where = fmt::format("detectors[{}].", k);
        auto& d = c.detectors[k];
        d.efficiency = number(detectors[k], "efficiency", where);
        d.dark_count_prob = number(detectors[k], "dark_count_prob", where);
        d.gate_divisor = integer(detectors[k], "gate_divisor", where);
        d.dead_time_gates = integer(detectors[k], "dead_time_gates", where);
        d.gate_width_ns = number(detectors[k], "gate_width_ns", where);
    }

    const json& channels = child(doc, "channels", "");
    c.channels.signal_extra = number(channels, "signal_extra", "channels.");
    c.channels.idler_extra = number(channels, "idler_extra", "channels.");

    if (doc.contains("energy_tolerance_sigma_p")) {
        c.energy_tolerance = number(doc, "energy_tolerance_sigma_p", "");
    }

    validate(c);
    return c;
}

json config_to_json(const SourceConfig& c)
{
    json detectors = json::array();
    for (const auto& d : c.detectors) {
        detectors.push_back({{"efficiency", d.efficiency},
                             {"dark_count_prob", d.dark_count_prob},
                             {"gate_divisor", d.gate_divisor},
                             {"dead_time_gates", d.dead_time_gates},
                             {"gate_width_ns", d.gate_width_ns}});
    }
    return {
        {"pump",
         {{"center_nm", c.pump.center_wavelength_nm},
          {"fwhm_nm", units::sigma_to_fwhm_nm(c.pump.bandwidth_sigma, c.pump.center_wavelength_nm)},
          {"peak_power_w", c.pump.peak_power_w},
          {"rep_rate_hz", c.pump.repetition_rate_hz}}},
        {"fiber",
         {{"length_m", c.fiber.length_m},
          {"gamma_per_w_km", c.fiber.nonlinear_coefficient},
          {"transmission", c.fiber.transmission}}},
        {"gain", {{"g_squared", c.gain.g_squared}}},
        {"filters", {{"signal", filter_to_json(c.signal_filter)}, {"idler", filter_to_json(c.idler_filter)}}},
        {"detectors", detectors},
        {"channels", {{"signal_extra", c.channels.signal_extra}, {"idler_extra", c.channels.idler_extra}}},
        {"energy_tolerance_sigma_p", c.energy_tolerance},
    };
}

SourceConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ValidationError(fmt::format("cannot read config file '{}'", path.string()));
    }
    json doc;
    try {
        in >> doc;
    } catch (const json::parse_error& e) {
        throw ValidationError(fmt::format("config file '{}' is not valid JSON: {}", path.string(), e.what()));
    }
    return config_from_json(doc);
}

SourceConfig demo_config()
{
    SourceConfig c;
    c.pump.center_wavelength_nm = 1538.19;
    c.pump.bandwidth_sigma = units::fwhm_nm_to_sigma(0.3, c.pump.center_wavelength_nm);
    c.pump.peak_power_w = 1.0;
    c.pump.repetition_rate_hz = 41.0e6;
    c.fiber = {20.0, 11.0, 0.70};
    c.gain.g_squared = 1.0e-3;
    c.signal_filter = {1544.53, units::fwhm_nm_to_sigma(1.1, 1544.53), 0.24};
    c.idler_filter = {1531.9, units::fwhm_nm_to_sigma(1.1, 1531.9), 0.52};
    c.detectors[0] = {0.20, 1.9e-5, 16, 26, 2.5};
    c.detectors[1] = {0.12, 2.1e-5, 16, 26, 2.5};
    c.detectors[2] = {0.17, 5.9e-5, 16, 26, 2.5};
    c.channels = {0.90, 0.90};
    // The nominal filter centers sit symmetrically about the pump to ~0.02 sigma_p.
    c.energy_tolerance = 0.05;
    return c;
}

SourceConfig ideal_config(double sigma_s_prime, double sigma_i_prime, double g_squared)
{
    SourceConfig c;
    c.pump.center_wavelength_nm = 1538.19;
    c.pump.bandwidth_sigma = units::fwhm_nm_to_sigma(0.3, c.pump.center_wavelength_nm);
    const double wp = c.pump.center_omega();
    // Symmetric filter centers 0.8 THz (~5 rad/ps) either side of the pump.
    const double detune = 2.0 * std::numbers::pi * 0.8e12;
    c.signal_filter = {units::omega_to_wavelength_nm(wp - detune), sigma_s_prime * c.pump.bandwidth_sigma, 1.0};
    c.idler_filter = {units::omega_to_wavelength_nm(wp + detune), sigma_i_prime * c.pump.bandwidth_sigma, 1.0};
    c.fiber = {20.0, 11.0, 1.0};
    c.gain.g_squared = g_squared;
    for (auto& d : c.detectors) {
        d = {1.0, 0.0, 1, 0, 2.5};
    }
    c.channels = {1.0, 1.0};
    return c;
}

}  // namespace hsps
