#include <doctest.h>

#include <cmath>
#include <numbers>

#include "hsps/config_io.hpp"
#include "hsps/spectral_model.hpp"

using namespace hsps;
using doctest::Approx;

namespace {

PumpSpec unit_pump()
{
    PumpSpec p;
    p.center_wavelength_nm = 1538.19;
    p.bandwidth_sigma = 1.0e11;
    return p;
}

}  // namespace

TEST_CASE("phi is one on the energy-conserving diagonal")
{
    const auto pump = unit_pump();
    const double wp = pump.center_omega();
    CHECK(phi(wp + 3e11, wp - 3e11, pump) == Approx(1.0).epsilon(1e-14));
    CHECK(phi_normalized(0.0) == 1.0);
}

TEST_CASE("phi two sigma off the diagonal")
{
    const auto pump = unit_pump();
    const double wp = pump.center_omega();
    // Only the sum detuning matters.
    const double value = phi(wp + 1e11, wp + 1e11, pump);
    CHECK(value == Approx(std::exp(-1.0)).epsilon(1e-9));
    CHECK(value == Approx(0.367879).epsilon(1e-6));
    CHECK(phi_normalized(2.0) == Approx(0.367879).epsilon(1e-6));
    CHECK(phi_normalized(-2.0) == phi_normalized(2.0));
}

TEST_CASE("filter amplitude")
{
    FilterSpec f{1544.53, 2.0e11, 1.0};
    const double w0 = f.center_omega();
    CHECK(filter_amplitude(w0, f) == 1.0);
    CHECK(filter_amplitude(w0 + f.sigma, f) == Approx(0.606531).epsilon(1e-6));
    CHECK(filter_amplitude(w0 - f.sigma, f) == Approx(filter_amplitude(w0 + f.sigma, f)).epsilon(1e-9));
    CHECK(filter_amplitude_normalized(0.5, 0.5) == Approx(std::exp(-0.5)));
}

TEST_CASE("normalized bandwidths")
{
    SourceConfig c;
    c.pump.bandwidth_sigma = 1e11;

    c.signal_filter.sigma = 1e11;
    c.idler_filter.sigma = 1e11;
    auto n = normalize(c);
    CHECK(n.sigma_s_prime == 1.0);
    CHECK(n.sigma_i_prime == 1.0);

    c.signal_filter.sigma = 0.3e11;
    c.idler_filter.sigma = 0.3e11;
    n = normalize(c);
    CHECK(n.sigma_s_prime == Approx(0.3));
    CHECK(n.sigma_i_prime == Approx(0.3));

    c.signal_filter.sigma = 2e11;
    c.idler_filter.sigma = 0.5e11;
    n = normalize(c);
    CHECK(n.sigma_s_prime == Approx(2.0));
    CHECK(n.sigma_i_prime == Approx(0.5));

    c.idler_filter.sigma = 0.0;
    CHECK_THROWS_AS(normalize(c), ValidationError);
}

TEST_CASE("fwhm to sigma conversion")
{
    for (double fwhm : {0.1, 0.3, 0.6, 1.1, 5.0}) {
        const double s = units::fwhm_nm_to_sigma(fwhm, 1531.9);
        CHECK(units::sigma_to_fwhm_nm(s, 1531.9) == Approx(fwhm).epsilon(1e-12));
    }
    // 2 pi c dlambda / lambda^2 / 2.35482 by hand.
    const double by_hand = 2.0 * 3.14159265358979 * 2.99792458e8 * 0.6e-9 / (1531.9e-9 * 1531.9e-9) / 2.354820045;
    CHECK(units::fwhm_nm_to_sigma(0.6, 1531.9) == Approx(by_hand).epsilon(1e-9));
    CHECK(by_hand == Approx(2.0452e11).epsilon(1e-4));
    CHECK_THROWS_AS(units::fwhm_nm_to_sigma(-1.0, 1531.9), ValidationError);
    CHECK(units::omega_to_wavelength_nm(units::wavelength_nm_to_omega(1538.19)) == Approx(1538.19).epsilon(1e-14));
}

TEST_CASE("h2 vanishes without gain")
{
    const auto pump = unit_pump();
    const double wp = pump.center_omega();
    const auto k = bogoliubov_kernels(wp + 1e11, wp - 2e11, GainParameter{0.0}, pump);
    CHECK(k.h2 == std::complex<double>(0.0, 0.0));
    CHECK(k.h1_smooth == std::complex<double>(0.0, 0.0));
    CHECK(k.h1_identity);
}

TEST_CASE("h2 leading term")
{
    const auto pump = unit_pump();
    const double wp = pump.center_omega();
    const GainParameter gain{0.01};
    const double expected = 0.1 / (2.0 * std::sqrt(std::numbers::pi) * pump.bandwidth_sigma);
    CHECK(h2_term(0, wp + 4e11, wp - 4e11, gain, pump).real() == Approx(expected).epsilon(1e-12));
    CHECK(h2_term(0, wp + 4e11, wp - 4e11, gain, pump).imag() == 0.0);
    CHECK_THROWS_AS(h2_term(-1, wp, wp, gain, pump), ValidationError);
    CHECK_THROWS_AS(h1_term(0, wp, wp, gain, pump), ValidationError);
}

TEST_CASE("kernel series terms shrink faster than |G|^2 / 2")
{
    const auto pump = unit_pump();
    const double wp = pump.center_omega();
    const double sp = pump.bandwidth_sigma;
    for (double g2 : {0.01, 0.1, 0.5, 0.9}) {
        const GainParameter gain{g2};
        for (double d : {-2.0, -1.0, 0.0, 0.5, 2.0}) {
            for (int n = 0; n < 6; ++n) {
                const double a = std::abs(h2_term(n, wp + 0.5 * d * sp, wp + 0.5 * d * sp, gain, pump));
                const double b = std::abs(h2_term(n + 1, wp + 0.5 * d * sp, wp + 0.5 * d * sp, gain, pump));
                CHECK(b / a < g2 / 2.0);
            }
            for (int n = 1; n < 6; ++n) {
                const double a = h1_term(n, wp + d * sp, wp, gain, pump);
                const double b = h1_term(n + 1, wp + d * sp, wp, gain, pump);
                CHECK(b / a < g2 / 2.0);
            }
        }
        const auto k = bogoliubov_kernels(wp + 0.3 * sp, wp - 0.1 * sp, gain, pump, 4);
        CHECK(k.n_terms == 4);
        CHECK(k.h2_residual == Approx(std::abs(h2_term(3, wp + 0.3 * sp, wp - 0.1 * sp, gain, pump))));
    }
}

TEST_CASE("low-gain commutator defect")
{
    const auto pump = unit_pump();
    const double wp = pump.center_omega();
    const double sp = pump.bandwidth_sigma;

    // Gaussian integral in closed form: G^2/sigma_p sqrt(2 pi) exp(-(s1 - s2)^2 / 8).
    const double s1 = 0.7;
    const double s2 = -0.4;
    const GainParameter gain{0.02};
    const double expected = 0.02 / sp * std::sqrt(2.0 * std::numbers::pi) * std::exp(-(s1 - s2) * (s1 - s2) / 8.0);
    CHECK(low_gain_commutator_defect(wp + s1 * sp, wp + s2 * sp, gain, pump) == Approx(expected).epsilon(1e-10));

    // Linear in |G|^2: log-log slope one.
    const double lo = low_gain_commutator_defect(wp, wp, GainParameter{1e-4}, pump);
    const double hi = low_gain_commutator_defect(wp, wp, GainParameter{1e-2}, pump);
    const double slope = std::log(hi / lo) / std::log(1e-2 / 1e-4);
    CHECK(slope == Approx(1.0).epsilon(0.02));

    CHECK_THROWS_AS(low_gain_commutator_defect(wp, wp, gain, pump, 2), ValidationError);
}

TEST_CASE("validate")
{
    auto c = demo_config();
    CHECK(validate(c).empty());

    SUBCASE("gain above the low-gain guard warns")
    {
        c.gain.g_squared = 0.2;
        const auto w = validate(c);
        REQUIRE(w.size() == 1);
        CHECK(w[0].find("low-gain") != std::string::npos);
    }
    SUBCASE("asymmetric filter centers warn")
    {
        c.signal_filter.center_wavelength_nm = 1546.0;
        const auto w = validate(c);
        REQUIRE(w.size() == 1);
        CHECK(w[0].find("energy conservation") != std::string::npos);
    }
    SUBCASE("hard violations")
    {
        auto bad = c;
        bad.detectors[1].efficiency = 1.5;
        CHECK_THROWS_AS(validate(bad), ValidationError);
        bad = c;
        bad.gain.g_squared = -1.0;
        CHECK_THROWS_AS(validate(bad), ValidationError);
        bad = c;
        bad.detectors[0].gate_divisor = 0;
        CHECK_THROWS_AS(validate(bad), ValidationError);
        bad = c;
        bad.pump.bandwidth_sigma = 0.5 * bad.pump.center_omega();
        CHECK_THROWS_AS(validate(bad), ValidationError);
        bad = c;
        bad.fiber.transmission = 0.0;
        CHECK_THROWS_AS(validate(bad), ValidationError);
    }
}

TEST_CASE("ideal config is symmetric about the pump")
{
    const auto c = ideal_config(0.3, 2.0, 0.01);
    CHECK(std::abs(energy_detuning(c)) < 1e-6);
    const auto n = normalize(c);
    CHECK(n.sigma_s_prime == Approx(0.3));
    CHECK(n.sigma_i_prime == Approx(2.0));
    CHECK(signal_transmission(c) == 1.0);
    CHECK(idler_transmission(c) == 1.0);
    CHECK(validate(c).empty());
}

TEST_CASE("config json round trip")
{
    const auto c = demo_config();
    const auto doc = config_to_json(c);
    const auto back = config_from_json(doc);
    CHECK(back.pump.bandwidth_sigma == Approx(c.pump.bandwidth_sigma).epsilon(1e-12));
    CHECK(back.signal_filter.sigma == Approx(c.signal_filter.sigma).epsilon(1e-12));
    CHECK(back.idler_filter.center_wavelength_nm == c.idler_filter.center_wavelength_nm);
    CHECK(back.detectors[2].dark_count_prob == c.detectors[2].dark_count_prob);
    CHECK(back.detectors[0].dead_time_gates == 26);
    CHECK(back.detectors[1].gate_divisor == 16);
    CHECK(back.channels.idler_extra == c.channels.idler_extra);
    CHECK(back.energy_tolerance == c.energy_tolerance);
}

TEST_CASE("config json errors name the key")
{
    auto doc = config_to_json(demo_config());

    SUBCASE("missing key")
    {
        doc["filters"]["idler"].erase("center_nm");
        try {
            config_from_json(doc);
            FAIL("expected ValidationError");
        } catch (const ValidationError& e) {
            CHECK(std::string(e.what()).find("filters.idler.center_nm") != std::string::npos);
        }
    }
    SUBCASE("wrong type")
    {
        doc["gain"]["g_squared"] = "big";
        CHECK_THROWS_AS(config_from_json(doc), ValidationError);
    }
    SUBCASE("detector count")
    {
        doc["detectors"].erase(2);
        CHECK_THROWS_AS(config_from_json(doc), ValidationError);
    }
    SUBCASE("sigma instead of fwhm")
    {
        doc["filters"]["signal"].erase("fwhm_nm");
        doc["filters"]["signal"]["sigma_rad_s"] = 2.5e11;
        CHECK(config_from_json(doc).signal_filter.sigma == 2.5e11);
    }
    SUBCASE("missing file")
    {
        CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ValidationError);
    }
}
