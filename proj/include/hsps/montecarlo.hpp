#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>

#include <json.hpp>

#include "hsps/analytic_stats.hpp"
#include "hsps/counting.hpp"

// Gate-by-gate simulation of the three gated detectors.
namespace hsps::mc {

enum class PhysicsSource { analytic, gaussian_oracle };

// Linear (Raman) and quadratic (pair) idler photon numbers per pulse at the
// fiber output: N_i = s1 P + s2 P^2 with P the average pump power in mW.
struct RamanSettings {
    double s1 = 0.0;               // photons/pulse per mW
    double s2 = 0.0;               // photons/pulse per mW^2
    double p_ave_mw = 0.0;
    double signal_fraction = 0.0;  // signal-band Raman mean relative to the idler one
};

// |G|^2 that makes the closed-form idler pair number equal s2 P^2.
double gain_for_power(double s2, double p_ave_mw, double sigma_i_prime);

struct PulseModel {
    std::array<double, 8> joint_click_dist{};  // physics only; bit 0 = SPD1, bit 1 = SPD2, bit 2 = SPD3
    analytic::CountProbabilities physics;
    double raman_idler_mean = 0.0;
    double raman_signal_mean = 0.0;
    std::array<double, 3> raman_click{};  // per-gate Raman click probability per detector
    std::array<double, 3> dark{};
    std::array<int, 3> dead_time_gates{};
    int gate_divisor = 1;
    double heralding_denominator = 1.0;  // 1/2 eta_s eta_2
    double g_squared = 0.0;

    // Click-pattern distribution with dark counts and Raman OR-ed in.
    std::array<double, 8> effective_dist() const;
};

// Exclusive pattern probabilities from the all-click probabilities
// {P1, P2, P3, P12, P13, P23, P123}. ModelValidityError if any is negative.
std::array<double, 8> pattern_distribution(const analytic::CountProbabilities& p);

// Inverse: all-click probabilities of a pattern distribution.
analytic::CountProbabilities all_click_probabilities(const std::array<double, 8>& dist);

PulseModel build_pulse_model(const SourceConfig& config, PhysicsSource source,
                             const std::optional<RamanSettings>& raman = std::nullopt);

struct SimulationOptions {
    std::int64_t chunk_gates = 1 << 16;
    int workers = 1;
    std::function<void(std::int64_t done, std::int64_t total)> progress;
};

// Tallies for the gates among pulses 0 .. n_pulses-1 (every gate_divisor-th
// pulse). Randomness depends only on (seed, pulse index), so results do not
// depend on chunk size or worker count.
counting::TallyCounters simulate(const PulseModel& model, std::int64_t n_pulses, std::uint64_t seed,
                                 const SimulationOptions& options = {});

// Noise-free expectation of each estimator under the model.
struct Prediction {
    double car = 0, g_c2 = 0, heralding = 0, eta_d = 0;
    analytic::CountProbabilities effective;
};

Prediction predict(const PulseModel& model);

// Tallies a noise-free run of `gates` always-live gates would record (each
// count rounded to the nearest integer). Dead time is ignored.
counting::TallyCounters expected_tallies(const PulseModel& model, std::int64_t gates);

nlohmann::json to_json(const PulseModel& model);
nlohmann::json to_json(const Prediction& p);

}  // namespace hsps::mc
