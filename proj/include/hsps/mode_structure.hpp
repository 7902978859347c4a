#pragma once

#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "hsps/oracle.hpp"
#include "hsps/sweep.hpp"

// Spectral-mode structure of the filtered two-photon state.
namespace hsps::modes {

enum class Band { signal, idler };

inline constexpr double default_single_mode_threshold = 1.05;

struct ModeReport {
    std::vector<double> schmidt_coefficients;  // descending, sum 1
    double schmidt_number = 1.0;               // 1 / sum lambda^2
    double purity = 1.0;                       // 1 / K of the filtered JSA
    double k_marginal_signal = 1.0;
    double k_marginal_idler = 1.0;
    double g2_signal_pred = 2.0;  // 1 + 1/K_marginal
    double g2_idler_pred = 2.0;
    bool single_mode_heralding = false;  // idler (herald) band
    bool single_mode_heralded = false;   // signal band
    double threshold = default_single_mode_threshold;
};

// f_s(w_s) f_i(w_i) phi(w_s, w_i) sampled on the grids with quadrature
// weights, scaled to unit Frobenius norm.
Eigen::MatrixXd filtered_jsa(const SourceConfig& config, const oracle::GridPair& grids);

// SVD of a normalized kernel. Single-mode flags use the joint Schmidt number
// for both bands; mode_report refines them with the marginal numbers.
ModeReport schmidt(const Eigen::MatrixXd& kernel, double threshold = default_single_mode_threshold);

// Effective mode number (sum mu)^2 / sum mu^2 of the filtered auto-correlation
// kernel of one band, with the conjugate band left unfiltered.
double marginal_mode_number(const SourceConfig& config, Band band, const oracle::GridPair& grids);

ModeReport mode_report(const SourceConfig& config, const oracle::GridPair& grids,
                       double threshold = default_single_mode_threshold);
ModeReport mode_report(const SourceConfig& config);

nlohmann::json to_json(const ModeReport& report);

// Narrow-band-filter strategies for making heralded photons single mode:
// A narrows the herald (idler) band, B narrows the heralded (signal) band.
enum class Strategy { narrow_idler, narrow_signal };

std::string strategy_name(Strategy s);

struct StrategyPoint {
    Strategy strategy = Strategy::narrow_idler;
    double sigma_free = 0;
    double sigma_s_prime = 0;
    double sigma_i_prime = 0;
    double car = 0;
    double g_c2 = 0;
    double heralding = 0;
};

struct IndistinguishabilityReport {
    double p_pair = 0;
    double fixed_sigma = 0.3;
    std::vector<StrategyPoint> points;  // all of A, then all of B
    StrategyPoint current_a;            // each strategy at the config's free bandwidth
    StrategyPoint current_b;
    int lower_g_c2_wins_a = 0;  // sweep points where A has the lower g_c2
    int higher_h_wins_a = 0;    // sweep points where A has the higher H
    Strategy preferred = Strategy::narrow_idler;
};

// g_c2 (approximate form) and H for both strategies at fixed P_pair.
IndistinguishabilityReport indistinguishability_report(const SourceConfig& config, double p_pair,
                                                       double fixed_sigma = 0.3,
                                                       const SweepRange& range = {0.3, 3.0, 0.05});

nlohmann::json to_json(const IndistinguishabilityReport& report);
void write_strategy_csv(std::ostream& out, const IndistinguishabilityReport& report);

}  // namespace hsps::modes
