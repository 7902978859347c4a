#pragma once

#include <array>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hsps/analytic_stats.hpp"
#include "hsps/spectral_model.hpp"

// Brute-force numerical oracles for the closed forms: frequency-grid
// quadrature of the moment-factored counting integrals, and threshold click
// probabilities of the discretized Gaussian state.
namespace hsps::oracle {

// Uniform midpoint grid: node k sits at center - half_width + (k + 1/2) spacing
// and carries weight `spacing`.
struct FrequencyGrid {
    double band_center = 0.0;  // rad/s
    double half_width = 0.0;   // rad/s
    int n_points = 0;
    double spacing = 0.0;      // rad/s

    FrequencyGrid() = default;
    FrequencyGrid(double center, double half_width, int n_points);

    // One node of the given weight at `center`; bypasses the n >= 32 rule.
    static FrequencyGrid single_point(double center, double weight);

    double node(int k) const { return band_center - half_width + (k + 0.5) * spacing; }
    Eigen::VectorXd nodes() const;
    FrequencyGrid refined() const;  // twice the points over the same span
};

struct GridPair {
    FrequencyGrid signal;
    FrequencyGrid idler;
};

inline constexpr int min_grid_points = 256;

// Both bands get half_width = (6 max(1, s', i') + 8) sigma_p around their
// filter centers and enough points (a power of two, at least 256) to resolve
// the narrowest spectral feature.
GridPair default_grids(const SourceConfig& config);
GridPair make_grids(const SourceConfig& config, int n_points);

// Discretized second-order moments at leading order in |G|^2, with the
// channel transmissions folded in but without detector efficiencies or the
// 50/50 split. All entries are real: the gain phase is dropped.
struct CorrelationMatrices {
    Eigen::MatrixXd auto_signal;  // eta_s f_s (Phi Phi^T) f_s
    Eigen::MatrixXd auto_idler;   // eta_i f_i (Phi^T Phi) f_i
    Eigen::MatrixXd cross;        // sqrt(eta_s eta_i) f_s Phi f_i
    std::vector<std::string> warnings;
};

// Phi[k, l] = G phi(w_s,k, w_i,l) sqrt(w_k w_l) / sigma_p: the discretized
// joint amplitude in the normalization where Phi^T Phi is the idler photon
// number matrix at leading order.
Eigen::MatrixXd joint_amplitude(const SourceConfig& config, const GridPair& grids);
Eigen::VectorXd filter_profile(const FilterSpec& filter, const FrequencyGrid& grid);

CorrelationMatrices build_correlations(const SourceConfig& config, const GridPair& grids);

struct NumericCounts {
    analytic::CountProbabilities counts;
    analytic::TripleTerms<double> triple;
    double true12 = 0.0;  // P12 - P1 P2
    double true13 = 0.0;
    double signal_cross = 0.0;  // P23 - P2 P3
    double max_refinement_change = 0.0;
    int n_signal = 0;
    int n_idler = 0;
    std::vector<std::string> warnings;
};

inline constexpr double refinement_tolerance = 1e-6;

// Counting probabilities from traces of the correlation matrices. With
// `check_refinement` the grids are doubled and NumericalError is thrown if any
// output moves by more than refinement_tolerance (relative).
NumericCounts numeric_counts(const SourceConfig& config, const GridPair& grids, bool check_refinement = true);
NumericCounts numeric_counts(const SourceConfig& config);

enum class ClickOrder { low_gain, all_order };

struct GaussianClicks {
    analytic::CountProbabilities counts;
    // Exclusive click patterns; bit 0 = SPD1, bit 1 = SPD2, bit 2 = SPD3.
    std::array<double, 8> patterns{};
    double series_residual = 0.0;  // Frobenius norm of the last series term
    double min_symplectic_eigenvalue = 1.0;
    int modes = 0;
};

// Threshold-detector click probabilities of the filtered Gaussian state.
// Detector modes: SPD1 sees the idler band, SPD2 and SPD3 each see the
// signal band through one port of the 50/50 coupler. Dark counts excluded.
GaussianClicks gaussian_click_probs(const SourceConfig& config, const GridPair& grids, ClickOrder order,
                                    int n_terms = default_kernel_terms);

// Gaussian-state moments of the unfiltered output in the discretized basis.
struct OutputMoments {
    Eigen::MatrixXd n_signal;  // <a_s^dag a_s>
    Eigen::MatrixXd n_idler;   // <a_i^dag a_i>
    Eigen::MatrixXd m_si;      // <a_s a_i>
    double series_residual = 0.0;
};

OutputMoments output_moments(const Eigen::MatrixXd& joint, ClickOrder order, int n_terms = default_kernel_terms);

// Leading |G|^2 coefficients (probability / |G|^2) of the singles and the
// true-coincidence terms, extracted from low-gain click probabilities by
// Richardson extrapolation between |G|^2 and |G|^2 / 2.
struct LeadingOrder {
    double p1 = 0, p2 = 0, p3 = 0, true12 = 0, true13 = 0;
};

LeadingOrder leading_order_clicks(const SourceConfig& config, const GridPair& grids);
LeadingOrder leading_order(const NumericCounts& counts, double g_squared);

struct ComparisonRow {
    double sigma_s_prime = 0;
    double sigma_i_prime = 0;
    double g_squared = 0;
    std::string quantity;
    double analytic = 0;
    double numeric = 0;
    double rel_err = 0;
};

// Closed form vs quadrature for p1, p2, p3, true12, true13 and the three
// p123 terms.
std::vector<ComparisonRow> compare(const SourceConfig& config, const NumericCounts& numeric);
void write_comparison_csv(std::ostream& out, const std::vector<ComparisonRow>& rows);

}  // namespace hsps::oracle
