#pragma once

#include <filesystem>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "hsps/counting.hpp"
#include "hsps/sweep.hpp"

// Data reduction of count records taken versus pump power.
namespace hsps::pipeline {

struct PowerPointRecord {
    double p_ave_mw = 0.0;
    counting::TallyCounters tallies;
    std::string config_id;
};

struct IngestResult {
    std::vector<PowerPointRecord> records;  // sorted by p_ave
    std::vector<std::string> warnings;
};

// CSV with mandatory header. Required columns:
//   p_ave_mw, gates, s1_counts, s2_counts, s3_counts, c12, c13, c23, acc12, acc13, t123
// Optional: live1, live2, live3, live12, live13, live23, live123 (gates in which
// the detectors were armed; default = gates) and config_id.
IngestResult ingest(std::istream& in);
IngestResult ingest(const std::filesystem::path& path);
void write_records(std::ostream& out, const std::vector<PowerPointRecord>& records);

enum class Band { idler, signal };

// N = s1 P + s2 P^2 through the origin.
struct QuadraticFit {
    double s1 = 0.0;            // photons/pulse per mW
    double s2 = 0.0;            // photons/pulse per mW^2
    double residual_rms = 0.0;  // photons/pulse
    Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero();
};

QuadraticFit fit_quadratic(const std::vector<double>& p_ave_mw, const std::vector<double>& n_per_pulse);

// Photons per pulse at the fiber output in one band: -ln of the
// dark-corrected no-click probability, divided by the channel and detector
// efficiency.
std::vector<double> photons_per_pulse(const std::vector<PowerPointRecord>& records, Band band,
                                      const SourceConfig& config);
QuadraticFit fit_quadratic(const std::vector<PowerPointRecord>& records, Band band, const SourceConfig& config);

nlohmann::json to_json(const QuadraticFit& fit);

struct CorrectionOptions {
    bool subtract_dark = false;
    double signal_fraction = 0.0;  // Raman mean in the signal band relative to the idler band
};

struct CorrectedPoint {
    double p_ave_mw = 0.0;
    counting::Estimates raw;
    counting::Estimates corrected;
    counting::EstimatorResult p_pair_raw;
    counting::EstimatorResult p_pair;
    double p1_raw = 0.0;
    double p1_corrected = 0.0;
};

// Removes the linear (Raman) background from every detection probability.
// A background click b_j on detector j is independent of the pair light, so
// the probability that a detector set S stays dark factorizes:
//   Q_meas(S) = Q_pair(S) * prod_{j in S} (1 - b_j),
// with b_1 = 1 - exp(-eta_i eta_1 s1 P) (times the dark-count factor when
// subtract_dark is set). Joint click probabilities are rebuilt from Q_pair by
// inclusion-exclusion, and accidentals are rescaled by p1 p2 (corrected over
// measured). Uncertainties include the fitted s1 variance.
std::vector<CorrectedPoint> raman_correct(const std::vector<PowerPointRecord>& records, const QuadraticFit& fit,
                                          const SourceConfig& config, const CorrectionOptions& options = {});

nlohmann::json to_json(const CorrectedPoint& point);

// Weighted straight-line fit y = intercept + slope x.
struct LineFit {
    double intercept = 0.0;
    double slope = 0.0;
    double intercept_error = 0.0;
    double slope_error = 0.0;
    double chi2 = 0.0;
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y, const std::vector<double>& sigma);

struct ContourGrid {
    double p_pair = 0.0;
    SweepRange range_s;
    SweepRange range_i;
    std::vector<double> sigma_s_values;
    std::vector<double> sigma_i_values;
    Eigen::MatrixXd car;   // rows: sigma_s', columns: sigma_i'
    Eigen::MatrixXd g_c2;  // approximate form
    Eigen::MatrixXd h;
};

inline const SweepRange default_contour_range{0.1, 3.0, 0.05};

ContourGrid sweep_contour(double p_pair, const SweepRange& range_s = default_contour_range,
                          const SweepRange& range_i = default_contour_range, int workers = 1);

// Long form: sigma_s_prime, sigma_i_prime, car, g_c2, h.
void write_contour_csv(std::ostream& out, const ContourGrid& grid);
nlohmann::json contour_metadata(const ContourGrid& grid);

}  // namespace hsps::pipeline
