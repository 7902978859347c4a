#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>

#include <Eigen/Dense>
#include <json.hpp>

#include "hsps/spectral_model.hpp"

// Gated-detector tallies and the estimators an experimenter applies to them.
namespace hsps::counting {

// Raw counts over a run. `live_*` count gates in which every listed detector
// was armed (not dead); same-slot rates are normalized to them. An accidental
// pairs an SPD1 click with the next armed gate of SPD2 (SPD3).
struct TallyCounters {
    std::int64_t gates = 0;
    std::int64_t live_1 = 0, live_2 = 0, live_3 = 0;
    std::int64_t live_12 = 0, live_13 = 0, live_23 = 0, live_123 = 0;
    std::int64_t singles_1 = 0, singles_2 = 0, singles_3 = 0;
    std::int64_t coinc_12 = 0, coinc_13 = 0, coinc_23 = 0;
    std::int64_t acc_12 = 0, acc_13 = 0;
    std::int64_t triples_123 = 0;

    TallyCounters& operator+=(const TallyCounters& other);
    friend TallyCounters operator+(TallyCounters a, const TallyCounters& b) { return a += b; }
    friend bool operator==(const TallyCounters&, const TallyCounters&) = default;

    // Every live count set to `gates`: the no-dead-time reading of old records.
    void assume_always_live();
    // Throws ValidationError when a count exceeds what its constituents allow.
    void check() const;
};

nlohmann::json to_json(const TallyCounters& t);
TallyCounters tallies_from_json(const nlohmann::json& doc);

// Per-gate rate estimates: index order of `Rates::values`.
enum RateIndex : int { r_p1 = 0, r_p2, r_p3, r_p12, r_p13, r_p23, r_p123, r_a12, r_a13, rate_count };

using RateVector = Eigen::Matrix<double, rate_count, 1>;
using RateCovariance = Eigen::Matrix<double, rate_count, rate_count>;

struct Rates {
    RateVector values;
    RateCovariance covariance;
};

// Rates and their approximate multinomial covariance. Needs live gates on
// every detector.
Rates rates(const TallyCounters& t);

struct EstimatorResult {
    double value = 0.0;
    double std_error = 0.0;
    std::int64_t n_effective = 0;
};

nlohmann::json to_json(const EstimatorResult& e);

// Delta-method propagation with a central-difference gradient.
template <int N>
EstimatorResult propagate(const std::function<double(const Eigen::Matrix<double, N, 1>&)>& f,
                          const Eigen::Matrix<double, N, 1>& x, const Eigen::Matrix<double, N, N>& cov,
                          std::int64_t n_effective)
{
    EstimatorResult r;
    r.value = f(x);
    r.n_effective = n_effective;
    Eigen::Matrix<double, N, 1> grad;
    for (int k = 0; k < N; ++k) {
        const double h = 1e-6 * std::max(std::abs(x[k]), 1e-12);
        Eigen::Matrix<double, N, 1> up = x;
        Eigen::Matrix<double, N, 1> down = x;
        up[k] += h;
        down[k] -= h;
        grad[k] = (f(up) - f(down)) / (2.0 * h);
    }
    r.std_error = std::sqrt(std::max(0.0, grad.dot(cov * grad)));
    return r;
}

// Signal-arm efficiency 1/2 eta_s eta_2 that turns eta_D into H.
double heralding_denominator(const SourceConfig& config);

struct Estimates {
    EstimatorResult car;
    EstimatorResult g_c2;
    EstimatorResult heralding;  // H
    EstimatorResult eta_d;
};

nlohmann::json to_json(const Estimates& e);

// CAR = p12 / a12, g_c2 = p123 p1 / (p13 p12), eta_D = (p12 - a12) / p1,
// H = eta_D / (1/2 eta_s eta_2). Throws ModelValidityError when a
// denominator tally is zero.
Estimates estimate(const TallyCounters& tallies, const SourceConfig& config);
Estimates estimate(const TallyCounters& tallies, double heralding_denominator);

// The estimators as plain functions of a rate vector.
double car_of(const RateVector& r);
double g_c2_of(const RateVector& r);
double eta_d_of(const RateVector& r);

}  // namespace hsps::counting
