#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "hsps/errors.hpp"
#include "hsps/spectral_model.hpp"

// Closed-form per-pulse counting statistics of the low-gain heralded source.
// Everything here works in normalized units: bandwidths relative to sigma_p,
// |G|^2, and dimensionless efficiencies. The 50/50 coupler factor lives in
// the prefactors, not in the efficiencies.
namespace hsps::analytic {

namespace detail {

template <typename Scalar>
Scalar checked_probability(Scalar value, const char* what)
{
    if (!(value <= Scalar(1))) {
        throw ModelValidityError(std::string(what) + " exceeds 1: outside the low-gain regime");
    }
    return value;
}

}  // namespace detail

// Herald (idler) single-count probability per pulse.
template <typename Scalar>
Scalar p1(Scalar g2, Scalar eta_i, Scalar eta_1, Scalar sig_i_prime)
{
    const Scalar value = std::numbers::sqrt2_v<Scalar> * std::numbers::pi_v<Scalar> * g2 * eta_i * eta_1 * sig_i_prime;
    return detail::checked_probability(value, "P1");
}

// Single-count probability of one signal arm behind the 50/50 coupler.
template <typename Scalar>
Scalar p2_or_p3(Scalar g2, Scalar eta_s, Scalar eta_det, Scalar sig_s_prime)
{
    const Scalar value = std::numbers::pi_v<Scalar> / std::numbers::sqrt2_v<Scalar> * g2 * eta_s * eta_det * sig_s_prime;
    return detail::checked_probability(value, "P2/P3");
}

// Fraction of heralded pairs whose signal photon passes the signal filter.
template <typename Scalar>
Scalar xi_s(Scalar sig_s_prime, Scalar sig_i_prime)
{
    return sig_s_prime / std::sqrt(Scalar(2) + sig_i_prime * sig_i_prime + sig_s_prime * sig_s_prime);
}

// Collection efficiency for two-pair events. Can exceed 1 for very broad
// signal filters; callers flag that as a validity warning.
template <typename Scalar>
Scalar xi_s_prime(Scalar sig_s_prime, Scalar sig_i_prime)
{
    return std::numbers::sqrt2_v<Scalar> * sig_s_prime
           / std::sqrt(Scalar(4) + Scalar(2) * sig_i_prime * sig_i_prime + sig_s_prime * sig_s_prime);
}

// Same-slot two-fold coincidence: accidental product plus true pairs.
template <typename Scalar>
Scalar coincidence_same_slot(Scalar p1, Scalar p2, Scalar eta_s, Scalar eta_det, Scalar xi_s)
{
    return p1 * p2 + Scalar(0.5) * eta_s * eta_det * p1 * xi_s;
}

template <typename Scalar>
Scalar car(Scalar p_pair, Scalar sig_s_prime, Scalar sig_i_prime)
{
    if (!(p_pair > 0)) {
        throw ModelValidityError("CAR diverges for P_pair <= 0");
    }
    return Scalar(1) + sig_s_prime * sig_i_prime
                           / (p_pair * (Scalar(2) + sig_s_prime * sig_s_prime + sig_i_prime * sig_i_prime));
}

// Unconditional g2 of one filtered band.
template <typename Scalar>
Scalar g_s2(Scalar sig_prime)
{
    return Scalar(1) + Scalar(1) / std::sqrt(Scalar(1) + sig_prime * sig_prime / Scalar(2));
}

template <typename Scalar>
struct TripleTerms {
    Scalar accidental{};   // P1 P2 P3
    Scalar pair_single{};  // a pair plus an uncorrelated signal photon
    Scalar bunching{};     // thermal bunching of the heralded signal band

    Scalar total() const { return accidental + pair_single + bunching; }
};

template <typename Scalar>
TripleTerms<Scalar> triple_coincidence(Scalar p1, Scalar p2, Scalar p3, Scalar eta_s, Scalar eta_2, Scalar eta_3,
                                       Scalar xi_s, Scalar xi_s_prime, Scalar g_s2)
{
    TripleTerms<Scalar> t;
    t.accidental = p1 * p2 * p3;
    const Scalar arms = (eta_3 * p2 + eta_2 * p3) / Scalar(2);
    t.pair_single = eta_s * xi_s * p1 * arms;
    t.bunching = (g_s2 - Scalar(1)) * (p1 * p2 * p3 + eta_s * xi_s_prime * p1 * arms);
    return t;
}

template <typename Scalar>
Scalar g_c2_approx(Scalar g_s2, Scalar car)
{
    if (!(car >= Scalar(1))) {
        throw ModelValidityError("g_c2 approximation needs CAR >= 1");
    }
    return g_s2 / car * (Scalar(2) - Scalar(1) / car);
}

template <typename Scalar>
struct Heralding {
    Scalar eta_d{};  // conditional detection efficiency of one signal arm
    Scalar h{};      // heralding efficiency at the fiber output
};

template <typename Scalar>
Heralding<Scalar> heralding(Scalar eta_s, Scalar eta_det, Scalar xi_s)
{
    return {Scalar(0.5) * eta_s * eta_det * xi_s, xi_s};
}

// Pairs per pulse normalized to unit herald-channel efficiency.
template <typename Scalar>
Scalar p_pair(Scalar p1, Scalar eta_i, Scalar eta_1, Scalar xi_s)
{
    if (!(eta_i * eta_1 > 0)) {
        throw ModelValidityError("P_pair needs a non-zero herald channel efficiency");
    }
    return p1 * xi_s / (eta_i * eta_1);
}

// |G|^2 that produces a given P_pair for the given bandwidths.
template <typename Scalar>
Scalar gain_for_p_pair(Scalar p_pair, Scalar sig_s_prime, Scalar sig_i_prime)
{
    return p_pair / (std::numbers::sqrt2_v<Scalar> * std::numbers::pi_v<Scalar> * sig_i_prime
                     * xi_s(sig_s_prime, sig_i_prime));
}

// ---------------------------------------------------------------------------
// Composition over a full source description.

struct ModelParameters {
    double g_squared = 0.0;
    double eta_signal = 1.0;  // eta_s, full passive signal channel transmission
    double eta_idler = 1.0;   // eta_i
    std::array<double, 3> eta_detector{1.0, 1.0, 1.0};
    NormalizedBandwidths bandwidths;
};

ModelParameters model_parameters(const SourceConfig& config);

// Per-pulse probabilities. p23 (the two signal arms) is g_s2 * P2 * P3.
struct CountProbabilities {
    double p1 = 0, p2 = 0, p3 = 0;
    double p12 = 0, p13 = 0, p23 = 0;
    double p12_acc = 0, p13_acc = 0;
    double p123 = 0;
};

struct FiguresOfMerit {
    double car = 0;
    double g_s2 = 0;
    double g_c2_exact = 0;
    double g_c2_approx = 0;
    double eta_d = 0;
    double heralding_eff = 0;
    double p_pair = 0;
    double xi_s = 0;
    double xi_s_prime = 0;
};

struct Report {
    ModelParameters parameters;
    CountProbabilities counts;
    TripleTerms<double> triple;
    FiguresOfMerit merit;
    std::vector<std::string> warnings;
};

Report full_report(const ModelParameters& params);
Report full_report(const SourceConfig& config);

// g_c2 from the counting-probability ratio P123 P1 / (P13 P12).
double g_c2_exact(const CountProbabilities& counts);

// Flat key/value document. Keys: sigma_s_prime, sigma_i_prime, g_squared,
// p1, p2, p3, p12, p13, p23, p12_acc, p13_acc, p123, p123_accidental,
// p123_pair_single, p123_bunching, car, g_s2, g_c2_exact, g_c2_approx,
// eta_d, heralding_eff, p_pair, xi_s, xi_s_prime, warnings.
nlohmann::json to_json(const Report& report);

}  // namespace hsps::analytic
