#include "hsps/analytic_stats.hpp"

#include <fmt/format.h>

#include "hsps/log.hpp"

namespace hsps::analytic {

ModelParameters model_parameters(const SourceConfig& config)
{
    ModelParameters p;
    p.g_squared = config.gain.g_squared;
    p.eta_signal = signal_transmission(config);
    p.eta_idler = idler_transmission(config);
    for (std::size_t k = 0; k < 3; ++k) {
        p.eta_detector[k] = config.detectors[k].efficiency;
    }
    p.bandwidths = normalize(config);
    return p;
}

double g_c2_exact(const CountProbabilities& counts)
{
    if (!(counts.p12 > 0) || !(counts.p13 > 0)) {
        throw ModelValidityError("g_c2 needs non-zero two-fold coincidence probabilities");
    }
    return counts.p123 * counts.p1 / (counts.p13 * counts.p12);
}

Report full_report(const ModelParameters& params)
{
    const double ss = params.bandwidths.sigma_s_prime;
    const double si = params.bandwidths.sigma_i_prime;
    if (!(ss > 0) || !(si > 0)) {
        throw ValidationError("normalized bandwidths must be positive");
    }
    if (!(params.g_squared > 0)) {
        throw ModelValidityError("figures of merit need |G|^2 > 0");
    }
    const double eta_s = params.eta_signal;
    const double eta_i = params.eta_idler;
    const auto& eta = params.eta_detector;

    Report r;
    r.parameters = params;

    auto& c = r.counts;
    c.p1 = p1(params.g_squared, eta_i, eta[0], si);
    c.p2 = p2_or_p3(params.g_squared, eta_s, eta[1], ss);
    c.p3 = p2_or_p3(params.g_squared, eta_s, eta[2], ss);

    auto& m = r.merit;
    m.xi_s = xi_s(ss, si);
    m.xi_s_prime = xi_s_prime(ss, si);
    m.g_s2 = g_s2(ss);
    if (m.xi_s_prime > 1.0) {
        r.warnings.push_back(fmt::format("xi_s' = {:.4g} exceeds 1; two-pair collection formula outside its range",
                                         m.xi_s_prime));
    }

    c.p12_acc = c.p1 * c.p2;
    c.p13_acc = c.p1 * c.p3;
    c.p12 = coincidence_same_slot(c.p1, c.p2, eta_s, eta[1], m.xi_s);
    c.p13 = coincidence_same_slot(c.p1, c.p3, eta_s, eta[2], m.xi_s);
    c.p23 = m.g_s2 * c.p2 * c.p3;
    r.triple = triple_coincidence(c.p1, c.p2, c.p3, eta_s, eta[1], eta[2], m.xi_s, m.xi_s_prime, m.g_s2);
    c.p123 = r.triple.total();

    m.car = c.p12 / (c.p1 * c.p2);
    m.g_c2_exact = g_c2_exact(c);
    m.g_c2_approx = g_c2_approx(m.g_s2, m.car);
    const auto h = heralding(eta_s, eta[1], m.xi_s);
    m.eta_d = h.eta_d;
    m.heralding_eff = h.h;
    m.p_pair = p_pair(c.p1, eta_i, eta[0], m.xi_s);

    for (const auto& w : r.warnings) {
        logger().warn("{}", w);
    }
    return r;
}

Report full_report(const SourceConfig& config)
{
    auto warnings = validate(config);
    Report r = full_report(model_parameters(config));
    warnings.insert(warnings.end(), r.warnings.begin(), r.warnings.end());
    r.warnings = std::move(warnings);
    return r;
}

nlohmann::json to_json(const Report& r)
{
    const auto& c = r.counts;
    const auto& m = r.merit;
    nlohmann::json doc;
    doc["sigma_s_prime"] = r.parameters.bandwidths.sigma_s_prime;
    doc["sigma_i_prime"] = r.parameters.bandwidths.sigma_i_prime;
    doc["g_squared"] = r.parameters.g_squared;
    doc["p1"] = c.p1;
    doc["p2"] = c.p2;
    doc["p3"] = c.p3;
    doc["p12"] = c.p12;
    doc["p13"] = c.p13;
    doc["p23"] = c.p23;
    doc["p12_acc"] = c.p12_acc;
    doc["p13_acc"] = c.p13_acc;
    doc["p123"] = c.p123;
    doc["p123_accidental"] = r.triple.accidental;
    doc["p123_pair_single"] = r.triple.pair_single;
    doc["p123_bunching"] = r.triple.bunching;
    doc["car"] = m.car;
    doc["g_s2"] = m.g_s2;
    doc["g_c2_exact"] = m.g_c2_exact;
    doc["g_c2_approx"] = m.g_c2_approx;
    doc["eta_d"] = m.eta_d;
    doc["heralding_eff"] = m.heralding_eff;
    doc["p_pair"] = m.p_pair;
    doc["xi_s"] = m.xi_s;
    doc["xi_s_prime"] = m.xi_s_prime;
    doc["warnings"] = r.warnings;
    return doc;
}

}  // namespace hsps::analytic
