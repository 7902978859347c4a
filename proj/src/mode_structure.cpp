#include "hsps/mode_structure.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "hsps/analytic_stats.hpp"

namespace hsps::modes {

using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd filtered_jsa(const SourceConfig& config, const oracle::GridPair& grids)
{
    SourceConfig unit = config;
    unit.gain.g_squared = 1.0;
    const VectorXd fs = oracle::filter_profile(config.signal_filter, grids.signal);
    const VectorXd fi = oracle::filter_profile(config.idler_filter, grids.idler);
    MatrixXd f = fs.asDiagonal() * oracle::joint_amplitude(unit, grids) * fi.asDiagonal();
    const double norm = f.norm();
    if (!(norm > 0) || !std::isfinite(norm)) {
        throw NumericalError("filtered joint amplitude vanishes on the grid");
    }
    f /= norm;
    return f;
}

ModeReport schmidt(const MatrixXd& kernel, double threshold)
{
    if (kernel.size() == 0) {
        throw NumericalError("Schmidt decomposition of an empty kernel");
    }
    const double norm2 = kernel.squaredNorm();
    if (!(norm2 > 0) || !std::isfinite(norm2)) {
        throw NumericalError("Schmidt decomposition of a degenerate kernel");
    }
    Eigen::BDCSVD<MatrixXd> svd(kernel);
    if (svd.info() != Eigen::Success) {
        throw NumericalError("singular value decomposition failed");
    }
    const VectorXd s = svd.singularValues();
    const double total = s.squaredNorm();

    ModeReport r;
    r.threshold = threshold;
    r.schmidt_coefficients.reserve(static_cast<std::size_t>(s.size()));
    double sum_sq = 0.0;
    for (Eigen::Index k = 0; k < s.size(); ++k) {
        const double lambda = s[k] * s[k] / total;
        r.schmidt_coefficients.push_back(lambda);
        sum_sq += lambda * lambda;
    }
    r.schmidt_number = 1.0 / sum_sq;
    r.purity = sum_sq;
    r.k_marginal_signal = r.k_marginal_idler = r.schmidt_number;
    r.g2_signal_pred = r.g2_idler_pred = 1.0 + 1.0 / r.schmidt_number;
    r.single_mode_heralded = r.single_mode_heralding = r.schmidt_number <= threshold;
    return r;
}

double marginal_mode_number(const SourceConfig& config, Band band, const oracle::GridPair& grids)
{
    SourceConfig unit = config;
    unit.gain.g_squared = 1.0;
    const MatrixXd phi = oracle::joint_amplitude(unit, grids);
    MatrixXd kernel;
    if (band == Band::signal) {
        const MatrixXd side = oracle::filter_profile(config.signal_filter, grids.signal).asDiagonal() * phi;
        kernel.noalias() = side * side.transpose();
    } else {
        const MatrixXd side = phi * oracle::filter_profile(config.idler_filter, grids.idler).asDiagonal();
        kernel.noalias() = side.transpose() * side;
    }
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(kernel, Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success) {
        throw NumericalError("eigen-decomposition of the auto-correlation kernel failed");
    }
    const VectorXd mu = eig.eigenvalues();
    const double sum = mu.sum();
    const double sum_sq = mu.squaredNorm();
    if (!(sum_sq > 0)) {
        throw NumericalError("auto-correlation kernel vanishes on the grid");
    }
    return sum * sum / sum_sq;
}

ModeReport mode_report(const SourceConfig& config, const oracle::GridPair& grids, double threshold)
{
    ModeReport r = schmidt(filtered_jsa(config, grids), threshold);
    r.k_marginal_signal = marginal_mode_number(config, Band::signal, grids);
    r.k_marginal_idler = marginal_mode_number(config, Band::idler, grids);
    r.g2_signal_pred = 1.0 + 1.0 / r.k_marginal_signal;
    r.g2_idler_pred = 1.0 + 1.0 / r.k_marginal_idler;
    r.single_mode_heralded = r.k_marginal_signal <= threshold;
    r.single_mode_heralding = r.k_marginal_idler <= threshold;
    return r;
}

ModeReport mode_report(const SourceConfig& config)
{
    return mode_report(config, oracle::default_grids(config));
}

nlohmann::json to_json(const ModeReport& r)
{
    return {{"schmidt_coefficients", r.schmidt_coefficients},
            {"schmidt_number", r.schmidt_number},
            {"purity", r.purity},
            {"k_marginal_signal", r.k_marginal_signal},
            {"k_marginal_idler", r.k_marginal_idler},
            {"g2_signal_pred", r.g2_signal_pred},
            {"g2_idler_pred", r.g2_idler_pred},
            {"single_mode_heralding", r.single_mode_heralding},
            {"single_mode_heralded", r.single_mode_heralded},
            {"threshold", r.threshold}};
}

std::string strategy_name(Strategy s)
{
    return s == Strategy::narrow_idler ? "A" : "B";
}

namespace {

StrategyPoint evaluate(Strategy strategy, double fixed, double free, double p_pair)
{
    StrategyPoint p;
    p.strategy = strategy;
    p.sigma_free = free;
    p.sigma_s_prime = strategy == Strategy::narrow_idler ? free : fixed;
    p.sigma_i_prime = strategy == Strategy::narrow_idler ? fixed : free;
    p.car = analytic::car(p_pair, p.sigma_s_prime, p.sigma_i_prime);
    p.g_c2 = analytic::g_c2_approx(analytic::g_s2(p.sigma_s_prime), p.car);
    p.heralding = analytic::xi_s(p.sigma_s_prime, p.sigma_i_prime);
    return p;
}

nlohmann::json point_json(const StrategyPoint& p)
{
    return {{"strategy", strategy_name(p.strategy)},
            {"sigma_free", p.sigma_free},
            {"sigma_s_prime", p.sigma_s_prime},
            {"sigma_i_prime", p.sigma_i_prime},
            {"car", p.car},
            {"g_c2", p.g_c2},
            {"H", p.heralding}};
}

}  // namespace

IndistinguishabilityReport indistinguishability_report(const SourceConfig& config, double p_pair,
                                                       double fixed_sigma, const SweepRange& range)
{
    if (!(p_pair > 0)) {
        throw ValidationError("p_pair must be positive");
    }
    if (!(fixed_sigma > 0)) {
        throw ValidationError("fixed bandwidth must be positive");
    }
    const auto bw = normalize(config);
    IndistinguishabilityReport r;
    r.p_pair = p_pair;
    r.fixed_sigma = fixed_sigma;

    const auto values = sweep_values(range);
    for (double v : values) {
        r.points.push_back(evaluate(Strategy::narrow_idler, fixed_sigma, v, p_pair));
    }
    for (double v : values) {
        r.points.push_back(evaluate(Strategy::narrow_signal, fixed_sigma, v, p_pair));
    }
    const std::size_t n = values.size();
    for (std::size_t k = 0; k < n; ++k) {
        const auto& a = r.points[k];
        const auto& b = r.points[n + k];
        r.lower_g_c2_wins_a += a.g_c2 < b.g_c2 ? 1 : 0;
        r.higher_h_wins_a += a.heralding > b.heralding ? 1 : 0;
    }
    r.current_a = evaluate(Strategy::narrow_idler, fixed_sigma, bw.sigma_s_prime, p_pair);
    r.current_b = evaluate(Strategy::narrow_signal, fixed_sigma, bw.sigma_i_prime, p_pair);
    const int score = r.lower_g_c2_wins_a + r.higher_h_wins_a;
    r.preferred = 2 * score >= static_cast<int>(2 * n) ? Strategy::narrow_idler : Strategy::narrow_signal;
    return r;
}

nlohmann::json to_json(const IndistinguishabilityReport& r)
{
    nlohmann::json points = nlohmann::json::array();
    for (const auto& p : r.points) {
        points.push_back(point_json(p));
    }
    return {{"p_pair", r.p_pair},
            {"fixed_sigma", r.fixed_sigma},
            {"preferred", strategy_name(r.preferred)},
            {"lower_g_c2_wins_a", r.lower_g_c2_wins_a},
            {"higher_h_wins_a", r.higher_h_wins_a},
            {"current_a", point_json(r.current_a)},
            {"current_b", point_json(r.current_b)},
            {"points", points}};
}

void write_strategy_csv(std::ostream& out, const IndistinguishabilityReport& r)
{
    out << "sigma_free,g_c2,H,strategy\n";
    for (const auto& p : r.points) {
        out << fmt::format("{:.6g},{:.17g},{:.17g},{}\n", p.sigma_free, p.g_c2, p.heralding, strategy_name(p.strategy));
    }
}

}  // namespace hsps::modes
