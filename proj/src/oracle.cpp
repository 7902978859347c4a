#include "hsps/oracle.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include <fmt/format.h>

#include "hsps/log.hpp"

namespace hsps::oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

FrequencyGrid::FrequencyGrid(double center, double half_width_, int n)
    : band_center(center), half_width(half_width_), n_points(n)
{
    if (n < 32) {
        throw ValidationError(fmt::format("frequency grid needs at least 32 points, got {}", n));
    }
    if (!(half_width_ > 0) || !std::isfinite(center)) {
        throw ValidationError("frequency grid needs a finite center and positive half width");
    }
    spacing = 2.0 * half_width / n_points;
}

FrequencyGrid FrequencyGrid::single_point(double center, double weight)
{
    if (!(weight > 0)) {
        throw ValidationError("single-point grid needs a positive weight");
    }
    FrequencyGrid g;
    g.band_center = center;
    g.half_width = 0.5 * weight;
    g.n_points = 1;
    g.spacing = weight;
    return g;
}

VectorXd FrequencyGrid::nodes() const
{
    VectorXd v(n_points);
    for (int k = 0; k < n_points; ++k) {
        v[k] = node(k);
    }
    return v;
}

FrequencyGrid FrequencyGrid::refined() const
{
    return FrequencyGrid(band_center, half_width, 2 * n_points);
}

namespace {

// Offsets of the nodes from the band center, in units of sigma_p.
VectorXd normalized_offsets(const FrequencyGrid& grid, double sigma_p)
{
    VectorXd v(grid.n_points);
    for (int k = 0; k < grid.n_points; ++k) {
        v[k] = (-grid.half_width + (k + 0.5) * grid.spacing) / sigma_p;
    }
    return v;
}

double half_width_for(const SourceConfig& config)
{
    const auto bw = normalize(config);
    const double widest = std::max({1.0, bw.sigma_s_prime, bw.sigma_i_prime});
    return (6.0 * widest + 8.0) * config.pump.bandwidth_sigma;
}

double relative_change(double a, double b)
{
    const double scale = std::max(std::abs(a), std::abs(b));
    return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

}  // namespace

GridPair make_grids(const SourceConfig& config, int n_points)
{
    const double hw = half_width_for(config);
    return {FrequencyGrid(config.signal_filter.center_omega(), hw, n_points),
            FrequencyGrid(config.idler_filter.center_omega(), hw, n_points)};
}

GridPair default_grids(const SourceConfig& config)
{
    const auto bw = normalize(config);
    const double narrowest = std::min({1.0, bw.sigma_s_prime, bw.sigma_i_prime}) / std::sqrt(2.0);
    const double span = 2.0 * half_width_for(config) / config.pump.bandwidth_sigma;
    const auto needed = static_cast<unsigned>(std::ceil(span / (0.5 * narrowest)));
    const int n = static_cast<int>(std::max<unsigned>(min_grid_points, std::bit_ceil(needed)));
    return make_grids(config, n);
}

VectorXd filter_profile(const FilterSpec& filter, const FrequencyGrid& grid)
{
    const double shift = grid.band_center - filter.center_omega();
    VectorXd f(grid.n_points);
    for (int k = 0; k < grid.n_points; ++k) {
        const double offset = shift + (-grid.half_width + (k + 0.5) * grid.spacing);
        f[k] = filter_amplitude_normalized(offset, filter.sigma);
    }
    return f;
}

MatrixXd joint_amplitude(const SourceConfig& config, const GridPair& grids)
{
    const double sigma = config.pump.bandwidth_sigma;
    const VectorXd x = normalized_offsets(grids.signal, sigma);
    const VectorXd y = normalized_offsets(grids.idler, sigma);
    const double delta
        = (grids.signal.band_center + grids.idler.band_center - 2.0 * config.pump.center_omega()) / sigma;
    const double scale = config.gain.amplitude() * std::sqrt(grids.signal.spacing * grids.idler.spacing) / sigma;

    MatrixXd phi(x.size(), y.size());
    for (Eigen::Index l = 0; l < y.size(); ++l) {
        for (Eigen::Index k = 0; k < x.size(); ++k) {
            phi(k, l) = scale * phi_normalized(x[k] + y[l] + delta);
        }
    }
    return phi;
}

CorrelationMatrices build_correlations(const SourceConfig& config, const GridPair& grids)
{
    const MatrixXd phi = joint_amplitude(config, grids);
    const VectorXd fs = filter_profile(config.signal_filter, grids.signal);
    const VectorXd fi = filter_profile(config.idler_filter, grids.idler);
    const double eta_s = signal_transmission(config);
    const double eta_i = idler_transmission(config);

    CorrelationMatrices c;
    const MatrixXd phi_s = fs.asDiagonal() * phi;  // signal side filtered
    const MatrixXd phi_i = phi * fi.asDiagonal();  // idler side filtered
    c.auto_signal.noalias() = eta_s * phi_s * phi_s.transpose();
    c.auto_idler.noalias() = eta_i * phi_i.transpose() * phi_i;
    c.cross = std::sqrt(eta_s * eta_i) * (phi_s * fi.asDiagonal());

    const double peak = phi.cwiseAbs().maxCoeff();
    if (peak > 0) {
        const Eigen::Index ns = phi.rows();
        const Eigen::Index ni = phi.cols();
        const double edge = std::max({phi_s.row(0).cwiseAbs().maxCoeff(), phi_s.row(ns - 1).cwiseAbs().maxCoeff(),
                                      phi_s.col(0).cwiseAbs().maxCoeff(), phi_s.col(ni - 1).cwiseAbs().maxCoeff(),
                                      phi_i.row(0).cwiseAbs().maxCoeff(), phi_i.row(ns - 1).cwiseAbs().maxCoeff(),
                                      phi_i.col(0).cwiseAbs().maxCoeff(), phi_i.col(ni - 1).cwiseAbs().maxCoeff()});
        if (edge > 1e-8 * peak) {
            c.warnings.push_back(
                fmt::format("grid truncation: boundary amplitude {:.3g} of peak exceeds 1e-8", edge / peak));
            logger().warn("{}", c.warnings.back());
        }
    }
    return c;
}

namespace {

NumericCounts counts_from(const SourceConfig& config, const CorrelationMatrices& c)
{
    const double e1 = config.detectors[0].efficiency;
    const double e2 = config.detectors[1].efficiency;
    const double e3 = config.detectors[2].efficiency;

    NumericCounts r;
    auto& p = r.counts;
    p.p1 = e1 * c.auto_idler.trace();
    const double signal_trace = c.auto_signal.trace();
    p.p2 = 0.5 * e2 * signal_trace;
    p.p3 = 0.5 * e3 * signal_trace;

    const double cross_norm = c.cross.squaredNorm();
    r.true12 = 0.5 * e1 * e2 * cross_norm;
    r.true13 = 0.5 * e1 * e3 * cross_norm;
    r.signal_cross = 0.25 * e2 * e3 * c.auto_signal.squaredNorm();

    p.p12_acc = p.p1 * p.p2;
    p.p13_acc = p.p1 * p.p3;
    p.p12 = p.p12_acc + r.true12;
    p.p13 = p.p13_acc + r.true13;
    p.p23 = p.p2 * p.p3 + r.signal_cross;

    const double contraction = (c.cross.transpose() * c.auto_signal * c.cross).trace();
    r.triple.accidental = p.p1 * p.p2 * p.p3;
    r.triple.pair_single = p.p3 * r.true12 + p.p2 * r.true13;
    r.triple.bunching = p.p1 * r.signal_cross + 2.0 * 0.25 * e1 * e2 * e3 * contraction;
    p.p123 = r.triple.total();
    r.warnings = c.warnings;
    return r;
}

std::array<double, 11> flatten(const NumericCounts& r)
{
    return {r.counts.p1,        r.counts.p2,           r.counts.p3,     r.true12,
            r.true13,           r.signal_cross,        r.counts.p123,   r.triple.accidental,
            r.triple.pair_single, r.triple.bunching,   r.counts.p23};
}

}  // namespace

NumericCounts numeric_counts(const SourceConfig& config, const GridPair& grids, bool check_refinement)
{
    NumericCounts r = counts_from(config, build_correlations(config, grids));
    r.n_signal = grids.signal.n_points;
    r.n_idler = grids.idler.n_points;
    if (check_refinement) {
        const GridPair fine{grids.signal.refined(), grids.idler.refined()};
        const NumericCounts f = counts_from(config, build_correlations(config, fine));
        const auto a = flatten(r);
        const auto b = flatten(f);
        for (std::size_t k = 0; k < a.size(); ++k) {
            r.max_refinement_change = std::max(r.max_refinement_change, relative_change(a[k], b[k]));
        }
        if (r.max_refinement_change > refinement_tolerance) {
            throw NumericalError(fmt::format("quadrature not converged: doubling the grid changes outputs by {:.3g}",
                                             r.max_refinement_change));
        }
    }
    return r;
}

NumericCounts numeric_counts(const SourceConfig& config)
{
    return numeric_counts(config, default_grids(config));
}

OutputMoments output_moments(const MatrixXd& joint, ClickOrder order, int n_terms)
{
    OutputMoments m;
    if (order == ClickOrder::low_gain) {
        m.n_signal.noalias() = joint * joint.transpose();
        m.n_idler.noalias() = joint.transpose() * joint;
        m.m_si = joint;
        return m;
    }
    if (n_terms < 1) {
        throw ValidationError("n_terms must be >= 1");
    }
    // cosh(sqrt(Phi Phi^T)) and sinh acting through Phi, as power series.
    const MatrixXd gram = joint * joint.transpose();
    const Eigen::Index ns = joint.rows();
    MatrixXd power = MatrixXd::Identity(ns, ns);
    MatrixXd cosh_part = MatrixXd::Zero(ns, ns);
    MatrixXd sinh_part = MatrixXd::Zero(joint.rows(), joint.cols());
    double inv_even = 1.0;  // 1/(2n)!
    for (int n = 0; n < n_terms; ++n) {
        const double inv_odd = inv_even / (2.0 * n + 1.0);
        cosh_part += inv_even * power;
        const MatrixXd odd_term = inv_odd * (power * joint);
        sinh_part += odd_term;
        m.series_residual = odd_term.norm();
        power = (power * gram).eval();
        inv_even = inv_odd / (2.0 * n + 2.0);
    }
    m.n_signal.noalias() = sinh_part * sinh_part.transpose();
    m.n_idler.noalias() = sinh_part.transpose() * sinh_part;
    m.m_si.noalias() = cosh_part * sinh_part;
    return m;
}

namespace {

struct ModeBlocks {
    MatrixXd n;
    MatrixXd m;
    std::array<Eigen::Index, 3> offset{};
    std::array<Eigen::Index, 3> size{};
};

ModeBlocks detector_modes(const SourceConfig& config, const GridPair& grids, const OutputMoments& out)
{
    const VectorXd fs = filter_profile(config.signal_filter, grids.signal);
    const VectorXd fi = filter_profile(config.idler_filter, grids.idler);
    const double eta_s = signal_transmission(config);
    const double eta_i = idler_transmission(config);
    const VectorXd t1 = std::sqrt(eta_i * config.detectors[0].efficiency) * fi;
    const VectorXd t2 = std::sqrt(0.5 * eta_s * config.detectors[1].efficiency) * fs;
    const VectorXd t3 = std::sqrt(0.5 * eta_s * config.detectors[2].efficiency) * fs;

    const Eigen::Index ni = grids.idler.n_points;
    const Eigen::Index ns = grids.signal.n_points;
    ModeBlocks b;
    b.size = {ni, ns, ns};
    b.offset = {0, ni, ni + ns};
    const Eigen::Index total = ni + 2 * ns;
    b.n = MatrixXd::Zero(total, total);
    b.m = MatrixXd::Zero(total, total);

    b.n.block(0, 0, ni, ni) = t1.asDiagonal() * out.n_idler * t1.asDiagonal();
    b.n.block(ni, ni, ns, ns) = t2.asDiagonal() * out.n_signal * t2.asDiagonal();
    b.n.block(ni + ns, ni + ns, ns, ns) = t3.asDiagonal() * out.n_signal * t3.asDiagonal();
    b.n.block(ni, ni + ns, ns, ns) = t2.asDiagonal() * out.n_signal * t3.asDiagonal();
    b.n.block(ni + ns, ni, ns, ns) = b.n.block(ni, ni + ns, ns, ns).transpose();

    const MatrixXd mt = out.m_si.transpose();
    b.m.block(0, ni, ni, ns) = t1.asDiagonal() * mt * t2.asDiagonal();
    b.m.block(0, ni + ns, ni, ns) = t1.asDiagonal() * mt * t3.asDiagonal();
    b.m.block(ni, 0, ns, ni) = b.m.block(0, ni, ni, ns).transpose();
    b.m.block(ni + ns, 0, ns, ni) = b.m.block(0, ni + ns, ni, ns).transpose();
    return b;
}

double log_det_spd(const MatrixXd& a)
{
    Eigen::LLT<MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) {
        throw NumericalError("vacuum-probability matrix is not positive definite");
    }
    const auto& l = llt.matrixLLT();
    double sum = 0.0;
    for (Eigen::Index k = 0; k < l.rows(); ++k) {
        sum += std::log1p(l(k, k) - 1.0);
    }
    return 2.0 * sum;
}

// log of the probability that every detector in `mask` registers vacuum.
double log_vacuum(const ModeBlocks& b, unsigned mask)
{
    std::vector<Eigen::Index> idx;
    for (unsigned d = 0; d < 3; ++d) {
        if (mask & (1u << d)) {
            for (Eigen::Index k = 0; k < b.size[d]; ++k) {
                idx.push_back(b.offset[d] + k);
            }
        }
    }
    const auto n = static_cast<Eigen::Index>(idx.size());
    MatrixXd plus(n, n);
    MatrixXd minus(n, n);
    for (Eigen::Index c = 0; c < n; ++c) {
        for (Eigen::Index r = 0; r < n; ++r) {
            const double nn = b.n(idx[r], idx[c]);
            const double mm = b.m(idx[r], idx[c]);
            const double id = r == c ? 1.0 : 0.0;
            plus(r, c) = id + nn + mm;
            minus(r, c) = id + nn - mm;
        }
    }
    return -0.5 * (log_det_spd(plus) + log_det_spd(minus));
}

double min_symplectic_eigenvalue(const ModeBlocks& b)
{
    const Eigen::Index n = b.n.rows();
    const MatrixXd vxx = MatrixXd::Identity(n, n) + 2.0 * b.n + 2.0 * b.m;
    const MatrixXd vpp = MatrixXd::Identity(n, n) + 2.0 * b.n - 2.0 * b.m;
    Eigen::SelfAdjointEigenSolver<MatrixXd> sx(vxx);
    if (sx.info() != Eigen::Success || sx.eigenvalues().minCoeff() <= 0.0) {
        throw NumericalError("covariance matrix is not positive definite");
    }
    const MatrixXd root = sx.operatorSqrt();
    Eigen::SelfAdjointEigenSolver<MatrixXd> sp(root * vpp * root, Eigen::EigenvaluesOnly);
    if (sp.info() != Eigen::Success) {
        throw NumericalError("symplectic eigenvalue decomposition failed");
    }
    return std::sqrt(std::max(0.0, sp.eigenvalues().minCoeff()));
}

}  // namespace

GaussianClicks gaussian_click_probs(const SourceConfig& config, const GridPair& grids, ClickOrder order, int n_terms)
{
    const OutputMoments out = output_moments(joint_amplitude(config, grids), order, n_terms);
    const ModeBlocks b = detector_modes(config, grids, out);

    GaussianClicks r;
    r.series_residual = out.series_residual;
    r.modes = static_cast<int>(b.n.rows());
    r.min_symplectic_eigenvalue = min_symplectic_eigenvalue(b);
    if (r.min_symplectic_eigenvalue < 1.0 - 1e-9) {
        throw NumericalError(fmt::format("unphysical covariance: symplectic eigenvalue {:.12g} < 1",
                                         r.min_symplectic_eigenvalue));
    }

    std::array<double, 8> log_q{};
    for (unsigned mask = 1; mask < 8; ++mask) {
        log_q[mask] = log_vacuum(b, mask);
    }

    // Probability that every detector in `clicks` fires, whatever the rest do.
    auto all_click = [&](unsigned clicks) {
        double sum = 0.0;
        for (unsigned sub = clicks;; sub = (sub - 1) & clicks) {
            const double sign = (std::popcount(sub) % 2) ? -1.0 : 1.0;
            sum += sign * std::expm1(log_q[sub]);
            if (sub == 0) {
                break;
            }
        }
        return sum;
    };

    for (unsigned pattern = 0; pattern < 8; ++pattern) {
        const unsigned dark = 7u & ~pattern;
        double sum = 0.0;
        for (unsigned sub = pattern;; sub = (sub - 1) & pattern) {
            const double sign = (std::popcount(sub) % 2) ? -1.0 : 1.0;
            const unsigned mask = dark | sub;
            sum += sign * (pattern == 0 ? std::exp(log_q[mask]) : std::expm1(log_q[mask]));
            if (sub == 0) {
                break;
            }
        }
        r.patterns[pattern] = sum;
    }

    auto& c = r.counts;
    c.p1 = all_click(0b001);
    c.p2 = all_click(0b010);
    c.p3 = all_click(0b100);
    c.p12 = all_click(0b011);
    c.p13 = all_click(0b101);
    c.p23 = all_click(0b110);
    c.p123 = all_click(0b111);
    c.p12_acc = c.p1 * c.p2;
    c.p13_acc = c.p1 * c.p3;
    return r;
}

LeadingOrder leading_order_clicks(const SourceConfig& config, const GridPair& grids)
{
    const double g2 = config.gain.g_squared;
    if (!(g2 > 0)) {
        throw ValidationError("leading-order extraction needs |G|^2 > 0");
    }
    auto scaled = [&](double factor) {
        SourceConfig c = config;
        c.gain.g_squared = g2 * factor;
        const auto clicks = gaussian_click_probs(c, grids, ClickOrder::low_gain);
        const auto& p = clicks.counts;
        const double g = c.gain.g_squared;
        return LeadingOrder{p.p1 / g, p.p2 / g, p.p3 / g, (p.p12 - p.p12_acc) / g, (p.p13 - p.p13_acc) / g};
    };
    const LeadingOrder full = scaled(1.0);
    const LeadingOrder half = scaled(0.5);
    auto extrapolate = [](double h, double f) { return 2.0 * h - f; };
    return {extrapolate(half.p1, full.p1), extrapolate(half.p2, full.p2), extrapolate(half.p3, full.p3),
            extrapolate(half.true12, full.true12), extrapolate(half.true13, full.true13)};
}

LeadingOrder leading_order(const NumericCounts& counts, double g_squared)
{
    if (!(g_squared > 0)) {
        throw ValidationError("leading-order extraction needs |G|^2 > 0");
    }
    return {counts.counts.p1 / g_squared, counts.counts.p2 / g_squared, counts.counts.p3 / g_squared,
            counts.true12 / g_squared, counts.true13 / g_squared};
}

std::vector<ComparisonRow> compare(const SourceConfig& config, const NumericCounts& numeric)
{
    const auto report = analytic::full_report(analytic::model_parameters(config));
    const auto& a = report.counts;
    const auto bw = report.parameters.bandwidths;
    const double g2 = report.parameters.g_squared;

    const std::vector<std::pair<std::string, std::pair<double, double>>> pairs{
        {"p1", {a.p1, numeric.counts.p1}},
        {"p2", {a.p2, numeric.counts.p2}},
        {"p3", {a.p3, numeric.counts.p3}},
        {"true12", {a.p12 - a.p12_acc, numeric.true12}},
        {"true13", {a.p13 - a.p13_acc, numeric.true13}},
        {"p123_accidental", {report.triple.accidental, numeric.triple.accidental}},
        {"p123_pair_single", {report.triple.pair_single, numeric.triple.pair_single}},
        {"p123_bunching", {report.triple.bunching, numeric.triple.bunching}},
    };
    std::vector<ComparisonRow> rows;
    for (const auto& [name, values] : pairs) {
        const auto [an, nu] = values;
        const double err = an != 0.0 ? std::abs(an - nu) / std::abs(an) : std::abs(nu);
        rows.push_back({bw.sigma_s_prime, bw.sigma_i_prime, g2, name, an, nu, err});
    }
    return rows;
}

void write_comparison_csv(std::ostream& out, const std::vector<ComparisonRow>& rows)
{
    out << "sigma_s_prime,sigma_i_prime,g_squared,quantity,analytic,numeric,rel_err\n";
    for (const auto& r : rows) {
        out << fmt::format("{},{},{},{},{:.17g},{:.17g},{:.6e}\n", r.sigma_s_prime, r.sigma_i_prime, r.g_squared,
                           r.quantity, r.analytic, r.numeric, r.rel_err);
    }
}

}  // namespace hsps::oracle
