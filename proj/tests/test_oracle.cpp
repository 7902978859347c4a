#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "hsps/config_io.hpp"
#include "hsps/oracle.hpp"

using namespace hsps;
using namespace hsps::oracle;
using doctest::Approx;

namespace {

double rel(double a, double b)
{
    return std::abs(a - b) / std::abs(b);
}

// One signal node and one idler node at the filter centers with weight
// sigma_p: the joint amplitude collapses to the scalar G.
GridPair single_mode(const SourceConfig& c)
{
    return {FrequencyGrid::single_point(c.signal_filter.center_omega(), c.pump.bandwidth_sigma),
            FrequencyGrid::single_point(c.idler_filter.center_omega(), c.pump.bandwidth_sigma)};
}

}  // namespace

TEST_CASE("frequency grid")
{
    const FrequencyGrid g(10.0, 4.0, 32);
    CHECK(g.spacing == Approx(0.25));
    CHECK(g.node(0) == Approx(6.125));
    CHECK(g.node(31) == Approx(13.875));
    CHECK(g.nodes().size() == 32);
    CHECK(g.refined().n_points == 64);
    CHECK(g.refined().half_width == 4.0);
    CHECK_THROWS_AS(FrequencyGrid(0.0, 1.0, 16), ValidationError);
    CHECK_THROWS_AS(FrequencyGrid(0.0, -1.0, 64), ValidationError);
    CHECK_THROWS_AS(FrequencyGrid::single_point(0.0, 0.0), ValidationError);

    const auto c = ideal_config(0.3, 1.0, 0.01);
    const auto grids = default_grids(c);
    CHECK(grids.signal.n_points >= min_grid_points);
    CHECK(grids.idler.n_points >= min_grid_points);
    CHECK(grids.signal.band_center == Approx(c.signal_filter.center_omega()));
    // At least a few points per narrowest filter sigma.
    CHECK(grids.signal.spacing < 0.5 * c.signal_filter.sigma);
}

TEST_CASE("correlation matrices")
{
    const auto c = ideal_config(0.7, 1.3, 0.01);
    const auto grids = make_grids(c, 128);
    const auto m = build_correlations(c, grids);
    CHECK(m.auto_signal.rows() == 128);
    CHECK(m.cross.rows() == 128);
    CHECK(m.cross.cols() == 128);
    CHECK((m.auto_signal - m.auto_signal.transpose()).norm() < 1e-14 * m.auto_signal.norm());
    CHECK((m.auto_idler - m.auto_idler.transpose()).norm() < 1e-14 * m.auto_idler.norm());

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.auto_signal);
    CHECK(es.eigenvalues().minCoeff() > -1e-12 * es.eigenvalues().maxCoeff());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ei(m.auto_idler);
    CHECK(ei.eigenvalues().minCoeff() > -1e-12 * ei.eigenvalues().maxCoeff());
    CHECK(m.warnings.empty());

    // Linear in |G|^2.
    auto c3 = c;
    c3.gain.g_squared = 0.03;
    const auto m3 = build_correlations(c3, grids);
    CHECK((m3.auto_signal - 3.0 * m.auto_signal).norm() < 1e-12 * m3.auto_signal.norm());
    CHECK((m3.cross - std::sqrt(3.0) * m.cross).norm() < 1e-12 * m3.cross.norm());

    auto c0 = c;
    c0.gain.g_squared = 0.0;
    const auto m0 = build_correlations(c0, grids);
    CHECK(m0.auto_signal.isZero(0.0));
    CHECK(m0.auto_idler.isZero(0.0));
    CHECK(m0.cross.isZero(0.0));
}

TEST_CASE("herald trace reproduces the closed-form singles")
{
    const auto c = ideal_config(1.0, 1.0, 0.01);
    const auto m = build_correlations(c, default_grids(c));
    const double p1 = std::numbers::sqrt2 * std::numbers::pi * 0.01;
    CHECK(rel(m.auto_idler.trace(), p1) < 1e-9);
    CHECK(rel(0.5 * m.auto_signal.trace(), p1 / 2.0) < 1e-9);
}

TEST_CASE("truncated grid warns")
{
    const auto c = ideal_config(2.0, 2.0, 0.01);
    const GridPair narrow{FrequencyGrid(c.signal_filter.center_omega(), 1.5 * c.pump.bandwidth_sigma, 64),
                          FrequencyGrid(c.idler_filter.center_omega(), 1.5 * c.pump.bandwidth_sigma, 64)};
    CHECK_FALSE(build_correlations(c, narrow).warnings.empty());
}

TEST_CASE("quadrature matches the closed forms")
{
    for (double s : {0.3, 2.0}) {
        for (double i : {0.3, 1.0}) {
            const auto c = ideal_config(s, i, 0.01);
            const auto n = numeric_counts(c);
            CHECK(n.max_refinement_change < refinement_tolerance);
            for (const auto& row : compare(c, n)) {
                CHECK_MESSAGE(row.rel_err < 1e-6, row.quantity, " at ", s, ",", i);
            }
            CHECK(n.signal_cross == Approx(n.counts.p23 - n.counts.p2 * n.counts.p3));
        }
    }
}

TEST_CASE("under-resolved grid fails the refinement check")
{
    const auto c = ideal_config(0.3, 0.3, 0.01);
    CHECK_THROWS_AS(numeric_counts(c, make_grids(c, 32), true), NumericalError);
    CHECK_NOTHROW(numeric_counts(c, make_grids(c, 32), false));
}

TEST_CASE("comparison csv")
{
    const auto c = ideal_config(1.0, 1.0, 0.001);
    std::ostringstream out;
    write_comparison_csv(out, compare(c, numeric_counts(c)));
    const std::string text = out.str();
    CHECK(text.rfind("sigma_s_prime,sigma_i_prime,g_squared,quantity,analytic,numeric,rel_err\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 9);
}

TEST_CASE("vacuum gives no clicks")
{
    const auto c = ideal_config(1.0, 1.0, 0.0);
    const auto r = gaussian_click_probs(c, make_grids(c, 64), ClickOrder::all_order);
    CHECK(r.counts.p1 == 0.0);
    CHECK(r.counts.p2 == 0.0);
    CHECK(r.counts.p123 == 0.0);
    CHECK(r.patterns[0] == 1.0);
    CHECK(r.min_symplectic_eigenvalue == Approx(1.0));
}

TEST_CASE("single-mode squeezed vacuum")
{
    auto c = ideal_config(1.0, 1.0, 0.25);
    c.detectors[0].efficiency = 0.7;
    c.detectors[1].efficiency = 0.6;
    c.detectors[2].efficiency = 0.5;
    const auto r = gaussian_click_probs(c, single_mode(c), ClickOrder::all_order);
    CHECK(r.modes == 3);

    // Thermal marginals with mean sinh^2(r), r = |G|; loss eta gives 1/(1 + eta n).
    const double n = std::pow(std::sinh(0.5), 2);
    const double a = 0.7;
    const double b2 = 0.3;
    const double b3 = 0.25;
    const double q1 = 1.0 / (1.0 + a * n);
    const double q2 = 1.0 / (1.0 + b2 * n);
    const double q3 = 1.0 / (1.0 + b3 * n);
    const double q23 = 1.0 / (1.0 + (b2 + b3) * n);
    // Two-mode squeezed vacuum seen through losses a and b: 1 / (1 + (a + b - ab) n).
    auto q_pair = [&](double x, double y) { return 1.0 / (1.0 + (x + y - x * y) * n); };
    const double q12 = q_pair(a, b2);
    const double q13 = q_pair(a, b3);
    const double q123 = q_pair(a, b2 + b3);

    CHECK(r.counts.p1 == Approx(1.0 - q1).epsilon(1e-12));
    CHECK(r.counts.p2 == Approx(1.0 - q2).epsilon(1e-12));
    CHECK(r.counts.p3 == Approx(1.0 - q3).epsilon(1e-12));
    CHECK(r.counts.p12 == Approx(1.0 - q1 - q2 + q12).epsilon(1e-12));
    CHECK(r.counts.p13 == Approx(1.0 - q1 - q3 + q13).epsilon(1e-12));
    CHECK(r.counts.p23 == Approx(1.0 - q2 - q3 + q23).epsilon(1e-12));
    CHECK(r.counts.p123 == Approx(1.0 - q1 - q2 - q3 + q12 + q13 + q23 - q123).epsilon(1e-10));
    CHECK(r.patterns[0] == Approx(q123).epsilon(1e-12));
    CHECK(r.min_symplectic_eigenvalue >= 1.0 - 1e-9);
}

TEST_CASE("click patterns form a distribution")
{
    const auto c = ideal_config(0.8, 1.2, 0.01);
    const auto grids = make_grids(c, 64);
    for (auto order : {ClickOrder::low_gain, ClickOrder::all_order}) {
        const auto r = gaussian_click_probs(c, grids, order);
        double total = 0.0;
        for (double p : r.patterns) {
            CHECK(p >= 0.0);
            total += p;
        }
        CHECK(total == Approx(1.0).epsilon(1e-12));
        CHECK(r.patterns[1] + r.patterns[3] + r.patterns[5] + r.patterns[7] == Approx(r.counts.p1).epsilon(1e-10));
        CHECK(r.patterns[3] + r.patterns[7] == Approx(r.counts.p12).epsilon(1e-10));
        CHECK(r.min_symplectic_eigenvalue >= 1.0 - 1e-9);
    }
}

TEST_CASE("all-order and low-gain clicks differ at the next order in gain")
{
    auto diff = [](double g2) {
        const auto c = ideal_config(1.0, 1.0, g2);
        const auto grids = make_grids(c, 64);
        const double lo = gaussian_click_probs(c, grids, ClickOrder::low_gain).counts.p1;
        const double hi = gaussian_click_probs(c, grids, ClickOrder::all_order).counts.p1;
        return std::abs(hi - lo);
    };
    const double slope = std::log(diff(1e-2) / diff(1e-3)) / std::log(10.0);
    CHECK(slope == Approx(2.0).epsilon(0.05));
}

TEST_CASE("power series agrees with the singular-value route")
{
    const auto c = ideal_config(1.0, 0.6, 0.02);
    const auto joint = joint_amplitude(c, make_grids(c, 96));
    const auto m = output_moments(joint, ClickOrder::all_order, 10);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(joint, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::VectorXd s = svd.singularValues();
    const Eigen::VectorXd sh = s.array().sinh();
    const Eigen::VectorXd ch = s.array().cosh();
    const Eigen::MatrixXd& u = svd.matrixU();
    const Eigen::MatrixXd& v = svd.matrixV();
    const Eigen::MatrixXd n_signal = u * sh.array().square().matrix().asDiagonal() * u.transpose();
    const Eigen::MatrixXd n_idler = v * sh.array().square().matrix().asDiagonal() * v.transpose();
    const Eigen::MatrixXd m_si = u * (ch.array() * sh.array()).matrix().asDiagonal() * v.transpose();
    CHECK((m.n_signal - n_signal).norm() < 1e-12 * n_signal.norm());
    CHECK((m.n_idler - n_idler).norm() < 1e-12 * n_idler.norm());
    CHECK((m.m_si - m_si).norm() < 1e-12 * m_si.norm());
    CHECK(m.series_residual < 1e-15);
}

TEST_CASE("discrete moments reproduce the Bogoliubov kernel series")
{
    // In the kernel series the gain enters as 2 sqrt(pi) times the matrix one.
    const auto c = ideal_config(1.0, 1.0, 0.01);
    const auto grids = make_grids(c, 256);
    const auto m = output_moments(joint_amplitude(c, grids), ClickOrder::all_order);
    const GainParameter kernel_gain{4.0 * std::numbers::pi * c.gain.g_squared};
    const Eigen::VectorXd ws = grids.signal.nodes();
    const Eigen::VectorXd wi = grids.idler.nodes();

    for (auto [k, l] : {std::pair{128, 128}, std::pair{120, 131}, std::pair{100, 140}}) {
        std::complex<double> sum = 0.0;
        for (int j = 0; j < grids.idler.n_points; ++j) {
            const auto a = bogoliubov_kernels(ws[k], wi[j], kernel_gain, c.pump).h2;
            const auto b = bogoliubov_kernels(ws[l], wi[j], kernel_gain, c.pump).h2;
            sum += a * std::conj(b) * grids.idler.spacing;
        }
        const double discrete = m.n_signal(k, l) / grids.signal.spacing;
        CHECK(rel(discrete, sum.real()) < 1e-6);
    }
}

TEST_CASE("Richardson leading order matches the quadrature")
{
    const auto c = ideal_config(1.0, 1.0, 1e-3);
    const auto grids = make_grids(c, 128);
    const auto clicks = leading_order_clicks(c, grids);
    const auto moments = leading_order(numeric_counts(c, grids, false), c.gain.g_squared);
    CHECK(rel(clicks.p1, moments.p1) < 4e-5);
    CHECK(rel(clicks.p2, moments.p2) < 4e-5);
    CHECK(rel(clicks.true12, moments.true12) < 4e-5);
    CHECK(rel(clicks.true13, moments.true13) < 4e-5);

    auto c0 = c;
    c0.gain.g_squared = 0.0;
    CHECK_THROWS_AS(leading_order_clicks(c0, grids), ValidationError);
}
