#include "hsps/experiment_pipeline.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "hsps/analytic_stats.hpp"
#include "hsps/log.hpp"

namespace hsps::pipeline {

namespace {

const std::vector<std::string> required_columns{"p_ave_mw", "gates", "s1_counts", "s2_counts", "s3_counts", "c12",
                                                "c13",      "c23",   "acc12",     "acc13",     "t123"};
const std::vector<std::string> live_columns{"live1", "live2", "live3", "live12", "live13", "live23", "live123"};

std::string trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(const std::string& line)
{
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        cells.push_back(trim(std::string_view(line).substr(start, comma - start)));
        if (comma == std::string::npos) {
            break;
        }
        start = comma + 1;
    }
    return cells;
}

[[noreturn]] void cell_error(int line, const std::string& column, const std::string& what)
{
    throw ValidationError(fmt::format("records: line {}, column '{}': {}", line, column, what));
}

double parse_double(const std::string& cell, int line, const std::string& column)
{
    double value = 0.0;
    const auto* end = cell.data() + cell.size();
    const auto [ptr, ec] = std::from_chars(cell.data(), end, value);
    if (ec != std::errc() || ptr != end || cell.empty() || !std::isfinite(value)) {
        cell_error(line, column, fmt::format("'{}' is not a number", cell));
    }
    return value;
}

std::int64_t parse_count(const std::string& cell, int line, const std::string& column)
{
    std::int64_t value = 0;
    const auto* end = cell.data() + cell.size();
    const auto [ptr, ec] = std::from_chars(cell.data(), end, value);
    if (ec != std::errc() || ptr != end || cell.empty()) {
        cell_error(line, column, fmt::format("'{}' is not an integer count", cell));
    }
    if (value < 0) {
        cell_error(line, column, "counts must be non-negative");
    }
    return value;
}

}  // namespace

IngestResult ingest(std::istream& in)
{
    IngestResult result;
    std::string line;
    int line_no = 0;
    std::map<std::string, std::size_t> index;

    while (std::getline(in, line)) {
        ++line_no;
        if (!trim(line).empty()) {
            break;
        }
    }
    if (trim(line).empty()) {
        result.warnings.emplace_back("records file is empty");
        logger().warn("{}", result.warnings.back());
        return result;
    }
    const auto header = split(line);
    for (std::size_t k = 0; k < header.size(); ++k) {
        index[header[k]] = k;
    }
    for (const auto& col : required_columns) {
        if (!index.contains(col)) {
            throw ValidationError(fmt::format("records: header (line {}) lacks required column '{}'", line_no, col));
        }
    }
    const auto live_present = std::count_if(live_columns.begin(), live_columns.end(),
                                            [&](const std::string& c) { return index.contains(c); });
    if (live_present != 0 && live_present != static_cast<long>(live_columns.size())) {
        throw ValidationError("records: live columns must be given all together or not at all");
    }

    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        const auto cells = split(line);
        if (cells.size() != header.size()) {
            throw ValidationError(
                fmt::format("records: line {} has {} cells, header has {}", line_no, cells.size(), header.size()));
        }
        auto cell = [&](const std::string& col) -> const std::string& { return cells[index.at(col)]; };
        auto count = [&](const std::string& col) { return parse_count(cell(col), line_no, col); };

        PowerPointRecord r;
        r.p_ave_mw = parse_double(cell("p_ave_mw"), line_no, "p_ave_mw");
        if (!(r.p_ave_mw > 0)) {
            cell_error(line_no, "p_ave_mw", "average power must be positive");
        }
        auto& t = r.tallies;
        t.gates = count("gates");
        t.singles_1 = count("s1_counts");
        t.singles_2 = count("s2_counts");
        t.singles_3 = count("s3_counts");
        t.coinc_12 = count("c12");
        t.coinc_13 = count("c13");
        t.coinc_23 = count("c23");
        t.acc_12 = count("acc12");
        t.acc_13 = count("acc13");
        t.triples_123 = count("t123");
        if (live_present != 0) {
            t.live_1 = count("live1");
            t.live_2 = count("live2");
            t.live_3 = count("live3");
            t.live_12 = count("live12");
            t.live_13 = count("live13");
            t.live_23 = count("live23");
            t.live_123 = count("live123");
        } else {
            t.assume_always_live();
        }
        if (index.contains("config_id")) {
            r.config_id = cell("config_id");
        }
        try {
            t.check();
        } catch (const ValidationError& e) {
            throw ValidationError(fmt::format("records: line {}: {}", line_no, e.what()));
        }
        result.records.push_back(std::move(r));
    }

    std::stable_sort(result.records.begin(), result.records.end(),
                     [](const auto& a, const auto& b) { return a.p_ave_mw < b.p_ave_mw; });
    for (std::size_t k = 1; k < result.records.size(); ++k) {
        if (result.records[k].p_ave_mw == result.records[k - 1].p_ave_mw) {
            result.warnings.push_back(fmt::format("duplicate p_ave_mw {}", result.records[k].p_ave_mw));
            logger().warn("{}", result.warnings.back());
        }
    }
    if (result.records.empty()) {
        result.warnings.emplace_back("records file has a header but no rows");
        logger().warn("{}", result.warnings.back());
    }
    return result;
}

IngestResult ingest(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ValidationError(fmt::format("cannot open records file '{}'", path.string()));
    }
    return ingest(in);
}

void write_records(std::ostream& out, const std::vector<PowerPointRecord>& records)
{
    out << "p_ave_mw,gates,s1_counts,s2_counts,s3_counts,c12,c13,c23,acc12,acc13,t123,"
           "live1,live2,live3,live12,live13,live23,live123,config_id\n";
    for (const auto& r : records) {
        const auto& t = r.tallies;
        out << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", r.p_ave_mw, t.gates,
                           t.singles_1, t.singles_2, t.singles_3, t.coinc_12, t.coinc_13, t.coinc_23, t.acc_12,
                           t.acc_13, t.triples_123, t.live_1, t.live_2, t.live_3, t.live_12, t.live_13, t.live_23,
                           t.live_123, r.config_id);
    }
}

QuadraticFit fit_quadratic(const std::vector<double>& p, const std::vector<double>& n)
{
    if (p.size() != n.size()) {
        throw ValidationError("fit_quadratic: power and count vectors differ in length");
    }
    std::vector<double> distinct = p;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < 3) {
        throw ValidationError(
            fmt::format("fit_quadratic: rank deficient, needs >= 3 distinct powers (got {})", distinct.size()));
    }
    const auto rows = static_cast<Eigen::Index>(p.size());
    Eigen::MatrixX2d x(rows, 2);
    Eigen::VectorXd y(rows);
    for (Eigen::Index k = 0; k < rows; ++k) {
        const double pk = p[static_cast<std::size_t>(k)];
        x(k, 0) = pk;
        x(k, 1) = pk * pk;
        y[k] = n[static_cast<std::size_t>(k)];
    }
    const Eigen::Matrix2d normal = x.transpose() * x;
    Eigen::LDLT<Eigen::Matrix2d> ldlt(normal);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || std::abs(normal.determinant()) == 0.0) {
        throw NumericalError("fit_quadratic: normal equations are singular");
    }
    const Eigen::Vector2d coeff = ldlt.solve(x.transpose() * y);
    const Eigen::VectorXd residual = y - x * coeff;

    QuadraticFit fit;
    fit.s1 = coeff[0];
    fit.s2 = coeff[1];
    fit.residual_rms = std::sqrt(residual.squaredNorm() / static_cast<double>(rows));
    const double dof = static_cast<double>(rows - 2);
    fit.covariance = residual.squaredNorm() / dof * ldlt.solve(Eigen::Matrix2d::Identity());
    return fit;
}

std::vector<double> photons_per_pulse(const std::vector<PowerPointRecord>& records, Band band,
                                      const SourceConfig& config)
{
    const std::size_t det = band == Band::idler ? 0 : 1;
    const double eff = band == Band::idler ? idler_transmission(config) * config.detectors[0].efficiency
                                           : 0.5 * signal_transmission(config) * config.detectors[1].efficiency;
    if (!(eff > 0)) {
        throw ValidationError("photon numbers need a non-zero channel efficiency");
    }
    const double dark = config.detectors[det].dark_count_prob;
    std::vector<double> n;
    for (const auto& r : records) {
        const auto& t = r.tallies;
        const double clicks = static_cast<double>(det == 0 ? t.singles_1 : t.singles_2);
        const double live = static_cast<double>(det == 0 ? t.live_1 : t.live_2);
        if (!(live > 0)) {
            throw ValidationError(fmt::format("record at {} mW has no live gates", r.p_ave_mw));
        }
        const double rate = clicks / live;
        // Poisson inversion of the no-click probability, dark counts removed.
        const double no_click = (1.0 - rate) / (1.0 - dark);
        if (!(no_click > 0)) {
            throw ValidationError(fmt::format("record at {} mW is saturated", r.p_ave_mw));
        }
        n.push_back(-std::log(std::min(1.0, no_click)) / eff);
    }
    return n;
}

QuadraticFit fit_quadratic(const std::vector<PowerPointRecord>& records, Band band, const SourceConfig& config)
{
    std::vector<double> p;
    for (const auto& r : records) {
        p.push_back(r.p_ave_mw);
    }
    return fit_quadratic(p, photons_per_pulse(records, band, config));
}

nlohmann::json to_json(const QuadraticFit& fit)
{
    return {{"s1", fit.s1},
            {"s2", fit.s2},
            {"s1_units", "photons/pulse/mW"},
            {"s2_units", "photons/pulse/mW^2"},
            {"residual_rms", fit.residual_rms},
            {"covariance", {{fit.covariance(0, 0), fit.covariance(0, 1)}, {fit.covariance(1, 0), fit.covariance(1, 1)}}}};
}

namespace {

using counting::RateVector;
using Extended = Eigen::Matrix<double, counting::rate_count + 1, 1>;
using ExtendedCov = Eigen::Matrix<double, counting::rate_count + 1, counting::rate_count + 1>;

struct Background {
    std::array<double, 3> path{};  // photon-to-click efficiency per detector
    std::array<double, 3> dark{};  // dark probability removed along with Raman
    double signal_fraction = 0.0;
    double p_ave = 0.0;

    std::array<double, 3> clicks(double s1) const
    {
        const double idler_mean = s1 * p_ave;
        const std::array<double, 3> mean{idler_mean, signal_fraction * idler_mean, signal_fraction * idler_mean};
        std::array<double, 3> b{};
        for (std::size_t j = 0; j < 3; ++j) {
            b[j] = 1.0 - std::exp(-path[j] * mean[j]) * (1.0 - dark[j]);
        }
        return b;
    }
};

// Rate vector with the background removed; index layout of counting::RateVector.
RateVector corrected_rates(const RateVector& v, const std::array<double, 3>& b)
{
    // All-click probabilities indexed by detector mask.
    const std::array<double, 8> all{1.0,           v[counting::r_p1],  v[counting::r_p2],  v[counting::r_p12],
                                    v[counting::r_p3], v[counting::r_p13], v[counting::r_p23], v[counting::r_p123]};
    std::array<double, 8> dark_true{};
    for (unsigned s = 0; s < 8; ++s) {
        double q = 0.0;
        for (unsigned sub = s;; sub = (sub - 1) & s) {
            q += (std::popcount(sub) % 2 ? -1.0 : 1.0) * all[sub];
            if (sub == 0) {
                break;
            }
        }
        double keep = 1.0;
        for (unsigned j = 0; j < 3; ++j) {
            if (s & (1u << j)) {
                keep *= 1.0 - b[j];
            }
        }
        dark_true[s] = q / keep;
    }
    std::array<double, 8> fixed{};
    for (unsigned a = 1; a < 8; ++a) {
        double p = 0.0;
        for (unsigned sub = a;; sub = (sub - 1) & a) {
            p += (std::popcount(sub) % 2 ? -1.0 : 1.0) * dark_true[sub];
            if (sub == 0) {
                break;
            }
        }
        fixed[a] = p;
    }
    RateVector out;
    out[counting::r_p1] = fixed[0b001];
    out[counting::r_p2] = fixed[0b010];
    out[counting::r_p3] = fixed[0b100];
    out[counting::r_p12] = fixed[0b011];
    out[counting::r_p13] = fixed[0b101];
    out[counting::r_p23] = fixed[0b110];
    out[counting::r_p123] = fixed[0b111];
    out[counting::r_a12] = v[counting::r_a12] * (out[counting::r_p1] * out[counting::r_p2])
                           / (v[counting::r_p1] * v[counting::r_p2]);
    out[counting::r_a13] = v[counting::r_a13] * (out[counting::r_p1] * out[counting::r_p3])
                           / (v[counting::r_p1] * v[counting::r_p3]);
    return out;
}

}  // namespace

std::vector<CorrectedPoint> raman_correct(const std::vector<PowerPointRecord>& records, const QuadraticFit& fit,
                                          const SourceConfig& config, const CorrectionOptions& options)
{
    if (!std::isfinite(fit.s1) || !std::isfinite(fit.s2)) {
        throw ValidationError("raman_correct needs a finite fit");
    }
    const double herald_eff = idler_transmission(config) * config.detectors[0].efficiency;
    const double denominator = counting::heralding_denominator(config);
    if (!(herald_eff > 0) || !(denominator > 0)) {
        throw ValidationError("raman_correct needs non-zero channel efficiencies");
    }
    Background bg;
    bg.path = {herald_eff, denominator, 0.5 * signal_transmission(config) * config.detectors[2].efficiency};
    bg.signal_fraction = options.signal_fraction;
    if (options.subtract_dark) {
        for (std::size_t j = 0; j < 3; ++j) {
            bg.dark[j] = config.detectors[j].dark_count_prob;
        }
    }

    std::vector<CorrectedPoint> out;
    for (const auto& r : records) {
        const auto& t = r.tallies;
        CorrectedPoint point;
        point.p_ave_mw = r.p_ave_mw;
        point.raw = counting::estimate(t, denominator);
        const counting::Rates rates = counting::rates(t);
        bg.p_ave = r.p_ave_mw;

        Extended x;
        x.head<counting::rate_count>() = rates.values;
        x[counting::rate_count] = fit.s1;
        ExtendedCov cov = ExtendedCov::Zero();
        cov.topLeftCorner<counting::rate_count, counting::rate_count>() = rates.covariance;
        cov(counting::rate_count, counting::rate_count) = std::max(0.0, fit.covariance(0, 0));

        auto corrected = [&](const Extended& e) {
            const RateVector fixed = corrected_rates(e.head<counting::rate_count>(), bg.clicks(e[counting::rate_count]));
            if (!(fixed[counting::r_p1] > 0) || !(fixed[counting::r_p2] > 0) || !(fixed[counting::r_p3] > 0)) {
                throw ModelValidityError(fmt::format(
                    "Raman correction removes all singles at {} mW; the linear background exceeds the data",
                    r.p_ave_mw));
            }
            return fixed;
        };
        const RateVector fixed = corrected(x);
        point.p1_raw = rates.values[counting::r_p1];
        point.p1_corrected = fixed[counting::r_p1];

        using F = std::function<double(const Extended&)>;
        constexpr int n = counting::rate_count + 1;
        auto& c = point.corrected;
        c.car = counting::propagate<n>(F([&](const Extended& e) { return counting::car_of(corrected(e)); }), x, cov,
                                       t.acc_12);
        c.g_c2 = counting::propagate<n>(F([&](const Extended& e) { return counting::g_c2_of(corrected(e)); }), x, cov,
                                        t.triples_123);
        c.eta_d = counting::propagate<n>(F([&](const Extended& e) { return counting::eta_d_of(corrected(e)); }), x,
                                         cov, t.coinc_12);
        c.heralding = c.eta_d;
        c.heralding.value /= denominator;
        c.heralding.std_error /= denominator;

        // P_pair = (p12 - a12) / (1/2 eta_s eta_2 eta_i eta_1).
        auto pair_of = [&](const RateVector& v) {
            return (v[counting::r_p12] - v[counting::r_a12]) / (denominator * herald_eff);
        };
        point.p_pair = counting::propagate<n>(F([&](const Extended& e) { return pair_of(corrected(e)); }), x, cov,
                                              t.coinc_12);
        point.p_pair_raw = counting::propagate<counting::rate_count>(
            std::function<double(const RateVector&)>(pair_of), rates.values, rates.covariance, t.coinc_12);
        out.push_back(point);
    }
    return out;
}

nlohmann::json to_json(const CorrectedPoint& p)
{
    return {{"p_ave_mw", p.p_ave_mw},
            {"p1_raw", p.p1_raw},
            {"p1_corrected", p.p1_corrected},
            {"raw", counting::to_json(p.raw)},
            {"corrected", counting::to_json(p.corrected)},
            {"p_pair_raw", counting::to_json(p.p_pair_raw)},
            {"p_pair", counting::to_json(p.p_pair)}};
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y, const std::vector<double>& sigma)
{
    if (x.size() != y.size() || x.size() != sigma.size()) {
        throw ValidationError("fit_line: vectors differ in length");
    }
    if (x.size() < 3) {
        throw ValidationError("fit_line needs at least 3 points");
    }
    double s = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        if (!(sigma[k] > 0)) {
            throw ValidationError("fit_line needs positive uncertainties");
        }
        const double w = 1.0 / (sigma[k] * sigma[k]);
        s += w;
        sx += w * x[k];
        sy += w * y[k];
        sxx += w * x[k] * x[k];
        sxy += w * x[k] * y[k];
    }
    const double det = s * sxx - sx * sx;
    if (!(det > 0)) {
        throw NumericalError("fit_line: abscissae are degenerate");
    }
    LineFit f;
    f.slope = (s * sxy - sx * sy) / det;
    f.intercept = (sxx * sy - sx * sxy) / det;
    f.slope_error = std::sqrt(s / det);
    f.intercept_error = std::sqrt(sxx / det);
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double r = (y[k] - f.intercept - f.slope * x[k]) / sigma[k];
        f.chi2 += r * r;
    }
    return f;
}

ContourGrid sweep_contour(double p_pair, const SweepRange& range_s, const SweepRange& range_i, int workers)
{
    if (!(p_pair > 0)) {
        throw ValidationError("sweep needs p_pair > 0");
    }
    if (workers < 1) {
        throw ValidationError("workers must be >= 1");
    }
    ContourGrid g;
    g.p_pair = p_pair;
    g.range_s = range_s;
    g.range_i = range_i;
    g.sigma_s_values = sweep_values(range_s);
    g.sigma_i_values = sweep_values(range_i);
    const auto ns = static_cast<Eigen::Index>(g.sigma_s_values.size());
    const auto ni = static_cast<Eigen::Index>(g.sigma_i_values.size());
    g.car.resize(ns, ni);
    g.g_c2.resize(ns, ni);
    g.h.resize(ns, ni);

    auto rows = [&](Eigen::Index from, Eigen::Index to) {
        for (Eigen::Index r = from; r < to; ++r) {
            const double ss = g.sigma_s_values[static_cast<std::size_t>(r)];
            for (Eigen::Index c = 0; c < ni; ++c) {
                const double si = g.sigma_i_values[static_cast<std::size_t>(c)];
                const double car = analytic::car(p_pair, ss, si);
                g.car(r, c) = car;
                g.g_c2(r, c) = analytic::g_c2_approx(analytic::g_s2(ss), car);
                g.h(r, c) = analytic::xi_s(ss, si);
            }
        }
    };
    const Eigen::Index per = (ns + workers - 1) / workers;
    std::vector<std::thread> threads;
    for (int w = 1; w < workers; ++w) {
        const Eigen::Index from = std::min<Eigen::Index>(ns, w * per);
        const Eigen::Index to = std::min<Eigen::Index>(ns, (w + 1) * per);
        if (from < to) {
            threads.emplace_back(rows, from, to);
        }
    }
    rows(0, std::min(ns, per));
    for (auto& t : threads) {
        t.join();
    }
    return g;
}

void write_contour_csv(std::ostream& out, const ContourGrid& g)
{
    out << "sigma_s_prime,sigma_i_prime,car,g_c2,h\n";
    for (Eigen::Index r = 0; r < g.car.rows(); ++r) {
        for (Eigen::Index c = 0; c < g.car.cols(); ++c) {
            out << fmt::format("{:.6g},{:.6g},{:.17g},{:.17g},{:.17g}\n", g.sigma_s_values[static_cast<std::size_t>(r)],
                               g.sigma_i_values[static_cast<std::size_t>(c)], g.car(r, c), g.g_c2(r, c), g.h(r, c));
        }
    }
}

nlohmann::json contour_metadata(const ContourGrid& g)
{
    auto range = [](const SweepRange& r) { return nlohmann::json{{"min", r.min}, {"max", r.max}, {"step", r.step}}; };
    return {{"p_pair", g.p_pair},
            {"sigma_s_range", range(g.range_s)},
            {"sigma_i_range", range(g.range_i)},
            {"columns", {"sigma_s_prime", "sigma_i_prime", "car", "g_c2", "h"}},
            {"g_c2_form", "approximate"},
            {"tool_version", HSPS_VERSION}};
}

}  // namespace hsps::pipeline
