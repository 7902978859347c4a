#include "hsps/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "hsps/analytic_stats.hpp"
#include "hsps/config_io.hpp"
#include "hsps/experiment_pipeline.hpp"
#include "hsps/log.hpp"
#include "hsps/mode_structure.hpp"
#include "hsps/montecarlo.hpp"
#include "hsps/oracle.hpp"

namespace hsps::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
    std::string config_path;
    std::string out;
    std::string manifest;
    std::uint64_t seed = 1;
    int workers = 1;
    std::optional<double> g_squared;
    std::optional<double> p_pair;
    std::string grid = "0.1:3.0:0.05";
    std::string pulses = "1000000";
    std::string raman;
    std::optional<double> p_ave;
    std::string powers;
    std::string in;
    std::string band = "idler";
    std::string source = "analytic";
    bool subtract_dark = false;
    double signal_fraction = 0.0;
    std::string csv;
};

struct Outputs {
    std::vector<std::string> files;
};

std::vector<double> parse_list(const std::string& text, char sep, const char* flag)
{
    std::vector<double> values;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, sep)) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != item.size()) {
            throw ValidationError(fmt::format("{}: '{}' is not a number", flag, item));
        }
        values.push_back(v);
    }
    return values;
}

SweepRange parse_grid(const std::string& text)
{
    const auto v = parse_list(text, ':', "--grid");
    if (v.size() != 3) {
        throw ValidationError("--grid expects min:max:step");
    }
    SweepRange r{v[0], v[1], v[2]};
    sweep_values(r);
    return r;
}

std::int64_t parse_pulses(const std::string& text)
{
    const auto v = parse_list(text, ',', "--pulses");
    if (v.size() != 1 || !(v[0] >= 1) || v[0] > 9.0e18 || v[0] != std::floor(v[0])) {
        throw ValidationError("--pulses expects a positive integer (1e7 notation allowed)");
    }
    return static_cast<std::int64_t>(v[0]);
}

SourceConfig load(const Options& o)
{
    SourceConfig c = o.config_path.empty() ? demo_config() : load_config(o.config_path);
    if (o.g_squared) {
        c.gain.g_squared = *o.g_squared;
    }
    validate(c);
    return c;
}

void write_text(const std::string& path, const std::string& text, Outputs& outputs)
{
    const fs::path p(path);
    if (p.has_parent_path()) {
        fs::create_directories(p.parent_path());
    }
    std::ofstream f(p, std::ios::binary);
    if (!f) {
        throw ValidationError(fmt::format("cannot write '{}'", path));
    }
    f << text;
    outputs.files.push_back(path);
}

void emit(const Options& o, const std::string& text, std::ostream& out, Outputs& outputs)
{
    if (o.out.empty()) {
        out << text;
    } else {
        write_text(o.out, text, outputs);
    }
}

std::string dump(const json& doc)
{
    return doc.dump(2) + "\n";
}

void cmd_report(const Options& o, std::ostream& out, Outputs& outputs)
{
    const auto report = analytic::full_report(load(o));
    emit(o, dump(analytic::to_json(report)), out, outputs);
}

void cmd_sweep(const Options& o, std::ostream& out, Outputs& outputs)
{
    const SweepRange range = parse_grid(o.grid);
    const auto grid = pipeline::sweep_contour(o.p_pair.value_or(0.01), range, range, o.workers);
    std::ostringstream csv;
    pipeline::write_contour_csv(csv, grid);
    emit(o, csv.str(), out, outputs);
    if (!o.out.empty()) {
        write_text(o.out + ".json", dump(pipeline::contour_metadata(grid)), outputs);
    }
}

void cmd_oracle(const Options& o, std::ostream& out, Outputs& outputs)
{
    const SourceConfig config = load(o);
    const auto grids = oracle::default_grids(config);
    const auto numeric = oracle::numeric_counts(config, grids);
    auto rows = oracle::compare(config, numeric);

    const auto report = analytic::full_report(analytic::model_parameters(config));
    for (auto order : {oracle::ClickOrder::low_gain, oracle::ClickOrder::all_order}) {
        const auto clicks = oracle::gaussian_click_probs(config, grids, order);
        const std::string tag = order == oracle::ClickOrder::low_gain ? "click_low_gain_" : "click_all_order_";
        const std::vector<std::pair<std::string, std::pair<double, double>>> pairs{
            {"p1", {report.counts.p1, clicks.counts.p1}},
            {"p2", {report.counts.p2, clicks.counts.p2}},
            {"p3", {report.counts.p3, clicks.counts.p3}},
            {"p12", {report.counts.p12, clicks.counts.p12}},
            {"p13", {report.counts.p13, clicks.counts.p13}},
            {"p123", {report.counts.p123, clicks.counts.p123}},
        };
        for (const auto& [name, v] : pairs) {
            const double err = v.first != 0.0 ? std::abs(v.first - v.second) / std::abs(v.first) : std::abs(v.second);
            rows.push_back({report.parameters.bandwidths.sigma_s_prime, report.parameters.bandwidths.sigma_i_prime,
                            report.parameters.g_squared, tag + name, v.first, v.second, err});
        }
    }
    std::ostringstream csv;
    oracle::write_comparison_csv(csv, rows);
    emit(o, csv.str(), out, outputs);
}

void cmd_modes(const Options& o, std::ostream& out, Outputs& outputs)
{
    const SourceConfig config = load(o);
    const auto report = modes::mode_report(config);
    const auto strategies = modes::indistinguishability_report(config, o.p_pair.value_or(0.005));
    json doc{{"modes", modes::to_json(report)}, {"strategies", modes::to_json(strategies)}};
    emit(o, dump(doc), out, outputs);
    if (!o.csv.empty()) {
        std::ostringstream csv;
        modes::write_strategy_csv(csv, strategies);
        write_text(o.csv, csv.str(), outputs);
    }
}

mc::PhysicsSource parse_source(const std::string& s)
{
    if (s == "analytic") {
        return mc::PhysicsSource::analytic;
    }
    if (s == "oracle") {
        return mc::PhysicsSource::gaussian_oracle;
    }
    throw ValidationError(fmt::format("--source must be 'analytic' or 'oracle', got '{}'", s));
}

std::optional<mc::RamanSettings> parse_raman(const Options& o)
{
    if (o.raman.empty()) {
        return std::nullopt;
    }
    const auto v = parse_list(o.raman, ',', "--raman");
    if (v.size() != 2) {
        throw ValidationError("--raman expects s1,s2");
    }
    mc::RamanSettings r;
    r.s1 = v[0];
    r.s2 = v[1];
    r.signal_fraction = o.signal_fraction;
    return r;
}

void cmd_mc(const Options& o, std::ostream& out, Outputs& outputs)
{
    const SourceConfig config = load(o);
    const auto source = parse_source(o.source);
    const std::int64_t pulses = parse_pulses(o.pulses);
    auto raman = parse_raman(o);
    mc::SimulationOptions sim;
    sim.workers = o.workers;

    if (!o.powers.empty()) {
        if (!raman) {
            throw ValidationError("--powers needs --raman s1,s2 to set the gain at each power");
        }
        std::vector<pipeline::PowerPointRecord> records;
        const auto powers = parse_list(o.powers, ',', "--powers");
        for (std::size_t k = 0; k < powers.size(); ++k) {
            raman->p_ave_mw = powers[k];
            const auto model = mc::build_pulse_model(config, source, raman);
            pipeline::PowerPointRecord r;
            r.p_ave_mw = powers[k];
            r.tallies = mc::simulate(model, pulses, o.seed + k, sim);
            r.config_id = o.config_path.empty() ? "demo" : fs::path(o.config_path).filename().string();
            records.push_back(std::move(r));
        }
        std::ostringstream csv;
        pipeline::write_records(csv, records);
        emit(o, csv.str(), out, outputs);
        return;
    }

    if (raman) {
        if (!o.p_ave) {
            throw ValidationError("--raman needs --p-ave (or --powers)");
        }
        raman->p_ave_mw = *o.p_ave;
    }
    const auto model = mc::build_pulse_model(config, source, raman);
    const auto tallies = mc::simulate(model, pulses, o.seed, sim);
    json doc{{"seed", o.seed},
             {"pulses", pulses},
             {"source", o.source},
             {"model", mc::to_json(model)},
             {"tallies", counting::to_json(tallies)},
             {"prediction", mc::to_json(mc::predict(model))}};
    try {
        doc["estimates"] = counting::to_json(counting::estimate(tallies, model.heralding_denominator));
    } catch (const ModelValidityError& e) {
        doc["estimates"] = nullptr;
        doc["estimate_error"] = e.what();
        logger().warn("{}", e.what());
    }
    emit(o, dump(doc), out, outputs);
}

pipeline::Band parse_band(const std::string& s)
{
    if (s == "idler") {
        return pipeline::Band::idler;
    }
    if (s == "signal") {
        return pipeline::Band::signal;
    }
    throw ValidationError(fmt::format("--band must be 'idler' or 'signal', got '{}'", s));
}

void cmd_fit(const Options& o, std::ostream& out, Outputs& outputs)
{
    const SourceConfig config = load(o);
    const auto data = pipeline::ingest(fs::path(o.in));
    const auto fit = pipeline::fit_quadratic(data.records, parse_band(o.band), config);
    json doc{{"band", o.band}, {"records", data.records.size()}, {"fit", pipeline::to_json(fit)},
             {"warnings", data.warnings}};
    emit(o, dump(doc), out, outputs);
}

void cmd_correct(const Options& o, std::ostream& out, Outputs& outputs)
{
    const SourceConfig config = load(o);
    const auto data = pipeline::ingest(fs::path(o.in));
    const auto fit = pipeline::fit_quadratic(data.records, pipeline::Band::idler, config);
    pipeline::CorrectionOptions options;
    options.subtract_dark = o.subtract_dark;
    options.signal_fraction = o.signal_fraction;
    const auto points = pipeline::raman_correct(data.records, fit, config, options);

    json list = json::array();
    std::vector<double> x, h_raw, e_raw, h_cor, e_cor;
    for (const auto& p : points) {
        list.push_back(pipeline::to_json(p));
        x.push_back(p.p_ave_mw);
        h_raw.push_back(p.raw.heralding.value);
        e_raw.push_back(p.raw.heralding.std_error);
        h_cor.push_back(p.corrected.heralding.value);
        e_cor.push_back(p.corrected.heralding.std_error);
    }
    json doc{{"fit", pipeline::to_json(fit)},
             {"corrected_quantities", {"singles", "coincidences", "triples", "accidentals"}},
             {"subtract_dark", o.subtract_dark},
             {"signal_fraction", o.signal_fraction},
             {"points", list},
             {"warnings", data.warnings}};
    if (points.size() >= 3) {
        auto line = [](const pipeline::LineFit& f) {
            return json{{"slope", f.slope}, {"slope_error", f.slope_error}, {"intercept", f.intercept}, {"chi2", f.chi2}};
        };
        doc["h_raw_vs_power"] = line(pipeline::fit_line(x, h_raw, e_raw));
        doc["h_corrected_vs_power"] = line(pipeline::fit_line(x, h_cor, e_cor));
    }
    emit(o, dump(doc), out, outputs);
}

std::string manifest_path(const Options& o, const std::string& sub)
{
    if (!o.manifest.empty()) {
        return o.manifest;
    }
    if (!o.out.empty()) {
        return o.out + ".manifest.json";
    }
    return fmt::format("hsps-{}.manifest.json", sub);
}

void write_manifest(const Options& o, const std::string& sub, const std::vector<std::string>& args,
                    const Outputs& outputs)
{
    const std::string path = manifest_path(o, sub);
    const fs::path out_dir = o.out.empty() ? fs::path(".") : fs::path(o.out).parent_path();
    json doc{{"subcommand", sub},
             {"config_path", o.config_path.empty() ? "builtin:demo" : o.config_path},
             {"seed", o.seed},
             {"workers", o.workers},
             {"output_dir", out_dir.empty() ? "." : out_dir.string()},
             {"outputs", outputs.files},
             {"arguments", args},
             {"tool_version", HSPS_VERSION}};
    Outputs ignored;
    write_text(path, dump(doc), ignored);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    configure_logging_from_env();

    CLI::App app{"Heralded single-photon source statistics from fiber four-wave mixing", "hsps"};
    app.set_version_flag("--version", HSPS_VERSION);
    app.require_subcommand(1);
    Options o;

    auto common = [&](CLI::App* sub, bool with_config) {
        sub->add_option("--out", o.out, "Output file (default: stdout)");
        sub->add_option("--manifest", o.manifest, "Manifest path (default: <out>.manifest.json)");
        sub->add_option("--seed", o.seed, "Seed recorded in the manifest (and used by mc)");
        sub->add_option("--workers", o.workers, "Worker threads")->check(CLI::PositiveNumber);
        if (with_config) {
            sub->add_option("--config", o.config_path, "Source configuration JSON (default: built-in demo)");
            sub->add_option("--g-squared", o.g_squared, "Override gain.g_squared");
        }
    };

    auto* report = app.add_subcommand("report", "Closed-form counting statistics and figures of merit");
    common(report, true);
    auto* sweep = app.add_subcommand("sweep", "CAR, g_c2 and H contour grid over both bandwidths");
    common(sweep, false);
    sweep->add_option("--p-pair", o.p_pair, "Pairs per pulse (default 0.01)");
    sweep->add_option("--grid", o.grid, "min:max:step for both normalized bandwidths");
    auto* orc = app.add_subcommand("oracle", "Closed forms vs quadrature vs Gaussian click probabilities");
    common(orc, true);
    auto* mds = app.add_subcommand("modes", "Schmidt decomposition and narrow-filter strategies");
    common(mds, true);
    mds->add_option("--p-pair", o.p_pair, "Pairs per pulse for the strategy comparison (default 0.005)");
    mds->add_option("--csv", o.csv, "Write the strategy sweep CSV here");
    auto* mcs = app.add_subcommand("mc", "Monte Carlo run of the gated detectors");
    common(mcs, true);
    mcs->add_option("--pulses", o.pulses, "Number of pump pulses (default 1000000)");
    mcs->add_option("--source", o.source, "Physics source: analytic | oracle");
    mcs->add_option("--raman", o.raman, "Idler photon numbers per pulse N = s1 P + s2 P^2, as s1,s2");
    mcs->add_option("--p-ave", o.p_ave, "Average pump power in mW (with --raman)");
    mcs->add_option("--powers", o.powers, "Comma-separated powers in mW: emit a records CSV");
    mcs->add_option("--signal-fraction", o.signal_fraction, "Signal-band Raman relative to idler");
    auto* fit = app.add_subcommand("fit", "Fit N = s1 P + s2 P^2 to a records CSV");
    common(fit, true);
    fit->add_option("--in", o.in, "Records CSV")->required();
    fit->add_option("--band", o.band, "idler | signal");
    auto* cor = app.add_subcommand("correct", "Fit and remove the Raman background from a records CSV");
    common(cor, true);
    cor->add_option("--in", o.in, "Records CSV")->required();
    cor->add_flag("--subtract-dark", o.subtract_dark, "Remove dark counts together with the Raman background");
    cor->add_option("--signal-fraction", o.signal_fraction, "Signal-band Raman relative to idler");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::CallForVersion&) {
        out << HSPS_VERSION << "\n";
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return exit_validation;
    }

    const std::string sub = app.get_subcommands().front()->get_name();
    try {
        Outputs outputs;
        if (sub == "report") {
            cmd_report(o, out, outputs);
        } else if (sub == "sweep") {
            cmd_sweep(o, out, outputs);
        } else if (sub == "oracle") {
            cmd_oracle(o, out, outputs);
        } else if (sub == "modes") {
            cmd_modes(o, out, outputs);
        } else if (sub == "mc") {
            cmd_mc(o, out, outputs);
        } else if (sub == "fit") {
            cmd_fit(o, out, outputs);
        } else {
            cmd_correct(o, out, outputs);
        }
        write_manifest(o, sub, args, outputs);
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return exit_validation;
    } catch (const ModelValidityError& e) {
        err << "model validity error: " << e.what() << "\n";
        return exit_model;
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << "\n";
        return exit_model;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return exit_validation;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return exit_model;
    }
    return exit_ok;
}

int run(int argc, char** argv)
{
    std::vector<std::string> args;
    for (int k = 1; k < argc; ++k) {
        args.emplace_back(argv[k]);
    }
    return run(args, std::cout, std::cerr);
}

}  // namespace hsps::cli
