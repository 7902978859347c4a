#include "hsps/montecarlo.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <thread>
#include <vector>

#include <fmt/format.h>

#include "hsps/oracle.hpp"
#include "hsps/random.hpp"

namespace hsps::mc {

double gain_for_power(double s2, double p_ave_mw, double sigma_i_prime)
{
    if (!(s2 >= 0) || !(p_ave_mw > 0) || !(sigma_i_prime > 0)) {
        throw ValidationError("gain_for_power needs s2 >= 0, p_ave > 0 and sigma_i' > 0");
    }
    return s2 * p_ave_mw * p_ave_mw / (std::numbers::sqrt2 * std::numbers::pi * sigma_i_prime);
}

namespace {

std::array<double, 8> all_click_array(const analytic::CountProbabilities& p)
{
    // Index = detector mask.
    return {1.0, p.p1, p.p2, p.p12, p.p3, p.p13, p.p23, p.p123};
}

}  // namespace

std::array<double, 8> pattern_distribution(const analytic::CountProbabilities& p)
{
    const auto all = all_click_array(p);
    std::array<double, 8> dist{};
    for (unsigned pattern = 1; pattern < 8; ++pattern) {
        // P(exactly `pattern`) = sum over supersets B of (-1)^{|B|-|pattern|} P(all of B).
        double sum = 0.0;
        for (unsigned b = pattern; b < 8; ++b) {
            if ((b & pattern) != pattern) {
                continue;
            }
            const int extra = std::popcount(b) - std::popcount(pattern);
            sum += (extra % 2 ? -1.0 : 1.0) * all[b];
        }
        if (sum < -1e-14) {
            throw ModelValidityError(fmt::format(
                "inconsistent counting probabilities: click pattern {} would have probability {:.3g}", pattern, sum));
        }
        dist[pattern] = std::max(0.0, sum);
    }
    double rest = 0.0;
    for (unsigned pattern = 1; pattern < 8; ++pattern) {
        rest += dist[pattern];
    }
    if (rest > 1.0 + 1e-12) {
        throw ModelValidityError("inconsistent counting probabilities: click patterns exceed unit probability");
    }
    dist[0] = std::max(0.0, 1.0 - rest);
    return dist;
}

analytic::CountProbabilities all_click_probabilities(const std::array<double, 8>& dist)
{
    std::array<double, 8> all{};
    for (unsigned mask = 0; mask < 8; ++mask) {
        for (unsigned pattern = 0; pattern < 8; ++pattern) {
            if ((pattern & mask) == mask) {
                all[mask] += dist[pattern];
            }
        }
    }
    analytic::CountProbabilities p;
    p.p1 = all[0b001];
    p.p2 = all[0b010];
    p.p3 = all[0b100];
    p.p12 = all[0b011];
    p.p13 = all[0b101];
    p.p23 = all[0b110];
    p.p123 = all[0b111];
    p.p12_acc = p.p1 * p.p2;
    p.p13_acc = p.p1 * p.p3;
    return p;
}

std::array<double, 8> PulseModel::effective_dist() const
{
    std::array<double, 8> noise{};
    for (std::size_t j = 0; j < 3; ++j) {
        noise[j] = 1.0 - (1.0 - dark[j]) * (1.0 - raman_click[j]);
    }
    std::array<double, 8> out{};
    for (unsigned phys = 0; phys < 8; ++phys) {
        for (unsigned extra = 0; extra < 8; ++extra) {
            // `extra` = detectors whose background fires; only matters outside `phys`.
            double w = joint_click_dist[phys];
            for (unsigned j = 0; j < 3; ++j) {
                if (phys & (1u << j)) {
                    continue;
                }
                w *= (extra & (1u << j)) ? noise[j] : 1.0 - noise[j];
            }
            if (extra & phys) {
                continue;
            }
            out[phys | extra] += w;
        }
    }
    return out;
}

PulseModel build_pulse_model(const SourceConfig& config_in, PhysicsSource source,
                             const std::optional<RamanSettings>& raman)
{
    SourceConfig config = config_in;
    validate(config);
    const int divisor = config.detectors[0].gate_divisor;
    for (const auto& d : config.detectors) {
        if (d.gate_divisor != divisor) {
            throw ValidationError("all detectors must share one gate_divisor");
        }
    }
    const auto bw = normalize(config);
    if (raman) {
        if (!(raman->s1 >= 0) || !(raman->signal_fraction >= 0)) {
            throw ValidationError("Raman coefficients must be non-negative");
        }
        config.gain.g_squared = gain_for_power(raman->s2, raman->p_ave_mw, bw.sigma_i_prime);
    }

    PulseModel m;
    m.g_squared = config.gain.g_squared;
    if (config.gain.g_squared > 0) {
        if (source == PhysicsSource::analytic) {
            m.physics = analytic::full_report(analytic::model_parameters(config)).counts;
        } else {
            const auto grids = oracle::default_grids(config);
            m.physics = oracle::gaussian_click_probs(config, grids, oracle::ClickOrder::all_order).counts;
        }
    }
    m.joint_click_dist = pattern_distribution(m.physics);

    const double eta_s = signal_transmission(config);
    const double eta_i = idler_transmission(config);
    if (raman) {
        m.raman_idler_mean = raman->s1 * raman->p_ave_mw;
        m.raman_signal_mean = raman->signal_fraction * m.raman_idler_mean;
    }
    const std::array<double, 3> path{eta_i * config.detectors[0].efficiency,
                                     0.5 * eta_s * config.detectors[1].efficiency,
                                     0.5 * eta_s * config.detectors[2].efficiency};
    m.raman_click[0] = -std::expm1(-path[0] * m.raman_idler_mean);
    m.raman_click[1] = -std::expm1(-path[1] * m.raman_signal_mean);
    m.raman_click[2] = -std::expm1(-path[2] * m.raman_signal_mean);
    for (std::size_t j = 0; j < 3; ++j) {
        m.dark[j] = config.detectors[j].dark_count_prob;
        m.dead_time_gates[j] = config.detectors[j].dead_time_gates;
    }
    m.gate_divisor = divisor;
    m.heralding_denominator = path[1];
    return m;
}

namespace {

struct Sampler {
    std::array<double, 8> cumulative{};
    std::array<double, 3> dark{};
    std::array<double, 3> raman{};
    random::Key key{};
    std::int64_t divisor = 1;

    std::uint8_t draw(std::int64_t gate) const
    {
        const auto pulse = static_cast<std::uint64_t>(gate * divisor);
        const auto lo = static_cast<std::uint32_t>(pulse);
        const auto hi = static_cast<std::uint32_t>(pulse >> 32);
        const auto a = random::philox4x32({lo, hi, 0u, 0u}, key);
        const auto b = random::philox4x32({lo, hi, 1u, 0u}, key);

        const double u = random::uniform53(a[0], a[1]);
        unsigned pattern = 7;
        for (unsigned k = 0; k < 7; ++k) {
            if (u < cumulative[k]) {
                pattern = k;
                break;
            }
        }
        const std::array<std::uint32_t, 3> dark_bits{a[2], a[3], b[0]};
        const std::array<std::uint32_t, 3> raman_bits{b[1], b[2], b[3]};
        for (unsigned j = 0; j < 3; ++j) {
            if (random::uniform32(dark_bits[j]) < dark[j] || random::uniform32(raman_bits[j]) < raman[j]) {
                pattern |= 1u << j;
            }
        }
        return static_cast<std::uint8_t>(pattern);
    }
};

class Tallier {
public:
    explicit Tallier(const std::array<int, 3>& dead) : dead_(dead) {}

    void consume(std::int64_t first_gate, const std::vector<std::uint8_t>& raw, std::size_t count)
    {
        auto& t = tallies_;
        for (std::size_t k = 0; k < count; ++k) {
            const std::int64_t g = first_gate + static_cast<std::int64_t>(k);
            const bool a1 = g >= dead_until_[0];
            const bool a2 = g >= dead_until_[1];
            const bool a3 = g >= dead_until_[2];
            const unsigned bits = raw[k];
            const bool c1 = a1 && (bits & 1u);
            const bool c2 = a2 && (bits & 2u);
            const bool c3 = a3 && (bits & 4u);

            ++t.gates;
            t.live_1 += a1;
            t.live_2 += a2;
            t.live_3 += a3;
            t.live_12 += a1 && a2;
            t.live_13 += a1 && a3;
            t.live_23 += a2 && a3;
            t.live_123 += a1 && a2 && a3;
            t.singles_1 += c1;
            t.singles_2 += c2;
            t.singles_3 += c3;
            t.coinc_12 += c1 && c2;
            t.coinc_13 += c1 && c3;
            t.coinc_23 += c2 && c3;
            t.triples_123 += c1 && c2 && c3;

            // Herald clicks from earlier gates meet the next armed gate of each arm.
            if (a2) {
                t.acc_12 += c2 ? pending_12_ : 0;
                pending_12_ = 0;
            }
            if (a3) {
                t.acc_13 += c3 ? pending_13_ : 0;
                pending_13_ = 0;
            }
            if (c1) {
                ++pending_12_;
                ++pending_13_;
            }
            const std::array<bool, 3> clicked{c1, c2, c3};
            for (std::size_t j = 0; j < 3; ++j) {
                if (clicked[j]) {
                    dead_until_[j] = g + 1 + dead_[j];
                }
            }
        }
    }

    const counting::TallyCounters& tallies() const { return tallies_; }

private:
    std::array<int, 3> dead_;
    std::array<std::int64_t, 3> dead_until_{};
    std::int64_t pending_12_ = 0;
    std::int64_t pending_13_ = 0;
    counting::TallyCounters tallies_;
};

}  // namespace

counting::TallyCounters simulate(const PulseModel& model, std::int64_t n_pulses, std::uint64_t seed,
                                 const SimulationOptions& options)
{
    if (n_pulses < 1) {
        throw ValidationError("n_pulses must be >= 1");
    }
    if (options.chunk_gates < 1 || options.workers < 1) {
        throw ValidationError("chunk size and worker count must be >= 1");
    }
    if (model.gate_divisor < 1) {
        throw ValidationError("gate_divisor must be >= 1");
    }
    for (double p : model.joint_click_dist) {
        if (!(p >= 0) || !(p <= 1)) {
            throw ValidationError("click distribution entries must lie in [0, 1]");
        }
    }

    Sampler sampler;
    double acc = 0.0;
    for (std::size_t k = 0; k < 8; ++k) {
        acc += model.joint_click_dist[k];
        sampler.cumulative[k] = acc;
    }
    sampler.dark = model.dark;
    sampler.raman = model.raman_click;
    sampler.key = random::key_from_seed(seed);
    sampler.divisor = model.gate_divisor;

    const std::int64_t total = (n_pulses + model.gate_divisor - 1) / model.gate_divisor;
    const std::int64_t batch = options.chunk_gates * options.workers;
    std::vector<std::uint8_t> raw(static_cast<std::size_t>(std::min(batch, total)));
    Tallier tallier(model.dead_time_gates);

    for (std::int64_t start = 0; start < total; start += batch) {
        const std::int64_t count = std::min(batch, total - start);
        auto fill = [&](std::int64_t from, std::int64_t to) {
            for (std::int64_t k = from; k < to; ++k) {
                raw[static_cast<std::size_t>(k)] = sampler.draw(start + k);
            }
        };
        if (options.workers == 1) {
            fill(0, count);
        } else {
            std::vector<std::thread> threads;
            for (int w = 1; w < options.workers; ++w) {
                const std::int64_t from = std::min(count, w * options.chunk_gates);
                const std::int64_t to = std::min(count, (w + 1) * options.chunk_gates);
                if (from < to) {
                    threads.emplace_back(fill, from, to);
                }
            }
            fill(0, std::min(count, options.chunk_gates));
            for (auto& th : threads) {
                th.join();
            }
        }
        tallier.consume(start, raw, static_cast<std::size_t>(count));
        if (options.progress) {
            options.progress(start + count, total);
        }
    }
    return tallier.tallies();
}

Prediction predict(const PulseModel& model)
{
    Prediction p;
    p.effective = all_click_probabilities(model.effective_dist());
    const auto& e = p.effective;
    if (!(e.p1 > 0) || !(e.p2 > 0) || !(e.p12 > 0) || !(e.p13 > 0)) {
        throw ModelValidityError("model predicts no herald counts or coincidences");
    }
    p.car = e.p12 / (e.p1 * e.p2);
    p.g_c2 = e.p123 * e.p1 / (e.p13 * e.p12);
    p.eta_d = (e.p12 - e.p1 * e.p2) / e.p1;
    p.heralding = p.eta_d / model.heralding_denominator;
    return p;
}

counting::TallyCounters expected_tallies(const PulseModel& model, std::int64_t gates)
{
    if (gates < 1) {
        throw ValidationError("expected_tallies needs at least one gate");
    }
    const auto e = all_click_probabilities(model.effective_dist());
    const double n = static_cast<double>(gates);
    auto count = [&](double p) { return static_cast<std::int64_t>(std::llround(p * n)); };
    counting::TallyCounters t;
    t.gates = gates;
    t.assume_always_live();
    t.singles_1 = count(e.p1);
    t.singles_2 = count(e.p2);
    t.singles_3 = count(e.p3);
    t.coinc_12 = count(e.p12);
    t.coinc_13 = count(e.p13);
    t.coinc_23 = count(e.p23);
    t.triples_123 = count(e.p123);
    t.acc_12 = count(e.p1 * e.p2);
    t.acc_13 = count(e.p1 * e.p3);
    return t;
}

nlohmann::json to_json(const PulseModel& m)
{
    return {{"joint_click_dist", m.joint_click_dist},
            {"g_squared", m.g_squared},
            {"raman_idler_mean", m.raman_idler_mean},
            {"raman_signal_mean", m.raman_signal_mean},
            {"raman_click", m.raman_click},
            {"dark", m.dark},
            {"dead_time_gates", m.dead_time_gates},
            {"gate_divisor", m.gate_divisor},
            {"heralding_denominator", m.heralding_denominator}};
}

nlohmann::json to_json(const Prediction& p)
{
    return {{"car", p.car},
            {"g_c2", p.g_c2},
            {"H", p.heralding},
            {"eta_d", p.eta_d},
            {"p1", p.effective.p1},
            {"p2", p.effective.p2},
            {"p3", p.effective.p3},
            {"p12", p.effective.p12},
            {"p13", p.effective.p13},
            {"p23", p.effective.p23},
            {"p123", p.effective.p123}};
}

}  // namespace hsps::mc
