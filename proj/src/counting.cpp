#include "hsps/counting.hpp"

#include <fmt/format.h>

namespace hsps::counting {

TallyCounters& TallyCounters::operator+=(const TallyCounters& o)
{
    gates += o.gates;
    live_1 += o.live_1;
    live_2 += o.live_2;
    live_3 += o.live_3;
    live_12 += o.live_12;
    live_13 += o.live_13;
    live_23 += o.live_23;
    live_123 += o.live_123;
    singles_1 += o.singles_1;
    singles_2 += o.singles_2;
    singles_3 += o.singles_3;
    coinc_12 += o.coinc_12;
    coinc_13 += o.coinc_13;
    coinc_23 += o.coinc_23;
    acc_12 += o.acc_12;
    acc_13 += o.acc_13;
    triples_123 += o.triples_123;
    return *this;
}

void TallyCounters::assume_always_live()
{
    live_1 = live_2 = live_3 = gates;
    live_12 = live_13 = live_23 = live_123 = gates;
}

void TallyCounters::check() const
{
    auto fail = [](const char* what) { throw ValidationError(fmt::format("inconsistent tallies: {}", what)); };
    const std::int64_t all[] = {gates,     live_1,    live_2,   live_3,   live_12, live_13,
                                live_23,   live_123,  singles_1, singles_2, singles_3, coinc_12,
                                coinc_13,  coinc_23,  acc_12,   acc_13,   triples_123};
    for (auto v : all) {
        if (v < 0) {
            fail("negative count");
        }
    }
    if (live_1 > gates || live_2 > gates || live_3 > gates) {
        fail("live gates exceed gates");
    }
    if (live_12 > std::min(live_1, live_2) || live_13 > std::min(live_1, live_3)
        || live_23 > std::min(live_2, live_3) || live_123 > std::min({live_12, live_13, live_23})) {
        fail("joint live gates exceed single live gates");
    }
    if (singles_1 > live_1 || singles_2 > live_2 || singles_3 > live_3) {
        fail("singles exceed live gates");
    }
    if (coinc_12 > std::min(singles_1, singles_2) || coinc_13 > std::min(singles_1, singles_3)
        || coinc_23 > std::min(singles_2, singles_3)) {
        fail("coincidences exceed singles");
    }
    if (triples_123 > std::min({coinc_12, coinc_13, coinc_23})) {
        fail("triples exceed coincidences");
    }
    if (acc_12 > singles_1 || acc_13 > singles_1) {
        fail("accidentals exceed herald singles");
    }
}

nlohmann::json to_json(const TallyCounters& t)
{
    return {{"gates", t.gates},         {"live_1", t.live_1},       {"live_2", t.live_2},
            {"live_3", t.live_3},       {"live_12", t.live_12},     {"live_13", t.live_13},
            {"live_23", t.live_23},     {"live_123", t.live_123},   {"singles_1", t.singles_1},
            {"singles_2", t.singles_2}, {"singles_3", t.singles_3}, {"coinc_12", t.coinc_12},
            {"coinc_13", t.coinc_13},   {"coinc_23", t.coinc_23},   {"acc_12", t.acc_12},
            {"acc_13", t.acc_13},       {"triples_123", t.triples_123}};
}

TallyCounters tallies_from_json(const nlohmann::json& doc)
{
    auto get = [&](const char* key) {
        if (!doc.contains(key) || !doc.at(key).is_number_integer()) {
            throw ValidationError(fmt::format("tallies: missing or non-integer '{}'", key));
        }
        return doc.at(key).get<std::int64_t>();
    };
    TallyCounters t;
    t.gates = get("gates");
    t.live_1 = get("live_1");
    t.live_2 = get("live_2");
    t.live_3 = get("live_3");
    t.live_12 = get("live_12");
    t.live_13 = get("live_13");
    t.live_23 = get("live_23");
    t.live_123 = get("live_123");
    t.singles_1 = get("singles_1");
    t.singles_2 = get("singles_2");
    t.singles_3 = get("singles_3");
    t.coinc_12 = get("coinc_12");
    t.coinc_13 = get("coinc_13");
    t.coinc_23 = get("coinc_23");
    t.acc_12 = get("acc_12");
    t.acc_13 = get("acc_13");
    t.triples_123 = get("triples_123");
    t.check();
    return t;
}

namespace {

// Detector subsets as bit masks: bit 0 = SPD1, bit 1 = SPD2, bit 2 = SPD3.
constexpr std::array<int, 8> rate_of_mask{-1, r_p1, r_p2, r_p12, r_p3, r_p13, r_p23, r_p123};
constexpr std::array<unsigned, 7> mask_of_rate{0b001, 0b010, 0b100, 0b011, 0b101, 0b110, 0b111};

double live_of(const TallyCounters& t, unsigned mask)
{
    switch (mask) {
        case 0b001: return static_cast<double>(t.live_1);
        case 0b010: return static_cast<double>(t.live_2);
        case 0b100: return static_cast<double>(t.live_3);
        case 0b011: return static_cast<double>(t.live_12);
        case 0b101: return static_cast<double>(t.live_13);
        case 0b110: return static_cast<double>(t.live_23);
        default: return static_cast<double>(t.live_123);
    }
}

}  // namespace

Rates rates(const TallyCounters& t)
{
    for (unsigned mask = 1; mask < 8; ++mask) {
        if (live_of(t, mask) <= 0) {
            throw ModelValidityError("rates need at least one live gate for every detector combination");
        }
    }
    Rates r;
    auto& v = r.values;
    const std::array<std::int64_t, 7> clicks{t.singles_1, t.singles_2, t.singles_3, t.coinc_12,
                                             t.coinc_13,  t.coinc_23,  t.triples_123};
    for (int k = 0; k < 7; ++k) {
        v[k] = static_cast<double>(clicks[static_cast<std::size_t>(k)]) / live_of(t, mask_of_rate[static_cast<std::size_t>(k)]);
    }
    const double l1 = static_cast<double>(t.live_1);
    v[r_a12] = static_cast<double>(t.acc_12) / l1;
    v[r_a13] = static_cast<double>(t.acc_13) / l1;

    auto& c = r.covariance;
    c.setZero();
    for (int e = 0; e < 7; ++e) {
        for (int f = 0; f < 7; ++f) {
            const unsigned me = mask_of_rate[static_cast<std::size_t>(e)];
            const unsigned mf = mask_of_rate[static_cast<std::size_t>(f)];
            const unsigned mu = me | mf;
            const double pu = v[rate_of_mask[mu]];
            c(e, f) = live_of(t, mu) / (live_of(t, me) * live_of(t, mf)) * (pu - v[e] * v[f]);
        }
    }
    const double p2 = v[r_p2];
    const double p3 = v[r_p3];
    for (int acc : {static_cast<int>(r_a12), static_cast<int>(r_a13)}) {
        const double a = v[acc];
        const double partner = acc == r_a12 ? p2 : p3;
        c(acc, acc) = a * (1.0 - a) / l1;
        for (int e = 0; e < 7; ++e) {
            const unsigned me = mask_of_rate[static_cast<std::size_t>(e)];
            double cov;
            if (me & 0b001) {
                cov = v[e] * (partner - a) / l1;
            } else {
                const unsigned mu = me | 0b001;
                cov = live_of(t, mu) / (l1 * live_of(t, me)) * (v[rate_of_mask[mu]] * partner - a * v[e]);
            }
            c(acc, e) = c(e, acc) = cov;
        }
    }
    c(r_a12, r_a13) = c(r_a13, r_a12) = (v[r_p1] * v[r_p23] - v[r_a12] * v[r_a13]) / l1;
    return r;
}

nlohmann::json to_json(const EstimatorResult& e)
{
    return {{"value", e.value}, {"std_error", e.std_error}, {"n_effective", e.n_effective}};
}

nlohmann::json to_json(const Estimates& e)
{
    return {{"car", to_json(e.car)}, {"g_c2", to_json(e.g_c2)}, {"H", to_json(e.heralding)},
            {"eta_d", to_json(e.eta_d)}};
}

double heralding_denominator(const SourceConfig& config)
{
    return 0.5 * signal_transmission(config) * config.detectors[1].efficiency;
}

double car_of(const RateVector& r)
{
    return r[r_p12] / r[r_a12];
}

double g_c2_of(const RateVector& r)
{
    return r[r_p123] * r[r_p1] / (r[r_p13] * r[r_p12]);
}

double eta_d_of(const RateVector& r)
{
    return (r[r_p12] - r[r_a12]) / r[r_p1];
}

Estimates estimate(const TallyCounters& t, const SourceConfig& config)
{
    return estimate(t, heralding_denominator(config));
}

Estimates estimate(const TallyCounters& t, double denominator)
{
    if (t.singles_1 == 0) {
        throw ModelValidityError("no herald (SPD1) counts recorded; increase n_pulses or the pump power");
    }
    if (t.acc_12 == 0) {
        throw ModelValidityError("no accidental coincidences recorded, CAR is undefined; increase n_pulses");
    }
    if (t.coinc_12 == 0 || t.coinc_13 == 0) {
        throw ModelValidityError("no two-fold coincidences recorded, g_c2 is undefined; increase n_pulses");
    }
    if (!(denominator > 0)) {
        throw ModelValidityError("heralding efficiency needs a non-zero signal-arm efficiency");
    }
    const Rates r = rates(t);
    using F = std::function<double(const RateVector&)>;
    Estimates e;
    e.car = propagate<rate_count>(F(car_of), r.values, r.covariance, t.acc_12);
    e.g_c2 = propagate<rate_count>(F(g_c2_of), r.values, r.covariance, t.triples_123);
    e.eta_d = propagate<rate_count>(F(eta_d_of), r.values, r.covariance, t.coinc_12);
    e.heralding = e.eta_d;
    e.heralding.value /= denominator;
    e.heralding.std_error /= denominator;
    return e;
}

}  // namespace hsps::counting
