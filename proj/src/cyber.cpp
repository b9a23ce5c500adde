#include "dergrid/cyber.hpp"

#include <algorithm>
#include <cmath>

namespace dergrid {

double DelaySampler::sample() {
    for (;;) {
        double d = rng_.normal(model_.mean_ms, model_.std_ms);
        if (rng_.uniform01() >= model_.mix)
            d += rng_.exponential(model_.tail_rate_per_ms);
        if (d >= 0.0) return d;
        // negative draw: resample
    }
}

double sample_delay(DelaySampler& sampler) { return sampler.sample(); }

const char* to_string(MessageKind kind) {
    switch (kind) {
        case MessageKind::UplinkVoltage: return "uplink-voltage";
        case MessageKind::UplinkHeadPower: return "uplink-headpower";
        case MessageKind::DownlinkDuals: return "downlink-duals";
    }
    return "?";
}

const char* to_string(Strategy strategy) {
    switch (strategy) {
        case Strategy::PreviousValue: return "prev";
        case Strategy::SkipUpdate: return "skip";
        case Strategy::LstmForecast: return "lstm";
    }
    return "?";
}

Strategy strategy_from_string(const std::string& name) {
    if (name == "prev" || name == "previous" || name == "previous-value") return Strategy::PreviousValue;
    if (name == "skip" || name == "skip-update") return Strategy::SkipUpdate;
    if (name == "lstm" || name == "lstm-forecast") return Strategy::LstmForecast;
    throw ValidationError("unknown strategy '" + name + "' (expected prev | skip | lstm)");
}

double calibrate_threshold(const DelayModel& model, double target_loss_rate, long samples) {
    if (target_loss_rate <= 0.0 || target_loss_rate >= 1.0)
        throw ValidationError("calibrate_threshold: target rate must lie in (0,1)");
    if (samples < 2) throw ValidationError("calibrate_threshold: need at least 2 samples");

    DelaySampler sampler(model);
    std::vector<double> draws(static_cast<std::size_t>(samples));
    for (auto& d : draws) d = sampler.sample();

    // Index of the (1-rate) quantile; clamp keeps the degenerate rates legal.
    const double pos = (1.0 - target_loss_rate) * static_cast<double>(samples - 1);
    const auto k = static_cast<std::size_t>(pos);
    std::nth_element(draws.begin(), draws.begin() + k, draws.end());
    const double lo = draws[k];
    if (k + 1 >= draws.size()) return lo;
    const double hi = *std::min_element(draws.begin() + k + 1, draws.end());
    const double frac = pos - static_cast<double>(k);
    return lo + frac * (hi - lo);
}

std::vector<MessageRecord> classify_arrivals(long iteration, std::span<const NodeId> nodes,
                                             DelaySampler& sampler, double d_star_ms,
                                             bool window_active) {
    std::vector<MessageRecord> records;
    records.reserve(nodes.size());
    for (NodeId n : nodes) {
        MessageRecord rec;
        rec.kind = MessageKind::UplinkVoltage;
        rec.node = n;
        rec.issued_at = iteration;
        rec.delay_ms = sampler.sample();
        rec.on_time = !window_active || rec.delay_ms <= d_star_ms;
        records.push_back(rec);
    }
    return records;
}

Resolution resolve_missing(Strategy strategy, NodeId node, std::span<const double> history,
                           const ForecastRegistry& registry) {
    Resolution r;
    switch (strategy) {
        case Strategy::SkipUpdate:
            r.kind = Resolution::Kind::Skip;
            return r;
        case Strategy::PreviousValue:
            if (history.empty())
                throw ValidationError("resolve_missing: no history for node " + std::to_string(node));
            r.value = history.back();
            return r;
        case Strategy::LstmForecast: {
            if (registry.has(node)) {
                const int lb = registry.get(node).lookback;
                if (static_cast<int>(history.size()) >= lb) {
                    r.value = registry.predict(node, history.subspan(history.size() - lb));
                    return r;
                }
            }
            if (history.empty())
                throw ValidationError("resolve_missing: no history for node " + std::to_string(node));
            r.value = history.back();
            r.fallback_used = true;
            return r;
        }
    }
    throw ValidationError("resolve_missing: unknown strategy");
}

} // namespace dergrid
