#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dergrid/forecast.hpp"
#include "dergrid/rng.hpp"

namespace dergrid {

// Uplink latency model: a Gaussian body with probability `mix`, otherwise the
// same Gaussian plus an exponential tail. Negative draws are resampled. The
// default parameters are calibrated so the 99th percentile sits at 6.675 ms.
struct DelayModel {
    double mean_ms = 5.0;
    double std_ms = 0.5;
    double mix = 0.9;                 // probability of the body-only draw
    double tail_rate_per_ms = 1.5758; // exponential rate of the tail component
    std::uint64_t seed = 1;

    void validate() const {
        if (std_ms <= 0.0) throw ValidationError("delay model: std_ms must be > 0");
        if (tail_rate_per_ms <= 0.0) throw ValidationError("delay model: tail_rate_per_ms must be > 0");
        if (mix < 0.0 || mix > 1.0) throw ValidationError("delay model: mix must be in [0,1]");
    }

    // Analytic mean of the mixture (resampling of negative draws ignored; they
    // are vanishingly rare for sane parameters).
    double analytic_mean() const {
        return mean_ms + (1.0 - mix) / tail_rate_per_ms;
    }
};

// Stateful sampler so one seeded stream drives a whole run.
class DelaySampler {
public:
    explicit DelaySampler(const DelayModel& model) : model_(model), rng_(model.seed) {
        model.validate();
    }

    double sample();

private:
    DelayModel model_;
    Rng rng_;
};

enum class MessageKind { UplinkVoltage, UplinkHeadPower, DownlinkDuals };

enum class Strategy { PreviousValue, SkipUpdate, LstmForecast };

const char* to_string(MessageKind kind);
const char* to_string(Strategy strategy);
Strategy strategy_from_string(const std::string& name);

struct MessageRecord {
    MessageKind kind = MessageKind::UplinkVoltage;
    NodeId node = 0;
    long issued_at = 0;   // iteration t_k
    double delay_ms = 0.0;
    bool on_time = true;  // delay_ms <= d_star (forced true outside the window)
    std::string action;   // strategy applied when late, empty otherwise
};

double sample_delay(DelaySampler& sampler);

// Empirical (1 - target_loss_rate) quantile of `samples` seeded draws from a
// fresh stream. Monotone nonincreasing in the target rate.
double calibrate_threshold(const DelayModel& model, double target_loss_rate, long samples);

// One record per expected uplink voltage message this iteration. Outside the
// active window every message is on time by definition.
std::vector<MessageRecord> classify_arrivals(long iteration, std::span<const NodeId> nodes,
                                             DelaySampler& sampler, double d_star_ms,
                                             bool window_active);

struct Resolution {
    enum class Kind { Value, Skip } kind = Kind::Value;
    double value = 0.0;
    bool fallback_used = false;  // LSTM unavailable, fell back to previous value
};

// Decides what the DERMS uses in place of a late voltage. PreviousValue takes
// the last on-time entry of `history`; SkipUpdate yields a skip marker (the
// harness freezes that node's duals); LstmForecast runs the node's registered
// forecaster on the trailing lookback window, falling back to PreviousValue
// when no model or not enough history is available.
Resolution resolve_missing(Strategy strategy, NodeId node, std::span<const double> history,
                           const ForecastRegistry& registry);

} // namespace dergrid
