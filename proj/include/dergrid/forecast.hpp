#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dergrid/feeder.hpp"
#include "dergrid/linalg.hpp"

namespace dergrid {

// Gate weights over the concatenated [h_{t-1}, x_t] vector. Rows = hidden
// units, columns = hidden + input.
struct LstmCell {
    int hidden = 0;
    int input = 0;
    Matrix w_i, w_f, w_o, w_c;
    Vec b_i, b_f, b_o, b_c;

    LstmCell() = default;
    LstmCell(int hidden_size, int input_size);
};

// Per-timestep intermediates retained for backpropagation through time.
struct GateCache {
    std::vector<Vec> z;       // concatenated [h_prev, x]
    std::vector<Vec> i, f, o; // gate activations
    std::vector<Vec> c_tilde; // candidate cell values
    std::vector<Vec> c;       // cell state after the step
    std::vector<Vec> h;       // hidden state after the step
};

// Single-layer LSTM with a scalar linear head. The scaler divides raw
// voltages by v_base on the way in and multiplies on the way out.
struct LstmNetwork {
    LstmCell cell;
    Vec output_weights;   // hidden
    double output_bias = 0.0;
    int lookback = 10;
    double v_base = 1.0;
};

// Gradient accumulator shaped like the trainable parameters.
struct LstmGradients {
    Matrix w_i, w_f, w_o, w_c;
    Vec b_i, b_f, b_o, b_c;
    Vec output_weights;
    double output_bias = 0.0;

    explicit LstmGradients(const LstmNetwork& net);
    double norm() const;
    void scale(double s);
};

struct TrainConfig {
    int epochs = 200;
    double learning_rate = 0.05;
    int batch = 64;            // windows per gradient step
    std::uint64_t seed = 1;
    double grad_clip = 1.0;    // global norm ceiling, <=0 disables
};

struct TrainResult {
    std::vector<double> loss_history;  // RMSE over all windows, one per epoch
};

// One LSTM step. x, h_prev, c_prev sized (input, hidden, hidden). When cache
// is non-null the step's intermediates are appended for BPTT.
void cell_forward(const LstmCell& cell, const Vec& x, const Vec& h_prev, const Vec& c_prev,
                  Vec& h_out, Vec& c_out, GateCache* cache = nullptr);

// Folds cell_forward over a lookback window of (already normalized) scalars,
// starting from zero state, and applies the linear head.
double sequence_forward(const LstmNetwork& net, std::span<const double> window,
                        GateCache* cache = nullptr);

// Exact gradients of the mean squared error (1/B sum of squared errors) over
// the batch, via reverse traversal of the cached gates.
LstmGradients bptt_gradients(const LstmNetwork& net,
                             const std::vector<Vec>& windows,
                             const Vec& targets);

// Seeded weight initialization: uniform in +-1/sqrt(hidden+input).
void init_weights(LstmNetwork& net, std::uint64_t seed);

// Plain gradient descent over sliding windows (stride 1) of the series.
// Deterministic for a fixed seed. Throws DivergenceError (with the epoch in
// the message) if the loss leaves the finite regime.
TrainResult train(LstmNetwork& net, std::span<const double> series, const TrainConfig& cfg);

// Normalize by v_base, run the network, de-normalize. History is in raw units
// and must have exactly `lookback` entries.
double predict_voltage(const LstmNetwork& net, std::span<const double> history);

std::string lstm_to_json(const LstmNetwork& net);
LstmNetwork lstm_from_json(const std::string& json_text);
void save_lstm_file(const LstmNetwork& net, const std::string& path);
LstmNetwork load_lstm_file(const std::string& path);

// One independent forecaster per measured node.
class ForecastRegistry {
public:
    void put(NodeId node, LstmNetwork net) { models_[node] = std::move(net); }
    bool has(NodeId node) const { return models_.count(node) != 0; }
    const LstmNetwork& get(NodeId node) const;
    double predict(NodeId node, std::span<const double> history) const;
    std::size_t size() const { return models_.size(); }
    const std::map<NodeId, LstmNetwork>& models() const { return models_; }

private:
    std::map<NodeId, LstmNetwork> models_;
};

} // namespace dergrid
