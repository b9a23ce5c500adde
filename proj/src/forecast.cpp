#include "dergrid/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dergrid/rng.hpp"

namespace dergrid {

using nlohmann::json;

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void check_finite(std::span<const double> v, const char* what) {
    for (double x : v)
        if (!std::isfinite(x)) throw ValidationError(std::string(what) + ": non-finite value");
}

} // namespace

LstmCell::LstmCell(int hidden_size, int input_size)
    : hidden(hidden_size), input(input_size),
      w_i(hidden_size, hidden_size + input_size),
      w_f(hidden_size, hidden_size + input_size),
      w_o(hidden_size, hidden_size + input_size),
      w_c(hidden_size, hidden_size + input_size),
      b_i(hidden_size, 0.0), b_f(hidden_size, 0.0),
      b_o(hidden_size, 0.0), b_c(hidden_size, 0.0) {
    if (hidden_size < 1 || input_size < 1)
        throw ValidationError("LstmCell: hidden and input sizes must be >= 1");
}

LstmGradients::LstmGradients(const LstmNetwork& net)
    : w_i(net.cell.hidden, net.cell.hidden + net.cell.input),
      w_f(net.cell.hidden, net.cell.hidden + net.cell.input),
      w_o(net.cell.hidden, net.cell.hidden + net.cell.input),
      w_c(net.cell.hidden, net.cell.hidden + net.cell.input),
      b_i(net.cell.hidden, 0.0), b_f(net.cell.hidden, 0.0),
      b_o(net.cell.hidden, 0.0), b_c(net.cell.hidden, 0.0),
      output_weights(net.cell.hidden, 0.0) {}

double LstmGradients::norm() const {
    double acc = output_bias * output_bias;
    auto add = [&acc](const Vec& v) { for (double x : v) acc += x * x; };
    add(w_i.data); add(w_f.data); add(w_o.data); add(w_c.data);
    add(b_i); add(b_f); add(b_o); add(b_c);
    add(output_weights);
    return std::sqrt(acc);
}

void LstmGradients::scale(double s) {
    auto mul = [s](Vec& v) { for (double& x : v) x *= s; };
    mul(w_i.data); mul(w_f.data); mul(w_o.data); mul(w_c.data);
    mul(b_i); mul(b_f); mul(b_o); mul(b_c);
    mul(output_weights);
    output_bias *= s;
}

void cell_forward(const LstmCell& cell, const Vec& x, const Vec& h_prev, const Vec& c_prev,
                  Vec& h_out, Vec& c_out, GateCache* cache) {
    const int hs = cell.hidden;
    const int in = cell.input;
    if (static_cast<int>(x.size()) != in || static_cast<int>(h_prev.size()) != hs ||
        static_cast<int>(c_prev.size()) != hs)
        throw DimensionError("cell_forward: shape mismatch");
    check_finite(x, "cell_forward input");

    Vec z(hs + in);
    std::copy(h_prev.begin(), h_prev.end(), z.begin());
    std::copy(x.begin(), x.end(), z.begin() + hs);

    Vec gi(hs), gf(hs), go(hs), gc(hs);
    for (int r = 0; r < hs; ++r) {
        const double* wi = cell.w_i.data.data() + r * (hs + in);
        const double* wf = cell.w_f.data.data() + r * (hs + in);
        const double* wo = cell.w_o.data.data() + r * (hs + in);
        const double* wc = cell.w_c.data.data() + r * (hs + in);
        double ai = cell.b_i[r], af = cell.b_f[r], ao = cell.b_o[r], ac = cell.b_c[r];
        for (int k = 0; k < hs + in; ++k) {
            const double zk = z[k];
            ai += wi[k] * zk;
            af += wf[k] * zk;
            ao += wo[k] * zk;
            ac += wc[k] * zk;
        }
        gi[r] = sigmoid(ai);
        gf[r] = sigmoid(af);
        go[r] = sigmoid(ao);
        gc[r] = std::tanh(ac);
    }

    h_out.resize(hs);
    c_out.resize(hs);
    for (int r = 0; r < hs; ++r) {
        c_out[r] = gf[r] * c_prev[r] + gi[r] * gc[r];
        h_out[r] = go[r] * std::tanh(c_out[r]);
    }

    if (cache) {
        cache->z.push_back(std::move(z));
        cache->i.push_back(std::move(gi));
        cache->f.push_back(std::move(gf));
        cache->o.push_back(std::move(go));
        cache->c_tilde.push_back(std::move(gc));
        cache->c.push_back(c_out);
        cache->h.push_back(h_out);
    }
}

double sequence_forward(const LstmNetwork& net, std::span<const double> window,
                        GateCache* cache) {
    if (static_cast<int>(window.size()) != net.lookback)
        throw DimensionError("sequence_forward: window length " + std::to_string(window.size()) +
                             " != lookback " + std::to_string(net.lookback));
    Vec h(net.cell.hidden, 0.0), c(net.cell.hidden, 0.0);
    Vec h_next, c_next, x(1);
    for (double v : window) {
        x[0] = v;
        cell_forward(net.cell, x, h, c, h_next, c_next, cache);
        h.swap(h_next);
        c.swap(c_next);
    }
    return dot(net.output_weights, h) + net.output_bias;
}

LstmGradients bptt_gradients(const LstmNetwork& net,
                             const std::vector<Vec>& windows,
                             const Vec& targets) {
    if (windows.empty()) throw ValidationError("bptt_gradients: empty batch");
    if (windows.size() != targets.size())
        throw DimensionError("bptt_gradients: windows/targets length mismatch");

    const int hs = net.cell.hidden;
    const int in = net.cell.input;
    const int width = hs + in;
    const double inv_b = 1.0 / static_cast<double>(windows.size());

    LstmGradients g(net);

    for (std::size_t w = 0; w < windows.size(); ++w) {
        GateCache cache;
        const double pred = sequence_forward(net, windows[w], &cache);
        const int steps = static_cast<int>(cache.z.size());

        // d(MSE)/d(pred) for this window under the mean-over-batch convention.
        const double dpred = 2.0 * (pred - targets[w]) * inv_b;

        const Vec& h_last = cache.h[steps - 1];
        for (int r = 0; r < hs; ++r) g.output_weights[r] += dpred * h_last[r];
        g.output_bias += dpred;

        Vec dh(hs), dc(hs, 0.0);
        for (int r = 0; r < hs; ++r) dh[r] = dpred * net.output_weights[r];

        for (int t = steps - 1; t >= 0; --t) {
            const Vec& i_t = cache.i[t];
            const Vec& f_t = cache.f[t];
            const Vec& o_t = cache.o[t];
            const Vec& ct_t = cache.c_tilde[t];
            const Vec& c_t = cache.c[t];
            const Vec& z_t = cache.z[t];

            Vec da_i(hs), da_f(hs), da_o(hs), da_c(hs), dc_prev(hs);
            for (int r = 0; r < hs; ++r) {
                const double tc = std::tanh(c_t[r]);
                const double dct = dc[r] + dh[r] * o_t[r] * (1.0 - tc * tc);
                const double c_prev = t > 0 ? cache.c[t - 1][r] : 0.0;
                da_o[r] = dh[r] * tc * o_t[r] * (1.0 - o_t[r]);
                da_f[r] = dct * c_prev * f_t[r] * (1.0 - f_t[r]);
                da_i[r] = dct * ct_t[r] * i_t[r] * (1.0 - i_t[r]);
                da_c[r] = dct * i_t[r] * (1.0 - ct_t[r] * ct_t[r]);
                dc_prev[r] = dct * f_t[r];
            }

            Vec dz(width, 0.0);
            for (int r = 0; r < hs; ++r) {
                double* gwi = g.w_i.data.data() + r * width;
                double* gwf = g.w_f.data.data() + r * width;
                double* gwo = g.w_o.data.data() + r * width;
                double* gwc = g.w_c.data.data() + r * width;
                const double* wi = net.cell.w_i.data.data() + r * width;
                const double* wf = net.cell.w_f.data.data() + r * width;
                const double* wo = net.cell.w_o.data.data() + r * width;
                const double* wc = net.cell.w_c.data.data() + r * width;
                const double di = da_i[r], df = da_f[r], do_ = da_o[r], dcg = da_c[r];
                for (int k = 0; k < width; ++k) {
                    const double zk = z_t[k];
                    gwi[k] += di * zk;
                    gwf[k] += df * zk;
                    gwo[k] += do_ * zk;
                    gwc[k] += dcg * zk;
                    dz[k] += wi[k] * di + wf[k] * df + wo[k] * do_ + wc[k] * dcg;
                }
                g.b_i[r] += di;
                g.b_f[r] += df;
                g.b_o[r] += do_;
                g.b_c[r] += dcg;
            }

            for (int r = 0; r < hs; ++r) dh[r] = dz[r];
            dc.swap(dc_prev);
        }
    }
    return g;
}

void init_weights(LstmNetwork& net, std::uint64_t seed) {
    Rng rng(seed);
    const double r = 1.0 / std::sqrt(static_cast<double>(net.cell.hidden + net.cell.input));
    auto fill = [&](Vec& v) { for (double& x : v) x = rng.uniform(-r, r); };
    fill(net.cell.w_i.data);
    fill(net.cell.w_f.data);
    fill(net.cell.w_o.data);
    fill(net.cell.w_c.data);
    fill(net.cell.b_i);
    fill(net.cell.b_f);
    fill(net.cell.b_o);
    fill(net.cell.b_c);
    fill(net.output_weights);
    net.output_bias = rng.uniform(-r, r);
}

TrainResult train(LstmNetwork& net, std::span<const double> series, const TrainConfig& cfg) {
    if (cfg.learning_rate <= 0.0) throw ValidationError("train: learning_rate must be > 0");
    if (cfg.epochs < 1) throw ValidationError("train: epochs must be >= 1");
    if (static_cast<int>(series.size()) <= net.lookback)
        throw ValidationError("train: series length " + std::to_string(series.size()) +
                              " must exceed lookback " + std::to_string(net.lookback));

    const int window_count = static_cast<int>(series.size()) - net.lookback;
    std::vector<Vec> windows(window_count);
    Vec targets(window_count);
    for (int w = 0; w < window_count; ++w) {
        windows[w].assign(series.begin() + w, series.begin() + w + net.lookback);
        targets[w] = series[w + net.lookback];
    }

    const int batch = cfg.batch > 0 ? std::min(cfg.batch, window_count) : window_count;

    auto apply = [&](const LstmGradients& g, double lr) {
        auto upd = [lr](Vec& p, const Vec& gr) {
            for (std::size_t k = 0; k < p.size(); ++k) p[k] -= lr * gr[k];
        };
        upd(net.cell.w_i.data, g.w_i.data);
        upd(net.cell.w_f.data, g.w_f.data);
        upd(net.cell.w_o.data, g.w_o.data);
        upd(net.cell.w_c.data, g.w_c.data);
        upd(net.cell.b_i, g.b_i);
        upd(net.cell.b_f, g.b_f);
        upd(net.cell.b_o, g.b_o);
        upd(net.cell.b_c, g.b_c);
        upd(net.output_weights, g.output_weights);
        net.output_bias -= lr * g.output_bias;
    };

    TrainResult result;
    result.loss_history.reserve(cfg.epochs);
    std::vector<Vec> chunk;
    Vec chunk_targets;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (int start = 0; start < window_count; start += batch) {
            const int end = std::min(start + batch, window_count);
            chunk.assign(windows.begin() + start, windows.begin() + end);
            chunk_targets.assign(targets.begin() + start, targets.begin() + end);
            LstmGradients g = bptt_gradients(net, chunk, chunk_targets);
            if (cfg.grad_clip > 0.0) {
                const double n = g.norm();
                if (n > cfg.grad_clip) g.scale(cfg.grad_clip / n);
            }
            apply(g, cfg.learning_rate);
        }

        double sse = 0.0;
        for (int w = 0; w < window_count; ++w) {
            const double e = sequence_forward(net, windows[w]) - targets[w];
            sse += e * e;
        }
        const double rmse = std::sqrt(sse / window_count);
        if (!std::isfinite(rmse))
            throw DivergenceError("train: loss became non-finite at epoch " + std::to_string(epoch));
        result.loss_history.push_back(rmse);
    }
    return result;
}

double predict_voltage(const LstmNetwork& net, std::span<const double> history) {
    if (static_cast<int>(history.size()) != net.lookback)
        throw DimensionError("predict_voltage: history length " + std::to_string(history.size()) +
                             " != lookback " + std::to_string(net.lookback));
    if (net.v_base <= 0.0) throw ValidationError("predict_voltage: v_base must be > 0");
    Vec window(history.size());
    for (std::size_t k = 0; k < history.size(); ++k) window[k] = history[k] / net.v_base;
    const double pred = sequence_forward(net, window) * net.v_base;
    if (!std::isfinite(pred)) throw DivergenceError("predict_voltage: non-finite prediction");
    return pred;
}

std::string lstm_to_json(const LstmNetwork& net) {
    json j{{"hidden_size", net.cell.hidden},
           {"input_size", net.cell.input},
           {"lookback", net.lookback},
           {"v_base", net.v_base},
           {"W_i", net.cell.w_i.data},
           {"W_f", net.cell.w_f.data},
           {"W_o", net.cell.w_o.data},
           {"W_C", net.cell.w_c.data},
           {"b_i", net.cell.b_i},
           {"b_f", net.cell.b_f},
           {"b_o", net.cell.b_o},
           {"b_C", net.cell.b_c},
           {"output_weights", net.output_weights},
           {"output_bias", net.output_bias}};
    return j.dump();
}

LstmNetwork lstm_from_json(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("lstm model: ") + e.what());
    }
    LstmNetwork net;
    const int hs = j.at("hidden_size").get<int>();
    const int in = j.at("input_size").get<int>();
    net.cell = LstmCell(hs, in);
    net.lookback = j.at("lookback").get<int>();
    net.v_base = j.at("v_base").get<double>();
    if (net.lookback < 1) throw ParseError("lstm model: lookback must be >= 1");

    auto mat = [&](const char* key, Matrix& m) {
        const Vec d = j.at(key).get<Vec>();
        if (d.size() != m.rows * m.cols)
            throw ParseError(std::string("lstm model: '") + key + "' length mismatch");
        m.data = d;
    };
    auto vec = [&](const char* key, Vec& v) {
        const Vec d = j.at(key).get<Vec>();
        if (d.size() != v.size())
            throw ParseError(std::string("lstm model: '") + key + "' length mismatch");
        v = d;
    };
    mat("W_i", net.cell.w_i);
    mat("W_f", net.cell.w_f);
    mat("W_o", net.cell.w_o);
    mat("W_C", net.cell.w_c);
    vec("b_i", net.cell.b_i);
    vec("b_f", net.cell.b_f);
    vec("b_o", net.cell.b_o);
    vec("b_C", net.cell.b_c);
    net.output_weights.assign(hs, 0.0);
    vec("output_weights", net.output_weights);
    net.output_bias = j.at("output_bias").get<double>();
    return net;
}

void save_lstm_file(const LstmNetwork& net, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write lstm model file: " + path);
    out << lstm_to_json(net) << "\n";
}

LstmNetwork load_lstm_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open lstm model file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return lstm_from_json(ss.str());
    } catch (const Error& e) {
        throw ParseError(path + ": " + e.what());
    }
}

const LstmNetwork& ForecastRegistry::get(NodeId node) const {
    auto it = models_.find(node);
    if (it == models_.end())
        throw ValidationError("forecast registry: no model for node " + std::to_string(node));
    return it->second;
}

double ForecastRegistry::predict(NodeId node, std::span<const double> history) const {
    return predict_voltage(get(node), history);
}

} // namespace dergrid
