#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "rfs/binio.hpp"
#include "rfs/face_kb.hpp"
#include "rfs/rng.hpp"

namespace rfs {

// Single-layer gated recurrent network predicting the next expression frame
// from the previous ones. Inputs are z-scored with statistics frozen at
// training time.
struct PredictorModel {
    int dim = 0;    // input/output dimension
    int hidden = 0;
    int window = 0; // BPTT truncation length used in training

    Eigen::VectorXd mu, sigma;
    Eigen::MatrixXd w_update, u_update; // z gate
    Eigen::VectorXd b_update;
    Eigen::MatrixXd w_reset, u_reset;   // r gate
    Eigen::VectorXd b_reset;
    Eigen::MatrixXd w_cand, u_cand;     // candidate state
    Eigen::VectorXd b_cand;
    Eigen::MatrixXd w_out;
    Eigen::VectorXd b_out;
};

struct PredictorConfig {
    int hidden = 32;
    int window = 10;
    int epochs = 40;
    double step_size = 0.05;
    std::uint64_t seed = 1;
    double grad_clip = 5.0; // global norm; <= 0 disables
};

namespace predictor_detail {

inline Eigen::VectorXd sigmoid(const Eigen::VectorXd& v) {
    return v.unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
}

struct StepTrace {
    Eigen::VectorXd x, h_prev, z, r, c, h, y;
};

inline void cell_forward(const PredictorModel& m, const Eigen::VectorXd& x, const Eigen::VectorXd& h_prev,
                         StepTrace& t) {
    t.x = x;
    t.h_prev = h_prev;
    t.z = sigmoid(m.w_update * x + m.u_update * h_prev + m.b_update);
    t.r = sigmoid(m.w_reset * x + m.u_reset * h_prev + m.b_reset);
    t.c = (m.w_cand * x + m.u_cand * t.r.cwiseProduct(h_prev) + m.b_cand).array().tanh();
    t.h = (Eigen::VectorXd::Ones(m.hidden) - t.z).cwiseProduct(h_prev) + t.z.cwiseProduct(t.c);
    t.y = m.w_out * t.h + m.b_out;
}

struct Grads {
    Eigen::MatrixXd w_update, u_update, w_reset, u_reset, w_cand, u_cand, w_out;
    Eigen::VectorXd b_update, b_reset, b_cand, b_out;

    explicit Grads(const PredictorModel& m)
        : w_update(Eigen::MatrixXd::Zero(m.hidden, m.dim)), u_update(Eigen::MatrixXd::Zero(m.hidden, m.hidden)),
          w_reset(Eigen::MatrixXd::Zero(m.hidden, m.dim)), u_reset(Eigen::MatrixXd::Zero(m.hidden, m.hidden)),
          w_cand(Eigen::MatrixXd::Zero(m.hidden, m.dim)), u_cand(Eigen::MatrixXd::Zero(m.hidden, m.hidden)),
          w_out(Eigen::MatrixXd::Zero(m.dim, m.hidden)), b_update(Eigen::VectorXd::Zero(m.hidden)),
          b_reset(Eigen::VectorXd::Zero(m.hidden)), b_cand(Eigen::VectorXd::Zero(m.hidden)),
          b_out(Eigen::VectorXd::Zero(m.dim)) {}

    double squared_norm() const {
        return w_update.squaredNorm() + u_update.squaredNorm() + w_reset.squaredNorm() + u_reset.squaredNorm() +
               w_cand.squaredNorm() + u_cand.squaredNorm() + w_out.squaredNorm() + b_update.squaredNorm() +
               b_reset.squaredNorm() + b_cand.squaredNorm() + b_out.squaredNorm();
    }

    void scale(double s) {
        w_update *= s; u_update *= s; w_reset *= s; u_reset *= s;
        w_cand *= s; u_cand *= s; w_out *= s;
        b_update *= s; b_reset *= s; b_cand *= s; b_out *= s;
    }
};

// One-step-ahead MSE over a window of normalized frames: inputs xs[0..w-1]
// predict xs[1..w]. Backpropagation through time over the whole window.
inline double window_loss_and_grads(const PredictorModel& m, const std::vector<Eigen::VectorXd>& frames,
                                    std::size_t start, int window, Grads* grads) {
    const double denom = static_cast<double>(window) * m.dim;
    std::vector<StepTrace> trace(window);
    Eigen::VectorXd h = Eigen::VectorXd::Zero(m.hidden);
    double loss = 0.0;
    for (int t = 0; t < window; ++t) {
        cell_forward(m, frames[start + t], h, trace[t]);
        h = trace[t].h;
        loss += (trace[t].y - frames[start + t + 1]).squaredNorm();
    }
    loss /= denom;
    if (!grads) return loss;

    Eigen::VectorXd dh_next = Eigen::VectorXd::Zero(m.hidden);
    for (int t = window - 1; t >= 0; --t) {
        const StepTrace& s = trace[t];
        Eigen::VectorXd dy = 2.0 * (s.y - frames[start + t + 1]) / denom;
        grads->w_out += dy * s.h.transpose();
        grads->b_out += dy;

        Eigen::VectorXd dh = m.w_out.transpose() * dy + dh_next;
        Eigen::VectorXd dz = dh.cwiseProduct(s.c - s.h_prev);
        Eigen::VectorXd dc = dh.cwiseProduct(s.z);
        Eigen::VectorXd dh_prev = dh.cwiseProduct(Eigen::VectorXd::Ones(m.hidden) - s.z);

        Eigen::VectorXd da_c = dc.cwiseProduct(Eigen::VectorXd::Ones(m.hidden) - s.c.cwiseProduct(s.c));
        grads->w_cand += da_c * s.x.transpose();
        grads->u_cand += da_c * s.r.cwiseProduct(s.h_prev).transpose();
        grads->b_cand += da_c;
        Eigen::VectorXd d_rh = m.u_cand.transpose() * da_c;
        Eigen::VectorXd dr = d_rh.cwiseProduct(s.h_prev);
        dh_prev += d_rh.cwiseProduct(s.r);

        Eigen::VectorXd da_r = dr.cwiseProduct(s.r).cwiseProduct(Eigen::VectorXd::Ones(m.hidden) - s.r);
        grads->w_reset += da_r * s.x.transpose();
        grads->u_reset += da_r * s.h_prev.transpose();
        grads->b_reset += da_r;
        dh_prev += m.u_reset.transpose() * da_r;

        Eigen::VectorXd da_z = dz.cwiseProduct(s.z).cwiseProduct(Eigen::VectorXd::Ones(m.hidden) - s.z);
        grads->w_update += da_z * s.x.transpose();
        grads->u_update += da_z * s.h_prev.transpose();
        grads->b_update += da_z;
        dh_prev += m.u_update.transpose() * da_z;

        dh_next = dh_prev;
    }
    return loss;
}

inline std::vector<Eigen::VectorXd> normalize_frames(const PredictorModel& m, const ExpressionChunk& chunk) {
    std::vector<Eigen::VectorXd> out(chunk.frames.size());
    for (size_t i = 0; i < chunk.frames.size(); ++i) {
        Eigen::VectorXd v(m.dim);
        for (int d = 0; d < m.dim; ++d) v[d] = (chunk.frames[i][d] - m.mu[d]) / m.sigma[d];
        out[i] = v;
    }
    return out;
}

} // namespace predictor_detail

struct PredictorTrainResult {
    PredictorModel model;
    std::vector<double> loss_trace; // epochs + 1 entries, initial loss first
};

inline PredictorModel init_predictor(int dim, const PredictorConfig& cfg) {
    PredictorModel m;
    m.dim = dim;
    m.hidden = cfg.hidden;
    m.window = cfg.window;
    m.mu = Eigen::VectorXd::Zero(dim);
    m.sigma = Eigen::VectorXd::Ones(dim);
    Rng rng(cfg.seed);
    double s = 1.0 / std::sqrt(static_cast<double>(cfg.hidden));
    auto randm = [&](int rows, int cols) {
        Eigen::MatrixXd w(rows, cols);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) w(i, j) = rng.uniform(-s, s);
        return w;
    };
    m.w_update = randm(cfg.hidden, dim);
    m.u_update = randm(cfg.hidden, cfg.hidden);
    m.b_update = Eigen::VectorXd::Zero(cfg.hidden);
    m.w_reset = randm(cfg.hidden, dim);
    m.u_reset = randm(cfg.hidden, cfg.hidden);
    m.b_reset = Eigen::VectorXd::Zero(cfg.hidden);
    m.w_cand = randm(cfg.hidden, dim);
    m.u_cand = randm(cfg.hidden, cfg.hidden);
    m.b_cand = Eigen::VectorXd::Zero(cfg.hidden);
    m.w_out = randm(dim, cfg.hidden);
    m.b_out = Eigen::VectorXd::Zero(dim);
    return m;
}

// SGD over per-window BPTT updates in a fixed order; deterministic per seed.
inline PredictorTrainResult train_predictor(const std::vector<ExpressionChunk>& sequences,
                                            const PredictorConfig& cfg) {
    if (sequences.empty()) throw ConfigError("train_predictor: no training sequences");
    const int dim = sequences.front().dim();
    for (const auto& s : sequences) {
        validate(s);
        if (s.dim() != dim) throw ConfigError("train_predictor: sequences differ in dimension");
        if (s.frame_count() <= cfg.window)
            throw ConfigError("train_predictor: sequence length " + fmt_int(s.frame_count()) +
                              " must exceed the window " + fmt_int(cfg.window));
    }
    if (cfg.hidden < 1 || cfg.window < 1) throw ConfigError("predictor hidden and window must be >= 1");

    PredictorTrainResult result;
    result.model = init_predictor(dim, cfg);
    PredictorModel& m = result.model;

    // training statistics over all frames
    double count = 0.0;
    for (const auto& s : sequences) count += s.frame_count();
    for (int d = 0; d < dim; ++d) {
        double mean = 0.0;
        for (const auto& s : sequences)
            for (const auto& f : s.frames) mean += f[d];
        mean /= count;
        double var = 0.0;
        for (const auto& s : sequences)
            for (const auto& f : s.frames) var += (f[d] - mean) * (f[d] - mean);
        var /= count;
        m.mu[d] = mean;
        m.sigma[d] = std::max(std::sqrt(var), 1e-8);
    }

    std::vector<std::vector<Eigen::VectorXd>> norm;
    norm.reserve(sequences.size());
    for (const auto& s : sequences) norm.push_back(predictor_detail::normalize_frames(m, s));

    auto eval_loss = [&]() {
        double acc = 0.0;
        std::size_t windows = 0;
        for (const auto& seq : norm)
            for (std::size_t start = 0; start + cfg.window < seq.size(); ++start) {
                acc += predictor_detail::window_loss_and_grads(m, seq, start, cfg.window, nullptr);
                ++windows;
            }
        return acc / static_cast<double>(windows);
    };

    result.loss_trace.push_back(eval_loss());
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (const auto& seq : norm) {
            for (std::size_t start = 0; start + cfg.window < seq.size(); ++start) {
                predictor_detail::Grads g(m);
                predictor_detail::window_loss_and_grads(m, seq, start, cfg.window, &g);
                if (cfg.grad_clip > 0.0) {
                    double norm2 = g.squared_norm();
                    if (norm2 > cfg.grad_clip * cfg.grad_clip)
                        g.scale(cfg.grad_clip / std::sqrt(norm2));
                }
                double lr = cfg.step_size;
                m.w_update -= lr * g.w_update; m.u_update -= lr * g.u_update; m.b_update -= lr * g.b_update;
                m.w_reset -= lr * g.w_reset;   m.u_reset -= lr * g.u_reset;   m.b_reset -= lr * g.b_reset;
                m.w_cand -= lr * g.w_cand;     m.u_cand -= lr * g.u_cand;     m.b_cand -= lr * g.b_cand;
                m.w_out -= lr * g.w_out;       m.b_out -= lr * g.b_out;
            }
        }
        double loss = eval_loss();
        if (!std::isfinite(loss))
            throw NumericError("train_predictor: non-finite loss at epoch " + fmt_int(epoch));
        result.loss_trace.push_back(loss);
    }
    return result;
}

// Autoregressive rollout: consume the seed frames, then repeatedly feed the
// latest prediction back in as if it were observed.
inline std::vector<ExpressionFrame> predict(const PredictorModel& m, const std::vector<ExpressionFrame>& seed,
                                            int horizon) {
    if (seed.empty()) throw ConfigError("predict: needs at least one seed frame");
    if (horizon < 0) throw ConfigError("predict: negative horizon");
    std::vector<ExpressionFrame> out;
    if (horizon == 0) return out;

    Eigen::VectorXd h = Eigen::VectorXd::Zero(m.hidden);
    predictor_detail::StepTrace t;
    Eigen::VectorXd y;
    for (const auto& f : seed) {
        if (static_cast<int>(f.size()) != m.dim)
            throw ConfigError("predict: seed frame dimension " + fmt_int(static_cast<std::int64_t>(f.size())) +
                              " does not match model dimension " + fmt_int(m.dim));
        Eigen::VectorXd x(m.dim);
        for (int d = 0; d < m.dim; ++d) x[d] = (f[d] - m.mu[d]) / m.sigma[d];
        predictor_detail::cell_forward(m, x, h, t);
        h = t.h;
        y = t.y;
    }
    out.reserve(horizon);
    for (int k = 0; k < horizon; ++k) {
        ExpressionFrame f(m.dim);
        for (int d = 0; d < m.dim; ++d) f[d] = m.mu[d] + y[d] * m.sigma[d];
        out.push_back(std::move(f));
        if (k + 1 < horizon) {
            predictor_detail::cell_forward(m, y, h, t);
            h = t.h;
            y = t.y;
        }
    }
    return out;
}

// Repeats the last received frame.
inline std::vector<ExpressionFrame> baseline_hold_last(const std::vector<ExpressionFrame>& seed, int horizon) {
    if (seed.empty()) throw ConfigError("baseline_hold_last: needs at least one seed frame");
    if (horizon < 0) throw ConfigError("baseline_hold_last: negative horizon");
    return std::vector<ExpressionFrame>(horizon, seed.back());
}

// Per-dimension linear extrapolation from the last two frames; falls back to
// hold-last with fewer than two seed frames.
inline std::vector<ExpressionFrame> baseline_linear(const std::vector<ExpressionFrame>& seed, int horizon) {
    if (seed.empty()) throw ConfigError("baseline_linear: needs at least one seed frame");
    if (horizon < 0) throw ConfigError("baseline_linear: negative horizon");
    if (seed.size() < 2) return baseline_hold_last(seed, horizon);
    const ExpressionFrame& last = seed.back();
    const ExpressionFrame& prev = seed[seed.size() - 2];
    std::vector<ExpressionFrame> out;
    out.reserve(horizon);
    for (int k = 1; k <= horizon; ++k) {
        ExpressionFrame f(last.size());
        for (size_t d = 0; d < last.size(); ++d) f[d] = last[d] + k * (last[d] - prev[d]);
        out.push_back(std::move(f));
    }
    return out;
}

// ---- predictor file format "RNNP" --------------------------------------------
// magic(4) version u16, M/h/w as u16, then f32 in order: mu, sigma, update
// gate (W,U,b), reset gate (W,U,b), candidate (W,U,b), output (W,b); matrices
// row-major.

namespace predictor_detail {

template <typename Model, typename Fn>
inline void for_each_parameter_block(Model& m, Fn&& fn) {
    fn(m.mu); fn(m.sigma);
    fn(m.w_update); fn(m.u_update); fn(m.b_update);
    fn(m.w_reset); fn(m.u_reset); fn(m.b_reset);
    fn(m.w_cand); fn(m.u_cand); fn(m.b_cand);
    fn(m.w_out); fn(m.b_out);
}

} // namespace predictor_detail

inline std::vector<std::uint8_t> serialize_predictor(const PredictorModel& model) {
    ByteWriter w;
    w.put_bytes(reinterpret_cast<const std::uint8_t*>("RNNP"), 4);
    w.put<std::uint16_t>(1);
    w.put<std::uint16_t>(static_cast<std::uint16_t>(model.dim));
    w.put<std::uint16_t>(static_cast<std::uint16_t>(model.hidden));
    w.put<std::uint16_t>(static_cast<std::uint16_t>(model.window));
    predictor_detail::for_each_parameter_block(model, [&](const auto& block) {
        for (Eigen::Index i = 0; i < block.rows(); ++i)
            for (Eigen::Index j = 0; j < block.cols(); ++j) w.put_f32(block(i, j));
    });
    return w.take();
}

inline PredictorModel parse_predictor(const std::vector<std::uint8_t>& bytes) {
    ByteReader r(bytes);
    r.expect_magic("RNNP", "predictor model");
    auto version = r.get<std::uint16_t>("version");
    if (version != 1) throw FormatError("unsupported predictor version " + fmt_int(version));
    PredictorConfig cfg;
    int dim = r.get<std::uint16_t>("dim");
    cfg.hidden = r.get<std::uint16_t>("hidden");
    cfg.window = r.get<std::uint16_t>("window");
    cfg.seed = 0;
    if (dim < 1 || cfg.hidden < 1 || cfg.window < 1)
        throw FormatError("predictor header has zero dimension");
    PredictorModel m = init_predictor(dim, cfg);
    predictor_detail::for_each_parameter_block(m, [&](auto& block) {
        for (Eigen::Index i = 0; i < block.rows(); ++i)
            for (Eigen::Index j = 0; j < block.cols(); ++j) block(i, j) = r.get_f32("predictor parameter");
    });
    return m;
}

inline void save_predictor(const PredictorModel& m, const std::string& path) {
    write_file_bytes(path, serialize_predictor(m));
}

inline PredictorModel load_predictor(const std::string& path) {
    return parse_predictor(read_file_bytes(path));
}

} // namespace rfs
