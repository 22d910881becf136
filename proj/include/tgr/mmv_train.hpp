// Quantization-aware training of the MMV detector: a continuous relaxation
// of the timer dynamics trained with backprop-through-time, a Gaussian
// surrogate for the spike derivative, progressive ternarization of the
// synapses, and the Adam schedule.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tgr/mmv.hpp"
#include "tgr/thermal_io.hpp"

namespace tgr::mmvtrain {

struct TrainingDiverged : std::runtime_error {
    explicit TrainingDiverged(const std::string& where)
        : std::runtime_error("training diverged (non-finite values): " + where) {}
};
struct EmptySplit : std::runtime_error {
    EmptySplit() : std::runtime_error("training or validation split is empty") {}
};

// Gaussian surrogate for the spike derivative w.r.t. the neuron state.
inline double surrogate_grad(double state) {
    return (1.0 / std::sqrt(2.0 * M_PI)) * std::exp(-2.0 * state * state);
}

// sign(w) when |w| > tau_b, else no connection. The backward pass treats
// this as identity (straight-through) during training.
inline double ternarize(double w, double tau_b) {
    if (tau_b <= 0) throw std::invalid_argument("ternarize: tau_b must be > 0");
    if (w > tau_b) return 1.0;
    if (w < -tau_b) return -1.0;
    return 0.0;
}

struct TrainableMmv {
    Eigen::MatrixXd w_in;      // w_tw x C real synapses
    Eigen::MatrixXd w_rec;     // C x C, diagonal held at zero
    Eigen::VectorXd periods;   // real timer periods, clamped to [1, T_steps]
    Eigen::MatrixXd readout_w; // C x K
    Eigen::VectorXd readout_b; // K

    int neurons() const { return static_cast<int>(periods.size()); }
    int inputs() const { return static_cast<int>(w_in.rows()); }
    int classes() const { return static_cast<int>(readout_w.cols()); }
};

inline TrainableMmv init_trainable(int inputs, int neurons, int classes,
                                   std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uw(-0.5, 0.5);
    std::uniform_int_distribution<int> up(2, 16);
    TrainableMmv m;
    m.w_in.resize(inputs, neurons);
    m.w_rec.resize(neurons, neurons);
    m.periods.resize(neurons);
    m.readout_w.resize(neurons, classes);
    m.readout_b = Eigen::VectorXd::Zero(classes);
    for (int i = 0; i < inputs; ++i)
        for (int j = 0; j < neurons; ++j) m.w_in(i, j) = uw(rng);
    for (int i = 0; i < neurons; ++i)
        for (int j = 0; j < neurons; ++j) m.w_rec(i, j) = i == j ? 0.0 : uw(rng);
    for (int j = 0; j < neurons; ++j) m.periods[j] = double(up(rng));
    for (int j = 0; j < neurons; ++j)
        for (int k = 0; k < classes; ++k) m.readout_w(j, k) = uw(rng);
    return m;
}

struct ForwardOptions {
    double rho = 0.0;         // binarization progress
    double tau_b = 0.3;       // ternarization threshold
    double gate_scale = 4.0;  // steepness a of the trigger gate sigma(a*(exc-inh))
    bool smooth_spikes = false;  // exact-gradient mode for gradient checks
    bool straight_through = true;
};

struct ForwardTape {
    std::vector<Eigen::MatrixXd> drive_gain;  // u_t, C x B, tanh gate output
    std::vector<Eigen::MatrixXd> state;       // s_t, C x B
    std::vector<Eigen::MatrixXd> spikes;      // y_t, C x B
    Eigen::MatrixXd counts;                   // C x B spike-count proxy
    Eigen::MatrixXd logits;                   // K x B
};

struct Gradients {
    Eigen::MatrixXd w_in;
    Eigen::MatrixXd w_rec;
    Eigen::VectorXd periods;
    Eigen::MatrixXd readout_w;
    Eigen::VectorXd readout_b;
};

namespace detail {

inline Eigen::MatrixXd blend(const Eigen::MatrixXd& w, double rho, double tau_b) {
    if (rho == 0.0) return w;
    Eigen::MatrixXd t = w.unaryExpr(
        [tau_b](double v) { return ternarize(v, tau_b); });
    return (1.0 - rho) * w + rho * t;
}

// Antiderivative of the surrogate, used as the smooth spike stand-in in
// gradient-check mode; its exact derivative is surrogate_grad.
inline double smooth_spike(double m) {
    return 0.25 * (1.0 + std::erf(std::sqrt(2.0) * m));
}

inline Eigen::MatrixXd gather_inputs(
    const std::vector<const io::SpikeRaster*>& batch, int t, int width) {
    Eigen::MatrixXd x(width, static_cast<Eigen::Index>(batch.size()));
    for (size_t b = 0; b < batch.size(); ++b)
        for (int i = 0; i < width; ++i)
            x(i, static_cast<Eigen::Index>(b)) = batch[b]->bits(t, i);
    return x;
}

}  // namespace detail

// Differentiable proxy for the event-driven run + readout. Per step,
// with effective weights blended toward their ternary projection:
//   d_t = A^T x_t + R^T y_{t-1}
//   u_t = 2*sigma(a d_t) - 1            (soft trigger/inhibit gate)
//   s_t = s_{t-1} (1 - y_{t-1}) + u_t   (accumulate, reset after a spike)
//   y_t = spike(s_t - T_j - 0.5)
// spike() is a Heaviside in the forward pass (Gaussian surrogate backward),
// or its smooth antiderivative when smooth_spikes is set. The spike-count
// proxy sum_t y_t feeds the logistic readout.
inline ForwardTape forward_relaxed(const TrainableMmv& model,
                                   const std::vector<const io::SpikeRaster*>& batch,
                                   const ForwardOptions& opts) {
    if (batch.empty()) throw std::invalid_argument("forward_relaxed: empty batch");
    const int c = model.neurons();
    const int w = model.inputs();
    const int t_steps = batch[0]->steps();
    const auto nb = static_cast<Eigen::Index>(batch.size());

    const Eigen::MatrixXd a_eff = detail::blend(model.w_in, opts.rho, opts.tau_b);
    Eigen::MatrixXd r_eff = detail::blend(model.w_rec, opts.rho, opts.tau_b);
    r_eff.diagonal().setZero();

    ForwardTape tape;
    tape.drive_gain.reserve(static_cast<size_t>(t_steps));
    tape.state.reserve(static_cast<size_t>(t_steps));
    tape.spikes.reserve(static_cast<size_t>(t_steps));
    tape.counts = Eigen::MatrixXd::Zero(c, nb);

    Eigen::MatrixXd s_prev = Eigen::MatrixXd::Zero(c, nb);
    Eigen::MatrixXd y_prev = Eigen::MatrixXd::Zero(c, nb);
    const double half_a = 0.5 * opts.gate_scale;

    for (int t = 0; t < t_steps; ++t) {
        const Eigen::MatrixXd x = detail::gather_inputs(batch, t, w);
        Eigen::MatrixXd d = a_eff.transpose() * x + r_eff.transpose() * y_prev;
        Eigen::MatrixXd u = (half_a * d.array()).tanh();
        Eigen::MatrixXd s =
            (s_prev.array() * (1.0 - y_prev.array())).matrix() + u;
        Eigen::MatrixXd m =
            s.array().colwise() - (model.periods.array() + 0.5);
        Eigen::MatrixXd y =
            opts.smooth_spikes
                ? Eigen::MatrixXd(m.unaryExpr(
                      [](double v) { return detail::smooth_spike(v); }))
                : Eigen::MatrixXd((m.array() >= 0.0).cast<double>());
        if (!s.allFinite()) throw TrainingDiverged("state at step " + std::to_string(t));
        tape.counts += y;
        tape.drive_gain.push_back(std::move(u));
        tape.state.push_back(s);
        tape.spikes.push_back(y);
        s_prev = std::move(s);
        y_prev = tape.spikes.back();
    }
    tape.logits = (model.readout_w.transpose() * tape.counts).colwise() +
                  model.readout_b;
    if (!tape.logits.allFinite()) throw TrainingDiverged("logits");
    return tape;
}

// Backprop through time over the tape. d_logits is dLoss/dlogits (K x B).
inline Gradients backward_relaxed(const TrainableMmv& model,
                                  const std::vector<const io::SpikeRaster*>& batch,
                                  const ForwardTape& tape,
                                  const Eigen::MatrixXd& d_logits,
                                  const ForwardOptions& opts) {
    const int c = model.neurons();
    const int w = model.inputs();
    const int t_steps = static_cast<int>(tape.spikes.size());
    const auto nb = static_cast<Eigen::Index>(batch.size());
    const double half_a = 0.5 * opts.gate_scale;

    Eigen::MatrixXd r_eff = detail::blend(model.w_rec, opts.rho, opts.tau_b);
    r_eff.diagonal().setZero();

    Gradients g;
    g.readout_w = tape.counts * d_logits.transpose();
    g.readout_b = d_logits.rowwise().sum();
    g.periods = Eigen::VectorXd::Zero(c);
    Eigen::MatrixXd d_a = Eigen::MatrixXd::Zero(w, c);
    Eigen::MatrixXd d_r = Eigen::MatrixXd::Zero(c, c);

    const Eigen::MatrixXd d_counts = model.readout_w * d_logits;  // C x B
    Eigen::MatrixXd dy_next = Eigen::MatrixXd::Zero(c, nb);
    Eigen::MatrixXd ds_carry = Eigen::MatrixXd::Zero(c, nb);

    for (int t = t_steps - 1; t >= 0; --t) {
        const Eigen::MatrixXd dy = d_counts + dy_next;
        const Eigen::MatrixXd m =
            tape.state[size_t(t)].array().colwise() -
            (model.periods.array() + 0.5);
        const Eigen::MatrixXd dm =
            dy.array() * m.unaryExpr([](double v) { return surrogate_grad(v); }).array();
        const Eigen::MatrixXd ds = ds_carry + dm;
        g.periods -= dm.rowwise().sum();

        const Eigen::MatrixXd dd =
            ds.array() *
            (half_a * (1.0 - tape.drive_gain[size_t(t)].array().square()));
        d_a += detail::gather_inputs(batch, t, w) * dd.transpose();
        if (t > 0) {
            const Eigen::MatrixXd& y_prev = tape.spikes[size_t(t - 1)];
            const Eigen::MatrixXd& s_prev = tape.state[size_t(t - 1)];
            d_r += y_prev * dd.transpose();
            dy_next = r_eff * dd - (ds.array() * s_prev.array()).matrix();
            ds_carry = (ds.array() * (1.0 - y_prev.array())).matrix();
        }
    }

    // Through the ternary blend: straight-through passes gradients intact,
    // the exact local derivative is (1 - rho).
    const double blend_grad = opts.straight_through ? 1.0 : 1.0 - opts.rho;
    g.w_in = blend_grad * d_a;
    g.w_rec = blend_grad * d_r;
    g.w_rec.diagonal().setZero();
    return g;
}

// Multi-label binary cross-entropy over the sigmoid outputs; returns the
// batch-mean loss and writes dLoss/dlogits.
inline double bce_loss(const Eigen::MatrixXd& logits,
                       const std::vector<int>& labels,
                       Eigen::MatrixXd& d_logits) {
    const auto k = logits.rows();
    const auto nb = logits.cols();
    d_logits.resize(k, nb);
    double loss = 0;
    for (Eigen::Index b = 0; b < nb; ++b) {
        for (Eigen::Index kk = 0; kk < k; ++kk) {
            const double target = labels[size_t(b)] == kk ? 1.0 : 0.0;
            const double z = logits(kk, b);
            // log(1 + e^z) computed stably
            const double softplus = z > 0 ? z + std::log1p(std::exp(-z))
                                          : std::log1p(std::exp(z));
            loss += softplus - target * z;
            d_logits(kk, b) = (mmv::sigmoid(z) - target) / double(nb);
        }
    }
    return loss / double(nb);
}

struct TrainConfig {
    int neurons = 125;
    int classes = 2;
    double learning_rate = 5e-3;
    int batch_size = 32;
    int epochs = 50;
    int binarize_start_epoch = 10;
    int binarize_end_epoch = 25;
    double split_fraction = 0.7;
    std::uint64_t seed = 7;
    double tau_b = 0.3;
    double gate_scale = 4.0;

    void validate() const {
        if (binarize_start_epoch >= binarize_end_epoch ||
            binarize_end_epoch > epochs)
            throw std::invalid_argument(
                "train config: need binarize_start < binarize_end <= epochs");
        if (neurons < 1 || classes < 1 || batch_size < 1 || learning_rate <= 0)
            throw std::invalid_argument("train config: bad values");
    }
};

// Linear ramp: 0 up to the start epoch, 1 from the end epoch on.
inline double binarization_progress(int epoch, const TrainConfig& cfg) {
    if (epoch <= cfg.binarize_start_epoch) return 0.0;
    if (epoch >= cfg.binarize_end_epoch) return 1.0;
    return double(epoch - cfg.binarize_start_epoch) /
           double(cfg.binarize_end_epoch - cfg.binarize_start_epoch);
}

struct Sample {
    io::SpikeRaster raster;
    int label = 0;
};

inline std::pair<std::vector<Sample>, std::vector<Sample>> split_dataset(
    std::vector<Sample> samples, double fraction, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::shuffle(samples.begin(), samples.end(), rng);
    const auto cut = static_cast<size_t>(
        std::llround(fraction * double(samples.size())));
    std::vector<Sample> train(samples.begin(), samples.begin() + long(cut));
    std::vector<Sample> val(samples.begin() + long(cut), samples.end());
    return {std::move(train), std::move(val)};
}

// Discrete snapshot: synapses ternarized at tau_b, periods rounded half-up
// and clamped to [1, t_steps].
inline mmv::MmvNetwork freeze(const TrainableMmv& model, double tau_b,
                              int t_steps) {
    mmv::MmvNetwork net;
    const int c = model.neurons();
    net.conn.input_conn.resize(model.inputs(), c);
    net.conn.recurrent_conn.resize(c, c);
    for (int i = 0; i < model.inputs(); ++i)
        for (int j = 0; j < c; ++j)
            net.conn.input_conn(i, j) =
                static_cast<std::int8_t>(ternarize(model.w_in(i, j), tau_b));
    for (int i = 0; i < c; ++i)
        for (int j = 0; j < c; ++j)
            net.conn.recurrent_conn(i, j) =
                i == j ? std::int8_t(0)
                       : static_cast<std::int8_t>(ternarize(model.w_rec(i, j), tau_b));
    net.periods.resize(c);
    for (int j = 0; j < c; ++j)
        net.periods[j] = std::clamp(int(std::floor(model.periods[j] + 0.5)), 1,
                                    t_steps);
    net.readout_w = model.readout_w;
    net.readout_b = model.readout_b;
    return net;
}

namespace detail {

struct Adam {
    Eigen::ArrayXXd m, v;
    double lr, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    long step_count = 0;

    Adam(Eigen::Index rows, Eigen::Index cols, double lr)
        : m(Eigen::ArrayXXd::Zero(rows, cols)),
          v(Eigen::ArrayXXd::Zero(rows, cols)),
          lr(lr) {}

    void update(Eigen::Ref<Eigen::MatrixXd> param, const Eigen::MatrixXd& grad) {
        ++step_count;
        m = beta1 * m + (1 - beta1) * grad.array();
        v = beta2 * v + (1 - beta2) * grad.array().square();
        const double corr1 = 1 - std::pow(beta1, double(step_count));
        const double corr2 = 1 - std::pow(beta2, double(step_count));
        param.array() -=
            lr * (m / corr1) / ((v / corr2).sqrt() + eps);
    }
};

inline int argmax(const Eigen::VectorXd& v) {
    Eigen::Index i = 0;
    v.maxCoeff(&i);
    return static_cast<int>(i);
}

inline double discrete_accuracy(const mmv::MmvNetwork& net,
                                const std::vector<Sample>& set) {
    int hits = 0;
    for (const auto& s : set)
        if (argmax(mmv::readout(mmv::run(net, s.raster), net)) == s.label) ++hits;
    return double(hits) / double(set.size());
}

inline double relaxed_accuracy(const TrainableMmv& model,
                               const std::vector<Sample>& set,
                               const ForwardOptions& opts) {
    int hits = 0;
    for (const auto& s : set) {
        std::vector<const io::SpikeRaster*> one{&s.raster};
        const ForwardTape tape = forward_relaxed(model, one, opts);
        if (argmax(tape.logits.col(0)) == s.label) ++hits;
    }
    return double(hits) / double(set.size());
}

// Logistic-regression polish of the readout on the discrete spike counts of
// the frozen network. The relaxed count proxy and the event-driven counts
// differ in scale; this aligns the readout with what inference actually sees.
inline void refit_readout(mmv::MmvNetwork& net, const std::vector<Sample>& train) {
    const int k = net.classes();
    const auto nb = static_cast<Eigen::Index>(train.size());
    Eigen::MatrixXd counts(net.neurons(), nb);
    std::vector<int> labels(train.size());
    for (Eigen::Index b = 0; b < nb; ++b) {
        counts.col(b) = mmv::run(net, train[size_t(b)].raster).cast<double>();
        labels[size_t(b)] = train[size_t(b)].label;
    }
    Adam opt_w(net.neurons(), k, 0.05), opt_b(k, 1, 0.05);
    for (int it = 0; it < 400; ++it) {
        Eigen::MatrixXd logits =
            (net.readout_w.transpose() * counts).colwise() + net.readout_b;
        Eigen::MatrixXd dz;
        bce_loss(logits, labels, dz);
        opt_w.update(net.readout_w, counts * dz.transpose());
        Eigen::VectorXd db = dz.rowwise().sum();
        opt_b.update(net.readout_b, db);
    }
}

}  // namespace detail

struct EpochStats {
    int epoch = 0;
    double loss = 0;
    double val_acc = 0;
    double rho = 0;
};

struct TrainResult {
    mmv::MmvNetwork net;
    std::vector<EpochStats> history;
    double best_val_acc = 0;
};

inline void write_history_csv(const std::vector<EpochStats>& history,
                              std::ostream& out) {
    out << "epoch,loss,val_acc,rho\n";
    for (const auto& e : history)
        out << e.epoch << ',' << e.loss << ',' << e.val_acc << ',' << e.rho
            << '\n';
}

// Trains the detector with the progressive-binarization schedule and keeps
// the discrete snapshot with the best post-binarization validation
// accuracy. Deterministic for a fixed seed.
inline TrainResult train_detector(const std::vector<Sample>& train_set,
                                  const std::vector<Sample>& val_set,
                                  const TrainConfig& cfg) {
    cfg.validate();
    if (train_set.empty() || val_set.empty()) throw EmptySplit();

    const int width = train_set[0].raster.channels();
    const int t_steps = train_set[0].raster.steps();
    std::mt19937_64 rng(cfg.seed);
    TrainableMmv model = init_trainable(width, cfg.neurons, cfg.classes, rng);

    detail::Adam opt_in(width, cfg.neurons, cfg.learning_rate);
    detail::Adam opt_rec(cfg.neurons, cfg.neurons, cfg.learning_rate);
    detail::Adam opt_per(cfg.neurons, 1, cfg.learning_rate);
    detail::Adam opt_w(cfg.neurons, cfg.classes, cfg.learning_rate);
    detail::Adam opt_b(cfg.classes, 1, cfg.learning_rate);

    TrainResult result;
    result.best_val_acc = -1.0;
    std::vector<size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        ForwardOptions opts;
        opts.rho = binarization_progress(epoch, cfg);
        opts.tau_b = cfg.tau_b;
        opts.gate_scale = cfg.gate_scale;

        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0;
        long seen = 0;
        for (size_t off = 0; off < order.size(); off += size_t(cfg.batch_size)) {
            std::vector<const io::SpikeRaster*> batch;
            std::vector<int> labels;
            for (size_t b = off;
                 b < std::min(off + size_t(cfg.batch_size), order.size()); ++b) {
                batch.push_back(&train_set[order[b]].raster);
                labels.push_back(train_set[order[b]].label);
            }
            const ForwardTape tape = forward_relaxed(model, batch, opts);
            Eigen::MatrixXd d_logits;
            const double loss = bce_loss(tape.logits, labels, d_logits);
            if (!std::isfinite(loss)) throw TrainingDiverged("loss");
            const Gradients g =
                backward_relaxed(model, batch, tape, d_logits, opts);

            opt_in.update(model.w_in, g.w_in);
            opt_rec.update(model.w_rec, g.w_rec);
            model.w_rec.diagonal().setZero();
            opt_per.update(model.periods, g.periods);
            for (int j = 0; j < cfg.neurons; ++j)
                model.periods[j] = std::clamp(model.periods[j], 1.0, double(t_steps));
            opt_w.update(model.readout_w, g.readout_w);
            opt_b.update(model.readout_b, g.readout_b);

            epoch_loss += loss * double(batch.size());
            seen += long(batch.size());
        }
        epoch_loss /= double(seen);

        EpochStats stats;
        stats.epoch = epoch;
        stats.loss = epoch_loss;
        stats.rho = opts.rho;
        if (opts.rho >= 1.0) {
            mmv::MmvNetwork snap = freeze(model, cfg.tau_b, t_steps);
            stats.val_acc = detail::discrete_accuracy(snap, val_set);
            if (stats.val_acc > result.best_val_acc) {
                result.best_val_acc = stats.val_acc;
                result.net = std::move(snap);
            }
        } else {
            stats.val_acc = detail::relaxed_accuracy(model, val_set, opts);
        }
        result.history.push_back(stats);
    }

    // Align the readout with the event-driven spike counts; keep the refit
    // only if it does not hurt validation accuracy.
    mmv::MmvNetwork polished = result.net;
    detail::refit_readout(polished, train_set);
    const double polished_acc = detail::discrete_accuracy(polished, val_set);
    if (polished_acc >= result.best_val_acc) {
        result.net = std::move(polished);
        result.best_val_acc = polished_acc;
    }
    return result;
}

}  // namespace tgr::mmvtrain
