// Event-driven Monostable-Multivibrator network inference: ternary
// OR-synapses, integer timer neurons, spike counting and the logistic
// readout used for gesture-presence detection.
#pragma once

#include <Eigen/Dense>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tgr/thermal_io.hpp"

namespace tgr::mmv {

enum class Ternary : std::int8_t { None = 0, Exc = 1, Inh = -1 };

using TernaryMatrix = Eigen::Matrix<std::int8_t, Eigen::Dynamic, Eigen::Dynamic>;
using BitVector = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, 1>;

struct CheckpointError : std::runtime_error {
    explicit CheckpointError(const std::string& why)
        : std::runtime_error("mmv checkpoint: " + why) {}
};

// input_conn is w_tw x C, recurrent_conn is C x C with a NONE diagonal
// (no self-recurrence).
struct TernaryConnectivity {
    TernaryMatrix input_conn;
    TernaryMatrix recurrent_conn;
};

struct MmvNetwork {
    TernaryConnectivity conn;
    Eigen::VectorXi periods;     // T_j >= 1 per neuron
    Eigen::MatrixXd readout_w;   // C x K
    Eigen::VectorXd readout_b;   // K

    int neurons() const { return static_cast<int>(periods.size()); }
    int inputs() const { return static_cast<int>(conn.input_conn.rows()); }
    int classes() const { return static_cast<int>(readout_w.cols()); }

    // max_period is the run length T_steps; a timer longer than the run can
    // never fire.
    void validate(int max_period) const {
        const int c = neurons();
        if (conn.input_conn.cols() != c || conn.recurrent_conn.rows() != c ||
            conn.recurrent_conn.cols() != c || readout_w.rows() != c)
            throw std::invalid_argument("mmv: inconsistent dimensions");
        if (readout_b.size() != readout_w.cols())
            throw std::invalid_argument("mmv: readout bias size mismatch");
        for (int j = 0; j < c; ++j) {
            if (periods[j] < 1 || (max_period > 0 && periods[j] > max_period))
                throw std::invalid_argument("mmv: period out of range for neuron " +
                                            std::to_string(j));
            if (conn.recurrent_conn(j, j) != std::int8_t(Ternary::None))
                throw std::invalid_argument("mmv: self-recurrence at neuron " +
                                            std::to_string(j));
        }
    }
};

struct MmvState {
    Eigen::VectorXi counter;           // in [0, T_j)
    std::vector<std::uint8_t> triggered;
    BitVector last_output;             // recurrent spikes, one-step delay

    explicit MmvState(int neurons = 0) { reset(neurons); }
    void reset(int neurons) {
        counter = Eigen::VectorXi::Zero(neurons);
        triggered.assign(static_cast<size_t>(neurons), 0);
        last_output = BitVector::Zero(neurons);
    }
};

// One synchronous step. Per neuron, with inputs OR-ed over the EXC / INH
// connected lines of both the external spikes and the previous step's
// recurrent spikes:
//   1. triggered and INH        -> reset, no spike (INH wins over EXC)
//   2. else triggered           -> counter += 1; at T_j emit spike and reset
//   3. then, if idle and EXC    -> trigger (counter starts at 0)
// Rule 3 also applies in the step a spike was just emitted, so a neuron
// under sustained excitation with T_j = 1 fires every step after the first.
inline BitVector step(const MmvNetwork& net, MmvState& state,
                      const BitVector& input_spikes) {
    const int c = net.neurons();
    const int w = net.inputs();
    if (input_spikes.size() != w)
        throw std::invalid_argument("mmv step: input width mismatch");

    BitVector out = BitVector::Zero(c);
    for (int j = 0; j < c; ++j) {
        bool exc = false, inh = false;
        for (int i = 0; i < w; ++i) {
            if (!input_spikes[i]) continue;
            const auto t = net.conn.input_conn(i, j);
            exc |= t == std::int8_t(Ternary::Exc);
            inh |= t == std::int8_t(Ternary::Inh);
        }
        for (int i = 0; i < c; ++i) {
            if (!state.last_output[i]) continue;
            const auto t = net.conn.recurrent_conn(i, j);
            exc |= t == std::int8_t(Ternary::Exc);
            inh |= t == std::int8_t(Ternary::Inh);
        }

        if (state.triggered[j] && inh) {
            state.triggered[j] = 0;
            state.counter[j] = 0;
            continue;
        }
        if (state.triggered[j]) {
            if (++state.counter[j] == net.periods[j]) {
                out[j] = 1;
                state.triggered[j] = 0;
                state.counter[j] = 0;
            }
        }
        if (!state.triggered[j] && exc) {
            state.triggered[j] = 1;
            state.counter[j] = 0;
        }
    }
    for (int j = 0; j < c; ++j) state.last_output[j] = out[j];
    return out;
}

// Runs a whole raster through a freshly zeroed network and returns the
// per-neuron output spike counts.
inline Eigen::VectorXi run(const MmvNetwork& net, const io::SpikeRaster& raster) {
    if (raster.channels() != net.inputs())
        throw std::invalid_argument("mmv run: raster channel width mismatch");
    MmvState state(net.neurons());
    Eigen::VectorXi counts = Eigen::VectorXi::Zero(net.neurons());
    BitVector x(net.inputs());
    for (int t = 0; t < raster.steps(); ++t) {
        for (int i = 0; i < net.inputs(); ++i) x[i] = raster.bits(t, i);
        counts += step(net, state, x).cast<int>();
    }
    return counts;
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Logistic readout p = sigmoid(W_out^T counts + bias).
inline Eigen::VectorXd readout(const Eigen::VectorXi& counts,
                               const MmvNetwork& net) {
    Eigen::VectorXd z =
        net.readout_w.transpose() * counts.cast<double>() + net.readout_b;
    return z.unaryExpr([](double v) { return sigmoid(v); });
}

// Detection readout class indices.
inline constexpr int kClassNoGesture = 0;
inline constexpr int kClassGesture = 1;

// Full per-window detection: encode, run, read out. Ties resolve to
// no-gesture.
inline bool detect(const MmvNetwork& net, const io::ThermalWindow& window,
                   double theta_s) {
    if (net.classes() != 2)
        throw std::invalid_argument("detect: needs a 2-class readout");
    const Eigen::VectorXd p =
        readout(run(net, io::encode_window(window, theta_s)), net);
    return p[kClassGesture] > p[kClassNoGesture];
}

namespace detail {

inline char ternary_char(std::int8_t t) {
    return t == std::int8_t(Ternary::Exc) ? 'E'
         : t == std::int8_t(Ternary::Inh) ? 'I' : 'N';
}

inline std::int8_t ternary_from_char(char ch) {
    if (ch == 'E') return std::int8_t(Ternary::Exc);
    if (ch == 'I') return std::int8_t(Ternary::Inh);
    if (ch == 'N') return std::int8_t(Ternary::None);
    throw CheckpointError(std::string("bad ternary symbol '") + ch + "'");
}

// Run-length encoding over the row-major flattening, e.g. "12N3E1I".
inline std::string rle_encode(const TernaryMatrix& m) {
    std::string out;
    long run = 0;
    char cur = 0;
    auto flush = [&] {
        if (run) out += std::to_string(run) + cur;
    };
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            const char ch = ternary_char(m(r, c));
            if (ch == cur) {
                ++run;
            } else {
                flush();
                cur = ch;
                run = 1;
            }
        }
    flush();
    return out;
}

inline TernaryMatrix rle_decode(const std::string& s, Eigen::Index rows,
                                Eigen::Index cols) {
    TernaryMatrix m(rows, cols);
    Eigen::Index idx = 0;
    const Eigen::Index total = rows * cols;
    size_t pos = 0;
    while (pos < s.size()) {
        long run = 0;
        const char* b = s.data() + pos;
        const char* e = s.data() + s.size();
        auto [p, ec] = std::from_chars(b, e, run);
        if (ec != std::errc{} || p == e || run <= 0)
            throw CheckpointError("bad run length");
        const std::int8_t t = ternary_from_char(*p);
        pos = static_cast<size_t>(p - s.data()) + 1;
        for (long i = 0; i < run; ++i) {
            if (idx >= total) throw CheckpointError("RLE overruns matrix");
            m(idx / cols, idx % cols) = t;
            ++idx;
        }
    }
    if (idx != total) throw CheckpointError("RLE underruns matrix");
    return m;
}

inline std::string format_double(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) throw CheckpointError("float format error");
    return std::string(buf, p);
}

}  // namespace detail

// Versioned text checkpoint, bit-exact across save/load:
//   mmv-v1 C K w_tw
//   <C integer periods>
//   <input connectivity, RLE over {E,I,N}, row-major>
//   <recurrent connectivity, RLE>
//   <C*K readout weights, row-major>
//   <K bias values>
inline void save_checkpoint(const MmvNetwork& net, std::ostream& out) {
    out << "mmv-v1 " << net.neurons() << ' ' << net.classes() << ' '
        << net.inputs() << '\n';
    for (int j = 0; j < net.neurons(); ++j)
        out << (j ? " " : "") << net.periods[j];
    out << '\n'
        << detail::rle_encode(net.conn.input_conn) << '\n'
        << detail::rle_encode(net.conn.recurrent_conn) << '\n';
    for (int j = 0; j < net.neurons(); ++j)
        for (int k = 0; k < net.classes(); ++k)
            out << ((j || k) ? " " : "") << detail::format_double(net.readout_w(j, k));
    out << '\n';
    for (int k = 0; k < net.classes(); ++k)
        out << (k ? " " : "") << detail::format_double(net.readout_b[k]);
    out << '\n';
}

inline void save_checkpoint(const MmvNetwork& net, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw CheckpointError("cannot write " + path);
    save_checkpoint(net, out);
}

// max_period > 0 enforces the timer-fits-the-run invariant at load time.
inline MmvNetwork load_checkpoint(std::istream& in, int max_period = 0) {
    std::string magic;
    int c = 0, k = 0, w = 0;
    if (!(in >> magic >> c >> k >> w) || magic != "mmv-v1")
        throw CheckpointError("bad header");
    if (c < 0 || k < 1 || w < 1) throw CheckpointError("bad dimensions");

    MmvNetwork net;
    net.periods.resize(c);
    for (int j = 0; j < c; ++j)
        if (!(in >> net.periods[j])) throw CheckpointError("truncated periods");

    std::string line;
    std::getline(in, line);  // finish periods line
    std::string rle_in, rle_rec;
    if (!std::getline(in, rle_in) || !std::getline(in, rle_rec))
        throw CheckpointError("truncated connectivity");
    net.conn.input_conn = detail::rle_decode(rle_in, w, c);
    net.conn.recurrent_conn = detail::rle_decode(rle_rec, c, c);

    net.readout_w.resize(c, k);
    for (int j = 0; j < c; ++j)
        for (int kk = 0; kk < k; ++kk)
            if (!(in >> net.readout_w(j, kk)))
                throw CheckpointError("truncated readout weights");
    net.readout_b.resize(k);
    for (int kk = 0; kk < k; ++kk)
        if (!(in >> net.readout_b[kk])) throw CheckpointError("truncated bias");

    try {
        net.validate(max_period);
    } catch (const std::invalid_argument& e) {
        throw CheckpointError(e.what());
    }
    return net;
}

inline MmvNetwork load_checkpoint(const std::string& path, int max_period = 0) {
    std::ifstream in(path);
    if (!in) throw CheckpointError("cannot open " + path);
    return load_checkpoint(in, max_period);
}

}  // namespace tgr::mmv
