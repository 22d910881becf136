// Stream orchestration of the wake-up -> R-PCA -> track -> classify system,
// the evaluation protocol, and the memory/compute cost model.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tgr/classifier.hpp"
#include "tgr/mmv.hpp"
#include "tgr/rpca.hpp"
#include "tgr/thermal_io.hpp"
#include "tgr/tracker.hpp"

namespace tgr::pipeline {

struct PipelineConfig {
    int n_c = 5;
    int track_len = 10;     // L
    double beta = 0.5;
    double theta_s = 0.2;
    double theta_c1 = 5.0;
    double theta_c2 = 5.0;
    double lambda = 0.05;
    double theta_blob = 0.15;
    int n_gap = 3;          // consecutive misses closing a track / re-arming
    double rpca_tol = 1e-7;
    int rpca_max_iter = 100;

    int t_steps() const { return (n_c - 1) * io::kFrameRows; }
    rpca::RpcaConfig rpca_config() const {
        rpca::RpcaConfig c;
        c.lambda = lambda;
        c.tol = rpca_tol;
        c.max_iter = rpca_max_iter;
        return c;
    }
};

struct GestureEvent {
    long start_index = 0;
    long end_index = 0;
    classifier::GestureClass predicted = classifier::GestureClass::NoGesture;
    tracker::GestureTrack track;
};

// Instrumentation counters, exposed so tests can verify that the wake-up
// stage actually gates the R-PCA stage.
struct StreamStats {
    long windows = 0;
    long detections = 0;
    long rpca_calls = 0;
    long rpca_iterations = 0;
    long tracks_discarded = 0;  // closed with fewer than 3 points
};

using DetectorFn = std::function<bool(const io::ThermalWindow&)>;

inline DetectorFn make_detector(const mmv::MmvNetwork& net, double theta_s) {
    return [&net, theta_s](const io::ThermalWindow& w) {
        return mmv::detect(net, w, theta_s);
    };
}

// Slides a window one frame at a time. While the detector is silent only
// the MMV runs; on detection the current window is R-PCA decomposed, the
// hand centroid is extracted from the last row of S and appended to the
// low-pass track. A track emits an event when it reaches L points or when
// it closes early (N_gap consecutive missed updates); at most one event is
// emitted per awake episode, and N_gap consecutive negative detections put
// the stream back to sleep.
inline std::vector<GestureEvent> process_stream(
    const std::vector<io::ThermalFrame>& frames, const PipelineConfig& cfg,
    const DetectorFn& detector, StreamStats* stats = nullptr) {
    std::vector<GestureEvent> events;
    StreamStats local;
    StreamStats& st = stats ? *stats : local;

    io::Acquisition view;  // window_at works on an acquisition
    view.frames = frames;

    tracker::GestureTrack track;
    track.beta = cfg.beta;
    track.capacity = size_t(cfg.track_len);
    long track_start = -1, track_end = -1;
    int misses = 0, negatives = 0;
    bool event_emitted = false;

    auto reset_track = [&] {
        track.points.clear();
        track_start = track_end = -1;
        misses = 0;
    };
    auto close_track = [&](bool allow_emit) {
        if (!track.empty()) {
            if (allow_emit && track.size() >= 3) {
                GestureEvent ev;
                ev.start_index = track_start;
                ev.end_index = track_end;
                ev.track = track;
                ev.predicted =
                    classifier::classify_track(track, cfg.theta_c1, cfg.theta_c2);
                events.push_back(std::move(ev));
                event_emitted = true;
            } else {
                ++st.tracks_discarded;
            }
        }
        reset_track();
    };

    for (long k = cfg.n_c - 1; k < long(frames.size()); ++k) {
        const io::ThermalWindow window = io::window_at(view, k, cfg.n_c);
        ++st.windows;
        if (!detector(window)) {
            if (++negatives >= cfg.n_gap) {
                close_track(!event_emitted);
                event_emitted = false;  // re-arm
            }
            continue;
        }
        ++st.detections;
        negatives = 0;
        if (event_emitted) continue;  // one event per awake episode

        const io::ThermalWindow norm = io::normalize(window);
        const rpca::RpcaResult dec = rpca::pcp(norm.rows, cfg.rpca_config());
        ++st.rpca_calls;
        st.rpca_iterations += dec.iterations;

        // Sparse image of the newest frame in the window.
        Eigen::MatrixXd s_frame(io::kFrameRows, io::kFrameCols);
        for (int i = 0; i < io::kFramePixels; ++i)
            s_frame(i / io::kFrameCols, i % io::kFrameCols) =
                dec.sparse(cfg.n_c - 1, i);

        const auto centroid = tracker::extract_centroid(s_frame, cfg.theta_blob);
        if (!centroid) {
            if (!track.empty() && ++misses >= cfg.n_gap) close_track(true);
            continue;
        }
        misses = 0;
        if (track.empty()) track_start = k;
        track_end = k;
        track = tracker::lowpass_update(std::move(track), *centroid);
        if (track.size() >= size_t(cfg.track_len)) close_track(true);
    }
    close_track(!event_emitted);
    return events;
}

inline std::vector<GestureEvent> process_stream(
    const std::vector<io::ThermalFrame>& frames, const PipelineConfig& cfg,
    const mmv::MmvNetwork& detector, StreamStats* stats = nullptr) {
    return process_stream(frames, cfg, make_detector(detector, cfg.theta_s),
                          stats);
}

// --- cost model -----------------------------------------------------------

struct ParamCount {
    std::uint64_t packed_bytes = 0;    // 2-bit synapses, 8-bit periods, fp32 readout
    std::uint64_t unpacked_bytes = 0;  // 1 byte per synapse instead
};

// Documented scheme: each ternary synapse takes 2 bits (packed) or 1 byte
// (unpacked), each timer period 8 bits, each readout weight and bias 32 bits.
inline ParamCount count_params(const mmv::MmvNetwork& net) {
    const std::uint64_t c = std::uint64_t(net.neurons());
    const std::uint64_t synapses = std::uint64_t(net.inputs()) * c + c * c;
    ParamCount out;
    out.packed_bytes = (synapses * 2 + 7) / 8 + c +
                       (c * std::uint64_t(net.classes()) +
                        std::uint64_t(net.classes())) * 4;
    out.unpacked_bytes = synapses + c +
                         (c * std::uint64_t(net.classes()) +
                          std::uint64_t(net.classes())) * 4;
    return out;
}

// SVD operation count n_svd = 2 N_c (h w)^2 + 11 (h w)^3.
inline std::uint64_t flops_svd(std::uint64_t n_c, std::uint64_t h,
                               std::uint64_t w) {
    const std::uint64_t p = h * w;
    return 2 * n_c * p * p + 11 * p * p * p;
}

// MMV operation count per frame: one OR-accumulation per connected synapse
// per time step plus one counter update per neuron per time step, and the
// readout multiply-accumulates, all counted as 1 op each.
inline std::uint64_t mmv_ops_per_frame(const mmv::MmvNetwork& net, int t_steps) {
    std::uint64_t connected = 0;
    for (Eigen::Index i = 0; i < net.conn.input_conn.size(); ++i)
        connected += net.conn.input_conn.data()[i] != 0;
    for (Eigen::Index i = 0; i < net.conn.recurrent_conn.size(); ++i)
        connected += net.conn.recurrent_conn.data()[i] != 0;
    const auto c = std::uint64_t(net.neurons());
    const auto k = std::uint64_t(net.classes());
    return std::uint64_t(t_steps) * (connected + c) + 2 * c * k + k;
}

// R-PCA cost of one gesture: worst-case 100 PCP iterations, one SVD each,
// once per tracked window.
inline std::uint64_t rpca_ops_per_gesture(const PipelineConfig& cfg,
                                          int windows_per_gesture = -1) {
    const int windows = windows_per_gesture > 0 ? windows_per_gesture : cfg.track_len;
    return std::uint64_t(cfg.rpca_max_iter) *
           flops_svd(std::uint64_t(cfg.n_c), io::kFrameRows, io::kFrameCols) *
           std::uint64_t(windows);
}

// Average operations per second: always-on MMV plus the R-PCA stage scaled
// by the assumed gesture rate.
inline double avg_flops(double per_gesture_ops, double gesture_rate,
                        double mmv_ops_per_frame, double frame_rate) {
    return mmv_ops_per_frame * frame_rate + per_gesture_ops * gesture_rate;
}

// --- evaluation -----------------------------------------------------------

struct AcquisitionScore {
    std::string name;
    classifier::GestureClass label = classifier::GestureClass::NoGesture;
    std::vector<GestureEvent> events;
    long correct = 0;
    long total = 0;
};

struct EvaluationReport {
    double accuracy = 0;
    Eigen::Matrix<long, 5, 5> confusion = Eigen::Matrix<long, 5, 5>::Zero();
    ParamCount params;
    double mmv_flops = 0;
    double rpca_flops = 0;
    std::vector<AcquisitionScore> per_acquisition;
};

inline int class_index(classifier::GestureClass g) { return int(g); }

inline std::optional<classifier::GestureClass> eval_label(io::AcqLabel l) {
    using G = classifier::GestureClass;
    switch (l) {
        case io::AcqLabel::NoGesture: return G::NoGesture;
        case io::AcqLabel::CirCW: return G::CirCW;
        case io::AcqLabel::CirCCW: return G::CirCCW;
        case io::AcqLabel::Vertical: return G::Vertical;
        case io::AcqLabel::Horizontal: return G::Horizontal;
        default: return std::nullopt;  // mixed-gesture acquisitions not scorable
    }
}

// Scores each acquisition's events against its label. A no-gesture
// acquisition is correct exactly when no event fires; a gesture acquisition
// with no event counts as a miss (predicted no-gesture). Mixed all-gesture
// acquisitions are skipped.
inline EvaluationReport evaluate(const std::vector<io::Acquisition>& dataset,
                                 const PipelineConfig& cfg,
                                 const DetectorFn& detector) {
    if (dataset.empty()) throw std::invalid_argument("evaluate: empty dataset");
    EvaluationReport rep;
    long correct = 0, total = 0;

    for (const auto& acq : dataset) {
        const auto label = eval_label(acq.label);
        if (!label) continue;
        AcquisitionScore score;
        score.name = acq.name;
        score.label = *label;
        score.events = process_stream(acq.frames, cfg, detector);

        const int li = class_index(*label);
        if (score.events.empty()) {
            rep.confusion(li, class_index(classifier::GestureClass::NoGesture)) += 1;
            score.total = 1;
            score.correct = *label == classifier::GestureClass::NoGesture;
        } else {
            for (const auto& ev : score.events) {
                rep.confusion(li, class_index(ev.predicted)) += 1;
                score.total += 1;
                score.correct += ev.predicted == *label;
            }
        }
        correct += score.correct;
        total += score.total;
        rep.per_acquisition.push_back(std::move(score));
    }
    if (total == 0) throw std::invalid_argument("evaluate: no scorable acquisitions");
    rep.accuracy = double(correct) / double(total);
    return rep;
}

inline EvaluationReport evaluate(const std::vector<io::Acquisition>& dataset,
                                 const PipelineConfig& cfg,
                                 const mmv::MmvNetwork& detector,
                                 double gesture_rate_hz = 1.0 / 60.0) {
    EvaluationReport rep =
        evaluate(dataset, cfg, make_detector(detector, cfg.theta_s));
    rep.params = count_params(detector);
    rep.mmv_flops = double(mmv_ops_per_frame(detector, cfg.t_steps())) *
                    io::kFrameRate;
    rep.rpca_flops = double(rpca_ops_per_gesture(cfg)) * gesture_rate_hz;
    return rep;
}

}  // namespace tgr::pipeline
