// Thermal acquisition ingestion, sliding windows, and the
// normalize -> temporal-difference -> threshold encoding that turns raw
// 24x32 frames into the binary rasters consumed by the MMV detector.
#pragma once

#include <Eigen/Dense>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tgr::io {

inline constexpr int kFrameRows = 24;   // h_th
inline constexpr int kFrameCols = 32;   // w_tw
inline constexpr int kFramePixels = kFrameRows * kFrameCols;
inline constexpr int kFrameRate = 8;    // fps

using BitMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

enum class Daypart { Morning, Night };

enum class AcqLabel { NoGesture, AllGestures, CirCW, CirCCW, Vertical, Horizontal };

struct MalformedHeader : std::runtime_error {
    explicit MalformedHeader(const std::string& why)
        : std::runtime_error("malformed acquisition header: " + why) {}
};
struct EmptyAcquisition : std::runtime_error {
    EmptyAcquisition() : std::runtime_error("acquisition contains no frames") {}
};
struct BadFrameWidth : std::runtime_error {
    BadFrameWidth(size_t row, size_t count)
        : std::runtime_error("frame row " + std::to_string(row) + " has " +
                             std::to_string(count) + " values, expected " +
                             std::to_string(kFramePixels)),
          row(row) {}
    size_t row;
};
struct BadFrameValue : std::runtime_error {
    explicit BadFrameValue(size_t row)
        : std::runtime_error("non-finite or unparsable value in frame row " +
                             std::to_string(row)),
          row(row) {}
    size_t row;
};
struct InsufficientHistory : std::runtime_error {
    InsufficientHistory(long k, int n_c)
        : std::runtime_error("window end index " + std::to_string(k) +
                             " needs at least " + std::to_string(n_c) +
                             " frames of history") {}
};

struct ThermalFrame {
    Eigen::MatrixXd pixels;  // kFrameRows x kFrameCols, degrees Celsius
    long timestamp_index = 0;
};

struct Acquisition {
    std::string name;
    Daypart daypart = Daypart::Morning;
    AcqLabel label = AcqLabel::NoGesture;
    std::vector<ThermalFrame> frames;
};

// N_c consecutive frames flattened row-major into the rows of an
// N_c x 768 matrix (M_th[k] with k = end_index).
struct ThermalWindow {
    Eigen::MatrixXd rows;
    long end_index = 0;
    int n_c() const { return static_cast<int>(rows.rows()); }
};

// Binary raster of shape (N_c-1)*h_th x w_tw; one image row per time step.
struct SpikeRaster {
    BitMatrix bits;
    long origin_index = 0;
    int steps() const { return static_cast<int>(bits.rows()); }
    int channels() const { return static_cast<int>(bits.cols()); }
};

namespace detail {

inline bool parse_double(std::string_view tok, double& out) {
    const char* b = tok.data();
    const char* e = b + tok.size();
    while (b < e && (*b == ' ' || *b == '\t')) ++b;
    while (e > b && (*(e - 1) == ' ' || *(e - 1) == '\t' || *(e - 1) == '\r')) --e;
    auto [p, ec] = std::from_chars(b, e, out);
    return ec == std::errc{} && p == e;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    size_t pos = 0;
    while (true) {
        size_t next = s.find(sep, pos);
        if (next == std::string_view::npos) {
            out.push_back(s.substr(pos));
            break;
        }
        out.push_back(s.substr(pos, next - pos));
        pos = next + 1;
    }
    return out;
}

}  // namespace detail

// Acquisition names follow "<token>-gesture-<m|n>", e.g. "cirCW-gesture-m".
inline AcqLabel label_from_name(const std::string& name) {
    const size_t pos = name.find("-gesture-");
    if (pos == std::string::npos)
        throw MalformedHeader("name '" + name + "' lacks '-gesture-' token");
    const std::string token = name.substr(0, pos);
    if (token == "no") return AcqLabel::NoGesture;
    if (token == "all") return AcqLabel::AllGestures;
    if (token == "cirCW") return AcqLabel::CirCW;
    if (token == "cirCCW") return AcqLabel::CirCCW;
    if (token == "vert") return AcqLabel::Vertical;
    if (token == "hor") return AcqLabel::Horizontal;
    throw MalformedHeader("unknown gesture token '" + token + "'");
}

inline Daypart daypart_from_name(const std::string& name) {
    if (name.size() >= 2 && name.ends_with("-m")) return Daypart::Morning;
    if (name.size() >= 2 && name.ends_with("-n")) return Daypart::Night;
    throw MalformedHeader("name '" + name + "' lacks -m/-n daypart suffix");
}

// Canonical file: line 1 is "h,w,fps,name"; every following line is one
// frame of h*w comma-separated Celsius values, row-major.
inline Acquisition load_acquisition(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw MalformedHeader("empty file");
    auto head = detail::split(line, ',');
    if (head.size() != 4) throw MalformedHeader("expected 'h,w,fps,name'");
    double h = 0, w = 0, fps = 0;
    if (!detail::parse_double(head[0], h) || !detail::parse_double(head[1], w) ||
        !detail::parse_double(head[2], fps))
        throw MalformedHeader("non-numeric dimensions");
    if (int(h) != kFrameRows || int(w) != kFrameCols)
        throw MalformedHeader("dimensions must be 24,32");

    Acquisition acq;
    acq.name = std::string(head[3]);
    while (!acq.name.empty() &&
           (acq.name.back() == '\r' || acq.name.back() == ' '))
        acq.name.pop_back();
    acq.label = label_from_name(acq.name);
    acq.daypart = daypart_from_name(acq.name);

    size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        auto toks = detail::split(line, ',');
        if (toks.size() != kFramePixels) throw BadFrameWidth(row, toks.size());
        ThermalFrame f;
        f.pixels.resize(kFrameRows, kFrameCols);
        f.timestamp_index = static_cast<long>(row);
        for (int i = 0; i < kFramePixels; ++i) {
            double v = 0;
            if (!detail::parse_double(toks[static_cast<size_t>(i)], v) ||
                !std::isfinite(v))
                throw BadFrameValue(row);
            f.pixels(i / kFrameCols, i % kFrameCols) = v;
        }
        acq.frames.push_back(std::move(f));
        ++row;
    }
    if (acq.frames.empty()) throw EmptyAcquisition();
    return acq;
}

inline Acquisition load_acquisition(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open acquisition file: " + path);
    return load_acquisition(in);
}

inline void save_acquisition(const Acquisition& acq, std::ostream& out) {
    out << kFrameRows << ',' << kFrameCols << ',' << kFrameRate << ','
        << acq.name << '\n';
    char buf[64];
    for (const auto& f : acq.frames) {
        for (int i = 0; i < kFramePixels; ++i) {
            const double v = f.pixels(i / kFrameCols, i % kFrameCols);
            auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
            if (ec != std::errc{}) throw std::runtime_error("value format error");
            if (i) out << ',';
            out.write(buf, p - buf);
        }
        out << '\n';
    }
}

inline void save_acquisition(const Acquisition& acq, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write acquisition file: " + path);
    save_acquisition(acq, out);
}

// Window of frames k-n_c+1 .. k, each flattened row-major.
inline ThermalWindow window_at(const Acquisition& acq, long k, int n_c) {
    if (n_c < 2) throw std::invalid_argument("window_at: n_c must be >= 2");
    if (k < n_c - 1 || k >= static_cast<long>(acq.frames.size()))
        throw InsufficientHistory(k, n_c);
    ThermalWindow w;
    w.end_index = k;
    w.rows.resize(n_c, kFramePixels);
    for (int r = 0; r < n_c; ++r) {
        const auto& px = acq.frames[static_cast<size_t>(k - n_c + 1 + r)].pixels;
        for (int i = 0; i < kFramePixels; ++i)
            w.rows(r, i) = px(i / kFrameCols, i % kFrameCols);
    }
    return w;
}

// Min-max normalization over the whole window. A constant window maps to
// all zeros so a static scene produces no spikes downstream.
inline ThermalWindow normalize(const ThermalWindow& w) {
    const double lo = w.rows.minCoeff();
    const double hi = w.rows.maxCoeff();
    ThermalWindow out;
    out.end_index = w.end_index;
    if (hi == lo)
        out.rows = Eigen::MatrixXd::Zero(w.rows.rows(), w.rows.cols());
    else
        out.rows = (w.rows.array() - lo) / (hi - lo);
    return out;
}

// Frame-to-frame difference; output row i = input row i+1 - row i.
inline Eigen::MatrixXd temporal_diff(const ThermalWindow& w) {
    const auto n = w.rows.rows();
    return w.rows.bottomRows(n - 1) - w.rows.topRows(n - 1);
}

// |delta| >= theta_s thresholding, then row-major reshape of the
// (N_c-1) x 768 matrix into (N_c-1)*h_th time steps of width w_tw.
inline SpikeRaster to_spikes(const Eigen::MatrixXd& delta, double theta_s,
                             long origin_index = 0) {
    if (theta_s <= 0) throw std::invalid_argument("to_spikes: theta_s must be > 0");
    SpikeRaster r;
    r.origin_index = origin_index;
    const auto d_rows = delta.rows();
    r.bits.resize(d_rows * kFrameRows, kFrameCols);
    for (Eigen::Index i = 0; i < d_rows; ++i)
        for (int j = 0; j < kFramePixels; ++j)
            r.bits(i * kFrameRows + j / kFrameCols, j % kFrameCols) =
                std::abs(delta(i, j)) >= theta_s ? 1 : 0;
    return r;
}

// Full window -> raster encoding chain.
inline SpikeRaster encode_window(const ThermalWindow& w, double theta_s) {
    return to_spikes(temporal_diff(normalize(w)), theta_s, w.end_index);
}

}  // namespace tgr::io
