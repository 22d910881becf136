// Rule-based classification of a completed centroid track into
// {circular CW, circular CCW, vertical, horizontal}.
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "tgr/tracker.hpp"

namespace tgr::classifier {

enum class GestureClass { CirCW, CirCCW, Vertical, Horizontal, NoGesture };

inline const char* to_string(GestureClass g) {
    switch (g) {
        case GestureClass::CirCW: return "cirCW";
        case GestureClass::CirCCW: return "cirCCW";
        case GestureClass::Vertical: return "vertical";
        case GestureClass::Horizontal: return "horizontal";
        default: return "no-gesture";
    }
}

struct TrackTooShort : std::runtime_error {
    explicit TrackTooShort(size_t n)
        : std::runtime_error("track of " + std::to_string(n) +
                             " points is too short to classify") {}
};

struct TrackFeatures {
    double d_x = 0;          // max extent along x
    double d_y = 0;          // max extent along y
    double var_x = 0;        // population variance
    double var_y = 0;
    double angle_trend = 0;  // summed unwrapped angle increments about the mean
};

// Angles are measured about the track mean with atan2(y - ybar, x - xbar)
// in screen coordinates (y down) and unwrapped so successive increments lie
// in (-pi, pi]. A track of fewer than 3 points has no usable angle trend.
inline TrackFeatures features(const tracker::GestureTrack& track) {
    const size_t n = track.size();
    if (n < 3) throw TrackTooShort(n);

    double min_x = track.points[0].x, max_x = min_x;
    double min_y = track.points[0].y, max_y = min_y;
    double mean_x = 0, mean_y = 0;
    for (const auto& p : track.points) {
        min_x = std::min(min_x, p.x);
        max_x = std::max(max_x, p.x);
        min_y = std::min(min_y, p.y);
        max_y = std::max(max_y, p.y);
        mean_x += p.x;
        mean_y += p.y;
    }
    mean_x /= double(n);
    mean_y /= double(n);

    TrackFeatures f;
    f.d_x = max_x - min_x;
    f.d_y = max_y - min_y;
    double trend = 0, prev_angle = 0;
    for (size_t i = 0; i < n; ++i) {
        const auto& p = track.points[i];
        f.var_x += (p.x - mean_x) * (p.x - mean_x);
        f.var_y += (p.y - mean_y) * (p.y - mean_y);
        const double angle = std::atan2(p.y - mean_y, p.x - mean_x);
        if (i > 0) {
            double d = angle - prev_angle;
            d -= 2.0 * M_PI * std::floor((d + M_PI) / (2.0 * M_PI));
            trend += d;
        }
        prev_angle = angle;
    }
    f.var_x /= double(n);
    f.var_y /= double(n);
    f.angle_trend = trend;
    return f;
}

// Circular when the x/y extents are similar (|D_x - D_y| < theta_c1) and
// large enough (min > theta_c2); CW iff the angle trend is negative, ties
// going to CCW. Otherwise vertical iff var_y > var_x, variance ties going
// to horizontal.
inline GestureClass classify_track(const tracker::GestureTrack& track,
                                   double theta_c1, double theta_c2) {
    if (theta_c1 <= 0 || theta_c2 <= 0)
        throw std::invalid_argument("classify_track: thresholds must be > 0");
    const TrackFeatures f = features(track);
    if (std::abs(f.d_x - f.d_y) < theta_c1 && std::min(f.d_x, f.d_y) > theta_c2)
        return f.angle_trend < 0 ? GestureClass::CirCW : GestureClass::CirCCW;
    return f.var_y > f.var_x ? GestureClass::Vertical : GestureClass::Horizontal;
}

}  // namespace tgr::classifier
