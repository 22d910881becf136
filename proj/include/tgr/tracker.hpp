// Hand centroid extraction from the R-PCA sparse image and the low-pass
// filtered track history.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <deque>
#include <optional>
#include <stdexcept>
#include <vector>

namespace tgr::tracker {

// x = column (rightward), y = row (downward); screen coordinates.
struct Centroid {
    double x = 0;
    double y = 0;
};

struct GestureTrack {
    std::deque<Centroid> points;  // low-pass filtered, oldest first
    double beta = 0.5;            // low-pass decay
    size_t capacity = 10;         // L, track length

    bool empty() const { return points.empty(); }
    size_t size() const { return points.size(); }
};

// Largest 4-connected blob of |S| > theta_blob, |S|-weighted centroid.
// Ties on pixel count go to the component with the larger summed |S|,
// further ties to the smaller top-left (row-major) index. Returns absent
// when nothing exceeds the threshold.
inline std::optional<Centroid> extract_centroid(const Eigen::MatrixXd& s_frame,
                                                double theta_blob) {
    if (theta_blob <= 0)
        throw std::invalid_argument("extract_centroid: theta_blob must be > 0");
    const int rows = static_cast<int>(s_frame.rows());
    const int cols = static_cast<int>(s_frame.cols());
    const Eigen::MatrixXd mag = s_frame.cwiseAbs();

    std::vector<int> comp(static_cast<size_t>(rows * cols), -1);
    auto on = [&](int r, int c) { return mag(r, c) > theta_blob; };

    struct Blob {
        int pixels = 0;
        double mass = 0;
        int top_left = 0;
        double wx = 0, wy = 0;
    };
    std::vector<Blob> blobs;
    std::vector<int> stack;

    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const int idx = r * cols + c;
            if (!on(r, c) || comp[static_cast<size_t>(idx)] >= 0) continue;
            const int id = static_cast<int>(blobs.size());
            blobs.push_back({0, 0, idx, 0, 0});
            stack.assign(1, idx);
            comp[static_cast<size_t>(idx)] = id;
            while (!stack.empty()) {
                const int cur = stack.back();
                stack.pop_back();
                const int cr = cur / cols, cc = cur % cols;
                const double m = mag(cr, cc);
                Blob& b = blobs[static_cast<size_t>(id)];
                b.pixels += 1;
                b.mass += m;
                b.wx += m * cc;
                b.wy += m * cr;
                const int nbr[4][2] = {{cr - 1, cc}, {cr + 1, cc},
                                       {cr, cc - 1}, {cr, cc + 1}};
                for (auto& [nr, nc] : nbr) {
                    if (nr < 0 || nr >= rows || nc < 0 || nc >= cols) continue;
                    const int nidx = nr * cols + nc;
                    if (on(nr, nc) && comp[static_cast<size_t>(nidx)] < 0) {
                        comp[static_cast<size_t>(nidx)] = id;
                        stack.push_back(nidx);
                    }
                }
            }
        }
    }
    if (blobs.empty()) return std::nullopt;

    const Blob* best = &blobs[0];
    for (const Blob& b : blobs) {
        if (b.pixels > best->pixels ||
            (b.pixels == best->pixels && b.mass > best->mass) ||
            (b.pixels == best->pixels && b.mass == best->mass &&
             b.top_left < best->top_left))
            best = &b;
    }
    return Centroid{best->wx / best->mass, best->wy / best->mass};
}

// p_filt[k+1] = beta * p_filt[k] + (1 - beta) * p_raw[k+1]; the first point
// seeds the filter unfiltered. Oldest points are evicted beyond capacity.
inline GestureTrack lowpass_update(GestureTrack track, const Centroid& p) {
    Centroid next = p;
    if (!track.points.empty()) {
        const Centroid& prev = track.points.back();
        next.x = track.beta * prev.x + (1.0 - track.beta) * p.x;
        next.y = track.beta * prev.y + (1.0 - track.beta) * p.y;
    }
    track.points.push_back(next);
    while (track.points.size() > track.capacity) track.points.pop_front();
    return track;
}

}  // namespace tgr::tracker
