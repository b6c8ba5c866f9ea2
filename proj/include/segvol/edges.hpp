#pragma once

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

#include "segvol/io.hpp"
#include "segvol/raster.hpp"

namespace segvol {

// E_S: a pixel is a boundary pixel when at least one of its four immediate
// in-lattice neighbors carries a different label. Both sides of a label
// change are marked.
inline EdgeMap segment_boundaries(const LabelMap& m) {
    const int w = m.width(), h = m.height();
    EdgeMap out(w, h, 0);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            int32_t l = m.labels.at(r, c);
            bool b = (c > 0 && m.labels.at(r, c - 1) != l) ||
                     (c + 1 < w && m.labels.at(r, c + 1) != l) ||
                     (r > 0 && m.labels.at(r - 1, c) != l) ||
                     (r + 1 < h && m.labels.at(r + 1, c) != l);
            out.at(r, c) = b ? 1 : 0;
        }
    }
    return out;
}

struct EdgeDetectConfig {
    double high_percentile = 0.90;  // of nonzero suppressed magnitudes
    double low_fraction = 0.4;      // low threshold = low_fraction * high
};

namespace detail {

// Sobel responses for one plane.
inline void sobel(const PlaneF& p, PlaneF& gx, PlaneF& gy) {
    const int w = p.width(), h = p.height();
    auto v = [&](int r, int c) {
        r = std::clamp(r, 0, h - 1);
        c = std::clamp(c, 0, w - 1);
        return p.at(r, c);
    };
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            gx.at(r, c) = (v(r - 1, c + 1) + 2 * v(r, c + 1) + v(r + 1, c + 1)) -
                          (v(r - 1, c - 1) + 2 * v(r, c - 1) + v(r + 1, c - 1));
            gy.at(r, c) = (v(r + 1, c - 1) + 2 * v(r + 1, c) + v(r + 1, c + 1)) -
                          (v(r - 1, c - 1) + 2 * v(r - 1, c) + v(r - 1, c + 1));
        }
    }
}

}  // namespace detail

// Classical reference-edge substitute: per-channel 3x3 gradients, magnitude
// maxed over channels, non-maximum suppression along the quantized gradient
// direction, then hysteresis. The high threshold is a percentile of the
// nonzero suppressed magnitudes; low = low_fraction * high.
inline EdgeMap detect_edges(const ImagePlanes& planes, const EdgeDetectConfig& cfg = {}) {
    const int w = planes.width, h = planes.height;
    for (int k = 0; k < 3; ++k)
        for (double v : planes.planes[k].data())
            if (!std::isfinite(v)) throw std::invalid_argument("detect_edges: non-finite input");

    PlaneF mag(w, h, 0.0), dirx(w, h, 0.0), diry(w, h, 0.0);
    PlaneF gx(w, h), gy(w, h);
    for (int k = 0; k < 3; ++k) {
        detail::sobel(planes.planes[k], gx, gy);
        for (size_t i = 0; i < mag.size(); ++i) {
            double m = std::hypot(gx[i], gy[i]);
            if (m > mag[i]) {
                mag[i] = m;
                dirx[i] = gx[i];
                diry[i] = gy[i];
            }
        }
    }

    // NMS: quantize direction to 0/45/90/135 degrees; keep a pixel when it is
    // >= its predecessor and strictly > its successor along that direction,
    // so flat-topped ridges thin to one pixel.
    PlaneF sup(w, h, 0.0);
    auto magat = [&](int r, int c) {
        if (r < 0 || r >= h || c < 0 || c >= w) return 0.0;
        return mag.at(r, c);
    };
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            double m = mag.at(r, c);
            if (m <= 0) continue;
            double ang = std::atan2(diry.at(r, c), dirx.at(r, c));
            if (ang < 0) ang += M_PI;
            int dr, dc;
            if (ang < M_PI / 8 || ang >= 7 * M_PI / 8) { dr = 0; dc = 1; }
            else if (ang < 3 * M_PI / 8) { dr = 1; dc = 1; }
            else if (ang < 5 * M_PI / 8) { dr = 1; dc = 0; }
            else { dr = 1; dc = -1; }
            if (m >= magat(r - dr, c - dc) && m > magat(r + dr, c + dc))
                sup.at(r, c) = m;
        }
    }

    std::vector<double> nz;
    for (double v : sup.data())
        if (v > 0) nz.push_back(v);
    EdgeMap out(w, h, 0);
    if (nz.empty()) return out;  // constant image

    size_t idx = static_cast<size_t>(cfg.high_percentile * (nz.size() - 1));
    std::nth_element(nz.begin(), nz.begin() + idx, nz.end());
    double high = nz[idx];
    double low = cfg.low_fraction * high;

    // hysteresis: strong pixels seed, weak pixels join via 8-connectivity
    std::queue<int32_t> q;
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            if (sup.at(r, c) >= high) {
                out.at(r, c) = 1;
                q.push(r * w + c);
            }
    while (!q.empty()) {
        int32_t i = q.front();
        q.pop();
        int r = i / w, c = i % w;
        for (int dr = -1; dr <= 1; ++dr)
            for (int dc = -1; dc <= 1; ++dc) {
                int rr = r + dr, cc = c + dc;
                if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
                if (out.at(rr, cc) == 0 && sup.at(rr, cc) >= low) {
                    out.at(rr, cc) = 1;
                    q.push(rr * w + cc);
                }
            }
    }
    return out;
}

// Externally computed edge map (e.g. structured edges dumped to a grayscale
// raster): pixel >= threshold * max_value -> 1.
inline EdgeMap load_edge_map(const std::string& path, double threshold, int width,
                             int height) {
    if (!(threshold > 0) || !(threshold < 1))
        throw std::invalid_argument("load_edge_map: threshold must be in (0,1)");
    Gray16 g = read_gray(path);
    if (!g.same_shape(width, height))
        throw std::runtime_error("load_edge_map: dimension mismatch for " + path);
    const double cut = threshold * 65535.0;
    EdgeMap out(width, height, 0);
    for (size_t i = 0; i < g.size(); ++i) out[i] = g[i] >= cut ? 1 : 0;
    return out;
}

}  // namespace segvol
