#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "segvol/raster.hpp"

namespace segvol {

namespace detail {

struct MsMode {
    double r, c;        // spatial
    double v[3];        // range (Lab)
};

}  // namespace detail

// Joint spatial-range mean-shift: each pixel's 5-D feature point is shifted
// to the mean of the original features inside the (h_s, h_r) window until
// the shift drops below 0.01 or 50 shifts have been applied. Converged modes
// are then grouped over 4-neighbors that land within the bandwidths of each
// other.
inline LabelMap ms_segment(const ImagePlanes& planes, double h_s, double h_r) {
    if (!(h_s > 0) || !(h_r > 0))
        throw std::invalid_argument("ms_segment: bandwidths must be > 0");
    const int w = planes.width, h = planes.height;
    const int32_t n = w * h;
    constexpr int kMaxShifts = 50;
    constexpr double kStopShift = 0.01;

    std::vector<detail::MsMode> modes(n);

    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            detail::MsMode m{static_cast<double>(r), static_cast<double>(c),
                             {planes.planes[0].at(r, c), planes.planes[1].at(r, c),
                              planes.planes[2].at(r, c)}};
            for (int it = 0; it < kMaxShifts; ++it) {
                double sr = 0, sc = 0, sv[3] = {0, 0, 0};
                int cnt = 0;
                int r0 = std::max(0, static_cast<int>(std::ceil(m.r - h_s)));
                int r1 = std::min(h - 1, static_cast<int>(std::floor(m.r + h_s)));
                int c0 = std::max(0, static_cast<int>(std::ceil(m.c - h_s)));
                int c1 = std::min(w - 1, static_cast<int>(std::floor(m.c + h_s)));
                for (int rr = r0; rr <= r1; ++rr) {
                    for (int cc = c0; cc <= c1; ++cc) {
                        double dr = rr - m.r, dc = cc - m.c;
                        if (dr * dr + dc * dc > h_s * h_s) continue;
                        double d0 = planes.planes[0].at(rr, cc) - m.v[0];
                        double d1 = planes.planes[1].at(rr, cc) - m.v[1];
                        double d2 = planes.planes[2].at(rr, cc) - m.v[2];
                        if (d0 * d0 + d1 * d1 + d2 * d2 > h_r * h_r) continue;
                        sr += rr; sc += cc;
                        sv[0] += planes.planes[0].at(rr, cc);
                        sv[1] += planes.planes[1].at(rr, cc);
                        sv[2] += planes.planes[2].at(rr, cc);
                        ++cnt;
                    }
                }
                if (cnt == 0) break;
                detail::MsMode next{sr / cnt, sc / cnt,
                                    {sv[0] / cnt, sv[1] / cnt, sv[2] / cnt}};
                double dr = next.r - m.r, dc = next.c - m.c;
                double d0 = next.v[0] - m.v[0], d1 = next.v[1] - m.v[1],
                       d2 = next.v[2] - m.v[2];
                double shift = std::sqrt(dr * dr + dc * dc + d0 * d0 + d1 * d1 + d2 * d2);
                m = next;
                if (shift < kStopShift) break;
            }
            modes[r * w + c] = m;
        }
    }

    // group 4-neighbors with close converged modes
    auto close = [&](int32_t i, int32_t j) {
        const auto& a = modes[i];
        const auto& b = modes[j];
        double dr = a.r - b.r, dc = a.c - b.c;
        if (dr * dr + dc * dc >= h_s * h_s) return false;
        double d0 = a.v[0] - b.v[0], d1 = a.v[1] - b.v[1], d2 = a.v[2] - b.v[2];
        return d0 * d0 + d1 * d1 + d2 * d2 < h_r * h_r;
    };

    // connected components with a scanline stack
    LabelMap out(w, h);
    std::vector<int32_t>& lab = out.labels.data();
    lab.assign(static_cast<size_t>(n), -1);
    std::vector<int32_t> stack;
    int32_t next_label = 0;
    for (int32_t seed = 0; seed < n; ++seed) {
        if (lab[seed] >= 0) continue;
        lab[seed] = next_label;
        stack.push_back(seed);
        while (!stack.empty()) {
            int32_t i = stack.back();
            stack.pop_back();
            int r = i / w, c = i % w;
            const int32_t nb[4] = {c > 0 ? i - 1 : -1, c + 1 < w ? i + 1 : -1,
                                   r > 0 ? i - w : -1, r + 1 < h ? i + w : -1};
            for (int32_t j : nb) {
                if (j < 0 || lab[j] >= 0) continue;
                if (close(i, j)) {
                    lab[j] = next_label;
                    stack.push_back(j);
                }
            }
        }
        ++next_label;
    }
    out.segment_count = next_label;
    return out;
}

}  // namespace segvol
