#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <vector>

#include "segvol/raster.hpp"

namespace segvol {

struct PostprocConfig {
    int64_t th1 = 100;  // minimum segment area in pixels

    void validate() const {
        if (th1 < 1) throw std::invalid_argument("postproc: th1 must be >= 1");
    }
};

// Repeatedly merges the smallest segment under th1 into its 4-adjacent
// neighbor with the nearest mean Lab color, until every segment reaches th1
// or a single segment remains. Ties: equal areas pick the smaller label,
// equal color distances pick the smaller neighbor label.
inline LabelMap merge_small_segments(const LabelMap& labels, const ImagePlanes& planes,
                                     const PostprocConfig& cfg) {
    cfg.validate();
    const int w = labels.width(), h = labels.height();
    const int32_t nseg = labels.segment_count;
    const size_t n = static_cast<size_t>(w) * h;

    std::vector<int64_t> area(nseg, 0);
    std::vector<std::array<double, 3>> sum(nseg, {0, 0, 0});
    std::vector<std::set<int32_t>> adj(nseg);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            int32_t s = labels.labels.at(r, c);
            ++area[s];
            for (int k = 0; k < 3; ++k) sum[s][k] += planes.planes[k].at(r, c);
            if (c + 1 < w) {
                int32_t t = labels.labels.at(r, c + 1);
                if (t != s) { adj[s].insert(t); adj[t].insert(s); }
            }
            if (r + 1 < h) {
                int32_t t = labels.labels.at(r + 1, c);
                if (t != s) { adj[s].insert(t); adj[t].insert(s); }
            }
        }

    // alias[s] = current representative after merges
    std::vector<int32_t> alias(nseg);
    for (int32_t s = 0; s < nseg; ++s) alias[s] = s;
    auto find = [&](int32_t s) {
        while (alias[s] != s) { alias[s] = alias[alias[s]]; s = alias[s]; }
        return s;
    };

    std::set<std::pair<int64_t, int32_t>> queue;  // (area, label), live segments
    for (int32_t s = 0; s < nseg; ++s) queue.insert({area[s], s});

    while (queue.size() > 1) {
        auto it = queue.begin();
        if (it->first >= cfg.th1) break;
        int32_t s = it->second;

        // nearest-mean adjacent segment
        double best_d = 0;
        int32_t best = -1;
        std::array<double, 3> ms{sum[s][0] / area[s], sum[s][1] / area[s],
                                 sum[s][2] / area[s]};
        for (int32_t raw : adj[s]) {
            int32_t t = find(raw);
            if (t == s) continue;
            double d = 0;
            for (int k = 0; k < 3; ++k) {
                double diff = sum[t][k] / area[t] - ms[k];
                d += diff * diff;
            }
            if (best < 0 || d < best_d || (d == best_d && t < best)) {
                best_d = d;
                best = t;
            }
        }
        if (best < 0) break;  // isolated segment, nothing to merge into

        // merge s into best
        queue.erase({area[s], s});
        queue.erase({area[best], best});
        alias[s] = best;
        area[best] += area[s];
        for (int k = 0; k < 3; ++k) sum[best][k] += sum[s][k];
        for (int32_t raw : adj[s]) {
            int32_t t = find(raw);
            if (t != best) { adj[best].insert(t); adj[t].insert(best); }
        }
        adj[s].clear();
        queue.insert({area[best], best});
    }

    LabelMap out(w, h);
    for (size_t p = 0; p < n; ++p) out.labels[p] = find(labels.labels[p]);
    relabel_contiguous(out);
    return out;
}

}  // namespace segvol
