#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "segvol/edges.hpp"
#include "segvol/raster.hpp"
#include "segvol/volume.hpp"

namespace segvol {

enum class CostCriterion { edge, stability, combined };

struct CostVolume {
    std::vector<PlaneF> slices;
    CostCriterion criterion = CostCriterion::combined;

    int size() const { return static_cast<int>(slices.size()); }
};

enum class PenaltyMode {
    direct,         // penalize high raw cost directly (min-max normalized)
    paper_literal,  // subtract from the volume max, then normalize
};

struct CostWeights {
    double omega_c = 0.5;
    double omega_e = 0.5;
    double h_c = 0.0;
    double h_e = 0.0;
};

// Per-segment mean color table with a per-pixel accessor.
struct SegmentMeanTable {
    // means[i][segment][plane]
    std::vector<std::vector<std::array<double, 3>>> means;
    const SegmentationVolume* volume = nullptr;

    double at(int hyp, int r, int c, int plane) const {
        int32_t s = volume->maps[hyp].labels.at(r, c);
        return means[hyp][s][plane];
    }
};

inline SegmentMeanTable segment_means(const SegmentationVolume& vol,
                                      const ImagePlanes& planes) {
    SegmentMeanTable table;
    table.volume = &vol;
    table.means.resize(vol.size());
    const size_t n = static_cast<size_t>(planes.width) * planes.height;
    for (int i = 0; i < vol.size(); ++i) {
        const auto& m = vol.maps[i];
        std::vector<std::array<double, 3>> sums(m.segment_count, {0, 0, 0});
        std::vector<int64_t> counts(m.segment_count, 0);
        for (size_t p = 0; p < n; ++p) {
            int32_t s = m.labels[p];
            sums[s][0] += planes.planes[0][p];
            sums[s][1] += planes.planes[1][p];
            sums[s][2] += planes.planes[2][p];
            ++counts[s];
        }
        for (int32_t s = 0; s < m.segment_count; ++s)
            for (int k = 0; k < 3; ++k) sums[s][k] /= static_cast<double>(counts[s]);
        table.means[i] = std::move(sums);
    }
    return table;
}

// Edge-agreement cost: per segment, sum of |E_S - E_R| over the segment
// divided by the segment's reference-edge count (clamped to 1 so segments
// with no reference edges still pay for spurious boundaries). The segment
// value is broadcast to its pixels.
inline PlaneF edge_cost(const LabelMap& labels, const EdgeMap& e_s, const EdgeMap& e_r) {
    const int w = labels.width(), h = labels.height();
    if (!e_s.same_shape(w, h) || !e_r.same_shape(w, h))
        throw std::invalid_argument("edge_cost: dimension mismatch");
    std::vector<int64_t> diff(labels.segment_count, 0);
    std::vector<int64_t> refs(labels.segment_count, 0);
    const size_t n = static_cast<size_t>(w) * h;
    for (size_t p = 0; p < n; ++p) {
        int32_t s = labels.labels[p];
        diff[s] += std::abs(static_cast<int>(e_s[p]) - static_cast<int>(e_r[p]));
        refs[s] += e_r[p];
    }
    PlaneF out(w, h);
    for (size_t p = 0; p < n; ++p) {
        int32_t s = labels.labels[p];
        out[p] = static_cast<double>(diff[s]) /
                 static_cast<double>(std::max<int64_t>(1, refs[s]));
    }
    return out;
}

// Cross-hypothesis stability: per pixel, sum over the three planes of the
// absolute second difference of the segment mean along the hypothesis axis.
// Slices at the ends of the volume replicate their single neighbor.
inline PlaneF stability_cost(const SegmentMeanTable& table, int i) {
    const auto& vol = *table.volume;
    const int k = vol.size();
    if (i < 0 || i >= k) throw std::invalid_argument("stability_cost: index out of range");
    const int prev = std::max(0, i - 1);
    const int next = std::min(k - 1, i + 1);
    const int w = vol.maps[i].width(), h = vol.maps[i].height();
    PlaneF out(w, h);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            double v = 0;
            for (int pl = 0; pl < 3; ++pl)
                v += std::abs(2 * table.at(i, r, c, pl) - table.at(prev, r, c, pl) -
                              table.at(next, r, c, pl));
            out.at(r, c) = v;
        }
    return out;
}

// Penalty transform + [0,1] normalization over the whole volume. A constant
// volume maps to all zeros.
inline CostVolume penalize_normalize(const CostVolume& raw, PenaltyMode mode) {
    double lo = raw.slices.at(0)[0], hi = lo;
    for (const auto& s : raw.slices)
        for (double v : s.data()) {
            if (!std::isfinite(v))
                throw std::invalid_argument("penalize_normalize: non-finite cost");
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    CostVolume out;
    out.criterion = raw.criterion;
    out.slices = raw.slices;
    const double span = hi - lo;
    if (span <= 0) {
        for (auto& s : out.slices)
            for (auto& v : s.data()) v = 0.0;
        return out;
    }
    if (mode == PenaltyMode::direct) {
        for (auto& s : out.slices)
            for (auto& v : s.data()) v = (v - lo) / span;
    } else {
        // Psi = max - cost, then min-max over the transformed volume
        for (auto& s : out.slices)
            for (auto& v : s.data()) v = (hi - v) / span;
    }
    return out;
}

// Histogram-entropy confidence weights. Values are quantized into
// equal-width bins over [0,1]; entropy is normalized by log of the occupied
// bin count. Weights are cross-assigned: omega_e from H_c and omega_c from
// H_e, both summing to 1.
inline CostWeights entropy_weights(const CostVolume& psi_c, const CostVolume& psi_e,
                                   int bins = 64) {
    if (bins < 2) throw std::invalid_argument("entropy_weights: bins must be >= 2");
    auto entropy = [bins](const CostVolume& v) {
        std::vector<int64_t> hist(bins, 0);
        int64_t total = 0;
        for (const auto& s : v.slices)
            for (double x : s.data()) {
                int b = std::min(bins - 1, static_cast<int>(x * bins));
                ++hist[b];
                ++total;
            }
        int occupied = 0;
        for (int64_t c : hist)
            if (c > 0) ++occupied;
        if (occupied <= 1) return 0.0;
        double h = 0;
        for (int64_t c : hist) {
            if (c == 0) continue;
            double p = static_cast<double>(c) / total;
            h -= p * std::log(p);
        }
        return h / std::log(static_cast<double>(occupied));
    };
    CostWeights w;
    w.h_c = entropy(psi_c);
    w.h_e = entropy(psi_e);
    double denom = (1.0 - w.h_e) + (1.0 - w.h_c);
    if (denom <= 0) {
        w.omega_c = w.omega_e = 0.5;  // both criteria maximally uncertain
    } else {
        w.omega_e = (1.0 - w.h_c) / denom;
        w.omega_c = (1.0 - w.h_e) / denom;
    }
    return w;
}

namespace detail {

// 5x5 median with replicate padding.
inline PlaneF median5(const PlaneF& in) {
    const int w = in.width(), h = in.height();
    PlaneF out(w, h);
    std::array<double, 25> win;
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            int k = 0;
            for (int dr = -2; dr <= 2; ++dr)
                for (int dc = -2; dc <= 2; ++dc) {
                    int rr = std::clamp(r + dr, 0, h - 1);
                    int cc = std::clamp(c + dc, 0, w - 1);
                    win[k++] = in.at(rr, cc);
                }
            std::nth_element(win.begin(), win.begin() + 12, win.end());
            out.at(r, c) = win[12];
        }
    return out;
}

}  // namespace detail

// Combined data term: 5x5 median filter of omega_c*Psi_c + omega_e*Psi_e,
// slice by slice.
inline CostVolume data_term(const CostVolume& psi_c, const CostVolume& psi_e,
                            const CostWeights& w) {
    if (psi_c.size() != psi_e.size())
        throw std::invalid_argument("data_term: slice count mismatch");
    CostVolume out;
    out.criterion = CostCriterion::combined;
    out.slices.reserve(psi_c.size());
    for (int i = 0; i < psi_c.size(); ++i) {
        const auto& a = psi_c.slices[i];
        const auto& b = psi_e.slices[i];
        PlaneF s(a.width(), a.height());
        for (size_t p = 0; p < s.size(); ++p)
            s[p] = w.omega_c * a[p] + w.omega_e * b[p];
        out.slices.push_back(detail::median5(s));
    }
    return out;
}

}  // namespace segvol
