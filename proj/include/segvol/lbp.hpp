#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <thread>
#include <vector>

#include "segvol/cost.hpp"
#include "segvol/raster.hpp"
#include "segvol/volume.hpp"

namespace segvol {

struct OptimizerConfig {
    double lambda = 1e-4;
    int max_iterations = 50;
    double convergence_tol = 1e-6;
    int workers = 1;

    void validate() const {
        if (!(lambda >= 0)) throw std::invalid_argument("lbp: lambda must be >= 0");
        if (max_iterations < 1) throw std::invalid_argument("lbp: max_iterations must be >= 1");
        if (!(convergence_tol > 0)) throw std::invalid_argument("lbp: convergence_tol must be > 0");
    }
};

// Per-pixel chosen hypothesis index, 0-based.
using IndexMap = Raster<int32_t>;

namespace detail {

// Message update for the linear pairwise cost lambda*|i-j|: lower envelope
// in two passes instead of the naive O(K^2) min.
//   m[i] = min_j h[j] + lambda*|i-j|
inline void l1_envelope(std::vector<double>& m, double lambda) {
    const int k = static_cast<int>(m.size());
    for (int i = 1; i < k; ++i) m[i] = std::min(m[i], m[i - 1] + lambda);
    for (int i = k - 2; i >= 0; --i) m[i] = std::min(m[i], m[i + 1] + lambda);
}

enum Dir { kLeft = 0, kRight = 1, kUp = 2, kDown = 3 };  // direction the message travels

}  // namespace detail

// Min-sum loopy BP over the 4-connected grid with data term d and pairwise
// lambda*|i-j|. Checkerboard (red-black) message sweeps: pixels of one color
// send in the first half-iteration, the other color in the second, so every
// sender only reads messages written in the previous half-sweep and each
// message slot has exactly one writer. That keeps the updates deterministic
// for any worker count and avoids the two-phase oscillation of fully
// synchronous sweeps. Every message is normalized to minimum 0. Ties in the
// per-pixel argmin go to the smaller index. The labeling with the lowest
// energy across iterations is returned (later iterations win ties, so
// converged runs return the fixed-point labeling).
inline double energy(const CostVolume& d, const IndexMap& alpha, double lambda);

inline IndexMap lbp_minimize(const CostVolume& d, const OptimizerConfig& cfg) {
    cfg.validate();
    const int k = d.size();
    if (k < 1) throw std::invalid_argument("lbp_minimize: empty cost volume");
    const int w = d.slices[0].width(), h = d.slices[0].height();
    for (const auto& s : d.slices)
        for (double v : s.data())
            if (!std::isfinite(v)) throw std::invalid_argument("lbp_minimize: non-finite data term");

    const size_t n = static_cast<size_t>(w) * h;
    // msg[dir][p*k + i] = message arriving at pixel p from direction dir.
    // dir indexes who sent it: kLeft means "from the left neighbor".
    auto buf_size = n * static_cast<size_t>(k);
    std::vector<std::vector<double>> cur(4, std::vector<double>(buf_size, 0.0));

    // flattened data term d[p*k + i]
    std::vector<double> data(buf_size);
    for (int i = 0; i < k; ++i)
        for (size_t p = 0; p < n; ++p) data[p * k + i] = d.slices[i][p];

    auto update_rows = [&](int r0, int r1, int color, double* max_delta) {
        std::vector<double> m(k);
        double local = 0.0;
        for (int r = r0; r < r1; ++r) {
            for (int c = (r + color) % 2; c < w; c += 2) {
                const size_t p = static_cast<size_t>(r) * w + c;
                // outgoing message to each existing neighbor
                const bool has[4] = {c > 0, c + 1 < w, r > 0, r + 1 < h};
                // direction tags from the receiver's point of view:
                // sending right means the receiver sees it as "from left".
                for (int out = 0; out < 4; ++out) {
                    if (!has[out]) continue;
                    size_t q;
                    int arrive;  // slot at the receiver
                    int skip;    // incoming slot at p that came from the receiver
                    switch (out) {
                        case 0: q = p - 1; arrive = detail::kRight; skip = detail::kLeft; break;
                        case 1: q = p + 1; arrive = detail::kLeft;  skip = detail::kRight; break;
                        case 2: q = p - static_cast<size_t>(w); arrive = detail::kDown; skip = detail::kUp; break;
                        default: q = p + static_cast<size_t>(w); arrive = detail::kUp; skip = detail::kDown; break;
                    }
                    for (int i = 0; i < k; ++i) {
                        double v = data[p * k + i];
                        for (int in = 0; in < 4; ++in)
                            if (in != skip) v += cur[in][p * k + i];
                        m[i] = v;
                    }
                    detail::l1_envelope(m, cfg.lambda);
                    double mn = m[0];
                    for (int i = 1; i < k; ++i) mn = std::min(mn, m[i]);
                    double* dst = &cur[arrive][q * k];
                    for (int i = 0; i < k; ++i) {
                        double v = m[i] - mn;
                        local = std::max(local, std::abs(v - dst[i]));
                        dst[i] = v;
                    }
                }
            }
        }
        *max_delta = local;
    };

    IndexMap best_map(w, h, 0);
    double best_e = std::numeric_limits<double>::infinity();
    auto harvest = [&] {
        IndexMap out(w, h, 0);
        for (size_t p = 0; p < n; ++p) {
            int best = 0;
            double bestv = 0;
            for (int i = 0; i < k; ++i) {
                double b = data[p * k + i];
                for (int in = 0; in < 4; ++in) b += cur[in][p * k + i];
                if (i == 0 || b < bestv) {
                    best = i;
                    bestv = b;
                }
            }
            out[p] = best;
        }
        double e = energy(d, out, cfg.lambda);
        if (e <= best_e) {
            best_e = e;
            best_map = std::move(out);
        }
    };

    const int workers = std::max(1, cfg.workers);
    auto half_sweep = [&](int color) {
        double delta = 0.0;
        if (workers == 1 || h < 2 * workers) {
            update_rows(0, h, color, &delta);
        } else {
            std::vector<std::thread> pool;
            std::vector<double> deltas(workers, 0.0);
            int chunk = (h + workers - 1) / workers;
            for (int t = 0; t < workers; ++t) {
                int r0 = t * chunk, r1 = std::min(h, r0 + chunk);
                if (r0 >= r1) break;
                pool.emplace_back(update_rows, r0, r1, color, &deltas[t]);
            }
            for (auto& th : pool) th.join();
            for (double v : deltas) delta = std::max(delta, v);
        }
        return delta;
    };
    for (int it = 0; it < cfg.max_iterations; ++it) {
        double delta = std::max(half_sweep(0), half_sweep(1));
        harvest();
        if (delta < cfg.convergence_tol) break;
    }
    return best_map;
}

// Total labeling cost: data plus lambda-weighted index disagreement over
// unordered 4-neighbor pairs.
inline double energy(const CostVolume& d, const IndexMap& alpha, double lambda) {
    const int w = alpha.width(), h = alpha.height();
    double e = 0;
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            const size_t p = static_cast<size_t>(r) * w + c;
            e += d.slices[alpha[p]][p];
            if (c + 1 < w) e += lambda * std::abs(alpha[p] - alpha.at(r, c + 1));
            if (r + 1 < h) e += lambda * std::abs(alpha[p] - alpha.at(r + 1, c));
        }
    return e;
}

// Turns the chosen-index field into a partition: 4-adjacent pixels share a
// final segment iff they picked the same hypothesis and share a segment
// there. Connected-component labeling of that relation.
inline LabelMap resolve_segmentation(const IndexMap& alpha, const SegmentationVolume& vol) {
    const int w = alpha.width(), h = alpha.height();
    const int32_t n = w * h;
    LabelMap out(w, h);
    auto& lab = out.labels.data();
    lab.assign(static_cast<size_t>(n), -1);
    std::vector<int32_t> stack;
    int32_t next_label = 0;
    auto joined = [&](int32_t i, int32_t j) {
        if (alpha[i] != alpha[j]) return false;
        const auto& m = vol.maps[alpha[i]].labels;
        return m[i] == m[j];
    };
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
                if (joined(i, j)) {
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
