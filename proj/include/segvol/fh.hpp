#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "segvol/raster.hpp"

namespace segvol {

namespace detail {

struct GridEdge {
    float weight;
    int32_t a, b;
    int32_t order;  // (row, col, direction) rank of the origin pixel, for ties
};

class UnionFind {
public:
    explicit UnionFind(int32_t n) : parent_(n), rank_(n, 0), size_(n, 1) {
        for (int32_t i = 0; i < n; ++i) parent_[i] = i;
    }
    int32_t find(int32_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }
    int32_t unite(int32_t a, int32_t b) {
        a = find(a); b = find(b);
        if (a == b) return a;
        if (rank_[a] < rank_[b]) std::swap(a, b);
        parent_[b] = a;
        size_[a] += size_[b];
        if (rank_[a] == rank_[b]) ++rank_[a];
        return a;
    }
    int32_t size(int32_t root) const { return size_[root]; }

private:
    std::vector<int32_t> parent_;
    std::vector<int32_t> rank_;
    std::vector<int32_t> size_;
};

inline float lab_edge_weight(const ImagePlanes& p, size_t i, size_t j) {
    double d0 = p.planes[0][i] - p.planes[0][j];
    double d1 = p.planes[1][i] - p.planes[1][j];
    double d2 = p.planes[2][i] - p.planes[2][j];
    return static_cast<float>(std::sqrt(d0 * d0 + d1 * d1 + d2 * d2));
}

inline std::vector<GridEdge> build_grid_edges(const ImagePlanes& p, bool eight_connected) {
    const int w = p.width, h = p.height;
    std::vector<GridEdge> edges;
    edges.reserve(static_cast<size_t>(w) * h * (eight_connected ? 4 : 2));
    int32_t order = 0;
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            const int32_t i = r * w + c;
            // direction order: E, S, SE, SW
            if (c + 1 < w)
                edges.push_back({lab_edge_weight(p, i, i + 1), i, i + 1, order});
            ++order;
            if (r + 1 < h)
                edges.push_back({lab_edge_weight(p, i, i + w), i, i + w, order});
            ++order;
            if (eight_connected) {
                if (r + 1 < h && c + 1 < w)
                    edges.push_back({lab_edge_weight(p, i, i + w + 1), i, i + w + 1, order});
                ++order;
                if (r + 1 < h && c > 0)
                    edges.push_back({lab_edge_weight(p, i, i + w - 1), i, i + w - 1, order});
                ++order;
            }
        }
    }
    return edges;
}

}  // namespace detail

// Graph-based segmentation on the grid: Kruskal-order merging where two
// components join iff the connecting weight is within both components'
// internal difference plus kappa/|C|. Equal-weight edges keep scan order
// (row, col, direction) so the result is deterministic.
inline LabelMap fh_segment(const ImagePlanes& planes, double kappa,
                           bool eight_connected = true) {
    if (!(kappa > 0)) throw std::invalid_argument("fh_segment: kappa must be > 0");
    const int w = planes.width, h = planes.height;
    const int32_t n = w * h;

    auto edges = detail::build_grid_edges(planes, eight_connected);
    std::stable_sort(edges.begin(), edges.end(),
                     [](const detail::GridEdge& x, const detail::GridEdge& y) {
                         if (x.weight != y.weight) return x.weight < y.weight;
                         return x.order < y.order;
                     });

    detail::UnionFind uf(n);
    std::vector<float> internal(n, 0.0f);  // max MST edge weight per component root

    for (const auto& e : edges) {
        int32_t ra = uf.find(e.a), rb = uf.find(e.b);
        if (ra == rb) continue;
        float ta = internal[ra] + static_cast<float>(kappa / uf.size(ra));
        float tb = internal[rb] + static_cast<float>(kappa / uf.size(rb));
        if (e.weight <= std::min(ta, tb)) {
            int32_t root = uf.unite(ra, rb);
            internal[root] = std::max({internal[ra], internal[rb], e.weight});
        }
    }

    LabelMap out(w, h);
    for (int32_t i = 0; i < n; ++i) out.labels[i] = uf.find(i);
    relabel_contiguous(out);
    return out;
}

}  // namespace segvol
