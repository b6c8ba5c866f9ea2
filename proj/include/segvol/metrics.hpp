#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "segvol/edges.hpp"
#include "segvol/raster.hpp"

namespace segvol {

using GroundTruthSet = std::vector<LabelMap>;

struct MetricReport {
    double pri = 0, bde = 0, voi = 0, cov = 0;
    std::vector<double> pri_per, bde_per, voi_per, cov_per;
};

namespace detail {

inline void check_aligned(const LabelMap& s, const GroundTruthSet& gts) {
    if (gts.empty()) throw std::invalid_argument("metrics: empty ground-truth set");
    for (const auto& g : gts)
        if (g.width() != s.width() || g.height() != s.height())
            throw std::invalid_argument("metrics: dimension mismatch");
}

// n_ij contingency counts between two label maps.
inline std::vector<std::vector<int64_t>> contingency(const LabelMap& a, const LabelMap& b) {
    std::vector<std::vector<int64_t>> t(a.segment_count,
                                        std::vector<int64_t>(b.segment_count, 0));
    for (size_t p = 0; p < a.labels.size(); ++p) ++t[a.labels[p]][b.labels[p]];
    return t;
}

inline double choose2(int64_t n) { return 0.5 * static_cast<double>(n) * (n - 1); }

// 1-D squared-distance transform lower envelope (Felzenszwalb-Huttenlocher).
inline void edt_1d(const std::vector<double>& f, std::vector<double>& d,
                   std::vector<int>& v, std::vector<double>& z) {
    const int n = static_cast<int>(f.size());
    d.resize(n);
    v.resize(n);
    z.resize(n + 1);
    int k = 0;
    v[0] = 0;
    z[0] = -std::numeric_limits<double>::infinity();
    z[1] = std::numeric_limits<double>::infinity();
    for (int q = 1; q < n; ++q) {
        double s;
        for (;;) {
            s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
            if (s > z[k]) break;
            --k;
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = std::numeric_limits<double>::infinity();
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        d[q] = (q - v[k]) * (q - v[k]) + f[v[k]];
    }
}

// Exact squared Euclidean distance transform of a binary map (distance to
// the nearest set pixel). All-infinite when the map is empty.
inline PlaneF squared_edt(const EdgeMap& bits) {
    const int w = bits.width(), h = bits.height();
    // large finite sentinel: true infinity breaks the envelope intersections
    const double inf = 1e20;
    PlaneF d(w, h);
    for (size_t p = 0; p < d.size(); ++p) d[p] = bits[p] ? 0.0 : inf;

    std::vector<double> f, out, z;
    std::vector<int> v;
    // columns
    f.resize(h);
    for (int c = 0; c < w; ++c) {
        for (int r = 0; r < h; ++r) f[r] = d.at(r, c);
        bool any = false;
        for (double x : f)
            if (x < inf) { any = true; break; }
        if (!any) continue;
        edt_1d(f, out, v, z);
        for (int r = 0; r < h; ++r) d.at(r, c) = out[r];
    }
    // rows
    f.resize(w);
    for (int r = 0; r < h; ++r) {
        bool any = false;
        for (int c = 0; c < w; ++c) {
            f[c] = d.at(r, c);
            if (f[c] < inf) any = true;
        }
        if (!any) continue;
        edt_1d(f, out, v, z);
        for (int c = 0; c < w; ++c) d.at(r, c) = out[c];
    }
    return d;
}

}  // namespace detail

// Rand index between two partitions via the contingency table, averaged over
// annotations. Pair agreements are counted exactly.
inline double pri(const LabelMap& s, const GroundTruthSet& gts) {
    detail::check_aligned(s, gts);
    const double total_pairs = detail::choose2(static_cast<int64_t>(s.labels.size()));
    double acc = 0;
    for (const auto& g : gts) {
        auto t = detail::contingency(s, g);
        double sum_ij = 0, sum_i = 0, sum_j = 0;
        std::vector<int64_t> col(g.segment_count, 0);
        for (int32_t i = 0; i < s.segment_count; ++i) {
            int64_t row = 0;
            for (int32_t j = 0; j < g.segment_count; ++j) {
                row += t[i][j];
                col[j] += t[i][j];
                sum_ij += detail::choose2(t[i][j]);
            }
            sum_i += detail::choose2(row);
        }
        for (int64_t c : col) sum_j += detail::choose2(c);
        // agreements = pairs together in both + pairs apart in both
        double ri = (total_pairs + 2 * sum_ij - sum_i - sum_j) / total_pairs;
        acc += ri;
    }
    return acc / gts.size();
}

// Boundary displacement error: symmetric mean nearest-boundary distance via
// the exact Euclidean distance transform. An empty boundary set against a
// non-empty one scores the image diagonal; two empty sets score 0.
inline double bde(const LabelMap& s, const GroundTruthSet& gts) {
    detail::check_aligned(s, gts);
    const double diag = std::hypot(static_cast<double>(s.width()),
                                   static_cast<double>(s.height()));
    EdgeMap bs = segment_boundaries(s);
    int64_t ns = 0;
    for (uint8_t b : bs.data()) ns += b;
    PlaneF dts;
    if (ns > 0) dts = detail::squared_edt(bs);

    double acc = 0;
    for (const auto& g : gts) {
        EdgeMap bg = segment_boundaries(g);
        int64_t ng = 0;
        for (uint8_t b : bg.data()) ng += b;
        double score;
        if (ns == 0 && ng == 0) {
            score = 0;
        } else if (ns == 0 || ng == 0) {
            // the non-empty side pays the diagonal penalty; the directed
            // distance from the empty side contributes nothing
            score = 0.5 * diag;
        } else {
            PlaneF dtg = detail::squared_edt(bg);
            double s2g = 0, g2s = 0;
            for (size_t p = 0; p < bs.size(); ++p) {
                if (bs[p]) s2g += std::sqrt(dtg[p]);
                if (bg[p]) g2s += std::sqrt(dts[p]);
            }
            score = 0.5 * (s2g / ns + g2s / ng);
        }
        acc += score;
    }
    return acc / gts.size();
}

// Variation of information, natural log by default.
inline double voi(const LabelMap& s, const GroundTruthSet& gts, bool log2 = false) {
    detail::check_aligned(s, gts);
    const double n = static_cast<double>(s.labels.size());
    const double base = log2 ? std::log(2.0) : 1.0;
    double acc = 0;
    for (const auto& g : gts) {
        auto t = detail::contingency(s, g);
        std::vector<int64_t> row(s.segment_count, 0), col(g.segment_count, 0);
        for (int32_t i = 0; i < s.segment_count; ++i)
            for (int32_t j = 0; j < g.segment_count; ++j) {
                row[i] += t[i][j];
                col[j] += t[i][j];
            }
        double hs = 0, hg = 0, mi = 0;
        for (int64_t v : row)
            if (v) hs -= v / n * std::log(v / n);
        for (int64_t v : col)
            if (v) hg -= v / n * std::log(v / n);
        for (int32_t i = 0; i < s.segment_count; ++i)
            for (int32_t j = 0; j < g.segment_count; ++j) {
                int64_t v = t[i][j];
                if (v)
                    mi += v / n * std::log(v / n * n * n / (static_cast<double>(row[i]) * col[j]));
            }
        acc += (hs + hg - 2 * mi) / base;
    }
    return acc / gts.size();
}

// Segmentation covering of the ground truth by the machine segmentation:
// area-weighted best IoU per ground-truth region.
inline double covering(const LabelMap& s, const GroundTruthSet& gts) {
    detail::check_aligned(s, gts);
    const double n = static_cast<double>(s.labels.size());
    double acc = 0;
    for (const auto& g : gts) {
        auto t = detail::contingency(g, s);  // rows = ground-truth regions
        std::vector<int64_t> garea(g.segment_count, 0), sarea(s.segment_count, 0);
        for (int32_t i = 0; i < g.segment_count; ++i)
            for (int32_t j = 0; j < s.segment_count; ++j) {
                garea[i] += t[i][j];
                sarea[j] += t[i][j];
            }
        double cov = 0;
        for (int32_t i = 0; i < g.segment_count; ++i) {
            double best = 0;
            for (int32_t j = 0; j < s.segment_count; ++j) {
                int64_t inter = t[i][j];
                if (!inter) continue;
                double iou = static_cast<double>(inter) /
                             static_cast<double>(garea[i] + sarea[j] - inter);
                best = std::max(best, iou);
            }
            cov += garea[i] / n * best;
        }
        acc += cov;
    }
    return acc / gts.size();
}

inline MetricReport evaluate(const LabelMap& s, const GroundTruthSet& gts) {
    MetricReport rep;
    for (const auto& g : gts) {
        GroundTruthSet one{g};
        rep.pri_per.push_back(pri(s, one));
        rep.bde_per.push_back(bde(s, one));
        rep.voi_per.push_back(voi(s, one));
        rep.cov_per.push_back(covering(s, one));
    }
    auto mean = [](const std::vector<double>& v) {
        double a = 0;
        for (double x : v) a += x;
        return a / v.size();
    };
    rep.pri = mean(rep.pri_per);
    rep.bde = mean(rep.bde_per);
    rep.voi = mean(rep.voi_per);
    rep.cov = mean(rep.cov_per);
    return rep;
}

// BSDS .seg file: free-form header lines until "data", then one run of four
// integers "s r c1 c2" per line (label s covers row r, columns c1..c2
// inclusive, zero-based).
inline LabelMap parse_seg_file(const std::string& content) {
    std::istringstream in(content);
    std::string line;
    int width = -1, height = -1, segments = -1;
    bool in_data = false;
    LabelMap out;
    std::vector<uint8_t> covered;
    while (std::getline(in, line)) {
        if (!in_data) {
            std::istringstream ls(line);
            std::string key;
            ls >> key;
            if (key == "width") ls >> width;
            else if (key == "height") ls >> height;
            else if (key == "segments") ls >> segments;
            else if (key == "data") {
                if (width < 1 || height < 1 || segments < 1)
                    throw std::runtime_error("seg parse: missing header fields");
                out = LabelMap(width, height);
                out.labels.data().assign(static_cast<size_t>(width) * height, -1);
                covered.assign(static_cast<size_t>(width) * height, 0);
                in_data = true;
            }
            continue;
        }
        std::istringstream ls(line);
        int64_t s, r, c1, c2;
        if (!(ls >> s >> r >> c1 >> c2)) {
            if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
            throw std::runtime_error("seg parse: malformed data line: " + line);
        }
        if (s < 0 || s >= segments || r < 0 || r >= height || c1 < 0 || c2 < c1 ||
            c2 >= width)
            throw std::runtime_error("seg parse: out-of-range run: " + line);
        for (int64_t c = c1; c <= c2; ++c) {
            size_t p = static_cast<size_t>(r) * width + c;
            if (covered[p]) throw std::runtime_error("seg parse: overlapping runs");
            covered[p] = 1;
            out.labels[p] = static_cast<int32_t>(s);
        }
    }
    if (!in_data) throw std::runtime_error("seg parse: no data section");
    for (uint8_t c : covered)
        if (!c) throw std::runtime_error("seg parse: uncovered pixels");
    relabel_contiguous(out);
    return out;
}

}  // namespace segvol
