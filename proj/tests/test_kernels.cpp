#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>

#include "segvol/fh.hpp"
#include "segvol/meanshift.hpp"
#include "segvol/volume.hpp"
#include "test_support.hpp"

using namespace segvol;

namespace {

ImagePlanes constant_planes(int w, int h, double L = 50, double a = 0, double b = 0) {
    ImagePlanes p(w, h);
    for (size_t i = 0; i < p.planes[0].size(); ++i) {
        p.planes[0][i] = L;
        p.planes[1][i] = a;
        p.planes[2][i] = b;
    }
    return p;
}

ImagePlanes two_half_planes(int w, int h, double left_L, double right_L) {
    ImagePlanes p = constant_planes(w, h);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) p.planes[0].at(r, c) = c < w / 2 ? left_L : right_L;
    return p;
}

// Naive FH replay: re-sorts edges with the same tie-break and replays merges
// without any path compression or union-by-rank shortcuts.
LabelMap naive_fh(const ImagePlanes& planes, double kappa) {
    const int w = planes.width, h = planes.height;
    const int n = w * h;
    auto edges = segvol::detail::build_grid_edges(planes, true);
    std::sort(edges.begin(), edges.end(), [](const auto& x, const auto& y) {
        if (x.weight != y.weight) return x.weight < y.weight;
        return x.order < y.order;
    });

    std::vector<int32_t> comp(n);
    for (int i = 0; i < n; ++i) comp[i] = i;
    std::vector<float> internal(n, 0.0f);
    std::vector<int32_t> size(n, 1);

    for (const auto& e : edges) {
        int32_t ca = comp[e.a], cb = comp[e.b];
        if (ca == cb) continue;
        float ta = internal[ca] + static_cast<float>(kappa / size[ca]);
        float tb = internal[cb] + static_cast<float>(kappa / size[cb]);
        if (e.weight <= std::min(ta, tb)) {
            // relabel the whole component, no union-find
            for (int i = 0; i < n; ++i)
                if (comp[i] == cb) comp[i] = ca;
            size[ca] += size[cb];
            internal[ca] = std::max({internal[ca], internal[cb], e.weight});
        }
    }
    LabelMap out(w, h);
    for (int i = 0; i < n; ++i) out.labels[i] = comp[i];
    relabel_contiguous(out);
    return out;
}

}  // namespace

TEST_CASE("fh_segment on uniform and two-half images") {
    LabelMap uni = fh_segment(constant_planes(8, 8), 100.0);
    CHECK(uni.segment_count == 1);

    // left Lab=(20,0,0), right Lab=(80,0,0): crossing weight 60 > 0 + 1/32
    LabelMap halves = fh_segment(two_half_planes(8, 8, 20, 80), 1.0);
    CHECK(halves.segment_count == 2);
    CHECK(halves.labels.at(0, 0) != halves.labels.at(0, 7));
    CHECK(halves.labels.at(0, 0) == halves.labels.at(7, 3));
}

TEST_CASE("fh_segment matches the naive replay oracle") {
    std::mt19937 rng(101);
    for (int trial = 0; trial < 5; ++trial) {
        ImagePlanes p = testsup::random_planes(16, 16, rng);
        for (double kappa : {10.0, 100.0, 1000.0}) {
            LabelMap fast = fh_segment(p, kappa);
            LabelMap slow = naive_fh(p, kappa);
            CHECK(fast == slow);
        }
    }
}

TEST_CASE("fh_segment segment count shrinks with kappa on two-region images") {
    ImagePlanes p = two_half_planes(10, 10, 30, 70);
    int prev = -1;
    for (double kappa : {0.5, 5.0, 50.0, 5000.0}) {
        int m = fh_segment(p, kappa).segment_count;
        if (prev >= 0) CHECK(m <= prev);
        prev = m;
    }
    CHECK(fh_segment(p, 5000.0).segment_count == 1);
}

namespace {

// Per-pixel mean-shift oracle: direct reimplementation of the filtering and
// grouping rules without any shortcuts.
LabelMap naive_ms(const ImagePlanes& planes, double h_s, double h_r) {
    const int w = planes.width, h = planes.height;
    struct Mode { double r, c, v[3]; };
    std::vector<Mode> modes(static_cast<size_t>(w) * h);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            Mode m{double(r), double(c),
                   {planes.planes[0].at(r, c), planes.planes[1].at(r, c),
                    planes.planes[2].at(r, c)}};
            for (int it = 0; it < 50; ++it) {
                double sr = 0, sc = 0, sv[3] = {0, 0, 0};
                int cnt = 0;
                for (int rr = 0; rr < h; ++rr)
                    for (int cc = 0; cc < w; ++cc) {
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
                if (!cnt) break;
                Mode nx{sr / cnt, sc / cnt, {sv[0] / cnt, sv[1] / cnt, sv[2] / cnt}};
                double shift = std::sqrt((nx.r - m.r) * (nx.r - m.r) +
                                         (nx.c - m.c) * (nx.c - m.c) +
                                         (nx.v[0] - m.v[0]) * (nx.v[0] - m.v[0]) +
                                         (nx.v[1] - m.v[1]) * (nx.v[1] - m.v[1]) +
                                         (nx.v[2] - m.v[2]) * (nx.v[2] - m.v[2]));
                m = nx;
                if (shift < 0.01) break;
            }
            modes[static_cast<size_t>(r) * w + c] = m;
        }
    // grouping by repeated sweeps until no label changes
    std::vector<int32_t> lab(modes.size());
    for (size_t i = 0; i < lab.size(); ++i) lab[i] = static_cast<int32_t>(i);
    auto close = [&](size_t i, size_t j) {
        double dr = modes[i].r - modes[j].r, dc = modes[i].c - modes[j].c;
        if (dr * dr + dc * dc >= h_s * h_s) return false;
        double d0 = modes[i].v[0] - modes[j].v[0];
        double d1 = modes[i].v[1] - modes[j].v[1];
        double d2 = modes[i].v[2] - modes[j].v[2];
        return d0 * d0 + d1 * d1 + d2 * d2 < h_r * h_r;
    };
    bool changed = true;
    while (changed) {
        changed = false;
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c) {
                size_t i = static_cast<size_t>(r) * w + c;
                if (c + 1 < w) {
                    size_t j = i + 1;
                    if (close(i, j) && lab[i] != lab[j]) {
                        int32_t m = std::min(lab[i], lab[j]);
                        lab[i] = lab[j] = m;
                        changed = true;
                    }
                }
                if (r + 1 < h) {
                    size_t j = i + w;
                    if (close(i, j) && lab[i] != lab[j]) {
                        int32_t m = std::min(lab[i], lab[j]);
                        lab[i] = lab[j] = m;
                        changed = true;
                    }
                }
            }
    }
    LabelMap out(w, h);
    for (size_t i = 0; i < lab.size(); ++i) out.labels[i] = lab[i];
    relabel_contiguous(out);
    return out;
}

// label-permutation-independent partition equality
bool same_partition(const LabelMap& a, const LabelMap& b) {
    if (a.segment_count != b.segment_count) return false;
    std::vector<int32_t> fwd(a.segment_count, -1), bwd(b.segment_count, -1);
    for (size_t i = 0; i < a.labels.size(); ++i) {
        int32_t x = a.labels[i], y = b.labels[i];
        if (fwd[x] < 0) fwd[x] = y;
        if (bwd[y] < 0) bwd[y] = x;
        if (fwd[x] != y || bwd[y] != x) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("ms_segment basics") {
    CHECK(ms_segment(constant_planes(6, 6), 3, 5).segment_count == 1);
    LabelMap halves = ms_segment(two_half_planes(8, 8, 10, 90), 3, 8);
    CHECK(halves.segment_count == 2);
}

TEST_CASE("ms_segment matches the per-pixel oracle") {
    std::mt19937 rng(202);
    testsup::SyntheticScene sc = testsup::synthetic_scene(12, 12, 3, 55);
    ImagePlanes p = rgb_to_lab(sc.image);
    LabelMap fast = ms_segment(p, 4, 12);
    LabelMap slow = naive_ms(p, 4, 12);
    CHECK(same_partition(fast, slow));
    (void)rng;
}

TEST_CASE("param_schedule geometric properties") {
    auto s = param_schedule(Kernel::FH, 1, 100, 3);
    REQUIRE(s.size() == 3);
    CHECK(s[0].value == Catch::Approx(1.0));
    CHECK(s[1].value == Catch::Approx(10.0));
    CHECK(s[2].value == Catch::Approx(100.0));

    auto t = param_schedule(Kernel::FH, 5, 5 * 512, 10);
    for (int i = 1; i < 10; ++i)
        CHECK(t[i].value / t[i - 1].value == Catch::Approx(2.0).epsilon(1e-12));

    auto u = param_schedule(Kernel::FH, 100, 6000, 20);
    REQUIRE(u.size() == 20);
    CHECK(u.front().value == Catch::Approx(100.0));
    CHECK(u.back().value == Catch::Approx(6000.0));
    for (int i = 1; i < 20; ++i) CHECK(u[i].value > u[i - 1].value);

    CHECK_THROWS(param_schedule(Kernel::FH, 1, 100, 2));
    CHECK_THROWS(param_schedule(Kernel::FH, 100, 100, 5));
}

TEST_CASE("generate_volume basics") {
    auto sched = param_schedule(Kernel::FH, 10, 1000, 3);
    ImagePlanes uni = constant_planes(6, 6);
    SegmentationVolume vol = generate_volume(uni, sched);
    REQUIRE(vol.size() == 3);
    for (const auto& m : vol.maps) CHECK(m.segment_count == 1);

    // matches individually computed kernels, per index
    std::mt19937 rng(303);
    ImagePlanes p = testsup::random_planes(10, 10, rng);
    SegmentationVolume v2 = generate_volume(p, sched);
    for (int i = 0; i < 3; ++i) CHECK(v2.maps[i] == fh_segment(p, sched[i].value));
}

TEST_CASE("generate_volume is deterministic across worker counts") {
    std::mt19937 rng(404);
    ImagePlanes p = testsup::random_planes(14, 10, rng);
    auto sched = param_schedule(Kernel::FH, 10, 2000, 5);
    VolumeOptions one, four;
    four.workers = 4;
    SegmentationVolume a = generate_volume(p, sched, one);
    SegmentationVolume b = generate_volume(p, sched, four);
    REQUIRE(a.size() == b.size());
    for (int i = 0; i < a.size(); ++i) CHECK(a.maps[i] == b.maps[i]);
}

TEST_CASE("label maps are valid partitions") {
    std::mt19937 rng(505);
    ImagePlanes p = testsup::random_planes(12, 8, rng);
    for (double kappa : {20.0, 400.0}) {
        LabelMap m = fh_segment(p, kappa);
        std::vector<int> used(m.segment_count, 0);
        for (int32_t v : m.labels.data()) {
            REQUIRE(v >= 0);
            REQUIRE(v < m.segment_count);
            used[v] = 1;
        }
        for (int u : used) CHECK(u == 1);
    }
}

TEST_CASE("volume cache round trip") {
    std::mt19937 rng(606);
    ImagePlanes p = testsup::random_planes(10, 10, rng);
    auto sched = param_schedule(Kernel::FH, 10, 1000, 3);
    SegmentationVolume vol = generate_volume(p, sched);

    auto dir = std::filesystem::temp_directory_path() / "segvol_cache_test";
    std::filesystem::remove_all(dir);
    save_volume(dir, vol, 12345u);

    SegmentationVolume back;
    REQUIRE(load_volume(dir, 12345u, back));
    REQUIRE(back.size() == vol.size());
    for (int i = 0; i < vol.size(); ++i) {
        CHECK(back.maps[i] == vol.maps[i]);
        CHECK(back.params[i].value == Catch::Approx(vol.params[i].value));
    }
    // wrong hash rejects the cache
    CHECK_FALSE(load_volume(dir, 999u, back));
    std::filesystem::remove_all(dir);
}
