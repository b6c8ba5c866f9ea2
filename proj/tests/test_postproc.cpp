#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "segvol/postproc.hpp"
#include "test_support.hpp"

using namespace segvol;

namespace {

ImagePlanes planes_from_l(const PlaneF& l) {
    ImagePlanes p(l.width(), l.height());
    p.planes[0] = l;
    return p;
}

}  // namespace

TEST_CASE("merge_small_segments is a no-op when everything is large enough") {
    LabelMap halves(10, 10);
    for (int r = 0; r < 10; ++r)
        for (int c = 0; c < 10; ++c) halves.labels.at(r, c) = c < 5 ? 0 : 1;
    halves.segment_count = 2;
    ImagePlanes p(10, 10);
    PostprocConfig cfg;
    cfg.th1 = 50;
    CHECK(merge_small_segments(halves, p, cfg) == halves);
}

TEST_CASE("small segment joins its color-nearest neighbor") {
    // columns: [0..3]=A (L=10), [4]=small B (L=12), [5..9]=C (L=90)
    LabelMap m(10, 5);
    PlaneF l(10, 5);
    for (int r = 0; r < 5; ++r)
        for (int c = 0; c < 10; ++c) {
            int32_t s = c < 4 ? 0 : (c == 4 ? 1 : 2);
            m.labels.at(r, c) = s;
            l.at(r, c) = c < 4 ? 10.0 : (c == 4 ? 12.0 : 90.0);
        }
    m.segment_count = 3;
    PostprocConfig cfg;
    cfg.th1 = 10;  // B (5 px) is the only small one
    LabelMap out = merge_small_segments(m, planes_from_l(l), cfg);
    CHECK(out.segment_count == 2);
    // B absorbed into A (nearest in color), not C
    CHECK(out.labels.at(0, 4) == out.labels.at(0, 0));
    CHECK(out.labels.at(0, 4) != out.labels.at(0, 9));
}

TEST_CASE("threshold above image area collapses to one segment") {
    std::mt19937 rng(7);
    LabelMap m = testsup::random_voronoi_labels(8, 8, 6, rng);
    ImagePlanes p = testsup::random_planes(8, 8, rng);
    PostprocConfig cfg;
    cfg.th1 = 65;  // image area 64
    LabelMap out = merge_small_segments(m, p, cfg);
    CHECK(out.segment_count == 1);
}

TEST_CASE("postproc only coarsens and respects the size floor") {
    std::mt19937 rng(13);
    for (int trial = 0; trial < 5; ++trial) {
        LabelMap m = testsup::random_voronoi_labels(12, 12, 8, rng);
        ImagePlanes p = testsup::random_planes(12, 12, rng);
        PostprocConfig cfg;
        cfg.th1 = 12;
        LabelMap out = merge_small_segments(m, p, cfg);
        CHECK(out.segment_count <= m.segment_count);

        // every output segment is a union of input segments
        std::vector<int32_t> image_of(m.segment_count, -1);
        for (size_t i = 0; i < m.labels.size(); ++i) {
            int32_t in = m.labels[i], on = out.labels[i];
            if (image_of[in] < 0) image_of[in] = on;
            CHECK(image_of[in] == on);
        }

        // size floor
        std::vector<int64_t> area(out.segment_count, 0);
        for (int32_t v : out.labels.data()) ++area[v];
        for (int64_t a : area) CHECK(a >= cfg.th1);
    }
}

TEST_CASE("postproc is deterministic") {
    std::mt19937 rng(17);
    LabelMap m = testsup::random_voronoi_labels(10, 10, 7, rng);
    ImagePlanes p = testsup::random_planes(10, 10, rng);
    PostprocConfig cfg;
    cfg.th1 = 15;
    CHECK(merge_small_segments(m, p, cfg) == merge_small_segments(m, p, cfg));
}

TEST_CASE("postproc rejects invalid thresholds") {
    PostprocConfig cfg;
    cfg.th1 = 0;
    CHECK_THROWS(merge_small_segments(LabelMap(4, 4), ImagePlanes(4, 4), cfg));
}
