#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace segvol {

// Row-major raster, origin top-left.
template <typename T>
class Raster {
public:
    Raster() = default;
    Raster(int width, int height, T fill = T{})
        : width_(width), height_(height),
          data_(static_cast<size_t>(width) * height, fill) {
        if (width < 1 || height < 1)
            throw std::invalid_argument("Raster: dimensions must be >= 1");
    }

    int width() const { return width_; }
    int height() const { return height_; }
    size_t size() const { return data_.size(); }

    T& at(int r, int c) { return data_[static_cast<size_t>(r) * width_ + c]; }
    const T& at(int r, int c) const { return data_[static_cast<size_t>(r) * width_ + c]; }
    T& operator[](size_t i) { return data_[i]; }
    const T& operator[](size_t i) const { return data_[i]; }

    std::vector<T>& data() { return data_; }
    const std::vector<T>& data() const { return data_; }

    bool same_shape(int w, int h) const { return width_ == w && height_ == h; }

    friend bool operator==(const Raster& a, const Raster& b) {
        return a.width_ == b.width_ && a.height_ == b.height_ && a.data_ == b.data_;
    }

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<T> data_;
};

using PlaneF = Raster<double>;

// 8-bit RGB image, interleaved triplets.
struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> data;  // width*height*3

    RgbImage() = default;
    RgbImage(int w, int h) : width(w), height(h), data(static_cast<size_t>(w) * h * 3, 0) {
        if (w < 1 || h < 1)
            throw std::invalid_argument("RgbImage: dimensions must be >= 1");
    }

    uint8_t* px(int r, int c) { return &data[(static_cast<size_t>(r) * width + c) * 3]; }
    const uint8_t* px(int r, int c) const { return &data[(static_cast<size_t>(r) * width + c) * 3]; }
};

// Three co-registered real-valued planes (L, a, b).
struct ImagePlanes {
    int width = 0;
    int height = 0;
    PlaneF planes[3];

    ImagePlanes() = default;
    ImagePlanes(int w, int h)
        : width(w), height(h), planes{PlaneF(w, h), PlaneF(w, h), PlaneF(w, h)} {}
};

// Per-pixel segment ids, contiguous 0..segment_count-1.
struct LabelMap {
    Raster<int32_t> labels;
    int32_t segment_count = 0;

    LabelMap() = default;
    LabelMap(int w, int h) : labels(w, h, 0), segment_count(1) {}

    int width() const { return labels.width(); }
    int height() const { return labels.height(); }

    friend bool operator==(const LabelMap& a, const LabelMap& b) {
        return a.segment_count == b.segment_count && a.labels == b.labels;
    }
};

// Renumbers labels to contiguous 0..n-1 in first-appearance order and
// recomputes segment_count.
inline void relabel_contiguous(LabelMap& m) {
    std::vector<int32_t> remap;
    std::vector<int32_t> lookup;
    int32_t next = 0;
    auto& d = m.labels.data();
    int32_t maxl = 0;
    for (int32_t v : d) maxl = std::max(maxl, v);
    lookup.assign(static_cast<size_t>(maxl) + 1, -1);
    for (auto& v : d) {
        if (lookup[v] < 0) lookup[v] = next++;
        v = lookup[v];
    }
    m.segment_count = next;
}

// Binary raster for edge maps.
using EdgeMap = Raster<uint8_t>;

}  // namespace segvol
