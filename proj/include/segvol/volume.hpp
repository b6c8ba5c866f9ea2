#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "segvol/fh.hpp"
#include "segvol/io.hpp"
#include "segvol/meanshift.hpp"
#include "segvol/raster.hpp"

namespace segvol {

enum class Kernel { FH, MS };

inline const char* kernel_name(Kernel k) { return k == Kernel::FH ? "fh" : "ms"; }

struct HypothesisParams {
    Kernel kernel = Kernel::FH;
    double value = 0.0;  // kappa for FH, range bandwidth for MS
    int index = 0;       // position in the sweep, 0-based
};

struct SegmentationVolume {
    std::vector<HypothesisParams> params;
    std::vector<LabelMap> maps;

    int size() const { return static_cast<int>(maps.size()); }
};

// Geometric sweep v_i = v_min * (v_max/v_min)^((i-1)/(K-1)), ascending, so
// consecutive hypotheses stay close in parameter space.
inline std::vector<HypothesisParams> param_schedule(Kernel kernel, double v_min,
                                                    double v_max, int k) {
    if (k < 3) throw std::invalid_argument("param_schedule: K must be >= 3");
    if (!(v_min > 0) || !(v_min < v_max))
        throw std::invalid_argument("param_schedule: need 0 < v_min < v_max");
    std::vector<HypothesisParams> out(k);
    const double ratio = v_max / v_min;
    for (int i = 0; i < k; ++i) {
        double v = v_min * std::pow(ratio, static_cast<double>(i) / (k - 1));
        out[i] = {kernel, v, i};
    }
    out.front().value = v_min;
    out.back().value = v_max;
    return out;
}

struct VolumeOptions {
    double ms_spatial_bandwidth = 8.0;
    bool fh_eight_connected = true;
    int workers = 1;
};

// Runs the kernel once per schedule entry. Hypotheses are independent, so
// they are farmed out to `workers` threads; output order follows the
// schedule regardless of scheduling.
inline SegmentationVolume generate_volume(const ImagePlanes& planes,
                                          const std::vector<HypothesisParams>& schedule,
                                          const VolumeOptions& opt = {}) {
    if (schedule.empty())
        throw std::invalid_argument("generate_volume: empty schedule");
    const int k = static_cast<int>(schedule.size());
    SegmentationVolume vol;
    vol.params = schedule;
    vol.maps.resize(k);

    auto compute = [&](int i) {
        const auto& p = schedule[i];
        if (p.kernel == Kernel::FH)
            vol.maps[i] = fh_segment(planes, p.value, opt.fh_eight_connected);
        else
            vol.maps[i] = ms_segment(planes, opt.ms_spatial_bandwidth, p.value);
    };

    int workers = std::max(1, opt.workers);
    if (workers == 1 || k == 1) {
        for (int i = 0; i < k; ++i) compute(i);
    } else {
        std::vector<std::thread> pool;
        std::atomic<int> next{0};
        for (int t = 0; t < std::min(workers, k); ++t)
            pool.emplace_back([&] {
                for (int i = next.fetch_add(1); i < k; i = next.fetch_add(1)) compute(i);
            });
        for (auto& th : pool) th.join();
    }
    return vol;
}

// ---------------------------------------------------------------------------
// Disk cache: one 16-bit label PNG per hypothesis plus a JSON manifest.
// ---------------------------------------------------------------------------

// FNV-1a over the raw image bytes, used to key cache entries to the input.
inline uint64_t image_hash(const RgbImage& img) {
    uint64_t h = 1469598103934665603ull;
    auto mix = [&](uint64_t v) {
        h ^= v;
        h *= 1099511628211ull;
    };
    mix(static_cast<uint64_t>(img.width));
    mix(static_cast<uint64_t>(img.height));
    for (uint8_t b : img.data) mix(b);
    return h;
}

inline void save_volume(const std::filesystem::path& dir, const SegmentationVolume& vol,
                        uint64_t img_hash) {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest;
    manifest["image_hash"] = img_hash;
    manifest["count"] = vol.size();
    for (int i = 0; i < vol.size(); ++i) {
        const auto& p = vol.params[i];
        std::string name = "hyp_" + std::to_string(i) + ".png";
        write_png_gray16((dir / name).string(), labels_to_gray16(vol.maps[i]));
        manifest["hypotheses"].push_back({{"kernel", kernel_name(p.kernel)},
                                          {"value", p.value},
                                          {"index", p.index},
                                          {"file", name}});
    }
    std::ofstream out(dir / "manifest.json");
    out << manifest.dump(2) << "\n";
}

// Returns false when the cache is absent or keyed to a different image.
inline bool load_volume(const std::filesystem::path& dir, uint64_t img_hash,
                        SegmentationVolume& vol) {
    std::ifstream in(dir / "manifest.json");
    if (!in) return false;
    nlohmann::json manifest;
    in >> manifest;
    if (manifest.value("image_hash", uint64_t{0}) != img_hash) return false;
    vol.params.clear();
    vol.maps.clear();
    for (const auto& e : manifest["hypotheses"]) {
        HypothesisParams p;
        p.kernel = e.at("kernel").get<std::string>() == "ms" ? Kernel::MS : Kernel::FH;
        p.value = e.at("value").get<double>();
        p.index = e.at("index").get<int>();
        vol.params.push_back(p);
        vol.maps.push_back(gray16_to_labels(
            read_png_gray16((dir / e.at("file").get<std::string>()).string())));
    }
    return !vol.maps.empty();
}

}  // namespace segvol
