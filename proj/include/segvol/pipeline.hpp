#pragma once

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "segvol/color.hpp"
#include "segvol/cost.hpp"
#include "segvol/edges.hpp"
#include "segvol/fgs.hpp"
#include "segvol/io.hpp"
#include "segvol/lbp.hpp"
#include "segvol/metrics.hpp"
#include "segvol/postproc.hpp"
#include "segvol/raster.hpp"
#include "segvol/volume.hpp"

namespace segvol {

enum class EdgeSource { gradient, file };

struct PipelineConfig {
    SmootherConfig smoother;
    Kernel kernel = Kernel::FH;
    int k = 20;
    double param_min = 100.0;
    double param_max = 6000.0;
    double ms_spatial_bandwidth = 8.0;
    bool fh_eight_connected = true;

    EdgeSource edge_source = EdgeSource::gradient;
    std::string edge_map_path;
    double edge_high_percentile = 0.90;
    double edge_map_threshold = 0.5;

    PenaltyMode penalty = PenaltyMode::direct;
    int entropy_bins = 64;

    OptimizerConfig optimizer;
    PostprocConfig postproc;

    int workers = 1;
    std::string cache_dir;  // optional volume cache
    bool dump_costs = false;
    std::string dump_dir;

    void validate() const {
        smoother.validate();
        optimizer.validate();
        postproc.validate();
        if (k < 3) throw std::invalid_argument("pipeline: K must be >= 3");
        if (!(param_min > 0) || !(param_min < param_max))
            throw std::invalid_argument("pipeline: need 0 < param_min < param_max");
        if (edge_source == EdgeSource::file && edge_map_path.empty())
            throw std::invalid_argument("pipeline: edge source 'file' needs an edge map path");
        if (workers < 1) throw std::invalid_argument("pipeline: workers must be >= 1");
    }
};

struct StageTiming {
    std::string stage;
    double seconds = 0;
};

struct RunArtifacts {
    LabelMap final_labels;
    IndexMap alpha;
    SegmentationVolume volume;
    CostWeights weights;
    std::vector<MetricReport> hypothesis_reports;  // present iff ground truth given
    std::optional<MetricReport> fused_report;
    std::vector<StageTiming> timing;
    double total_seconds = 0;
};

namespace detail {

class StageClock {
public:
    explicit StageClock(std::vector<StageTiming>& sink) : sink_(sink) {}
    template <typename F>
    auto run(const std::string& name, F&& f) {
        auto t0 = std::chrono::steady_clock::now();
        if constexpr (std::is_void_v<decltype(f())>) {
            f();
            sink_.push_back({name, std::chrono::duration<double>(
                                       std::chrono::steady_clock::now() - t0).count()});
        } else {
            auto r = f();
            sink_.push_back({name, std::chrono::duration<double>(
                                       std::chrono::steady_clock::now() - t0).count()});
            return r;
        }
    }

private:
    std::vector<StageTiming>& sink_;
};

inline void dump_cost_volume(const CostVolume& v, const std::filesystem::path& dir,
                             const std::string& tag) {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest;
    manifest["tag"] = tag;
    manifest["count"] = v.size();
    for (int i = 0; i < v.size(); ++i) {
        const auto& s = v.slices[i];
        Gray16 g(s.width(), s.height());
        for (size_t p = 0; p < s.size(); ++p)
            g[p] = static_cast<uint16_t>(std::clamp(s[p], 0.0, 1.0) * 65535.0 + 0.5);
        std::string name = tag + "_" + std::to_string(i) + ".png";
        write_png_gray16((dir / name).string(), g);
        manifest["slices"].push_back(name);
    }
    std::ofstream out(dir / (tag + "_manifest.json"));
    out << manifest.dump(2) << "\n";
}

}  // namespace detail

// Full pipeline: Lab conversion, per-channel smoothing, hypothesis volume,
// reference edges, the two cost volumes, penalty normalization, entropy
// weights, median-filtered data term, LBP, resolution, small-segment merge.
inline RunArtifacts run_pipeline(const RgbImage& img, const PipelineConfig& cfg,
                                 const GroundTruthSet* gts = nullptr) {
    cfg.validate();
    RunArtifacts art;
    detail::StageClock clock(art.timing);
    auto t0 = std::chrono::steady_clock::now();

    ImagePlanes planes = clock.run("rgb_to_lab", [&] { return rgb_to_lab(img); });
    planes = clock.run("fgs_smooth", [&] { return fgs_smooth(planes, cfg.smoother); });

    auto schedule = param_schedule(cfg.kernel, cfg.param_min, cfg.param_max, cfg.k);
    VolumeOptions vopt;
    vopt.ms_spatial_bandwidth = cfg.ms_spatial_bandwidth;
    vopt.fh_eight_connected = cfg.fh_eight_connected;
    vopt.workers = cfg.workers;
    art.volume = clock.run("generate_volume", [&] {
        if (!cfg.cache_dir.empty()) {
            SegmentationVolume cached;
            if (load_volume(cfg.cache_dir, image_hash(img), cached) &&
                cached.size() == cfg.k)
                return cached;
        }
        auto vol = generate_volume(planes, schedule, vopt);
        if (!cfg.cache_dir.empty()) save_volume(cfg.cache_dir, vol, image_hash(img));
        return vol;
    });

    EdgeMap e_r = clock.run("reference_edges", [&] {
        if (cfg.edge_source == EdgeSource::file)
            return load_edge_map(cfg.edge_map_path, cfg.edge_map_threshold, img.width,
                                 img.height);
        EdgeDetectConfig ecfg;
        ecfg.high_percentile = cfg.edge_high_percentile;
        return detect_edges(planes, ecfg);
    });

    auto means = clock.run("segment_means", [&] { return segment_means(art.volume, planes); });

    CostVolume raw_e, raw_c;
    raw_e.criterion = CostCriterion::edge;
    raw_c.criterion = CostCriterion::stability;
    clock.run("cost_volumes", [&] {
        for (int i = 0; i < art.volume.size(); ++i) {
            raw_e.slices.push_back(
                edge_cost(art.volume.maps[i], segment_boundaries(art.volume.maps[i]), e_r));
            raw_c.slices.push_back(stability_cost(means, i));
        }
    });

    CostVolume psi_e = penalize_normalize(raw_e, cfg.penalty);
    CostVolume psi_c = penalize_normalize(raw_c, cfg.penalty);
    art.weights = entropy_weights(psi_c, psi_e, cfg.entropy_bins);
    CostVolume d = clock.run("data_term", [&] { return data_term(psi_c, psi_e, art.weights); });

    if (cfg.dump_costs) {
        std::filesystem::path dir = cfg.dump_dir.empty() ? "cost_dump" : cfg.dump_dir;
        detail::dump_cost_volume(psi_c, dir, "psi_c");
        detail::dump_cost_volume(psi_e, dir, "psi_e");
        detail::dump_cost_volume(d, dir, "data");
    }

    OptimizerConfig ocfg = cfg.optimizer;
    ocfg.workers = cfg.workers;
    art.alpha = clock.run("lbp_minimize", [&] { return lbp_minimize(d, ocfg); });
    LabelMap resolved =
        clock.run("resolve", [&] { return resolve_segmentation(art.alpha, art.volume); });
    art.final_labels = clock.run("postproc", [&] {
        return merge_small_segments(resolved, planes, cfg.postproc);
    });

    if (gts && !gts->empty()) {
        clock.run("metrics", [&] {
            for (const auto& m : art.volume.maps)
                art.hypothesis_reports.push_back(evaluate(m, *gts));
            art.fused_report = evaluate(art.final_labels, *gts);
        });
    }

    art.total_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return art;
}

// Mean-color rendering: every pixel painted with its segment's mean Lab,
// converted back to sRGB.
inline RgbImage render_mean_color(const LabelMap& labels, const ImagePlanes& planes) {
    std::vector<std::array<double, 3>> sum(labels.segment_count, {0, 0, 0});
    std::vector<int64_t> cnt(labels.segment_count, 0);
    const size_t n = labels.labels.size();
    for (size_t p = 0; p < n; ++p) {
        int32_t s = labels.labels[p];
        for (int k = 0; k < 3; ++k) sum[s][k] += planes.planes[k][p];
        ++cnt[s];
    }
    RgbImage out(labels.width(), labels.height());
    for (size_t p = 0; p < n; ++p) {
        int32_t s = labels.labels[p];
        lab_to_rgb_px(sum[s][0] / cnt[s], sum[s][1] / cnt[s], sum[s][2] / cnt[s],
                      &out.data[p * 3]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Dataset evaluation
// ---------------------------------------------------------------------------

struct DatasetRow {
    std::string image;
    std::string method;      // "fused" or "hyp_<i>"
    std::string annotation;  // index or "mean"
    double pri = 0, bde = 0, voi = 0, cov = 0;
};

struct DatasetReport {
    std::vector<DatasetRow> rows;
    std::vector<std::string> skipped;  // images without ground truth
    DatasetRow aggregate;              // mean of per-image fused rows
};

inline void write_csv(const DatasetReport& rep, std::ostream& out) {
    out << "image,method,annotation,pri,bde,voi,cov\n";
    out.precision(12);
    for (const auto& r : rep.rows)
        out << r.image << ',' << r.method << ',' << r.annotation << ',' << r.pri << ','
            << r.bde << ',' << r.voi << ',' << r.cov << '\n';
    if (!rep.rows.empty())
        out << "ALL,fused,mean," << rep.aggregate.pri << ',' << rep.aggregate.bde << ','
            << rep.aggregate.voi << ',' << rep.aggregate.cov << '\n';
    for (const auto& s : rep.skipped) out << s << ",skipped,,,,,\n";
}

// Loads every ground-truth annotation for an image stem: `<stem>-*.seg` or
// `<stem>*.png` label images inside gt_dir.
inline GroundTruthSet load_ground_truth(const std::filesystem::path& gt_dir,
                                        const std::string& stem) {
    GroundTruthSet gts;
    std::vector<std::filesystem::path> files;
    if (std::filesystem::exists(gt_dir))
        for (const auto& e : std::filesystem::directory_iterator(gt_dir)) {
            const auto name = e.path().filename().string();
            if (name.rfind(stem, 0) != 0) continue;
            if (name.size() > stem.size() && name[stem.size()] != '-' &&
                name[stem.size()] != '.' && name[stem.size()] != '_')
                continue;
            if (e.path().extension() == ".seg" || e.path().extension() == ".png")
                files.push_back(e.path());
        }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        if (f.extension() == ".seg") {
            std::ifstream in(f);
            std::string content((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
            gts.push_back(parse_seg_file(content));
        } else {
            gts.push_back(gray16_to_labels(read_png_gray16(f.string())));
        }
    }
    return gts;
}

// Runs the pipeline over a directory of images, scoring each against its
// ground-truth annotations. Images without ground truth are skipped with a
// note in the report. Row order follows sorted image stems.
inline DatasetReport evaluate_dataset(const std::filesystem::path& image_dir,
                                      const std::filesystem::path& gt_dir,
                                      const PipelineConfig& cfg,
                                      std::ostream* log = nullptr) {
    DatasetReport rep;
    std::vector<std::filesystem::path> images;
    if (std::filesystem::exists(image_dir))
        for (const auto& e : std::filesystem::directory_iterator(image_dir)) {
            auto ext = e.path().extension().string();
            if (ext == ".png" || ext == ".ppm" || ext == ".jpg" || ext == ".jpeg")
                images.push_back(e.path());
        }
    std::sort(images.begin(), images.end());

    double sum_pri = 0, sum_bde = 0, sum_voi = 0, sum_cov = 0;
    int scored = 0;
    for (const auto& path : images) {
        const std::string stem = path.stem().string();
        GroundTruthSet gts = load_ground_truth(gt_dir, stem);
        if (gts.empty()) {
            if (log) *log << "warning: no ground truth for " << stem << ", skipping\n";
            rep.skipped.push_back(stem);
            continue;
        }
        RgbImage img = read_image(path.string());
        RunArtifacts art = run_pipeline(img, cfg, &gts);

        const auto& fused = *art.fused_report;
        for (size_t a = 0; a < gts.size(); ++a)
            rep.rows.push_back({stem, "fused", std::to_string(a), fused.pri_per[a],
                                fused.bde_per[a], fused.voi_per[a], fused.cov_per[a]});
        rep.rows.push_back({stem, "fused", "mean", fused.pri, fused.bde, fused.voi,
                            fused.cov});
        for (int i = 0; i < art.volume.size(); ++i) {
            const auto& hr = art.hypothesis_reports[i];
            rep.rows.push_back({stem, "hyp_" + std::to_string(i), "mean", hr.pri, hr.bde,
                                hr.voi, hr.cov});
        }
        sum_pri += fused.pri;
        sum_bde += fused.bde;
        sum_voi += fused.voi;
        sum_cov += fused.cov;
        ++scored;
        if (log)
            *log << stem << ": fused pri=" << fused.pri << " bde=" << fused.bde
                 << " voi=" << fused.voi << " cov=" << fused.cov << "\n";
    }
    if (scored) {
        rep.aggregate = {"ALL", "fused", "mean", sum_pri / scored, sum_bde / scored,
                         sum_voi / scored, sum_cov / scored};
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Flat key-value config files (one `key value` or `key=value` per line,
// '#' comments). CLI flags override file entries.
// ---------------------------------------------------------------------------

inline std::map<std::string, std::string> read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        for (auto& c : line)
            if (c == '=') c = ' ';
        std::istringstream ls(line);
        std::string key, value;
        if (ls >> key >> value) kv[key] = value;
    }
    return kv;
}

inline void apply_config_entry(PipelineConfig& cfg, const std::string& key,
                               const std::string& value) {
    auto d = [&] { return std::stod(value); };
    auto i = [&] { return std::stoi(value); };
    if (key == "kernel") cfg.kernel = value == "ms" ? Kernel::MS : Kernel::FH;
    else if (key == "k") cfg.k = i();
    else if (key == "param-min") cfg.param_min = d();
    else if (key == "param-max") cfg.param_max = d();
    else if (key == "ms-spatial-bandwidth") cfg.ms_spatial_bandwidth = d();
    else if (key == "fh-connectivity") cfg.fh_eight_connected = i() == 8;
    else if (key == "edge-detector") cfg.edge_source = value == "file" ? EdgeSource::file : EdgeSource::gradient;
    else if (key == "edge-map") cfg.edge_map_path = value;
    else if (key == "edge-high-percentile") cfg.edge_high_percentile = d();
    else if (key == "edge-map-threshold") cfg.edge_map_threshold = d();
    else if (key == "penalty") cfg.penalty = value == "paper-literal" ? PenaltyMode::paper_literal : PenaltyMode::direct;
    else if (key == "entropy-bins") cfg.entropy_bins = i();
    else if (key == "lambda") cfg.optimizer.lambda = d();
    else if (key == "lbp-iters") cfg.optimizer.max_iterations = i();
    else if (key == "lbp-tol") cfg.optimizer.convergence_tol = d();
    else if (key == "min-segment-size") cfg.postproc.th1 = i();
    else if (key == "smoother-sigma") cfg.smoother.sigma = d();
    else if (key == "smoother-lambda") cfg.smoother.lambda = d();
    else if (key == "smoother-iterations") cfg.smoother.iterations = i();
    else if (key == "smoother-attenuation") cfg.smoother.attenuation = d();
    else if (key == "smoother-range") cfg.smoother.range = value == "byte" ? SmootherRange::byte : SmootherRange::unit;
    else if (key == "workers") cfg.workers = i();
    else if (key == "cache-dir") cfg.cache_dir = value;
    else throw std::runtime_error("unknown config key: " + key);
}

inline void write_timing_log(const RunArtifacts& art, std::ostream& out) {
    for (const auto& t : art.timing) {
        nlohmann::json j;
        j["stage"] = t.stage;
        j["seconds"] = t.seconds;
        out << j.dump() << "\n";
    }
    nlohmann::json j;
    j["stage"] = "total";
    j["seconds"] = art.total_seconds;
    out << j.dump() << "\n";
}

}  // namespace segvol
