#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "segvol/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

void add_pipeline_flags(CLI::App* app, segvol::PipelineConfig& cfg, std::string& kernel,
                        std::string& edge_detector, std::string& penalty,
                        std::string& smoother_range, std::string& config_path) {
    app->add_option("--config", config_path, "flat key-value config file");
    app->add_option("--kernel", kernel, "segmentation kernel: fh|ms");
    app->add_option("--k", cfg.k, "number of hypotheses");
    app->add_option("--param-min", cfg.param_min, "sweep start (kappa or h_r)");
    app->add_option("--param-max", cfg.param_max, "sweep end");
    app->add_option("--ms-spatial-bandwidth", cfg.ms_spatial_bandwidth);
    app->add_option("--edge-detector", edge_detector, "gradient|file");
    app->add_option("--edge-map", cfg.edge_map_path, "external edge map path");
    app->add_option("--edge-high-percentile", cfg.edge_high_percentile);
    app->add_option("--edge-map-threshold", cfg.edge_map_threshold);
    app->add_option("--penalty", penalty, "direct|paper-literal");
    app->add_option("--entropy-bins", cfg.entropy_bins);
    app->add_option("--lambda", cfg.optimizer.lambda, "LBP pairwise weight");
    app->add_option("--lbp-iters", cfg.optimizer.max_iterations);
    app->add_option("--lbp-tol", cfg.optimizer.convergence_tol);
    app->add_option("--min-segment-size", cfg.postproc.th1);
    app->add_option("--smoother-sigma", cfg.smoother.sigma);
    app->add_option("--smoother-lambda", cfg.smoother.lambda);
    app->add_option("--smoother-iterations", cfg.smoother.iterations);
    app->add_option("--smoother-attenuation", cfg.smoother.attenuation);
    app->add_option("--smoother-range", smoother_range, "unit|byte");
    app->add_option("--workers", cfg.workers);
    app->add_option("--cache-dir", cfg.cache_dir, "segmentation volume cache");
}

void apply_enum_strings(segvol::PipelineConfig& cfg, const std::string& kernel,
                        const std::string& edge_detector, const std::string& penalty,
                        const std::string& smoother_range) {
    if (!kernel.empty())
        cfg.kernel = kernel == "ms" ? segvol::Kernel::MS : segvol::Kernel::FH;
    if (!edge_detector.empty())
        cfg.edge_source = edge_detector == "file" ? segvol::EdgeSource::file
                                                  : segvol::EdgeSource::gradient;
    if (!penalty.empty())
        cfg.penalty = penalty == "paper-literal" ? segvol::PenaltyMode::paper_literal
                                                 : segvol::PenaltyMode::direct;
    if (!smoother_range.empty())
        cfg.smoother.range = smoother_range == "byte" ? segvol::SmootherRange::byte
                                                      : segvol::SmootherRange::unit;
}

}  // namespace

int main(int argc, char** argv) {
    segvol::PipelineConfig cfg;

    // Config file entries become defaults; explicit CLI flags override them,
    // so the file is applied before CLI11 parses.
    for (int i = 1; i + 1 < argc; ++i) {
        if (std::string(argv[i]) == "--config") {
            try {
                for (const auto& [k, v] : segvol::read_config_file(argv[i + 1]))
                    segvol::apply_config_entry(cfg, k, v);
            } catch (const std::exception& e) {
                std::cerr << "error: " << e.what() << "\n";
                return 1;
            }
        }
    }

    CLI::App app{"segmentation-volume fusion pipeline"};
    app.require_subcommand(1);

    std::string kernel, edge_detector, penalty, smoother_range, config_path;

    auto* run = app.add_subcommand("run", "segment one image");
    std::string run_input, run_out;
    bool dump_costs = false;
    run->add_option("--input", run_input, "input image (PNG/PPM/JPEG)")->required();
    run->add_option("--out", run_out, "output directory")->required();
    run->add_flag("--dump-costs", dump_costs, "dump cost volumes as 16-bit PNGs");
    add_pipeline_flags(run, cfg, kernel, edge_detector, penalty, smoother_range, config_path);

    auto* eval = app.add_subcommand("eval", "evaluate a dataset");
    std::string eval_images, eval_gt, eval_out;
    eval->add_option("--images", eval_images, "image directory")->required();
    eval->add_option("--gt", eval_gt, "ground-truth directory")->required();
    eval->add_option("--out", eval_out, "CSV report path")->required();
    add_pipeline_flags(eval, cfg, kernel, edge_detector, penalty, smoother_range, config_path);

    auto* render = app.add_subcommand("render", "mean-color rendering of a label map");
    std::string render_labels, render_image, render_out;
    render->add_option("--labels", render_labels, "16-bit label PNG")->required();
    render->add_option("--image", render_image, "source image")->required();
    render->add_option("--out", render_out, "output PNG")->required();

    CLI11_PARSE(app, argc, argv);
    apply_enum_strings(cfg, kernel, edge_detector, penalty, smoother_range);

    try {
        if (run->parsed()) {
            cfg.dump_costs = dump_costs;
            fs::create_directories(run_out);
            cfg.dump_dir = (fs::path(run_out) / "costs").string();

            segvol::RgbImage img = segvol::read_image(run_input);
            segvol::RunArtifacts art = segvol::run_pipeline(img, cfg);

            segvol::write_png_gray16((fs::path(run_out) / "labels.png").string(),
                                     segvol::labels_to_gray16(art.final_labels));
            segvol::ImagePlanes planes = segvol::rgb_to_lab(img);
            segvol::write_png_rgb((fs::path(run_out) / "mean_color.png").string(),
                                  segvol::render_mean_color(art.final_labels, planes));
            std::ofstream tlog(fs::path(run_out) / "timing.jsonl");
            segvol::write_timing_log(art, tlog);
            std::cout << "segments: " << art.final_labels.segment_count
                      << "  omega_c=" << art.weights.omega_c
                      << " omega_e=" << art.weights.omega_e << "\n";
        } else if (eval->parsed()) {
            auto rep = segvol::evaluate_dataset(eval_images, eval_gt, cfg, &std::cerr);
            std::ofstream out(eval_out);
            segvol::write_csv(rep, out);
            std::cout << "wrote " << rep.rows.size() << " rows to " << eval_out << "\n";
        } else if (render->parsed()) {
            segvol::LabelMap labels =
                segvol::gray16_to_labels(segvol::read_png_gray16(render_labels));
            segvol::RgbImage img = segvol::read_image(render_image);
            if (img.width != labels.width() || img.height != labels.height())
                throw std::runtime_error("render: label/image dimension mismatch");
            segvol::ImagePlanes planes = segvol::rgb_to_lab(img);
            segvol::write_png_rgb(render_out,
                                  segvol::render_mean_color(labels, planes));
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
