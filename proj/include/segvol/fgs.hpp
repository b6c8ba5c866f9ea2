#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "segvol/raster.hpp"

namespace segvol {

enum class SmootherRange {
    unit,  // guide min-max normalized to [0,1] before weighting
    byte,  // guide divided by 255
};

struct SmootherConfig {
    double sigma = 0.01;
    double lambda = 900.0;
    int iterations = 4;
    double attenuation = 4.0;
    SmootherRange range = SmootherRange::unit;

    void validate() const {
        if (!(sigma > 0)) throw std::invalid_argument("smoother: sigma must be > 0");
        if (!(lambda >= 0)) throw std::invalid_argument("smoother: lambda must be >= 0");
        if (iterations < 1) throw std::invalid_argument("smoother: iterations must be >= 1");
        if (!(attenuation >= 1)) throw std::invalid_argument("smoother: attenuation must be >= 1");
    }
};

namespace detail {

// Solves (I + lambda*A) u = f on one line, A the weighted graph Laplacian of
// the path with weights w[i] between samples i and i+1. Thomas algorithm.
inline void wls_line_solve(const double* f, const double* w, double lambda,
                           int n, double* u, std::vector<double>& cp,
                           std::vector<double>& dp) {
    if (n == 1) { u[0] = f[0]; return; }
    cp.resize(n);
    dp.resize(n);
    // a_i = -lambda*w[i-1], c_i = -lambda*w[i], b_i = 1 - a_i - c_i
    double b0 = 1.0 + lambda * w[0];
    cp[0] = -lambda * w[0] / b0;
    dp[0] = f[0] / b0;
    for (int i = 1; i < n; ++i) {
        double a = -lambda * w[i - 1];
        double c = i < n - 1 ? -lambda * w[i] : 0.0;
        double b = 1.0 - a - c;
        double m = b - a * cp[i - 1];
        cp[i] = c / m;
        dp[i] = (f[i] - a * dp[i - 1]) / m;
    }
    u[n - 1] = dp[n - 1];
    for (int i = n - 2; i >= 0; --i) u[i] = dp[i] - cp[i] * u[i + 1];
}

}  // namespace detail

// Separable fast global smoother: `iterations` alternating horizontal and
// vertical 1-D WLS solves, with the lambda schedule
//   lambda_t = lambda * (3/2) * attenuation^(T-t) / (attenuation^T - 1)
// so the accumulated smoothing matches the configured lambda. The guide for
// the similarity weights is the plane itself.
inline PlaneF fgs_smooth(const PlaneF& plane, const SmootherConfig& cfg) {
    cfg.validate();
    for (double v : plane.data())
        if (!std::isfinite(v)) throw std::invalid_argument("fgs_smooth: non-finite input");
    if (cfg.lambda == 0.0) return plane;

    const int w = plane.width(), h = plane.height();

    // normalized guide
    PlaneF guide = plane;
    if (cfg.range == SmootherRange::unit) {
        double lo = plane[0], hi = plane[0];
        for (double v : plane.data()) { lo = std::min(lo, v); hi = std::max(hi, v); }
        double span = hi - lo;
        if (span > 0)
            for (auto& v : guide.data()) v = (v - lo) / span;
        else
            for (auto& v : guide.data()) v = 0.0;
    } else {
        for (auto& v : guide.data()) v /= 255.0;
    }

    // edge weights exp(-|g_p - g_q|/sigma), fixed across iterations
    PlaneF wh(w, h, 0.0);  // wh(r,c) between (r,c) and (r,c+1)
    PlaneF wv(w, h, 0.0);  // wv(r,c) between (r,c) and (r+1,c)
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            if (c + 1 < w)
                wh.at(r, c) = std::exp(-std::abs(guide.at(r, c) - guide.at(r, c + 1)) / cfg.sigma);
            if (r + 1 < h)
                wv.at(r, c) = std::exp(-std::abs(guide.at(r, c) - guide.at(r + 1, c)) / cfg.sigma);
        }

    const int T = cfg.iterations;
    double denom = std::pow(cfg.attenuation, T) - 1.0;

    PlaneF u = plane;
    std::vector<double> line(std::max(w, h)), wl(std::max(w, h)), out(std::max(w, h));
    std::vector<double> cp, dp;

    for (int t = 1; t <= T; ++t) {
        double lt = denom > 0
                        ? cfg.lambda * 1.5 * std::pow(cfg.attenuation, T - t) / denom
                        : cfg.lambda * 1.5 / T;  // attenuation == 1 limit
        // horizontal
        for (int r = 0; r < h; ++r) {
            for (int c = 0; c < w; ++c) { line[c] = u.at(r, c); wl[c] = wh.at(r, c); }
            detail::wls_line_solve(line.data(), wl.data(), lt, w, out.data(), cp, dp);
            for (int c = 0; c < w; ++c) u.at(r, c) = out[c];
        }
        // vertical
        for (int c = 0; c < w; ++c) {
            for (int r = 0; r < h; ++r) { line[r] = u.at(r, c); wl[r] = wv.at(r, c); }
            detail::wls_line_solve(line.data(), wl.data(), lt, h, out.data(), cp, dp);
            for (int r = 0; r < h; ++r) u.at(r, c) = out[r];
        }
    }
    return u;
}

inline ImagePlanes fgs_smooth(const ImagePlanes& planes, const SmootherConfig& cfg) {
    ImagePlanes out(planes.width, planes.height);
    for (int k = 0; k < 3; ++k) out.planes[k] = fgs_smooth(planes.planes[k], cfg);
    return out;
}

}  // namespace segvol
