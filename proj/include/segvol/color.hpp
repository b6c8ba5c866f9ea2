#pragma once

#include <algorithm>
#include <cmath>

#include "segvol/raster.hpp"

namespace segvol {

namespace detail {

// sRGB gamma decode, input in [0,1].
inline double srgb_to_linear(double v) {
    return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
}

inline double linear_to_srgb(double v) {
    return v <= 0.0031308 ? v * 12.92 : 1.055 * std::pow(v, 1.0 / 2.4) - 0.055;
}

// D65 reference white
constexpr double kXn = 0.95047;
constexpr double kYn = 1.00000;
constexpr double kZn = 1.08883;

inline double lab_f(double t) {
    constexpr double kE = 216.0 / 24389.0;      // (6/29)^3
    constexpr double kK = 24389.0 / 27.0;       // (29/3)^3
    return t > kE ? std::cbrt(t) : (kK * t + 16.0) / 116.0;
}

inline double lab_finv(double t) {
    constexpr double kD = 6.0 / 29.0;
    return t > kD ? t * t * t : 3.0 * kD * kD * (t - 4.0 / 29.0);
}

}  // namespace detail

struct Lab {
    double L, a, b;
};

inline Lab rgb_to_lab_px(uint8_t r8, uint8_t g8, uint8_t b8) {
    double r = detail::srgb_to_linear(r8 / 255.0);
    double g = detail::srgb_to_linear(g8 / 255.0);
    double b = detail::srgb_to_linear(b8 / 255.0);
    double x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
    double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
    double z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
    double fx = detail::lab_f(x / detail::kXn);
    double fy = detail::lab_f(y / detail::kYn);
    double fz = detail::lab_f(z / detail::kZn);
    return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

inline void lab_to_rgb_px(double L, double a, double b, uint8_t* out) {
    double fy = (L + 16.0) / 116.0;
    double fx = fy + a / 500.0;
    double fz = fy - b / 200.0;
    double x = detail::kXn * detail::lab_finv(fx);
    double y = detail::kYn * detail::lab_finv(fy);
    double z = detail::kZn * detail::lab_finv(fz);
    double rl =  3.2404542 * x - 1.5371385 * y - 0.4985314 * z;
    double gl = -0.9692660 * x + 1.8760108 * y + 0.0415560 * z;
    double bl =  0.0556434 * x - 0.2040259 * y + 1.0572252 * z;
    auto enc = [](double v) {
        v = detail::linear_to_srgb(std::clamp(v, 0.0, 1.0));
        return static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
    };
    out[0] = enc(rl);
    out[1] = enc(gl);
    out[2] = enc(bl);
}

// CIE Lab (D65, sRGB gamma) conversion of a whole image.
inline ImagePlanes rgb_to_lab(const RgbImage& img) {
    ImagePlanes out(img.width, img.height);
    const size_t n = static_cast<size_t>(img.width) * img.height;
    for (size_t i = 0; i < n; ++i) {
        const uint8_t* p = &img.data[i * 3];
        Lab lab = rgb_to_lab_px(p[0], p[1], p[2]);
        out.planes[0][i] = lab.L;
        out.planes[1][i] = lab.a;
        out.planes[2][i] = lab.b;
    }
    return out;
}

}  // namespace segvol
