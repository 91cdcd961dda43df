#pragma once

#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dtrf/dataset.hpp"
#include "dtrf/image.hpp"
#include "dtrf/volume_render.hpp"

namespace dtrf {

inline double psnr(const Image& pred, const Image& gt) {
  if (pred.width != gt.width || pred.height != gt.height)
    throw std::invalid_argument("psnr: image dims differ");
  double mse = 0;
  for (size_t i = 0; i < pred.rgb.size(); ++i) {
    double d = double(pred.rgb[i]) - double(gt.rgb[i]);
    mse += d * d;
  }
  mse /= double(pred.rgb.size());
  if (mse == 0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

namespace detail {

inline std::vector<double> rec601_luma(const Image& img) {
  std::vector<double> out(size_t(img.width) * img.height);
  for (size_t i = 0; i < out.size(); ++i)
    out[i] = 0.299 * img.rgb[i * 3] + 0.587 * img.rgb[i * 3 + 1] + 0.114 * img.rgb[i * 3 + 2];
  return out;
}

// Separable 11-tap Gaussian (sigma 1.5); output restricted to positions where
// the full window fits.
inline std::vector<double> blur_valid(const std::vector<double>& src, int w, int h,
                                      const double* k) {
  constexpr int R = 5;
  std::vector<double> tmp(size_t(w) * h, 0.0), out(size_t(w) * h, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = R; x < w - R; ++x) {
      double acc = 0;
      for (int i = -R; i <= R; ++i) acc += k[i + R] * src[size_t(y) * w + x + i];
      tmp[size_t(y) * w + x] = acc;
    }
  for (int y = R; y < h - R; ++y)
    for (int x = R; x < w - R; ++x) {
      double acc = 0;
      for (int i = -R; i <= R; ++i) acc += k[i + R] * tmp[size_t(y + i) * w + x];
      out[size_t(y) * w + x] = acc;
    }
  return out;
}

}  // namespace detail

inline double ssim(const Image& pred, const Image& gt) {
  if (pred.width != gt.width || pred.height != gt.height)
    throw std::invalid_argument("ssim: image dims differ");
  constexpr int R = 5;
  const int w = pred.width, h = pred.height;
  if (w < 2 * R + 1 || h < 2 * R + 1)
    throw std::invalid_argument("ssim: image smaller than the 11x11 window");

  double k[2 * R + 1], ksum = 0;
  for (int i = -R; i <= R; ++i) {
    k[i + R] = std::exp(-double(i * i) / (2.0 * 1.5 * 1.5));
    ksum += k[i + R];
  }
  for (double& v : k) v /= ksum;

  auto x = detail::rec601_luma(pred), y = detail::rec601_luma(gt);
  std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  auto mx = detail::blur_valid(x, w, h, k);
  auto my = detail::blur_valid(y, w, h, k);
  auto mxx = detail::blur_valid(xx, w, h, k);
  auto myy = detail::blur_valid(yy, w, h, k);
  auto mxy = detail::blur_valid(xy, w, h, k);

  const double C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;
  double acc = 0;
  size_t count = 0;
  for (int py = R; py < h - R; ++py)
    for (int px = R; px < w - R; ++px) {
      size_t i = size_t(py) * w + px;
      double vx = mxx[i] - mx[i] * mx[i];
      double vy = myy[i] - my[i] * my[i];
      double cov = mxy[i] - mx[i] * my[i];
      double num = (2 * mx[i] * my[i] + C1) * (2 * cov + C2);
      double den = (mx[i] * mx[i] + my[i] * my[i] + C1) * (vx + vy + C2);
      acc += num / den;
      ++count;
    }
  return acc / double(count);
}

struct EvalReport {
  std::vector<double> frame_psnr, frame_ssim;
  double mean_psnr = 0, mean_ssim = 0;
  double wall_seconds = 0;
  nlohmann::json config_echo;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["frames"] = nlohmann::json::array();
    for (size_t i = 0; i < frame_psnr.size(); ++i)
      j["frames"].push_back({{"psnr", frame_psnr[i]}, {"ssim", frame_ssim[i]}});
    j["mean_psnr"] = mean_psnr;
    j["mean_ssim"] = mean_ssim;
    j["wall_seconds"] = wall_seconds;
    j["lpips"] = "unavailable";
    if (!config_echo.is_null()) j["config"] = config_echo;
    return j;
  }

  std::string table() const {
    std::ostringstream os;
    os << "frame      PSNR (dB)       SSIM\n";
    char line[80];
    for (size_t i = 0; i < frame_psnr.size(); ++i) {
      std::snprintf(line, sizeof line, "%5zu %11.3f %10.4f\n", i, frame_psnr[i], frame_ssim[i]);
      os << line;
    }
    std::snprintf(line, sizeof line, " mean %11.3f %10.4f   (%.1f s; LPIPS unavailable)\n",
                  mean_psnr, mean_ssim, wall_seconds);
    os << line;
    return os.str();
  }
};

// Renders every test frame at its (pose, time) and scores both metrics.
template <typename T>
EvalReport evaluate(const RadianceModel<T>& model, const std::vector<Frame>& frames,
                    const RenderOpts& opts, const OccupancyMask* mask = nullptr) {
  auto t0 = std::chrono::steady_clock::now();
  EvalReport rep;
  for (const auto& fr : frames) {
    Image pred = render_model(model, fr.camera, T(fr.time), opts, mask);
    rep.frame_psnr.push_back(psnr(pred, fr.image));
    rep.frame_ssim.push_back(ssim(pred, fr.image));
  }
  if (!frames.empty()) {
    for (double v : rep.frame_psnr) rep.mean_psnr += v;
    for (double v : rep.frame_ssim) rep.mean_ssim += v;
    rep.mean_psnr /= double(frames.size());
    rep.mean_ssim /= double(frames.size());
  }
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

}  // namespace dtrf
