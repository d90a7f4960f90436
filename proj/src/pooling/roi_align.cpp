#include "xferod/error.hpp"
#include "xferod/pooling.hpp"

#include <algorithm>
#include <cmath>

namespace xferod {

double bilinear_sample(std::span<const float> plane, std::size_t height, std::size_t width,
                       double y, double x) {
  const auto h = static_cast<double>(height);
  const auto w = static_cast<double>(width);
  if (y < -1.0 || y > h || x < -1.0 || x > w) return 0.0;
  y = std::max(y, 0.0);
  x = std::max(x, 0.0);

  auto y_low = static_cast<std::size_t>(y);
  auto x_low = static_cast<std::size_t>(x);
  std::size_t y_high, x_high;
  if (y_low >= height - 1) {
    y_high = y_low = height - 1;
    y = static_cast<double>(y_low);
  } else {
    y_high = y_low + 1;
  }
  if (x_low >= width - 1) {
    x_high = x_low = width - 1;
    x = static_cast<double>(x_low);
  } else {
    x_high = x_low + 1;
  }

  const double ly = y - static_cast<double>(y_low), lx = x - static_cast<double>(x_low);
  const double hy = 1.0 - ly, hx = 1.0 - lx;
  return hy * hx * plane[y_low * width + x_low] + hy * lx * plane[y_low * width + x_high] +
         ly * hx * plane[y_high * width + x_low] + ly * lx * plane[y_high * width + x_high];
}

Tensor roi_align(const Tensor& map, const Box& box, double scale, const RoiAlignConfig& cfg) {
  if (map.rank() != 3) throw InvalidData("roi_align expects a C x H x W map");
  if (!(scale > 0) || !std::isfinite(scale)) throw InvalidData("roi_align scale must be > 0");
  if (!(box.w > 0) || !(box.h > 0)) throw InvalidData("roi_align box must have positive extent");
  if (cfg.output_size < 1) throw InvalidData("roi_align output size must be >= 1");
  if (cfg.sampling_ratio < 0) throw InvalidData("roi_align sampling ratio must be >= 0");

  const std::size_t channels = map.dim(0), height = map.dim(1), width = map.dim(2);
  const auto pooled = static_cast<std::size_t>(cfg.output_size);
  const double offset = cfg.aligned ? 0.5 : 0.0;
  const double inv_scale = 1.0 / scale;

  const double start_x = box.x * inv_scale - offset;
  const double start_y = box.y * inv_scale - offset;
  double roi_w = (box.x + box.w) * inv_scale - offset - start_x;
  double roi_h = (box.y + box.h) * inv_scale - offset - start_y;
  if (!cfg.aligned) {
    roi_w = std::max(roi_w, 1.0);
    roi_h = std::max(roi_h, 1.0);
  }
  const double bin_w = roi_w / static_cast<double>(pooled);
  const double bin_h = roi_h / static_cast<double>(pooled);
  const auto grid_w = static_cast<std::size_t>(
      cfg.sampling_ratio > 0 ? cfg.sampling_ratio : std::ceil(bin_w));
  const auto grid_h = static_cast<std::size_t>(
      cfg.sampling_ratio > 0 ? cfg.sampling_ratio : std::ceil(bin_h));
  const double count = static_cast<double>(std::max<std::size_t>(grid_w * grid_h, 1));

  Tensor out({channels, pooled, pooled});
  for (std::size_t c = 0; c < channels; ++c) {
    const auto plane = map.channel(c);
    for (std::size_t py = 0; py < pooled; ++py) {
      for (std::size_t px = 0; px < pooled; ++px) {
        double acc = 0.0;
        for (std::size_t iy = 0; iy < grid_h; ++iy) {
          const double y = start_y + static_cast<double>(py) * bin_h +
                           (static_cast<double>(iy) + 0.5) * bin_h / static_cast<double>(grid_h);
          for (std::size_t ix = 0; ix < grid_w; ++ix) {
            const double x = start_x + static_cast<double>(px) * bin_w +
                             (static_cast<double>(ix) + 0.5) * bin_w / static_cast<double>(grid_w);
            acc += bilinear_sample(plane, height, width, y, x);
          }
        }
        out.at(c, py, px) = static_cast<float>(acc / count);
      }
    }
  }
  return out;
}

std::vector<float> roi_align_pooled(const Tensor& map, const Box& box, double scale,
                                    const RoiAlignConfig& cfg) {
  const Tensor bins = roi_align(map, box, scale, cfg);
  std::vector<float> out(bins.dim(0));
  const double cells = static_cast<double>(bins.dim(1) * bins.dim(2));
  for (std::size_t c = 0; c < out.size(); ++c) {
    double acc = 0.0;
    for (const float v : bins.channel(c)) acc += v;
    out[c] = static_cast<float>(acc / cells);
  }
  return out;
}

std::vector<float> spatial_mean(const Tensor& map) {
  if (map.rank() != 3) throw InvalidData("spatial_mean expects a C x H x W map");
  std::vector<float> out(map.dim(0));
  const double cells = static_cast<double>(map.dim(1) * map.dim(2));
  for (std::size_t c = 0; c < out.size(); ++c) {
    double acc = 0.0;
    for (const float v : map.channel(c)) acc += v;
    out[c] = static_cast<float>(acc / cells);
  }
  return out;
}

int fpn_level_for_box(double box_w, double box_h, const MultiScaleConfig& cfg, int k_min,
                      int k_max) {
  const double k = std::floor(cfg.k0 + std::log2(std::sqrt(box_w * box_h) / cfg.s0));
  if (k <= k_min) return k_min;
  if (k >= k_max) return k_max;
  return static_cast<int>(k);
}

std::optional<int> pyramid_index(double scale) {
  if (!(scale > 0)) return std::nullopt;
  const double k = std::round(std::log2(scale));
  if (std::abs(std::exp2(k) - scale) > 1e-9 * scale) return std::nullopt;
  return static_cast<int>(k);
}

}  // namespace xferod
