#pragma once

#include "hsp/geometry.hpp"
#include "hsp/tensor2d.hpp"

#include <vector>

namespace hsp {

enum class ChannelKind { XYZ, RGB };

const char* channel_name(ChannelKind kind);  // "xyz" / "rgb"

// Supervision sites in pixel units: site = (row, col), pixel (i, j) has its
// center at (i, j). Values are XYZ in the normalized model frame or RGB in [0,1].
struct SparseUVSamples {
  int height = 0;
  int width = 0;
  ChannelKind kind = ChannelKind::XYZ;
  std::vector<Vec2> sites;
  std::vector<Vec3> values;
  int dropped = 0;  // cloud points rejected by the valid-site test

  std::size_t size() const { return sites.size(); }
};

// Dense H x W x 3 prediction.
struct DenseUVMap {
  ChannelKind kind = ChannelKind::XYZ;
  FeatureMap map;  // 3 channels

  int height() const { return map.height; }
  int width() const { return map.width; }
  Vec3 at(int r, int c) const { return {map.at(r, c, 0), map.at(r, c, 1), map.at(r, c, 2)}; }
  void set(int r, int c, const Vec3& v) {
    for (int k = 0; k < 3; ++k) map.at(r, c, k) = v[k];
  }
};

// Standard 4-neighbour bilinear interpolation at each site; returns S x C.
// Throws ParameterError for sites outside [0, H-1] x [0, W-1].
Eigen::MatrixXd bilinear_sample(const FeatureMap& map, const std::vector<Vec2>& sites);

// d(loss)/d(map) given d(loss)/d(samples) (S x C).
FeatureMap bilinear_sample_backward(int height, int width, const std::vector<Vec2>& sites,
                                    const Eigen::MatrixXd& grad_samples);

}  // namespace hsp
