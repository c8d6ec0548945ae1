#include "hsp/tensor2d.hpp"

#include "hsp/error.hpp"

#include <algorithm>
#include <cmath>

namespace hsp {

int reflect_index(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}

Conv2d::Conv2d(int in_channels, int out_channels, int kernel, int stride, std::mt19937_64& rng)
    : in_(in_channels), out_(out_channels), kernel_(kernel), stride_(stride) {
  if (in_channels < 1 || out_channels < 1 || kernel < 1 || kernel % 2 == 0 || stride < 1) {
    throw ParameterError("invalid Conv2d shape");
  }
  const int fan_in = in_channels * kernel * kernel;
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> uni(-bound, bound);
  weight.resize(out_channels, fan_in);
  for (Eigen::Index i = 0; i < weight.size(); ++i) weight.data()[i] = uni(rng);
  bias.resize(out_channels);
  for (int i = 0; i < out_channels; ++i) bias[i] = uni(rng);
  grad_weight = Eigen::MatrixXd::Zero(out_channels, fan_in);
  grad_bias = Eigen::VectorXd::Zero(out_channels);
}

int Conv2d::rows_per_tile(int out_width) const {
  const long per_row = static_cast<long>(out_width) * in_ * kernel_ * kernel_;
  const long budget = 1L << 21;  // doubles per column buffer
  return static_cast<int>(std::max<long>(1, budget / std::max<long>(1, per_row)));
}

void Conv2d::im2col(const FeatureMap& x, int row_begin, int row_end, Eigen::MatrixXd& cols) const {
  const int wo = output_size(x.width);
  const int p = pad();
  const int n = (row_end - row_begin) * wo;
  cols.resize(n, static_cast<Eigen::Index>(in_) * kernel_ * kernel_);
  for (int ci = 0; ci < in_; ++ci) {
    const double* plane = x.data.col(ci).data();
    for (int ky = 0; ky < kernel_; ++ky) {
      for (int kx = 0; kx < kernel_; ++kx) {
        double* dst = cols.col((static_cast<Eigen::Index>(ci) * kernel_ + ky) * kernel_ + kx).data();
        for (int oy = row_begin; oy < row_end; ++oy) {
          const int iy = reflect_index(oy * stride_ + ky - p, x.height);
          const double* src = plane + static_cast<Eigen::Index>(iy) * x.width;
          double* d = dst + static_cast<Eigen::Index>(oy - row_begin) * wo;
          for (int ox = 0; ox < wo; ++ox) d[ox] = src[reflect_index(ox * stride_ + kx - p, x.width)];
        }
      }
    }
  }
}

void Conv2d::col2im(const Eigen::MatrixXd& cols, int row_begin, int row_end, FeatureMap& dx) const {
  const int wo = output_size(dx.width);
  const int p = pad();
  for (int ci = 0; ci < in_; ++ci) {
    double* plane = dx.data.col(ci).data();
    for (int ky = 0; ky < kernel_; ++ky) {
      for (int kx = 0; kx < kernel_; ++kx) {
        const double* src = cols.col((static_cast<Eigen::Index>(ci) * kernel_ + ky) * kernel_ + kx).data();
        for (int oy = row_begin; oy < row_end; ++oy) {
          const int iy = reflect_index(oy * stride_ + ky - p, dx.height);
          double* d = plane + static_cast<Eigen::Index>(iy) * dx.width;
          const double* s = src + static_cast<Eigen::Index>(oy - row_begin) * wo;
          for (int ox = 0; ox < wo; ++ox) d[reflect_index(ox * stride_ + kx - p, dx.width)] += s[ox];
        }
      }
    }
  }
}

FeatureMap Conv2d::forward(const FeatureMap& x) const {
  if (x.channels() != in_) throw ParameterError("Conv2d: channel mismatch");
  if (x.height < 2 * pad() + 1 || x.width < 2 * pad() + 1) throw ParameterError("Conv2d: input too small");
  const int ho = output_size(x.height), wo = output_size(x.width);
  FeatureMap y(ho, wo, out_);
  const int tile = rows_per_tile(wo);
  Eigen::MatrixXd cols;
  for (int r0 = 0; r0 < ho; r0 += tile) {
    const int r1 = std::min(ho, r0 + tile);
    im2col(x, r0, r1, cols);
    y.data.middleRows(static_cast<Eigen::Index>(r0) * wo, cols.rows()).noalias() = cols * weight.transpose();
  }
  y.data.rowwise() += bias.transpose();
  return y;
}

FeatureMap Conv2d::backward(const FeatureMap& x, const FeatureMap& grad_out) {
  const int ho = output_size(x.height), wo = output_size(x.width);
  if (grad_out.height != ho || grad_out.width != wo || grad_out.channels() != out_) {
    throw ParameterError("Conv2d::backward: gradient shape mismatch");
  }
  FeatureMap dx(x.height, x.width, in_);
  grad_bias += grad_out.data.colwise().sum().transpose();
  const int tile = rows_per_tile(wo);
  Eigen::MatrixXd cols, dcols;
  for (int r0 = 0; r0 < ho; r0 += tile) {
    const int r1 = std::min(ho, r0 + tile);
    im2col(x, r0, r1, cols);
    const auto g = grad_out.data.middleRows(static_cast<Eigen::Index>(r0) * wo, cols.rows());
    grad_weight.noalias() += g.transpose() * cols;
    dcols.noalias() = g * weight;
    col2im(dcols, r0, r1, dx);
  }
  return dx;
}

BatchNorm::BatchNorm(int channels)
    : gamma(Eigen::VectorXd::Ones(channels)),
      beta(Eigen::VectorXd::Zero(channels)),
      grad_gamma(Eigen::VectorXd::Zero(channels)),
      grad_beta(Eigen::VectorXd::Zero(channels)) {}

FeatureMap BatchNorm::forward(const FeatureMap& x) {
  if (x.channels() != gamma.size()) throw ParameterError("BatchNorm: channel mismatch");
  const double n = static_cast<double>(x.pixels());
  normalized_ = FeatureMap(x.height, x.width, x.channels());
  inv_std_.resize(x.channels());
  FeatureMap y(x.height, x.width, x.channels());
  for (int c = 0; c < x.channels(); ++c) {
    const auto col = x.data.col(c);
    const double mean = col.sum() / n;
    const double var = (col.array() - mean).square().sum() / n;
    inv_std_[c] = 1.0 / std::sqrt(var + epsilon);
    normalized_.data.col(c) = (col.array() - mean) * inv_std_[c];
    y.data.col(c) = normalized_.data.col(c).array() * gamma[c] + beta[c];
  }
  return y;
}

FeatureMap BatchNorm::backward(const FeatureMap& grad_out) {
  const double n = static_cast<double>(grad_out.pixels());
  FeatureMap dx(grad_out.height, grad_out.width, grad_out.channels());
  for (int c = 0; c < grad_out.channels(); ++c) {
    const auto g = grad_out.data.col(c).array();
    const auto xh = normalized_.data.col(c).array();
    const double sum_g = g.sum();
    const double sum_gx = (g * xh).sum();
    grad_beta[c] += sum_g;
    grad_gamma[c] += sum_gx;
    dx.data.col(c) = (gamma[c] * inv_std_[c] / n) * (n * g - sum_g - xh * sum_gx);
  }
  return dx;
}

FeatureMap leaky_relu(const FeatureMap& x, double slope) {
  FeatureMap y = x;
  y.data = x.data.unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
  return y;
}

FeatureMap leaky_relu_backward(const FeatureMap& x, const FeatureMap& grad_out, double slope) {
  FeatureMap g = grad_out;
  g.data = grad_out.data.binaryExpr(x.data, [slope](double gv, double xv) { return xv > 0.0 ? gv : slope * gv; });
  return g;
}

namespace {

struct Tap {
  int i0, i1;
  double w1;  // weight of i1; i0 gets 1 - w1
};

std::vector<Tap> upsample_taps(int n_in) {
  std::vector<Tap> taps(2 * n_in);
  for (int o = 0; o < 2 * n_in; ++o) {
    const double src = std::max(0.0, (o + 0.5) * 0.5 - 0.5);
    const int i0 = std::min(static_cast<int>(src), n_in - 1);
    const int i1 = std::min(i0 + 1, n_in - 1);
    taps[o] = {i0, i1, src - i0};
  }
  return taps;
}

}  // namespace

FeatureMap upsample2(const FeatureMap& x) {
  const auto ty = upsample_taps(x.height), tx = upsample_taps(x.width);
  FeatureMap y(2 * x.height, 2 * x.width, x.channels());
  for (int c = 0; c < x.channels(); ++c) {
    const double* in = x.data.col(c).data();
    double* out = y.data.col(c).data();
    for (int oy = 0; oy < y.height; ++oy) {
      const Tap& a = ty[oy];
      const double* r0 = in + static_cast<Eigen::Index>(a.i0) * x.width;
      const double* r1 = in + static_cast<Eigen::Index>(a.i1) * x.width;
      for (int ox = 0; ox < y.width; ++ox) {
        const Tap& b = tx[ox];
        const double top = (1.0 - b.w1) * r0[b.i0] + b.w1 * r0[b.i1];
        const double bot = (1.0 - b.w1) * r1[b.i0] + b.w1 * r1[b.i1];
        out[static_cast<Eigen::Index>(oy) * y.width + ox] = (1.0 - a.w1) * top + a.w1 * bot;
      }
    }
  }
  return y;
}

FeatureMap upsample2_backward(const FeatureMap& grad_out, int in_height, int in_width) {
  const auto ty = upsample_taps(in_height), tx = upsample_taps(in_width);
  FeatureMap dx(in_height, in_width, grad_out.channels());
  for (int c = 0; c < grad_out.channels(); ++c) {
    const double* g = grad_out.data.col(c).data();
    double* d = dx.data.col(c).data();
    for (int oy = 0; oy < grad_out.height; ++oy) {
      const Tap& a = ty[oy];
      double* r0 = d + static_cast<Eigen::Index>(a.i0) * in_width;
      double* r1 = d + static_cast<Eigen::Index>(a.i1) * in_width;
      for (int ox = 0; ox < grad_out.width; ++ox) {
        const Tap& b = tx[ox];
        const double v = g[static_cast<Eigen::Index>(oy) * grad_out.width + ox];
        const double top = (1.0 - a.w1) * v, bot = a.w1 * v;
        r0[b.i0] += (1.0 - b.w1) * top;
        r0[b.i1] += b.w1 * top;
        r1[b.i0] += (1.0 - b.w1) * bot;
        r1[b.i1] += b.w1 * bot;
      }
    }
  }
  return dx;
}

FeatureMap concat_channels(const FeatureMap& a, const FeatureMap& b) {
  if (a.height != b.height || a.width != b.width) throw ParameterError("concat_channels: size mismatch");
  FeatureMap y(a.height, a.width, a.channels() + b.channels());
  y.data.leftCols(a.channels()) = a.data;
  y.data.rightCols(b.channels()) = b.data;
  return y;
}

}  // namespace hsp
