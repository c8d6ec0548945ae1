#include "hsp/prior2d.hpp"

#include "hsp/error.hpp"
#include "hsp/seed.hpp"

#include <cmath>
#include <cstdio>
#include <random>

namespace hsp {

const char* channel_name(ChannelKind kind) { return kind == ChannelKind::XYZ ? "xyz" : "rgb"; }

namespace {

struct BilinearTap {
  int r0, r1, c0, c1;
  double wr, wc;  // weights of r1 and c1
};

BilinearTap bilinear_tap(const Vec2& site, int height, int width) {
  const double r = site[0], c = site[1];
  if (!(r >= 0.0 && r <= height - 1 && c >= 0.0 && c <= width - 1)) {
    throw ParameterError("bilinear site (" + std::to_string(r) + ", " + std::to_string(c) + ") outside the " +
                         std::to_string(height) + "x" + std::to_string(width) + " grid");
  }
  BilinearTap t;
  t.r0 = std::min(static_cast<int>(r), height - 1);
  t.c0 = std::min(static_cast<int>(c), width - 1);
  t.r1 = std::min(t.r0 + 1, height - 1);
  t.c1 = std::min(t.c0 + 1, width - 1);
  t.wr = r - t.r0;
  t.wc = c - t.c0;
  return t;
}

}  // namespace

Eigen::MatrixXd bilinear_sample(const FeatureMap& map, const std::vector<Vec2>& sites) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(sites.size()), map.channels());
  for (std::size_t s = 0; s < sites.size(); ++s) {
    const BilinearTap t = bilinear_tap(sites[s], map.height, map.width);
    for (int ch = 0; ch < map.channels(); ++ch) {
      const double top = (1.0 - t.wc) * map.at(t.r0, t.c0, ch) + t.wc * map.at(t.r0, t.c1, ch);
      const double bot = (1.0 - t.wc) * map.at(t.r1, t.c0, ch) + t.wc * map.at(t.r1, t.c1, ch);
      out(static_cast<Eigen::Index>(s), ch) = (1.0 - t.wr) * top + t.wr * bot;
    }
  }
  return out;
}

FeatureMap bilinear_sample_backward(int height, int width, const std::vector<Vec2>& sites,
                                    const Eigen::MatrixXd& grad_samples) {
  if (grad_samples.rows() != static_cast<Eigen::Index>(sites.size())) {
    throw ParameterError("bilinear_sample_backward: gradient rows != site count");
  }
  FeatureMap g(height, width, static_cast<int>(grad_samples.cols()));
  for (std::size_t s = 0; s < sites.size(); ++s) {
    const BilinearTap t = bilinear_tap(sites[s], height, width);
    for (int ch = 0; ch < g.channels(); ++ch) {
      const double v = grad_samples(static_cast<Eigen::Index>(s), ch);
      g.at(t.r0, t.c0, ch) += (1.0 - t.wr) * (1.0 - t.wc) * v;
      g.at(t.r0, t.c1, ch) += (1.0 - t.wr) * t.wc * v;
      g.at(t.r1, t.c0, ch) += t.wr * (1.0 - t.wc) * v;
      g.at(t.r1, t.c1, ch) += t.wr * t.wc * v;
    }
  }
  return g;
}

void validate(const Prior2DConfig& c) {
  if (c.steps < 1) throw ParameterError("2D prior needs steps >= 1");
  if (c.z_std < 0.0 || c.eps_std < 0.0) throw ParameterError("2D prior noise stds must be >= 0");
  if (!(c.learning_rate > 0.0)) throw ParameterError("2D prior needs a positive learning rate");
  if (c.levels < 1 || c.input_channels < 1 || c.down_channels < 1 || c.up_channels < 1 || c.skip_channels < 0) {
    throw ParameterError("invalid 2D prior network shape");
  }
  if (c.resolution < 4 || c.resolution % (1 << c.levels) != 0) {
    throw ParameterError("2D prior resolution must be divisible by 2^levels");
  }
}

// --- network ---------------------------------------------------------------

namespace {

class Sequential {
public:
  void add_conv(int in, int out, int k, int stride, std::mt19937_64& rng) {
    items_.push_back({Kind::Conv, Conv2d(in, out, k, stride, rng), {}});
  }
  void add_bn(int c) { items_.push_back({Kind::Norm, {}, BatchNorm(c)}); }
  void add_act() { items_.push_back({Kind::Act, {}, {}}); }

  FeatureMap forward(FeatureMap x, double slope) {
    inputs_.clear();
    for (Item& it : items_) {
      inputs_.push_back(x);
      switch (it.kind) {
        case Kind::Conv: x = it.conv.forward(x); break;
        case Kind::Norm: x = it.bn.forward(x); break;
        case Kind::Act: x = leaky_relu(x, slope); break;
      }
    }
    return x;
  }

  FeatureMap backward(FeatureMap g, double slope) {
    for (std::size_t i = items_.size(); i-- > 0;) {
      Item& it = items_[i];
      switch (it.kind) {
        case Kind::Conv: g = it.conv.backward(inputs_[i], g); break;
        case Kind::Norm: g = it.bn.backward(g); break;
        case Kind::Act: g = leaky_relu_backward(inputs_[i], g, slope); break;
      }
    }
    return g;
  }

  void parameters(std::vector<ParamView>& out) {
    auto view = [&](auto& v, auto& g) {
      out.push_back({{v.data(), static_cast<std::size_t>(v.size())}, {g.data(), static_cast<std::size_t>(g.size())}});
    };
    for (Item& it : items_) {
      if (it.kind == Kind::Conv) {
        view(it.conv.weight, it.conv.grad_weight);
        view(it.conv.bias, it.conv.grad_bias);
      } else if (it.kind == Kind::Norm) {
        view(it.bn.gamma, it.bn.grad_gamma);
        view(it.bn.beta, it.bn.grad_beta);
      }
    }
  }

private:
  enum class Kind { Conv, Norm, Act };
  struct Item {
    Kind kind;
    Conv2d conv;
    BatchNorm bn;
  };
  std::vector<Item> items_;
  std::vector<FeatureMap> inputs_;
};

}  // namespace

struct Prior2DNetwork::Impl {
  Prior2DConfig config;
  std::vector<Sequential> skip, down, up;
  Sequential output;
  std::vector<FeatureMap> skip_out;
  std::vector<std::pair<int, int>> level_size;  // input size of each level, plus the bottom
};

Prior2DNetwork::Prior2DNetwork(const Prior2DConfig& config, std::uint64_t seed) : impl_(std::make_unique<Impl>()) {
  validate(config);
  Impl& m = *impl_;
  m.config = config;
  std::mt19937_64 rng(seed);
  const int L = config.levels, d = config.down_channels, u = config.up_channels, s = config.skip_channels;
  m.skip.resize(L);
  m.down.resize(L);
  m.up.resize(L);
  for (int i = 0; i < L; ++i) {
    const int cin = i == 0 ? config.input_channels : d;
    if (s > 0) {
      m.skip[i].add_conv(cin, s, 1, 1, rng);
      m.skip[i].add_bn(s);
      m.skip[i].add_act();
    }
    m.down[i].add_conv(cin, d, 3, 2, rng);
    m.down[i].add_bn(d);
    m.down[i].add_act();
    m.down[i].add_conv(d, d, 3, 1, rng);
    m.down[i].add_bn(d);
    m.down[i].add_act();
  }
  for (int i = L - 1; i >= 0; --i) {
    const int deeper = i == L - 1 ? d : u;
    m.up[i].add_bn(s + deeper);
    m.up[i].add_conv(s + deeper, u, 3, 1, rng);
    m.up[i].add_bn(u);
    m.up[i].add_act();
    m.up[i].add_conv(u, u, 1, 1, rng);
    m.up[i].add_bn(u);
    m.up[i].add_act();
  }
  m.output.add_conv(u, 3, 1, 1, rng);
}

Prior2DNetwork::~Prior2DNetwork() = default;
Prior2DNetwork::Prior2DNetwork(Prior2DNetwork&&) noexcept = default;
Prior2DNetwork& Prior2DNetwork::operator=(Prior2DNetwork&&) noexcept = default;

FeatureMap Prior2DNetwork::forward(const FeatureMap& input) {
  Impl& m = *impl_;
  const int L = m.config.levels;
  const double a = m.config.leaky_slope;
  if (input.channels() != m.config.input_channels) throw ParameterError("2D prior input channel mismatch");
  if (input.height % (1 << L) != 0 || input.width % (1 << L) != 0) {
    throw ParameterError("2D prior input size must be divisible by 2^levels");
  }
  m.skip_out.assign(L, {});
  m.level_size.clear();
  FeatureMap x = input;
  for (int i = 0; i < L; ++i) {
    m.level_size.emplace_back(x.height, x.width);
    if (m.config.skip_channels > 0) m.skip_out[i] = m.skip[i].forward(x, a);
    x = m.down[i].forward(x, a);
  }
  m.level_size.emplace_back(x.height, x.width);
  for (int i = L - 1; i >= 0; --i) {
    FeatureMap up = upsample2(x);
    x = m.up[i].forward(m.config.skip_channels > 0 ? concat_channels(m.skip_out[i], up) : up, a);
  }
  return m.output.forward(x, a);
}

FeatureMap Prior2DNetwork::backward(const FeatureMap& grad_output) {
  Impl& m = *impl_;
  const int L = m.config.levels, s = m.config.skip_channels;
  const double a = m.config.leaky_slope;
  FeatureMap g = m.output.backward(grad_output, a);
  std::vector<FeatureMap> grad_skip(L);
  for (int i = 0; i < L; ++i) {
    FeatureMap gcat = m.up[i].backward(g, a);
    FeatureMap gu(gcat.height, gcat.width, gcat.channels() - s);
    gu.data = gcat.data.rightCols(gcat.channels() - s);
    if (s > 0) {
      grad_skip[i] = FeatureMap(gcat.height, gcat.width, s);
      grad_skip[i].data = gcat.data.leftCols(s);
    }
    g = upsample2_backward(gu, m.level_size[i + 1].first, m.level_size[i + 1].second);
  }
  for (int i = L - 1; i >= 0; --i) {
    FeatureMap gx = m.down[i].backward(g, a);
    if (s > 0) gx.data += m.skip[i].backward(grad_skip[i], a).data;
    g = std::move(gx);
  }
  return g;
}

std::vector<ParamView> Prior2DNetwork::parameters() {
  Impl& m = *impl_;
  std::vector<ParamView> out;
  for (int i = 0; i < m.config.levels; ++i) {
    m.skip[i].parameters(out);
    m.down[i].parameters(out);
  }
  for (int i = m.config.levels - 1; i >= 0; --i) m.up[i].parameters(out);
  m.output.parameters(out);
  return out;
}

void Prior2DNetwork::zero_grad() {
  for (const ParamView& p : parameters()) std::fill(p.grad.begin(), p.grad.end(), 0.0);
}

int Prior2DNetwork::num_parameters() {
  int n = 0;
  for (const ParamView& p : parameters()) n += static_cast<int>(p.value.size());
  return n;
}

// --- optimisation ----------------------------------------------------------

namespace {

void add_gaussian(FeatureMap& x, double stddev, std::mt19937_64& rng) {
  if (stddev == 0.0) return;
  std::normal_distribution<double> normal(0.0, stddev);
  for (Eigen::Index i = 0; i < x.data.size(); ++i) x.data.data()[i] += normal(rng);
}

}  // namespace

FeatureMap make_noise_input(const Prior2DConfig& config, int height, int width, std::uint64_t seed) {
  FeatureMap z(height, width, config.input_channels);
  std::mt19937_64 rng(seed);
  add_gaussian(z, config.z_std, rng);
  return z;
}

double site_loss(const FeatureMap& map, const SparseUVSamples& samples, FeatureMap* grad) {
  const Eigen::MatrixXd pred = bilinear_sample(map, samples.sites);
  const double inv = 1.0 / static_cast<double>(samples.size());
  Eigen::MatrixXd diff(pred.rows(), 3);
  for (Eigen::Index s = 0; s < pred.rows(); ++s) diff.row(s) = pred.row(s) - samples.values[s].transpose();
  if (grad) *grad = bilinear_sample_backward(map.height, map.width, samples.sites, 2.0 * inv * diff);
  return diff.squaredNorm() * inv;
}

Prior2DResult optimize_2d_prior(const SparseUVSamples& samples, const Prior2DConfig& config,
                                const Prior2DHooks& hooks) {
  validate(config);
  if (samples.size() < 1) throw ParameterError("optimize_2d_prior needs at least one sample");
  if (samples.values.size() != samples.sites.size()) throw ParameterError("sample sites and values differ in count");
  const int h = samples.height, w = samples.width;

  Prior2DNetwork net(config, mix_seed(config.seed, 1));
  const FeatureMap z = make_noise_input(config, h, w, mix_seed(config.seed, 2));
  std::mt19937_64 eps_rng(mix_seed(config.seed, 3));
  Adam adam(config.learning_rate);
  auto params = net.parameters();

  Prior2DResult result;
  result.map.kind = samples.kind;
  result.log.reserve(config.steps);
  std::size_t next_snapshot = 0;
  for (int step = 0; step < config.steps; ++step) {
    FeatureMap input = z;
    add_gaussian(input, config.eps_std, eps_rng);
    const FeatureMap out = net.forward(input);
    FeatureMap grad;
    const double loss = site_loss(out, samples, &grad);
    if (!std::isfinite(loss)) throw OptimizationError("2D prior loss became non-finite", step);
    result.log.push_back({step, loss});
    if (hooks.on_step) hooks.on_step(result.log.back());
    net.zero_grad();
    net.backward(grad);
    adam.step(params);

    while (next_snapshot < hooks.snapshot_steps.size() && hooks.snapshot_steps[next_snapshot] <= step + 1) {
      if (hooks.snapshot_steps[next_snapshot] == step + 1 && hooks.on_snapshot) {
        DenseUVMap snap;
        snap.kind = samples.kind;
        snap.map = net.forward(z);
        hooks.on_snapshot(step + 1, snap);
      }
      ++next_snapshot;
    }
  }
  result.map.map = net.forward(z);
  return result;
}

double total_variation(const FeatureMap& map) {
  double sum = 0.0;
  long count = 0;
  for (int ch = 0; ch < map.channels(); ++ch) {
    for (int r = 0; r < map.height; ++r) {
      for (int c = 0; c < map.width; ++c) {
        if (c + 1 < map.width) {
          sum += std::abs(map.at(r, c + 1, ch) - map.at(r, c, ch));
          ++count;
        }
        if (r + 1 < map.height) {
          sum += std::abs(map.at(r + 1, c, ch) - map.at(r, c, ch));
          ++count;
        }
      }
    }
  }
  return count ? sum / static_cast<double>(count) : 0.0;
}

std::string format_loss_log(const std::vector<Prior2DLogEntry>& log) {
  std::string out;
  char buf[96];
  for (const Prior2DLogEntry& e : log) {
    std::snprintf(buf, sizeof(buf), "%d %.10g\n", e.step, e.mse);
    out += buf;
  }
  return out;
}

}  // namespace hsp
