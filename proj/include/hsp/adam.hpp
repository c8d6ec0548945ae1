#pragma once

#include <cmath>
#include <span>
#include <vector>

namespace hsp {

// A trainable tensor seen as flat value/gradient arrays.
struct ParamView {
  std::span<double> value;
  std::span<double> grad;
};

// Adaptive-moment first-order optimizer (bias-corrected).
class Adam {
public:
  explicit Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8)
      : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {}

  void step(const std::vector<ParamView>& params) {
    if (m_.empty()) {
      for (const ParamView& p : params) {
        m_.emplace_back(p.value.size(), 0.0);
        v_.emplace_back(p.value.size(), 0.0);
      }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, t_);
    const double c2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto& m = m_[k];
      auto& v = v_[k];
      const ParamView& p = params[k];
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const double g = p.grad[i];
        m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
        v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
        p.value[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
      }
    }
  }

  int steps_taken() const { return t_; }

private:
  double lr_, beta1_, beta2_, eps_;
  int t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace hsp
