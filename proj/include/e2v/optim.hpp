#pragma once

#include <Eigen/Core>

#include <cmath>

namespace e2v {

struct AdamConfig {
  double step_size = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam over a flat parameter vector.
template <typename Scalar = double>
class Adam {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Adam(Eigen::Index size, AdamConfig config)
      : config_(config), m_(Vector::Zero(size)), v_(Vector::Zero(size)) {}

  void step(Vector& params, const Vector& grad) {
    ++t_;
    const Scalar b1 = static_cast<Scalar>(config_.beta1);
    const Scalar b2 = static_cast<Scalar>(config_.beta2);
    m_ = b1 * m_ + (Scalar(1) - b1) * grad;
    v_ = b2 * v_ + (Scalar(1) - b2) * grad.cwiseProduct(grad);
    const Scalar c1 = Scalar(1) - static_cast<Scalar>(std::pow(config_.beta1, t_));
    const Scalar c2 = Scalar(1) - static_cast<Scalar>(std::pow(config_.beta2, t_));
    const Scalar lr = static_cast<Scalar>(config_.step_size);
    const Scalar eps = static_cast<Scalar>(config_.epsilon);
    params.array() -= lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps);
  }

  long steps() const { return t_; }

 private:
  AdamConfig config_;
  Vector m_;
  Vector v_;
  long t_ = 0;
};

}  // namespace e2v
