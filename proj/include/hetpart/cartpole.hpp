// Copyright 2026 hetpart contributors
// SPDX-License-Identifier: Apache-2.0

#ifndef HETPART_CARTPOLE_HPP_
#define HETPART_CARTPOLE_HPP_

// Classic cart-pole balancing, the discrete-action benchmark the value
// learner trains on. Physics and constants follow the standard control
// task: a 1 kg cart, 0.1 kg pole of half-length 0.5 m, +/-10 N force,
// explicit Euler at 20 ms. An episode ends when the cart leaves +/-2.4 m
// or the pole tips past 12 degrees; every survived step pays reward 1.

#include <array>
#include <cmath>
#include <numbers>

#include "hetpart/rng.hpp"

namespace hetpart::train {

class CartPole {
 public:
  static constexpr int kStateDim = 4;
  static constexpr int kNumActions = 2;

  struct StepResult {
    double reward = 0.0;
    bool done = false;
  };

  // Uniform start in [-0.05, 0.05]^4.
  void reset(Rng& rng) {
    for (double& v : state_) v = rng.uniform(-0.05, 0.05);
  }

  StepResult step(int action) {
    const double force = action == 1 ? kForceMag : -kForceMag;
    const double x = state_[0], x_dot = state_[1];
    const double theta = state_[2], theta_dot = state_[3];
    const double cos_t = std::cos(theta);
    const double sin_t = std::sin(theta);

    const double temp =
        (force + kPoleMassLength * theta_dot * theta_dot * sin_t) / kTotalMass;
    const double theta_acc =
        (kGravity * sin_t - cos_t * temp) /
        (kHalfLength * (4.0 / 3.0 - kMassPole * cos_t * cos_t / kTotalMass));
    const double x_acc = temp - kPoleMassLength * theta_acc * cos_t / kTotalMass;

    state_[0] = x + kTau * x_dot;
    state_[1] = x_dot + kTau * x_acc;
    state_[2] = theta + kTau * theta_dot;
    state_[3] = theta_dot + kTau * theta_acc;

    StepResult r;
    r.done = std::fabs(state_[0]) > kXLimit || std::fabs(state_[2]) > kThetaLimit;
    r.reward = 1.0;
    return r;
  }

  std::array<float, 4> observation() const {
    return {static_cast<float>(state_[0]), static_cast<float>(state_[1]),
            static_cast<float>(state_[2]), static_cast<float>(state_[3])};
  }

  const std::array<double, 4>& state() const { return state_; }
  void set_state(const std::array<double, 4>& s) { state_ = s; }

  static constexpr double kGravity = 9.8;
  static constexpr double kMassCart = 1.0;
  static constexpr double kMassPole = 0.1;
  static constexpr double kTotalMass = kMassCart + kMassPole;
  static constexpr double kHalfLength = 0.5;
  static constexpr double kPoleMassLength = kMassPole * kHalfLength;
  static constexpr double kForceMag = 10.0;
  static constexpr double kTau = 0.02;
  static constexpr double kThetaLimit = 12.0 * std::numbers::pi / 180.0;
  static constexpr double kXLimit = 2.4;

 private:
  std::array<double, 4> state_{};
};

}  // namespace hetpart::train

#endif  // HETPART_CARTPOLE_HPP_
