#pragma once

#include <Eigen/Core>

#include <cstdint>

namespace modan {

enum class OptimizerKind { kSgdMomentum, kAdam };

struct OptimizerSpec {
  OptimizerKind kind = OptimizerKind::kSgdMomentum;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;

  static OptimizerSpec sgd(double momentum, double weight_decay) {
    return {OptimizerKind::kSgdMomentum, momentum, weight_decay};
  }
  static OptimizerSpec adam(double weight_decay = 0.0) {
    OptimizerSpec s;
    s.kind = OptimizerKind::kAdam;
    s.momentum = 0.0;
    s.weight_decay = weight_decay;
    return s;
  }
};

/// Per-parameter optimizer memory over a flat parameter vector. The learning
/// rate actually applied is passed to each step so schedules stay external.
struct OptimizerState {
  OptimizerSpec spec;
  Eigen::VectorXd velocity;       // SGD
  Eigen::VectorXd first_moment;   // Adam
  Eigen::VectorXd second_moment;  // Adam
  std::int64_t step_count = 0;

  OptimizerState() = default;
  OptimizerState(const OptimizerSpec& s, Eigen::Index parameter_count);
};

/// g <- grad + wd * w;  v <- mu * v + g;  w <- w - lr * v
void sgd_step(OptimizerState& state, Eigen::VectorXd& params, const Eigen::VectorXd& grads,
              double lr);

/// Adam with bias correction; weight decay (if any) is added to the gradient.
void adam_step(OptimizerState& state, Eigen::VectorXd& params, const Eigen::VectorXd& grads,
               double lr);

/// Dispatches on state.spec.kind.
void optimizer_step(OptimizerState& state, Eigen::VectorXd& params,
                    const Eigen::VectorXd& grads, double lr);

enum class ScheduleKind { kConstant, kStep };

struct LrSchedule {
  double base_lr = 0.05;
  ScheduleKind kind = ScheduleKind::kConstant;
  int step_epoch = 1;
  double gamma = 1.0;

  void validate() const;

  static LrSchedule constant(double lr) { return {lr, ScheduleKind::kConstant, 1, 1.0}; }
  static LrSchedule step(double lr, int step_epoch, double gamma) {
    return {lr, ScheduleKind::kStep, step_epoch, gamma};
  }
};

/// Single decay: base_lr before step_epoch, base_lr * gamma from then on.
double lr_at(const LrSchedule& schedule, int epoch);

}  // namespace modan
