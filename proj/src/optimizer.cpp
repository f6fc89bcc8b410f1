#include "modan/optimizer.hpp"

#include <cmath>

#include "modan/error.hpp"

namespace modan {

void OptimizerSpec::validate() const {
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw Error(ErrorCode::kBadConfig, "momentum must lie in [0, 1)");
  }
  if (!(weight_decay >= 0.0)) throw Error(ErrorCode::kBadConfig, "weight_decay must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw Error(ErrorCode::kBadConfig, "Adam betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw Error(ErrorCode::kBadConfig, "epsilon must be > 0");
}

OptimizerState::OptimizerState(const OptimizerSpec& s, Eigen::Index parameter_count) : spec(s) {
  spec.validate();
  if (spec.kind == OptimizerKind::kSgdMomentum) {
    velocity = Eigen::VectorXd::Zero(parameter_count);
  } else {
    first_moment = Eigen::VectorXd::Zero(parameter_count);
    second_moment = Eigen::VectorXd::Zero(parameter_count);
  }
}

namespace {

void check_shapes(const Eigen::VectorXd& state, const Eigen::VectorXd& params,
                  const Eigen::VectorXd& grads) {
  if (params.size() != grads.size() || state.size() != params.size()) {
    throw Error(ErrorCode::kShapeMismatch, "optimizer state, parameters and gradients differ in size");
  }
}

}  // namespace

void sgd_step(OptimizerState& state, Eigen::VectorXd& params, const Eigen::VectorXd& grads,
              double lr) {
  check_shapes(state.velocity, params, grads);
  const auto& s = state.spec;
  state.velocity = s.momentum * state.velocity + grads + s.weight_decay * params;
  params -= lr * state.velocity;
  ++state.step_count;
}

void adam_step(OptimizerState& state, Eigen::VectorXd& params, const Eigen::VectorXd& grads,
               double lr) {
  check_shapes(state.first_moment, params, grads);
  check_shapes(state.second_moment, params, grads);
  const auto& s = state.spec;
  ++state.step_count;
  const Eigen::VectorXd g = grads + s.weight_decay * params;
  state.first_moment = s.beta1 * state.first_moment + (1.0 - s.beta1) * g;
  state.second_moment = s.beta2 * state.second_moment + (1.0 - s.beta2) * g.cwiseAbs2();
  const auto t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(s.beta1, t);
  const double c2 = 1.0 - std::pow(s.beta2, t);
  params.array() -= lr * (state.first_moment.array() / c1) /
                    ((state.second_moment.array() / c2).sqrt() + s.epsilon);
}

void optimizer_step(OptimizerState& state, Eigen::VectorXd& params,
                    const Eigen::VectorXd& grads, double lr) {
  if (state.spec.kind == OptimizerKind::kSgdMomentum) {
    sgd_step(state, params, grads, lr);
  } else {
    adam_step(state, params, grads, lr);
  }
}

void LrSchedule::validate() const {
  if (!(base_lr >= 0.0)) throw Error(ErrorCode::kBadConfig, "base learning rate must be >= 0");
  if (kind == ScheduleKind::kStep) {
    if (step_epoch < 1) throw Error(ErrorCode::kBadConfig, "step_epoch must be >= 1");
    if (!(gamma > 0.0 && gamma <= 1.0)) {
      throw Error(ErrorCode::kBadConfig, "gamma must lie in (0, 1]");
    }
  }
}

double lr_at(const LrSchedule& schedule, int epoch) {
  if (schedule.kind == ScheduleKind::kStep && epoch >= schedule.step_epoch) {
    return schedule.base_lr * schedule.gamma;
  }
  return schedule.base_lr;
}

}  // namespace modan
