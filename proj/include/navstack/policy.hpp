#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "navstack/executor.hpp"
#include "navstack/l2mm.hpp"
#include "navstack/perception.hpp"

namespace navstack {

struct PolicyTick {
  MotionCommand command;
  ActiveState state = ActiveState::kRunning;
  PlannerFeedback feedback;
  std::optional<Detection> detection;  // after smoothing
};

/// Closed-loop controller: raw detection in, velocity command out.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual PolicyTick act(const MissionInstruction& instr, const std::optional<Detection>& det,
                         std::size_t instruction_index = 0) = 0;
  virtual void reset() = 0;
  virtual std::string name() const = 0;
  virtual const ExecState* exec_state() const { return nullptr; }
};

/// Smoother followed by the execution rules.
class RulePolicy : public Policy {
 public:
  RulePolicy(ExecContext ctx, StatesMode mode, std::size_t window = DetectionSmoother::kDefaultWindow);

  PolicyTick act(const MissionInstruction& instr, const std::optional<Detection>& det,
                 std::size_t instruction_index = 0) override;
  void reset() override;
  std::string name() const override { return "oracle"; }
  const ExecState* exec_state() const override { return &exec_; }
  const ExecDiagnostics& diagnostics() const { return diag_; }

 protected:
  StepResult advance(const MissionInstruction& instr, const std::optional<Detection>& det,
                     std::size_t instruction_index, std::optional<Detection>& smoothed);

  ExecContext ctx_;
  StatesMode mode_;
  DetectionSmoother smoother_;
  ExecState exec_;
  ExecDiagnostics diag_;
};

struct LearnedStats {
  std::uint64_t ticks = 0;
  std::uint64_t model_calls = 0;
  std::uint64_t state_agree = 0;  // model's predicted (mission, search) equals the executor's
};

/// The executor owns the state transitions; while running, the velocity comes
/// from the model. The model output is sanitized: v_y = 0, v_x >= 0, and theta
/// clamped to the controller's bound.
class LearnedPolicy : public RulePolicy {
 public:
  LearnedPolicy(ExecContext ctx, StatesMode mode, std::shared_ptr<L2MM> model,
                std::size_t window = DetectionSmoother::kDefaultWindow);

  PolicyTick act(const MissionInstruction& instr, const std::optional<Detection>& det,
                 std::size_t instruction_index = 0) override;
  void reset() override;
  std::string name() const override { return "learned"; }
  const LearnedStats& stats() const { return stats_; }

 private:
  std::shared_ptr<L2MM> model_;
  LearnedStats stats_;
  std::optional<std::vector<std::int32_t>> last_ids_;
  ModelOutput last_out_;
};

/// Emits the same command forever; the state is reported as running.
class ConstantPolicy : public Policy {
 public:
  explicit ConstantPolicy(MotionCommand cmd = {}) : cmd_(cmd) {}
  PolicyTick act(const MissionInstruction&, const std::optional<Detection>& det,
                 std::size_t instruction_index = 0) override;
  void reset() override {}
  std::string name() const override { return "constant"; }

 private:
  MotionCommand cmd_;
};

enum class PolicyKind { kOracle, kLearned, kZero };
PolicyKind parse_policy_kind(std::string_view s);

struct PolicyOptions {
  PolicyKind kind = PolicyKind::kOracle;
  StatesMode mode = StatesMode::kFour;
  std::size_t window = DetectionSmoother::kDefaultWindow;
  ExecContext ctx;
  std::shared_ptr<L2MM> model;  // required for kLearned
};

using PolicyFactory = std::function<std::unique_ptr<Policy>()>;

/// Throws Error when learned mode has no model.
std::unique_ptr<Policy> make_policy(const PolicyOptions& opts);
PolicyFactory policy_factory(PolicyOptions opts);

}  // namespace navstack
