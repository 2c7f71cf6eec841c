#include "navstack/policy.hpp"

#include <algorithm>

namespace navstack {

RulePolicy::RulePolicy(ExecContext ctx, StatesMode mode, std::size_t window)
    : ctx_(std::move(ctx)), mode_(mode), smoother_(window) {
  ctx_.gains.validate();
  reset();
}

void RulePolicy::reset() {
  smoother_.reset();
  exec_ = ExecState{};
  exec_.mode = mode_;
  diag_ = {};
}

StepResult RulePolicy::advance(const MissionInstruction& instr, const std::optional<Detection>& det,
                               std::size_t instruction_index, std::optional<Detection>& smoothed) {
  smoothed = smoother_.smooth(det);
  auto r = step(exec_, instr, smoothed, ctx_, instruction_index);
  ++diag_.ticks;
  diag_.ignored_detections += r.ignored_detection;
  return r;
}

PolicyTick RulePolicy::act(const MissionInstruction& instr, const std::optional<Detection>& det,
                           std::size_t instruction_index) {
  PolicyTick t;
  auto r = advance(instr, det, instruction_index, t.detection);
  exec_ = r.state;
  t.command = r.command;
  t.state = exec_.active();
  t.feedback = r.feedback;
  return t;
}

LearnedPolicy::LearnedPolicy(ExecContext ctx, StatesMode mode, std::shared_ptr<L2MM> model,
                             std::size_t window)
    : RulePolicy(std::move(ctx), mode, window), model_(std::move(model)) {
  if (!model_) throw Error("learned policy needs a model checkpoint");
}

void LearnedPolicy::reset() {
  RulePolicy::reset();
  stats_ = {};
  last_ids_.reset();
}

PolicyTick LearnedPolicy::act(const MissionInstruction& instr, const std::optional<Detection>& det,
                              std::size_t instruction_index) {
  PolicyTick t;
  const ExecState before = exec_;
  auto r = advance(instr, det, instruction_index, t.detection);
  exec_ = r.state;
  t.state = exec_.active();
  t.feedback = r.feedback;
  t.command = r.command;
  ++stats_.ticks;

  EncoderInput in;
  in.prev_instruction = before.prev_instruction;
  in.curr_instruction = instr.text;
  in.detection = t.detection;
  in.mission = before.mission;
  in.search = before.search;
  auto ids = encode(in, model_->vocab(), model_->separators(), model_->network().config().max_len);
  if (!last_ids_ || *last_ids_ != ids) {
    last_out_ = model_->forward_tokens(ids);
    last_ids_ = std::move(ids);
    ++stats_.model_calls;
  }
  stats_.state_agree += last_out_.mission() == exec_.mission && last_out_.search() == exec_.search;

  if (t.state == ActiveState::kRunning) {
    const auto& g = ctx_.gains;
    t.command.v_x = std::max(0.0, last_out_.motion.v_x);
    t.command.v_y = 0.0;
    t.command.theta = std::clamp(last_out_.motion.theta, -g.theta_max, g.theta_max);
  }
  return t;
}

PolicyTick ConstantPolicy::act(const MissionInstruction&, const std::optional<Detection>& det,
                               std::size_t instruction_index) {
  PolicyTick t;
  t.command = cmd_;
  t.detection = det;
  t.feedback = {MissionState::kRunning, instruction_index};
  return t;
}

PolicyKind parse_policy_kind(std::string_view s) {
  if (s == "oracle" || s == "rule") return PolicyKind::kOracle;
  if (s == "learned") return PolicyKind::kLearned;
  if (s == "zero") return PolicyKind::kZero;
  throw Error("unknown policy '" + std::string(s) + "' (expected oracle, learned or zero)");
}

std::unique_ptr<Policy> make_policy(const PolicyOptions& opts) {
  switch (opts.kind) {
    case PolicyKind::kOracle: return std::make_unique<RulePolicy>(opts.ctx, opts.mode, opts.window);
    case PolicyKind::kLearned:
      if (!opts.model) throw Error("learned policy requested without a checkpoint");
      return std::make_unique<LearnedPolicy>(opts.ctx, opts.mode, opts.model, opts.window);
    case PolicyKind::kZero: return std::make_unique<ConstantPolicy>();
  }
  throw Error("unknown policy kind");
}

PolicyFactory policy_factory(PolicyOptions opts) {
  if (opts.kind == PolicyKind::kLearned && !opts.model) {
    throw Error("learned policy requested without a checkpoint");
  }
  return [opts = std::move(opts)] { return make_policy(opts); };
}

}  // namespace navstack
