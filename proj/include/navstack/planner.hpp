#pragma once

#include <array>
#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "navstack/bridge.hpp"
#include "navstack/common.hpp"
#include "navstack/lexicon.hpp"

namespace navstack {

// Instruction grammar, shared with the dataset generator:
//   <verb> [to|toward|towards] [the|a|an] <object> [at <v> m/s]
// Clauses are joined by "then", "and", "after that" or punctuation.
inline constexpr std::array<std::string_view, 8> kVerbs = {
    "go", "move", "run", "walk", "approach", "navigate", "find", "head"};
inline constexpr std::array<std::string_view, 3> kPrepositions = {"to", "toward", "towards"};
inline constexpr std::array<std::string_view, 3> kArticles = {"the", "a", "an"};
inline constexpr double kDefaultSpeed = 0.40;
inline constexpr double kMaxSpeed = 1.0;

inline constexpr std::string_view kDefaultSystemPrompt =
    "You are the task planner of a legged robot. Split the user's task into ordered "
    "navigation instructions of the form '<verb> to the <object> at <speed> m/s'. "
    "Answer with JSON {\"instructions\": [{\"text\", \"object\", \"speed\"}]}.";

struct LongHorizonTask {
  std::string text;
  std::string system_prompt = std::string(kDefaultSystemPrompt);
};

/// Parses one clause. Throws PlanningError naming the clause on failure.
MissionInstruction parse_instruction(std::string_view clause, const ClassLexicon& lexicon);

/// Splits a task description into clause strings.
std::vector<std::string> split_clauses(std::string_view task);

/// Deterministic template backend.
std::vector<MissionInstruction> plan_template(const LongHorizonTask& task,
                                              const ClassLexicon& lexicon);

/// Builds the bridge request for one planning call.
nlohmann::json planner_request(const LongHorizonTask& task, const PlannerFeedback& feedback);

/// Validates a bridge response into instructions (objects resolved through the lexicon).
std::vector<MissionInstruction> parse_planner_response(const nlohmann::json& response,
                                                       const ClassLexicon& lexicon);

class Planner {
 public:
  /// Template-only planner.
  explicit Planner(const ClassLexicon& lexicon);
  /// External planner; falls back to the template backend when the bridge
  /// times out or fails.
  Planner(const ClassLexicon& lexicon, std::shared_ptr<JsonLineTransport> bridge,
          std::chrono::milliseconds timeout);

  std::vector<MissionInstruction> plan(const LongHorizonTask& task,
                                       const PlannerFeedback& feedback = {});

  const std::vector<std::string>& warnings() const { return warnings_; }
  bool used_fallback() const { return used_fallback_; }

 private:
  const ClassLexicon& lexicon_;
  std::shared_ptr<JsonLineTransport> bridge_;
  std::chrono::milliseconds timeout_{0};
  std::vector<std::string> warnings_;
  bool used_fallback_ = false;
};

/// Next instruction index after feedback, or nullopt when the plan is done.
/// Throws std::out_of_range when the feedback index is outside the plan.
std::optional<std::size_t> advance(std::size_t plan_size, const PlannerFeedback& feedback);

/// Instruction-to-class extraction backends.
class ObjectExtractor {
 public:
  virtual ~ObjectExtractor() = default;
  virtual std::string extract(std::string_view instruction) const = 0;
};

/// Longest lexicon phrase occurring in the text; throws PlanningError when
/// nothing matches. Serves as the fallback backend and as the label oracle.
class LookupExtractor final : public ObjectExtractor {
 public:
  explicit LookupExtractor(const ClassLexicon& lexicon) : lexicon_(lexicon) {}
  std::string extract(std::string_view instruction) const override;

 private:
  const ClassLexicon& lexicon_;
};

}  // namespace navstack
