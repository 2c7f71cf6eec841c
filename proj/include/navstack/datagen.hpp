#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "navstack/bridge.hpp"
#include "navstack/executor.hpp"
#include "navstack/l2mm.hpp"
#include "navstack/lexicon.hpp"

namespace navstack {

struct SynonymExpansion {
  SynonymTable table;
  std::size_t added = 0;
  std::size_t duplicates = 0;
  std::vector<std::string> rejected;  // one diagnostic per cross-class collision
};

/// Static backend: the shipped table. With a bridge, each class is offered to
/// the generator once per round along with its current synonyms; answers are
/// deduplicated and collisions rejected (first writer wins).
/// Bridge request: {"kind":"synonyms","class":str,"existing":[str]}
/// Bridge response: {"synonyms":[str]}
SynonymExpansion expand_synonyms(const ClassLexicon& lexicon, JsonLineTransport* bridge = nullptr,
                                 int rounds = 1,
                                 std::chrono::milliseconds timeout = std::chrono::seconds(10));

/// Lexicon over the same classes with a replaced synonym table.
ClassLexicon with_synonyms(const ClassLexicon& lexicon, SynonymTable table);

inline constexpr double kMinSpeed = 0.10;
inline constexpr double kMaxSpeedGen = 1.00;
inline constexpr double kSpeedStep = 0.05;

/// All speeds the generator can emit (0.10 .. 1.00 in 0.05 steps).
std::vector<double> speed_grid();

/// One grammar-conformant clause for `cls` at `speed`, with randomized verb,
/// preposition, article and synonym.
std::string vary_instruction(const ClassLexicon& lexicon, const std::string& cls, double speed,
                             Rng& rng);

/// Several clauses joined by random connectives.
std::string vary_task(const ClassLexicon& lexicon,
                      const std::vector<std::pair<std::string, double>>& steps, Rng& rng);

/// Per-class success thresholds. Seeded classes keep their value, others take
/// the mean seed of their size category, or failing that a value scaled from
/// the nearest seeded category. Results are clamped into (0, 1).
ThresholdTable generate_thresholds(const std::map<std::string, double>& seeds,
                                   const ClassLexicon& lexicon);

enum class ScenarioKind { kRunning, kSearching, kSuccess, kNewMission };
std::string_view to_string(ScenarioKind k);

struct ScenarioMix {
  double running = 0.60;
  double searching = 0.25;
  double success = 0.10;
  double new_mission = 0.05;

  void validate() const;
};

/// A raw draw before labelling.
struct Scenario {
  ScenarioKind kind = ScenarioKind::kRunning;
  std::string target_class;
  double speed = 0.4;
  EncoderInput input;
};

class ScenarioSampler {
 public:
  ScenarioSampler(const ClassLexicon& lexicon, ThresholdTable thresholds, ScenarioMix mix = {});

  Scenario draw(Rng& rng) const;
  Scenario draw(Rng& rng, ScenarioKind kind) const;
  /// Running draw with a fixed class/speed (speed-metric evaluation sets).
  Scenario draw_running(Rng& rng, const std::string& cls, double speed) const;

  const ThresholdTable& thresholds() const { return thresholds_; }
  const ClassLexicon& lexicon() const { return lexicon_; }

 private:
  Detection detection(Rng& rng, const std::string& cls, double h_lo, double h_hi) const;

  const ClassLexicon& lexicon_;
  ThresholdTable thresholds_;
  ScenarioMix mix_;
};

/// Executor state implied by a sample's input fields. The search side is
/// read back from the pre-armed search state.
ExecState replay_state(const EncoderInput& in);

/// Runs the execution rules on the scenario to produce the targets.
TrainSample oracle_label(const Scenario& s, const ExecContext& ctx);

nlohmann::json sample_to_json(const TrainSample& s);
TrainSample sample_from_json(const nlohmann::json& j);
std::string sample_line(const TrainSample& s);

struct DatagenOptions {
  std::size_t n = 1000;
  std::uint64_t seed = 1;
  std::size_t shards = 8;
  unsigned threads = 0;  // 0: hardware concurrency
  ScenarioMix mix;
  ThresholdTable thresholds = ThresholdTable::defaults();
};

struct DatagenStats {
  std::uint64_t seed = 0;
  std::size_t n = 0;
  std::size_t duplicates_dropped = 0;
  std::map<std::string, std::size_t> class_counts;
  std::map<std::string, std::size_t> scenario_counts;
  std::map<std::string, std::size_t> target_state_counts;
  double seconds = 0.0;

  nlohmann::json to_json() const;
};

/// Streams `n` labelled samples to `out` (JSONL, no duplicate lines) and
/// writes `<out>.stats.json`. Output bytes depend only on (options, lexicon).
DatagenStats generate_dataset(const DatagenOptions& opts, const ClassLexicon& lexicon,
                              const std::filesystem::path& out);

/// In-memory variant returning the lines.
std::vector<std::string> generate_lines(const DatagenOptions& opts, const ClassLexicon& lexicon,
                                        DatagenStats* stats = nullptr);

std::vector<TrainSample> read_corpus(const std::filesystem::path& path, std::size_t limit = 0);

struct ReplayReport {
  std::size_t checked = 0;
  std::size_t mismatches = 0;
  std::size_t first_bad_line = 0;  // 1-based, 0 when none
  std::string first_diff;
};

/// Re-derives every target with the execution rules.
ReplayReport replay_corpus(const std::filesystem::path& path, const ExecContext& ctx);
ReplayReport replay_samples(const std::vector<TrainSample>& samples, const ExecContext& ctx);

/// Running samples commanded at `speed`, for speed metrics.
std::vector<TrainSample> speed_eval_set(std::size_t n, std::uint64_t seed, double speed,
                                        const ClassLexicon& lexicon, const ExecContext& ctx);

/// Instruction texts for IOE training / evaluation.
std::vector<std::string> instruction_corpus(std::size_t n, std::uint64_t seed,
                                            const ClassLexicon& lexicon);

std::uint64_t fnv1a64(std::string_view s);

}  // namespace navstack
