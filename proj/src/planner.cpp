#include "navstack/planner.hpp"

#include <algorithm>
#include <charconv>
#include <iostream>
#include <stdexcept>

namespace navstack {

namespace {

template <std::size_t N>
bool one_of(const std::string& w, const std::array<std::string_view, N>& set) {
  return std::find(set.begin(), set.end(), w) != set.end();
}

std::optional<double> parse_number(const std::string& s) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return v;
}

bool is_connective(const std::string& w) { return w == "then" || w == "and"; }

}  // namespace

MissionInstruction parse_instruction(std::string_view clause, const ClassLexicon& lexicon) {
  std::vector<std::string> words = split_words(clause);
  const std::string quoted = "'" + std::string(clause) + "'";
  if (words.empty()) throw PlanningError("empty instruction clause");

  // "0.4m/s" -> "0.4" "m/s"
  for (std::size_t i = 0; i < words.size(); ++i) {
    const auto& w = words[i];
    if (w.size() > 3 && w.compare(w.size() - 3, 3, "m/s") == 0) {
      words[i] = w.substr(0, w.size() - 3);
      words.insert(words.begin() + static_cast<std::ptrdiff_t>(i) + 1, "m/s");
    }
  }

  std::size_t i = 0;
  if (!one_of(words[i], kVerbs)) throw PlanningError("clause " + quoted + " does not start with a motion verb");
  ++i;
  if (i < words.size() && one_of(words[i], kPrepositions)) ++i;
  if (i < words.size() && one_of(words[i], kArticles)) ++i;

  std::size_t obj_end = i;
  while (obj_end < words.size() && words[obj_end] != "at") ++obj_end;
  if (obj_end == i) throw PlanningError("clause " + quoted + " names no object");

  const std::string phrase = join_words(words, i, obj_end);
  const auto cls = lexicon.resolve(phrase);
  if (!cls) throw PlanningError("clause " + quoted + ": unknown object '" + phrase + "'");

  double speed = kDefaultSpeed;
  if (obj_end < words.size()) {
    if (obj_end + 3 != words.size() || words[obj_end + 2] != "m/s") {
      throw PlanningError("clause " + quoted + ": expected 'at <speed> m/s'");
    }
    const auto v = parse_number(words[obj_end + 1]);
    if (!v) throw PlanningError("clause " + quoted + ": bad speed '" + words[obj_end + 1] + "'");
    speed = *v;
  }
  if (!(speed > 0.0 && speed <= kMaxSpeed)) {
    throw PlanningError("clause " + quoted + ": speed must be in (0, 1] m/s");
  }

  std::string text(clause);
  const auto first = text.find_first_not_of(" \t\n");
  const auto last = text.find_last_not_of(" \t\n,.;!?");
  text = first == std::string::npos ? std::string() : text.substr(first, last - first + 1);
  return MissionInstruction{text, *cls, speed};
}

std::vector<std::string> split_clauses(std::string_view task) {
  std::vector<std::string> clauses;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) clauses.push_back(cur);
    cur.clear();
  };
  std::vector<std::string> raw;
  {
    std::string tok;
    for (char c : task) {
      if (std::isspace(static_cast<unsigned char>(c))) {
        if (!tok.empty()) raw.push_back(tok);
        tok.clear();
      } else {
        tok.push_back(c);
      }
    }
    if (!tok.empty()) raw.push_back(tok);
  }
  for (std::size_t i = 0; i < raw.size(); ++i) {
    std::string tok = raw[i];
    std::string lower;
    for (char c : tok) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (is_connective(lower)) {
      flush();
      continue;
    }
    if (lower == "after" && i + 1 < raw.size()) {
      std::string next;
      for (char c : raw[i + 1]) next.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
      if (next == "that" || next == "that,") {
        flush();
        ++i;
        continue;
      }
    }
    bool boundary = false;
    while (!tok.empty() && (tok.back() == ',' || tok.back() == ';' || tok.back() == '.' ||
                            tok.back() == '!')) {
      tok.pop_back();
      boundary = true;
    }
    if (!tok.empty()) {
      if (!cur.empty()) cur.push_back(' ');
      cur += tok;
    }
    if (boundary) flush();
  }
  flush();
  return clauses;
}

std::vector<MissionInstruction> plan_template(const LongHorizonTask& task,
                                              const ClassLexicon& lexicon) {
  if (task.text.find_first_not_of(" \t\n") == std::string::npos) {
    throw PlanningError("task text is empty");
  }
  std::vector<MissionInstruction> plan;
  for (const auto& clause : split_clauses(task.text)) plan.push_back(parse_instruction(clause, lexicon));
  if (plan.empty()) throw PlanningError("task produced no instructions");
  return plan;
}

nlohmann::json planner_request(const LongHorizonTask& task, const PlannerFeedback& feedback) {
  return {{"system", task.system_prompt},
          {"task", task.text},
          {"feedback", {{"state", std::string(to_string(feedback.state))}, {"index", feedback.index}}}};
}

std::vector<MissionInstruction> parse_planner_response(const nlohmann::json& response,
                                                       const ClassLexicon& lexicon) {
  if (!response.is_object() || !response.contains("instructions") ||
      !response["instructions"].is_array()) {
    throw BridgeError("planner response lacks an 'instructions' array");
  }
  std::vector<MissionInstruction> plan;
  for (const auto& item : response["instructions"]) {
    if (!item.is_object() || !item.contains("text") || !item.contains("object")) {
      throw BridgeError("planner instruction needs 'text' and 'object'");
    }
    MissionInstruction mi;
    mi.text = item["text"].get<std::string>();
    const auto cls = lexicon.resolve(item["object"].get<std::string>());
    if (!cls) throw BridgeError("planner named unknown object '" + item["object"].get<std::string>() + "'");
    mi.target_class = *cls;
    mi.speed = item.value("speed", kDefaultSpeed);
    if (!(mi.speed > 0.0 && mi.speed <= kMaxSpeed)) throw BridgeError("planner speed outside (0, 1]");
    plan.push_back(std::move(mi));
  }
  if (plan.empty()) throw BridgeError("planner returned no instructions");
  return plan;
}

Planner::Planner(const ClassLexicon& lexicon) : lexicon_(lexicon) {}

Planner::Planner(const ClassLexicon& lexicon, std::shared_ptr<JsonLineTransport> bridge,
                 std::chrono::milliseconds timeout)
    : lexicon_(lexicon), bridge_(std::move(bridge)), timeout_(timeout) {}

std::vector<MissionInstruction> Planner::plan(const LongHorizonTask& task,
                                              const PlannerFeedback& feedback) {
  if (task.text.find_first_not_of(" \t\n") == std::string::npos) {
    throw PlanningError("task text is empty");
  }
  used_fallback_ = false;
  if (bridge_) {
    try {
      return parse_planner_response(bridge_->request(planner_request(task, feedback), timeout_),
                                    lexicon_);
    } catch (const BridgeError& e) {
      warnings_.push_back(std::string("planner bridge failed (") + e.what() +
                          "); falling back to template planner");
      std::cerr << "warning: " << warnings_.back() << '\n';
      used_fallback_ = true;
    }
  }
  return plan_template(task, lexicon_);
}

std::optional<std::size_t> advance(std::size_t plan_size, const PlannerFeedback& feedback) {
  if (feedback.index >= plan_size) {
    throw std::out_of_range("feedback index " + std::to_string(feedback.index) +
                            " outside plan of " + std::to_string(plan_size));
  }
  if (feedback.state == MissionState::kRunning) return feedback.index;
  if (feedback.index + 1 < plan_size) return feedback.index + 1;
  return std::nullopt;
}

std::string LookupExtractor::extract(std::string_view instruction) const {
  const auto words = split_words(instruction);
  const std::size_t max_n = std::min(lexicon_.max_phrase_words(), words.size());
  for (std::size_t n = max_n; n >= 1; --n) {
    for (std::size_t i = 0; i + n <= words.size(); ++i) {
      if (auto cls = lexicon_.synonyms().owner(join_words(words, i, i + n))) return *cls;
    }
  }
  throw PlanningError("no known object in '" + std::string(instruction) + "'");
}

}  // namespace navstack
