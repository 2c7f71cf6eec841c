#include "navstack/tokenizer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <set>

#include "navstack/planner.hpp"

namespace navstack {

namespace {

int bucket_index(double v) {
  if (!(v >= 0.0 && v <= 1.0)) throw EncodingError("value " + std::to_string(v) + " outside [0, 1]");
  return static_cast<int>(std::lround(round2(v) * 100.0));
}

std::optional<double> as_number(const std::string& w) {
  double v = 0.0;
  const char* end = w.data() + w.size();
  auto [ptr, ec] = std::from_chars(w.data(), end, v);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return v;
}

}  // namespace

std::string bucket_label(double v) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%d.%02d", bucket_index(v) / 100, bucket_index(v) % 100);
  return buf;
}

std::string class_token(const std::string& cls) {
  std::string t = cls;
  std::replace(t.begin(), t.end(), ' ', '_');
  return t;
}

std::string state_token(MissionState s) { return "<" + std::string(to_string(s)) + ">"; }
std::string state_token(SearchState s) { return "<" + std::string(to_string(s)) + ">"; }

TokenVocab TokenVocab::build(const ClassLexicon& lexicon) {
  std::vector<std::string> t = {kPad, kUnk, kSep, kNoObj};
  t.push_back(state_token(MissionState::kSuccess));
  t.push_back(state_token(MissionState::kRunning));
  t.push_back(state_token(SearchState::kSearching0));
  t.push_back(state_token(SearchState::kSearching1));
  for (int i = 0; i <= 100; ++i) t.push_back(bucket_label(i / 100.0));
  for (const auto& c : lexicon.classes()) t.push_back(class_token(c));

  std::set<std::string> words;
  for (auto v : kVerbs) words.emplace(v);
  for (auto v : kPrepositions) words.emplace(v);
  for (auto v : kArticles) words.emplace(v);
  words.emplace("at");
  words.emplace("m/s");
  for (const auto& [cls, syns] : lexicon.synonyms().entries()) {
    for (const auto& s : syns) {
      for (auto& w : split_words(s)) words.insert(w);
    }
  }
  std::set<std::string> taken(t.begin(), t.end());
  for (const auto& w : words) {
    if (!taken.count(w)) t.push_back(w);
  }
  return from_tokens(std::move(t));
}

TokenVocab TokenVocab::from_tokens(std::vector<std::string> tokens) {
  TokenVocab v;
  v.tokens_ = std::move(tokens);
  if (v.tokens_.empty() || v.tokens_[0] != kPad) throw EncodingError("vocabulary must start with [PAD]");
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    if (!v.ids_.emplace(v.tokens_[i], static_cast<std::int32_t>(i)).second) {
      throw EncodingError("duplicate token '" + v.tokens_[i] + "'");
    }
  }
  auto need = [&](const char* tok) {
    auto it = v.ids_.find(tok);
    if (it == v.ids_.end()) throw EncodingError(std::string("vocabulary lacks ") + tok);
    return it->second;
  };
  v.unk_ = need(kUnk);
  v.sep_ = need(kSep);
  v.noobj_ = need(kNoObj);
  v.bucket0_ = need("0.00");
  for (int i = 0; i <= 100; ++i) {
    if (v.tokens_.size() <= static_cast<std::size_t>(v.bucket0_ + i) ||
        v.tokens_[static_cast<std::size_t>(v.bucket0_ + i)] != bucket_label(i / 100.0)) {
      throw EncodingError("bucket tokens must be contiguous");
    }
  }
  return v;
}

std::int32_t TokenVocab::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? unk_ : it->second;
}

std::optional<std::int32_t> TokenVocab::find(const std::string& token) const {
  auto it = ids_.find(token);
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

const std::string& TokenVocab::token(std::int32_t id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw EncodingError("token id " + std::to_string(id) + " outside vocabulary");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::int32_t TokenVocab::bucket(double v) const { return bucket0_ + bucket_index(v); }

std::optional<double> TokenVocab::bucket_value(std::int32_t id) const {
  if (id < bucket0_ || id > bucket0_ + 100) return std::nullopt;
  return (id - bucket0_) / 100.0;
}

std::vector<std::int32_t> tokenize_text(const std::string& text, const TokenVocab& vocab) {
  std::vector<std::int32_t> out;
  for (auto w : split_words(text)) {
    std::string unit;
    if (w.size() > 3 && w.compare(w.size() - 3, 3, "m/s") == 0) {
      unit = "m/s";
      w.resize(w.size() - 3);
    }
    if (auto v = as_number(w); v && *v >= 0.0 && *v <= 1.0) {
      out.push_back(vocab.bucket(*v));
    } else {
      out.push_back(vocab.id(w));
    }
    if (!unit.empty()) out.push_back(vocab.id(unit));
  }
  return out;
}

std::vector<std::int32_t> encode(const EncoderInput& in, const TokenVocab& vocab, bool separators,
                                 int max_len) {
  std::vector<std::int32_t> ids;
  ids.reserve(static_cast<std::size_t>(max_len));
  auto sep = [&] {
    if (separators) ids.push_back(vocab.sep());
  };
  auto text = [&](const std::string& s) {
    const auto t = tokenize_text(s, vocab);
    ids.insert(ids.end(), t.begin(), t.end());
  };
  const Detection none{};
  const Detection& d = in.detection ? *in.detection : none;
  if (in.detection && !d.valid()) throw EncodingError("detection fields outside [0, 1]");

  // One separator closes each of the ten fields.
  text(in.prev_instruction);
  sep();
  text(in.curr_instruction);
  sep();
  ids.push_back(in.detection ? vocab.id(class_token(d.label)) : vocab.noobj());
  sep();
  ids.push_back(vocab.bucket(in.detection ? d.confidence : 0.0));
  sep();
  ids.push_back(vocab.bucket(in.detection ? d.cx : 0.0));
  sep();
  ids.push_back(vocab.bucket(in.detection ? d.cy : 0.0));
  sep();
  ids.push_back(vocab.bucket(in.detection ? d.w : 0.0));
  sep();
  ids.push_back(vocab.bucket(in.detection ? d.h : 0.0));
  sep();
  ids.push_back(vocab.id(state_token(in.mission)));
  sep();
  ids.push_back(vocab.id(state_token(in.search)));
  sep();
  if (ids.size() > static_cast<std::size_t>(max_len)) {
    throw EncodingError("encoded input has " + std::to_string(ids.size()) + " tokens, limit " +
                        std::to_string(max_len));
  }
  return ids;
}

std::vector<std::int32_t> encode_padded(const EncoderInput& in, const TokenVocab& vocab,
                                        bool separators, int max_len) {
  auto ids = encode(in, vocab, separators, max_len);
  ids.resize(static_cast<std::size_t>(max_len), vocab.pad());
  return ids;
}

std::vector<std::int32_t> unpad(const std::vector<std::int32_t>& ids) {
  auto end = ids.end();
  while (end != ids.begin() && *(end - 1) == 0) --end;
  return {ids.begin(), end};
}

DecodedFields decode_fields(const std::vector<std::int32_t>& ids, const TokenVocab& vocab) {
  const auto u = unpad(ids);
  std::vector<std::size_t> seps;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (u[i] == vocab.sep()) seps.push_back(i);
  }
  if (seps.size() != 10) throw EncodingError("expected 10 separators, found " + std::to_string(seps.size()));
  auto value = [&](std::size_t field) {
    const auto v = vocab.bucket_value(u[seps[field - 1] + 1]);
    if (!v) throw EncodingError("field " + std::to_string(field) + " is not a bucket token");
    return *v;
  };
  DecodedFields f;
  f.object = vocab.token(u[seps[1] + 1]);
  f.confidence = value(3);
  f.cx = value(4);
  f.cy = value(5);
  f.w = value(6);
  f.h = value(7);
  const std::string& sm = vocab.token(u[seps[7] + 1]);
  const std::string& ss = vocab.token(u[seps[8] + 1]);
  f.mission = parse_mission_state(sm.substr(1, sm.size() - 2));
  f.search = parse_search_state(ss.substr(1, ss.size() - 2));
  return f;
}

}  // namespace navstack
