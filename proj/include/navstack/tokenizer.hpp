#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "navstack/common.hpp"
#include "navstack/lexicon.hpp"

namespace navstack {

/// Everything the language-to-motion model sees on one tick.
struct EncoderInput {
  std::string prev_instruction;
  std::string curr_instruction;
  std::optional<Detection> detection;  // label is the predicted object
  MissionState mission = MissionState::kRunning;
  SearchState search = SearchState::kSearching1;
};

inline constexpr const char* kPad = "[PAD]";
inline constexpr const char* kUnk = "[UNK]";
inline constexpr const char* kSep = "[SEP]";
inline constexpr const char* kNoObj = "[NOOBJ]";
inline constexpr int kMaxSeqLen = 64;

class TokenVocab {
 public:
  /// Specials, state tokens, the 101 buckets, one token per class, then the
  /// grammar and lexicon words, in that order.
  static TokenVocab build(const ClassLexicon& lexicon);
  static TokenVocab from_tokens(std::vector<std::string> tokens);

  std::int32_t id(const std::string& token) const;  // [UNK] when missing
  std::optional<std::int32_t> find(const std::string& token) const;
  const std::string& token(std::int32_t id) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::int32_t pad() const { return 0; }
  std::int32_t unk() const { return unk_; }
  std::int32_t sep() const { return sep_; }
  std::int32_t noobj() const { return noobj_; }

  /// Token id of the 2-decimal bucket for v in [0, 1].
  std::int32_t bucket(double v) const;
  /// Value of a bucket token, if `id` is one.
  std::optional<double> bucket_value(std::int32_t id) const;

  bool operator==(const TokenVocab& o) const { return tokens_ == o.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> ids_;
  std::int32_t unk_ = 1;
  std::int32_t sep_ = 2;
  std::int32_t noobj_ = 3;
  std::int32_t bucket0_ = -1;
};

std::string bucket_label(double v);   // "0.88"
std::string class_token(const std::string& cls);  // "sports_ball"
std::string state_token(MissionState s);
std::string state_token(SearchState s);

/// Token ids of an instruction sentence; numbers in [0, 1] become buckets.
std::vector<std::int32_t> tokenize_text(const std::string& text, const TokenVocab& vocab);

/// Unpadded encoding. With `separators` off, the [SEP] tokens are omitted
/// (the ablation). Throws EncodingError when longer than `max_len`.
std::vector<std::int32_t> encode(const EncoderInput& in, const TokenVocab& vocab,
                                 bool separators = true, int max_len = kMaxSeqLen);

/// encode() padded with [PAD] to `max_len`.
std::vector<std::int32_t> encode_padded(const EncoderInput& in, const TokenVocab& vocab,
                                        bool separators = true, int max_len = kMaxSeqLen);

/// Strips trailing [PAD].
std::vector<std::int32_t> unpad(const std::vector<std::int32_t>& ids);

struct DecodedFields {
  std::string object;  // class token or [NOOBJ]
  double confidence = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;
  MissionState mission = MissionState::kRunning;
  SearchState search = SearchState::kSearching1;
};

/// Inverse of encode() for the detection and state fields (separator form only).
DecodedFields decode_fields(const std::vector<std::int32_t>& ids, const TokenVocab& vocab);

}  // namespace navstack
