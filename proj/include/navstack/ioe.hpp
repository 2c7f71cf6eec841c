#pragma once

#include <string>
#include <vector>

#include "navstack/l2mm.hpp"
#include "navstack/lexicon.hpp"
#include "navstack/planner.hpp"

namespace navstack {

struct IOEConfig {
  int d_model = 64;
  int layers = 2;
  int heads = 4;
  int ff = 256;
  int max_len = kMaxSeqLen;
  double dropout = 0.1;

  nn::TransformerConfig network(int vocab_size, int classes) const;
};

/// Trains the instruction-to-class classifier. Labels come from the lookup
/// oracle, so every text must contain a lexicon phrase.
Checkpoint train_ioe(const std::vector<std::string>& texts, const ClassLexicon& lexicon,
                     const TokenVocab& vocab, const IOEConfig& config, const TrainOptions& opts,
                     TrainResult* result = nullptr);

/// argmax over the class head; always returns a lexicon class.
class TrainedExtractor final : public ObjectExtractor {
 public:
  explicit TrainedExtractor(const Checkpoint& ckpt);
  std::string extract(std::string_view instruction) const override;
  std::vector<std::string> extract(const std::vector<std::string>& texts) const;

 private:
  TokenVocab vocab_;
  std::vector<std::string> labels_;
  mutable nn::Transformer<float> net_;
};

/// Fraction of texts where both extractors return the same class.
double extractor_agreement(const ObjectExtractor& a, const ObjectExtractor& b,
                           const std::vector<std::string>& texts);

}  // namespace navstack
