#include "navstack/ioe.hpp"

#include <numeric>

namespace navstack {

nn::TransformerConfig IOEConfig::network(int vocab_size, int classes) const {
  nn::TransformerConfig c;
  c.vocab_size = vocab_size;
  c.d_model = d_model;
  c.layers = layers;
  c.heads = heads;
  c.ff = ff;
  c.max_len = max_len;
  c.dropout = dropout;
  c.motion_dim = 0;
  c.class_heads = {classes};
  return c;
}

namespace {

std::vector<std::int32_t> encode_text(const std::string& text, const TokenVocab& vocab, int max_len) {
  auto ids = tokenize_text(text, vocab);
  if (ids.empty()) throw EncodingError("instruction has no tokens");
  if (ids.size() > static_cast<std::size_t>(max_len)) throw EncodingError("instruction longer than max_len");
  return ids;
}

}  // namespace

Checkpoint train_ioe(const std::vector<std::string>& texts, const ClassLexicon& lexicon,
                     const TokenVocab& vocab, const IOEConfig& config, const TrainOptions& opts,
                     TrainResult* result) {
  if (texts.empty()) throw TrainingError("IOE corpus is empty");
  const LookupExtractor oracle(lexicon);
  EncodedSet data;
  data.motion_dim = 0;
  data.labels.resize(1);
  for (const auto& t : texts) {
    data.seqs.push_back(encode_text(t, vocab, config.max_len));
    data.labels[0].push_back(static_cast<int>(lexicon.index_of(oracle.extract(t))));
  }
  nn::Transformer<float> model(config.network(static_cast<int>(vocab.size()),
                                               static_cast<int>(lexicon.size())));
  TrainResult r = train_network(model, data, opts);

  Checkpoint c;
  c.kind = "ioe";
  c.config.preset = "ioe";
  c.config.d_model = config.d_model;
  c.config.layers = config.layers;
  c.config.heads = config.heads;
  c.config.ff = config.ff;
  c.config.max_len = config.max_len;
  c.config.dropout = config.dropout;
  c.config.separators = false;
  c.network = model.config();
  c.vocab = vocab;
  c.labels = lexicon.classes();
  c.tensors = model.tensors();
  c.params = model.params();
  c.metadata = {{"epochs", opts.epochs},
                {"seed", opts.seed},
                {"samples", texts.size()},
                {"best_epoch", r.best_epoch},
                {"best_val_loss", r.best_val_loss},
                {"best_val_acc", r.best_val_acc}};
  if (result) *result = std::move(r);
  return c;
}

TrainedExtractor::TrainedExtractor(const Checkpoint& ckpt)
    : vocab_(ckpt.vocab), labels_(ckpt.labels), net_(ckpt.network) {
  if (ckpt.kind != "ioe") throw Error("checkpoint kind '" + ckpt.kind + "' is not an IOE model");
  if (ckpt.network.class_heads.size() != 1 ||
      static_cast<std::size_t>(ckpt.network.class_heads[0]) != labels_.size()) {
    throw Error("IOE checkpoint head does not match its label list");
  }
  net_.params() = ckpt.params;
}

std::string TrainedExtractor::extract(std::string_view instruction) const {
  return extract(std::vector<std::string>{std::string(instruction)}).front();
}

std::vector<std::string> TrainedExtractor::extract(const std::vector<std::string>& texts) const {
  std::vector<std::string> out;
  out.reserve(texts.size());
  constexpr std::size_t kChunk = 1024;
  for (std::size_t b = 0; b < texts.size(); b += kChunk) {
    nn::Batch batch;
    const auto e = std::min(texts.size(), b + kChunk);
    for (std::size_t i = b; i < e; ++i) batch.add(encode_text(texts[i], vocab_, net_.config().max_len));
    const auto res = net_.forward(batch);
    for (Eigen::Index r = 0; r < res.probs[0].rows(); ++r) {
      Eigen::Index arg = 0;
      res.probs[0].row(r).maxCoeff(&arg);
      out.push_back(labels_[static_cast<std::size_t>(arg)]);
    }
  }
  return out;
}

double extractor_agreement(const ObjectExtractor& a, const ObjectExtractor& b,
                           const std::vector<std::string>& texts) {
  if (texts.empty()) throw Error("agreement needs at least one text");
  std::size_t same = 0;
  for (const auto& t : texts) same += a.extract(t) == b.extract(t);
  return static_cast<double>(same) / static_cast<double>(texts.size());
}

}  // namespace navstack
