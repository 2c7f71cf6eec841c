#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "navstack/common.hpp"
#include "navstack/nn.hpp"
#include "navstack/tokenizer.hpp"

namespace navstack {

/// One supervised example: model input plus the rule oracle's answer.
struct TrainSample {
  EncoderInput input;
  MotionCommand motion;
  MissionState mission = MissionState::kRunning;
  SearchState search = SearchState::kSearching1;
};

struct L2MMConfig {
  std::string preset = "small";
  int d_model = 128;
  int layers = 2;
  int heads = 4;
  int ff = 512;
  int max_len = kMaxSeqLen;
  double dropout = 0.1;
  bool separators = true;

  nn::TransformerConfig network(int vocab_size) const;
  nlohmann::json to_json() const;
  static L2MMConfig from_json(const nlohmann::json& j);
};

/// tiny (grad checks), small (~0.47M), base (256/4/8/1024), large (~25.5M).
L2MMConfig preset_config(const std::string& name);

struct TrainOptions {
  int epochs = 25;
  int batch_size = 512;
  double lr = 1e-4;
  double weight_decay = 0.01;
  double beta = 10.0;
  double val_fraction = 0.2;  // 4:1 split
  std::uint64_t seed = 1;
  std::ostream* log_csv = nullptr;   // epoch,train_loss,val_loss,val_state_acc
  std::function<void(const std::string&)> progress;
};

/// Saved model: magic "L2MM", version, JSON header, float32 tensors.
struct Checkpoint {
  std::string kind = "l2mm";  // or "ioe"
  L2MMConfig config;
  nn::TransformerConfig network;
  TokenVocab vocab;
  std::vector<std::string> labels;  // IOE class order
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<nn::TensorInfo> tensors;
  nn::ParamVec<float> params;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Token sequences plus targets, ready for the trainer.
struct EncodedSet {
  std::vector<std::vector<std::int32_t>> seqs;
  std::vector<double> motion;  // motion_dim per sample
  std::vector<std::vector<int>> labels;
  int motion_dim = 0;

  std::size_t size() const { return seqs.size(); }
  nn::Batch batch(const std::vector<std::size_t>& idx, std::size_t begin, std::size_t end) const;
};

EncodedSet encode_samples(const std::vector<TrainSample>& samples, const TokenVocab& vocab,
                          bool separators, int max_len = kMaxSeqLen);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_state_acc = 0.0;
};

struct TrainResult {
  nn::ParamVec<float> best_params;
  std::vector<EpochLog> log;
  double initial_val_loss = 0.0;
  double best_val_loss = 0.0;
  double best_val_acc = 0.0;
  int best_epoch = 0;
  std::vector<std::size_t> val_indices;
};

/// Seeded 4:1 split, AdamW, lowest-validation-loss snapshot. Throws
/// TrainingError on a non-finite loss.
TrainResult train_network(nn::Transformer<float>& model, const EncodedSet& data,
                          const TrainOptions& opts);

/// Full L2MM training: builds the model from `config`, trains on `samples`.
Checkpoint train_l2mm(const std::vector<TrainSample>& samples, const L2MMConfig& config,
                      const TrainOptions& opts, const TokenVocab& vocab,
                      TrainResult* result = nullptr);

struct ModelOutput {
  MotionCommand motion;
  std::array<double, 2> mission_dist{};  // {success, running}
  std::array<double, 2> search_dist{};   // {searching_0, searching_1}

  MissionState mission() const;
  SearchState search() const;
};

int mission_label(MissionState s);
int search_label(SearchState s);

/// Read-only inference wrapper around a loaded checkpoint.
class L2MM {
 public:
  explicit L2MM(const Checkpoint& ckpt);

  ModelOutput predict(const EncoderInput& in);
  std::vector<ModelOutput> predict(const std::vector<EncoderInput>& in);
  /// Raw token input; must come from this checkpoint's vocabulary.
  ModelOutput forward_tokens(const std::vector<std::int32_t>& ids);

  const TokenVocab& vocab() const { return vocab_; }
  bool separators() const { return separators_; }
  nn::Transformer<float>& network() { return net_; }

 private:
  TokenVocab vocab_;
  bool separators_ = true;
  nn::Transformer<float> net_;
};

struct SpeedMetrics {
  double sigma_v = 0.0;
  double eps_v = 0.0;
  std::size_t n = 0;
};

/// Population std of v_x and |mean(v_x) - v_star|. Throws on empty input.
SpeedMetrics speed_metrics(const std::vector<double>& vx, double v_star);
SpeedMetrics eval_speed_metrics(L2MM& model, const std::vector<TrainSample>& eval_set, double v_star);

struct StateAccuracy {
  double joint = 0.0;
  double mission = 0.0;
  double search = 0.0;
  double motion_mse = 0.0;
  std::size_t n = 0;
};

StateAccuracy evaluate_states(L2MM& model, const std::vector<TrainSample>& samples);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;
};

/// Central differences on a double-precision copy with dropout off.
GradCheckResult grad_check(nn::Transformer<double>& model, const nn::Batch& batch, double beta,
                           double eps = 1e-5, std::size_t max_params = 600, std::uint64_t seed = 1);

/// Tiny-preset double model over `vocab` and a one-sample batch from `sample`.
nn::Transformer<double> tiny_double_model(const TokenVocab& vocab, std::uint64_t seed);
nn::Batch make_batch(const std::vector<TrainSample>& samples, const TokenVocab& vocab, bool separators);

}  // namespace navstack
