#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace navstack::nn {

// Eigen-aligned so that vectorised reductions over mapped tensors take the
// same path in every allocation; plain std::vector alignment varies and with
// it the float summation order.
template <typename S>
using ParamVec = std::vector<S, Eigen::aligned_allocator<S>>;

/// Encoder geometry plus output heads. `motion_dim` regression outputs and
/// one softmax head per entry of `class_heads`.
struct TransformerConfig {
  int vocab_size = 0;
  int d_model = 128;
  int layers = 2;
  int heads = 4;
  int ff = 512;
  int max_len = 64;
  double dropout = 0.1;
  int motion_dim = 3;
  std::vector<int> class_heads = {2, 2};

  void validate() const;
};

struct TensorInfo {
  std::string name;
  int rows = 0;
  int cols = 0;
  std::size_t offset = 0;
  bool decay = false;  // weight decay applies (matrices and embeddings only)

  std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
};

/// Variable-length samples packed back to back. Padding never enters the
/// computation, which is what masking would achieve.
struct Batch {
  std::vector<std::int32_t> tokens;
  std::vector<std::size_t> offsets{0};  // size = samples + 1
  std::vector<double> motion;           // samples * motion_dim
  std::vector<std::vector<int>> labels; // one vector per class head

  std::size_t samples() const { return offsets.size() - 1; }
  std::size_t length(std::size_t i) const { return offsets[i + 1] - offsets[i]; }
  void add(const std::vector<std::int32_t>& seq);
};

struct LossParts {
  double total = 0.0;
  double motion = 0.0;
  std::vector<double> ce;          // mean cross-entropy per class head
  std::vector<std::size_t> correct;  // argmax hits per class head
  std::size_t joint_correct = 0;   // samples with every class head right
  std::size_t samples = 0;
};

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class S>
struct Output {
  Mat<S> motion;               // samples x motion_dim
  std::vector<Mat<S>> probs;   // per class head: samples x classes
};

/// (beta / N) * sum ||pred - target||^2
double motion_loss(const std::vector<std::vector<double>>& pred,
                   const std::vector<std::vector<double>>& target, double beta);
/// -log max(p[label], 1e-12)
double state_loss(const std::vector<double>& dist, int label);

inline constexpr double kProbFloor = 1e-12;

template <class S>
class Transformer {
 public:
  explicit Transformer(TransformerConfig cfg);
  ~Transformer();
  // Copies share no activation cache, so a copy is safe to run on another thread.
  Transformer(const Transformer& other);
  Transformer& operator=(const Transformer& other);
  Transformer(Transformer&&) noexcept;
  Transformer& operator=(Transformer&&) noexcept;

  const TransformerConfig& config() const { return cfg_; }
  const std::vector<TensorInfo>& tensors() const { return tensors_; }
  const TensorInfo& tensor(const std::string& name) const;
  std::size_t parameter_count() const { return params_.size(); }

  ParamVec<S>& params() { return params_; }
  const ParamVec<S>& params() const { return params_; }
  const ParamVec<S>& grads() const { return grads_; }

  void init(std::uint64_t seed);

  /// Inference (dropout off) unless `train` is set.
  Output<S> forward(const Batch& batch, bool train = false, std::uint64_t dropout_seed = 0);

  /// Loss of `batch`; when `backward` is set, also fills grads().
  LossParts loss(const Batch& batch, double beta, bool backward = false, bool train = false,
                 std::uint64_t dropout_seed = 0);

  /// Hash of the ReLU on/off pattern of the last forward pass. Finite
  /// differences are only meaningful when a perturbation leaves it unchanged.
  std::uint64_t relu_signature() const;

 private:
  struct LayerCache;
  struct Cache;

  S* p(const std::string& name);
  S* g(const std::string& name);
  void backward(const Batch& batch, const Mat<S>& d_motion, const std::vector<Mat<S>>& d_logits);

  TransformerConfig cfg_;
  std::vector<TensorInfo> tensors_;
  ParamVec<S> params_;
  ParamVec<S> grads_;
  std::unordered_map<std::string, std::size_t> by_name_;
  std::unique_ptr<Cache> cache_;
};

/// Decoupled-weight-decay Adam over a flat parameter vector.
class AdamW {
 public:
  struct Options {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
  };

  AdamW(std::size_t n, Options opts);
  void step(ParamVec<float>& params, const ParamVec<float>& grads,
            const std::vector<TensorInfo>& tensors);
  std::uint64_t steps() const { return t_; }

 private:
  Options opts_;
  std::vector<float> m_;
  std::vector<float> v_;
  std::uint64_t t_ = 0;
};

extern template class Transformer<float>;
extern template class Transformer<double>;

}  // namespace navstack::nn
