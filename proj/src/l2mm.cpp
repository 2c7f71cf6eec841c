#include "navstack/l2mm.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

namespace navstack {

namespace {

constexpr char kMagic[4] = {'L', '2', 'M', 'M'};

template <class T>
void put_le(std::ostream& out, T v) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  out.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
T get_le(std::istream& in) {
  unsigned char b[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(b), sizeof(T))) throw Error("checkpoint truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.index(i)]);
}

nlohmann::json network_json(const nn::TransformerConfig& c) {
  return {{"vocab_size", c.vocab_size}, {"d_model", c.d_model},   {"layers", c.layers},
          {"heads", c.heads},           {"ff", c.ff},             {"max_len", c.max_len},
          {"dropout", c.dropout},       {"motion_dim", c.motion_dim}, {"class_heads", c.class_heads}};
}

nn::TransformerConfig network_from_json(const nlohmann::json& j) {
  nn::TransformerConfig c;
  c.vocab_size = j.at("vocab_size");
  c.d_model = j.at("d_model");
  c.layers = j.at("layers");
  c.heads = j.at("heads");
  c.ff = j.at("ff");
  c.max_len = j.at("max_len");
  c.dropout = j.at("dropout");
  c.motion_dim = j.at("motion_dim");
  c.class_heads = j.at("class_heads").get<std::vector<int>>();
  return c;
}

bool finite(const nn::LossParts& lp) { return std::isfinite(lp.total); }

}  // namespace

nn::TransformerConfig L2MMConfig::network(int vocab_size) const {
  nn::TransformerConfig c;
  c.vocab_size = vocab_size;
  c.d_model = d_model;
  c.layers = layers;
  c.heads = heads;
  c.ff = ff;
  c.max_len = max_len;
  c.dropout = dropout;
  c.motion_dim = 3;
  c.class_heads = {2, 2};
  return c;
}

nlohmann::json L2MMConfig::to_json() const {
  return {{"preset", preset}, {"d_model", d_model}, {"layers", layers},
          {"heads", heads},   {"ff", ff},           {"max_len", max_len},
          {"dropout", dropout}, {"separators", separators}};
}

L2MMConfig L2MMConfig::from_json(const nlohmann::json& j) {
  L2MMConfig c;
  c.preset = j.value("preset", std::string("custom"));
  c.d_model = j.at("d_model");
  c.layers = j.at("layers");
  c.heads = j.at("heads");
  c.ff = j.at("ff");
  c.max_len = j.value("max_len", kMaxSeqLen);
  c.dropout = j.value("dropout", 0.1);
  c.separators = j.value("separators", true);
  return c;
}

L2MMConfig preset_config(const std::string& name) {
  L2MMConfig c;
  c.preset = name;
  if (name == "tiny") {
    c.d_model = 8, c.layers = 2, c.heads = 2, c.ff = 16;
  } else if (name == "small") {
    c.d_model = 128, c.layers = 2, c.heads = 4, c.ff = 512;
  } else if (name == "base") {
    c.d_model = 256, c.layers = 4, c.heads = 8, c.ff = 1024;
  } else if (name == "large") {
    c.d_model = 512, c.layers = 8, c.heads = 8, c.ff = 2048;
  } else {
    throw Error("unknown preset '" + name + "' (tiny, small, base, large)");
  }
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& t : ckpt.tensors) {
    tensors.push_back({{"name", t.name}, {"shape", {t.rows, t.cols}}, {"offset", t.offset}});
  }
  const nlohmann::json header = {{"kind", ckpt.kind},
                                 {"config", ckpt.config.to_json()},
                                 {"network", network_json(ckpt.network)},
                                 {"vocab", ckpt.vocab.tokens()},
                                 {"labels", ckpt.labels},
                                 {"metadata", ckpt.metadata},
                                 {"tensors", tensors},
                                 {"param_count", ckpt.params.size()}};
  const std::string h = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out.write(kMagic, 4);
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint64_t>(out, h.size());
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  for (float v : ckpt.params) put_le<float>(out, v);
  if (!out) throw Error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw Error(path.string() + " is not a checkpoint (bad magic)");
  }
  const auto version = get_le<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw Error("unsupported checkpoint version " + std::to_string(version));
  }
  const auto hlen = get_le<std::uint64_t>(in);
  std::string h(hlen, '\0');
  if (!in.read(h.data(), static_cast<std::streamsize>(hlen))) throw Error("checkpoint header truncated");
  const auto header = nlohmann::json::parse(h);

  Checkpoint c;
  c.kind = header.at("kind");
  c.config = L2MMConfig::from_json(header.at("config"));
  c.network = network_from_json(header.at("network"));
  c.vocab = TokenVocab::from_tokens(header.at("vocab").get<std::vector<std::string>>());
  c.labels = header.at("labels").get<std::vector<std::string>>();
  c.metadata = header.at("metadata");
  if (static_cast<std::size_t>(c.network.vocab_size) != c.vocab.size()) {
    throw Error("checkpoint vocabulary size does not match its network config");
  }
  // Shapes must agree with what the config implies.
  const nn::Transformer<float> probe(c.network);
  const auto& t = header.at("tensors");
  if (t.size() != probe.tensors().size()) throw Error("checkpoint tensor table does not match config");
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto& want = probe.tensors()[i];
    const auto shape = t[i].at("shape").get<std::vector<int>>();
    if (t[i].at("name") != want.name || shape.size() != 2 || shape[0] != want.rows ||
        shape[1] != want.cols || t[i].at("offset").get<std::size_t>() != want.offset) {
      throw Error("checkpoint tensor " + t[i].at("name").get<std::string>() + " has an unexpected shape");
    }
  }
  c.tensors = probe.tensors();
  c.params.resize(probe.parameter_count());
  for (auto& v : c.params) v = get_le<float>(in);
  return c;
}

nn::Batch EncodedSet::batch(const std::vector<std::size_t>& idx, std::size_t begin,
                            std::size_t end) const {
  nn::Batch b;
  b.labels.resize(labels.size());
  for (std::size_t i = begin; i < end; ++i) {
    const std::size_t s = idx[i];
    b.add(seqs[s]);
    for (int k = 0; k < motion_dim; ++k) b.motion.push_back(motion[s * motion_dim + k]);
    for (std::size_t h = 0; h < labels.size(); ++h) b.labels[h].push_back(labels[h][s]);
  }
  return b;
}

int mission_label(MissionState s) { return s == MissionState::kSuccess ? 0 : 1; }
int search_label(SearchState s) { return s == SearchState::kSearching0 ? 0 : 1; }

EncodedSet encode_samples(const std::vector<TrainSample>& samples, const TokenVocab& vocab,
                          bool separators, int max_len) {
  EncodedSet e;
  e.motion_dim = 3;
  e.labels.resize(2);
  e.seqs.reserve(samples.size());
  e.motion.reserve(samples.size() * 3);
  for (const auto& s : samples) {
    e.seqs.push_back(encode(s.input, vocab, separators, max_len));
    e.motion.push_back(s.motion.v_x);
    e.motion.push_back(s.motion.v_y);
    e.motion.push_back(s.motion.theta);
    e.labels[0].push_back(mission_label(s.mission));
    e.labels[1].push_back(search_label(s.search));
  }
  return e;
}

TrainResult train_network(nn::Transformer<float>& model, const EncodedSet& data,
                          const TrainOptions& opts) {
  if (data.size() < 2) throw TrainingError("training needs at least two samples");
  if (!(opts.beta > 0.0)) throw TrainingError("beta must be positive");
  if (opts.epochs < 1 || opts.batch_size < 1) throw TrainingError("epochs and batch size must be positive");

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng(Rng::derive(opts.seed, 0x5117));
  shuffle(order, split_rng);
  auto n_val = static_cast<std::size_t>(std::llround(opts.val_fraction * static_cast<double>(data.size())));
  n_val = std::clamp<std::size_t>(n_val, 1, data.size() - 1);
  std::vector<std::size_t> val(order.end() - static_cast<std::ptrdiff_t>(n_val), order.end());
  std::vector<std::size_t> train(order.begin(), order.end() - static_cast<std::ptrdiff_t>(n_val));

  model.init(Rng::derive(opts.seed, 0x1A17));
  nn::AdamW::Options ao;
  ao.lr = opts.lr;
  ao.weight_decay = opts.weight_decay;
  nn::AdamW adam(model.parameter_count(), ao);

  auto evaluate = [&](double& loss, double& acc) {
    double total = 0.0;
    std::size_t joint = 0;
    constexpr std::size_t kEvalBatch = 1024;
    for (std::size_t b = 0; b < val.size(); b += kEvalBatch) {
      const auto e = std::min(val.size(), b + kEvalBatch);
      const auto lp = model.loss(data.batch(val, b, e), opts.beta);
      total += lp.total * static_cast<double>(lp.samples);
      joint += lp.joint_correct;
    }
    loss = total / static_cast<double>(val.size());
    acc = static_cast<double>(joint) / static_cast<double>(val.size());
  };

  TrainResult r;
  r.val_indices = val;
  double init_acc = 0.0;
  evaluate(r.initial_val_loss, init_acc);
  r.best_val_loss = std::numeric_limits<double>::infinity();
  if (opts.log_csv) *opts.log_csv << "epoch,train_loss,val_loss,val_state_acc\n";

  std::uint64_t step = 0;
  for (int epoch = 1; epoch <= opts.epochs; ++epoch) {
    Rng erng(Rng::derive(opts.seed, 0xE90C, static_cast<std::uint64_t>(epoch)));
    shuffle(train, erng);
    double total = 0.0;
    const auto bs = static_cast<std::size_t>(opts.batch_size);
    for (std::size_t b = 0; b < train.size(); b += bs) {
      const auto e = std::min(train.size(), b + bs);
      const auto lp = model.loss(data.batch(train, b, e), opts.beta, true, true,
                                 Rng::derive(opts.seed, 0xD50F, step));
      if (!finite(lp)) {
        std::ostringstream msg;
        msg << "non-finite loss at epoch " << epoch << ", step " << step << " (motion " << lp.motion
            << ")";
        throw TrainingError(msg.str());
      }
      adam.step(model.params(), model.grads(), model.tensors());
      total += lp.total * static_cast<double>(lp.samples);
      ++step;
    }
    EpochLog log;
    log.epoch = epoch;
    log.train_loss = total / static_cast<double>(train.size());
    evaluate(log.val_loss, log.val_state_acc);
    if (!std::isfinite(log.val_loss)) throw TrainingError("non-finite validation loss at epoch " + std::to_string(epoch));
    if (log.val_loss < r.best_val_loss) {
      r.best_val_loss = log.val_loss;
      r.best_val_acc = log.val_state_acc;
      r.best_epoch = epoch;
      r.best_params = model.params();
    }
    r.log.push_back(log);
    if (opts.log_csv) {
      *opts.log_csv << log.epoch << ',' << log.train_loss << ',' << log.val_loss << ','
                    << log.val_state_acc << '\n';
      opts.log_csv->flush();
    }
    if (opts.progress) {
      std::ostringstream msg;
      msg << "epoch " << epoch << "/" << opts.epochs << " train " << log.train_loss << " val "
          << log.val_loss << " acc " << log.val_state_acc;
      opts.progress(msg.str());
    }
  }
  model.params() = r.best_params;
  return r;
}

Checkpoint train_l2mm(const std::vector<TrainSample>& samples, const L2MMConfig& config,
                      const TrainOptions& opts, const TokenVocab& vocab, TrainResult* result) {
  if (samples.empty()) throw TrainingError("dataset is empty");
  const EncodedSet data = encode_samples(samples, vocab, config.separators, config.max_len);
  nn::Transformer<float> model(config.network(static_cast<int>(vocab.size())));
  TrainResult r = train_network(model, data, opts);

  Checkpoint c;
  c.kind = "l2mm";
  c.config = config;
  c.network = model.config();
  c.vocab = vocab;
  c.tensors = model.tensors();
  c.params = model.params();
  c.metadata = {{"epochs", opts.epochs},
                {"seed", opts.seed},
                {"beta", opts.beta},
                {"lr", opts.lr},
                {"batch_size", opts.batch_size},
                {"weight_decay", opts.weight_decay},
                {"val_fraction", opts.val_fraction},
                {"separators", config.separators},
                {"samples", samples.size()},
                {"best_epoch", r.best_epoch},
                {"best_val_loss", r.best_val_loss},
                {"best_val_state_acc", r.best_val_acc},
                {"initial_val_loss", r.initial_val_loss},
                {"final_train_loss", r.log.back().train_loss},
                {"final_val_loss", r.log.back().val_loss}};
  if (result) *result = std::move(r);
  return c;
}

MissionState ModelOutput::mission() const {
  return mission_dist[0] > mission_dist[1] ? MissionState::kSuccess : MissionState::kRunning;
}

SearchState ModelOutput::search() const {
  return search_dist[0] > search_dist[1] ? SearchState::kSearching0 : SearchState::kSearching1;
}

L2MM::L2MM(const Checkpoint& ckpt)
    : vocab_(ckpt.vocab), separators_(ckpt.config.separators), net_(ckpt.network) {
  if (ckpt.kind != "l2mm") throw Error("checkpoint kind '" + ckpt.kind + "' is not an l2mm model");
  if (ckpt.params.size() != net_.parameter_count()) throw Error("checkpoint parameter count mismatch");
  net_.params() = ckpt.params;
}

ModelOutput L2MM::forward_tokens(const std::vector<std::int32_t>& ids) {
  const auto u = unpad(ids);
  for (auto id : u) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab_.size()) {
      throw EncodingError("token id " + std::to_string(id) + " does not belong to this checkpoint's vocabulary");
    }
  }
  nn::Batch b;
  b.add(u);
  const auto out = net_.forward(b);
  ModelOutput m;
  m.motion = {out.motion(0, 0), out.motion(0, 1), out.motion(0, 2)};
  m.mission_dist = {out.probs[0](0, 0), out.probs[0](0, 1)};
  m.search_dist = {out.probs[1](0, 0), out.probs[1](0, 1)};
  return m;
}

ModelOutput L2MM::predict(const EncoderInput& in) {
  return forward_tokens(encode(in, vocab_, separators_, net_.config().max_len));
}

std::vector<ModelOutput> L2MM::predict(const std::vector<EncoderInput>& in) {
  std::vector<ModelOutput> res;
  res.reserve(in.size());
  constexpr std::size_t kChunk = 1024;
  for (std::size_t b = 0; b < in.size(); b += kChunk) {
    nn::Batch batch;
    const auto e = std::min(in.size(), b + kChunk);
    for (std::size_t i = b; i < e; ++i) batch.add(encode(in[i], vocab_, separators_, net_.config().max_len));
    const auto out = net_.forward(batch);
    for (std::size_t i = 0; i < e - b; ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      ModelOutput m;
      m.motion = {out.motion(r, 0), out.motion(r, 1), out.motion(r, 2)};
      m.mission_dist = {out.probs[0](r, 0), out.probs[0](r, 1)};
      m.search_dist = {out.probs[1](r, 0), out.probs[1](r, 1)};
      res.push_back(m);
    }
  }
  return res;
}

SpeedMetrics speed_metrics(const std::vector<double>& vx, double v_star) {
  if (vx.empty()) throw Error("speed metrics need a non-empty evaluation set");
  const double n = static_cast<double>(vx.size());
  const double mean = std::accumulate(vx.begin(), vx.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : vx) ss += (v - mean) * (v - mean);
  return {std::sqrt(ss / n), std::fabs(mean - v_star), vx.size()};
}

SpeedMetrics eval_speed_metrics(L2MM& model, const std::vector<TrainSample>& eval_set, double v_star) {
  if (eval_set.empty()) throw Error("evaluation set is empty");
  std::vector<EncoderInput> inputs;
  for (const auto& s : eval_set) {
    if (s.mission != MissionState::kRunning || std::fabs(s.motion.v_x - v_star) > 1e-9) {
      throw Error("speed evaluation needs running samples commanded at v*");
    }
    inputs.push_back(s.input);
  }
  std::vector<double> vx;
  for (const auto& o : model.predict(inputs)) vx.push_back(o.motion.v_x);
  return speed_metrics(vx, v_star);
}

StateAccuracy evaluate_states(L2MM& model, const std::vector<TrainSample>& samples) {
  if (samples.empty()) throw Error("evaluation set is empty");
  std::vector<EncoderInput> inputs;
  for (const auto& s : samples) inputs.push_back(s.input);
  const auto out = model.predict(inputs);
  StateAccuracy a;
  a.n = samples.size();
  std::size_t joint = 0, mission = 0, search = 0;
  double mse = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const bool m = out[i].mission() == samples[i].mission;
    const bool s = out[i].search() == samples[i].search;
    mission += m;
    search += s;
    joint += m && s;
    const auto& p = out[i].motion;
    const auto& t = samples[i].motion;
    mse += (p.v_x - t.v_x) * (p.v_x - t.v_x) + (p.v_y - t.v_y) * (p.v_y - t.v_y) +
           (p.theta - t.theta) * (p.theta - t.theta);
  }
  const double n = static_cast<double>(a.n);
  a.joint = static_cast<double>(joint) / n;
  a.mission = static_cast<double>(mission) / n;
  a.search = static_cast<double>(search) / n;
  a.motion_mse = mse / n;
  return a;
}

GradCheckResult grad_check(nn::Transformer<double>& model, const nn::Batch& batch, double beta,
                           double eps, std::size_t max_params, std::uint64_t seed) {
  // train=false keeps dropout off.
  model.loss(batch, beta, true, false);
  const std::vector<double> analytic(model.grads().begin(), model.grads().end());
  const auto pattern = model.relu_signature();
  auto& params = model.params();

  std::vector<std::size_t> pick;
  const auto& emb = model.tensor("tok_emb");
  const int d = model.config().d_model;
  std::vector<char> used(static_cast<std::size_t>(model.config().vocab_size), 0);
  for (auto t : batch.tokens) used[static_cast<std::size_t>(t)] = 1;
  for (std::size_t tok = 0; tok < used.size(); ++tok) {
    if (!used[tok]) continue;
    for (int j = 0; j < d; ++j) pick.push_back(emb.offset + tok * static_cast<std::size_t>(d) + static_cast<std::size_t>(j));
  }
  Rng rng(seed);
  const std::size_t start = emb.offset + emb.size();
  for (std::size_t i = 0; i < max_params && start < params.size(); ++i) {
    pick.push_back(start + rng.index(params.size() - start));
  }

  GradCheckResult r;
  for (std::size_t i : pick) {
    const double orig = params[i];
    params[i] = orig + eps;
    const double lp = model.loss(batch, beta).total;
    const bool kink_p = model.relu_signature() != pattern;
    params[i] = orig - eps;
    const double lm = model.loss(batch, beta).total;
    const bool kink_m = model.relu_signature() != pattern;
    params[i] = orig;
    // The loss is not differentiable across a ReLU switch; such
    // coordinates say nothing about the backward pass.
    if (kink_p || kink_m) {
      ++r.skipped_kinks;
      continue;
    }
    const double num = (lp - lm) / (2.0 * eps);
    const double rel = std::fabs(num - analytic[i]) /
                       std::max({std::fabs(num), std::fabs(analytic[i]), 1e-6});
    r.max_rel_error = std::max(r.max_rel_error, rel);
    ++r.checked;
  }
  return r;
}

nn::Transformer<double> tiny_double_model(const TokenVocab& vocab, std::uint64_t seed) {
  auto cfg = preset_config("tiny").network(static_cast<int>(vocab.size()));
  cfg.dropout = 0.0;
  nn::Transformer<double> m(cfg);
  m.init(seed);
  return m;
}

nn::Batch make_batch(const std::vector<TrainSample>& samples, const TokenVocab& vocab, bool separators) {
  const auto e = encode_samples(samples, vocab, separators);
  std::vector<std::size_t> idx(e.size());
  std::iota(idx.begin(), idx.end(), 0);
  return e.batch(idx, 0, idx.size());
}

}  // namespace navstack
