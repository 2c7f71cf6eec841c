#include "navstack/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "navstack/common.hpp"

namespace navstack::nn {

namespace {

constexpr double kLnEps = 1e-5;

template <class S>
using MapM = Eigen::Map<Mat<S>>;
template <class S>
using CMapM = Eigen::Map<const Mat<S>>;
template <class S>
using RowV = Eigen::Matrix<S, 1, Eigen::Dynamic>;
template <class S>
using MapR = Eigen::Map<RowV<S>>;
template <class S>
using CMapR = Eigen::Map<const RowV<S>>;

template <class S>
void ln_forward(const Mat<S>& x, const S* gain, const S* bias, Mat<S>& xhat, std::vector<S>& rstd,
                Mat<S>& y) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  CMapR<S> g(gain, d);
  CMapR<S> b(bias, d);
  xhat.resize(n, d);
  y.resize(n, d);
  rstd.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const S mean = x.row(i).mean();
    const S var = (x.row(i).array() - mean).square().mean();
    const S r = S(1) / std::sqrt(var + S(kLnEps));
    rstd[static_cast<std::size_t>(i)] = r;
    xhat.row(i) = (x.row(i).array() - mean) * r;
    y.row(i) = xhat.row(i).array() * g.array() + b.array();
  }
}

// Accumulates gain/bias grads and returns dx.
template <class S>
Mat<S> ln_backward(const Mat<S>& dy, const Mat<S>& xhat, const std::vector<S>& rstd,
                   const S* gain, S* dgain, S* dbias) {
  const Eigen::Index n = dy.rows();
  const Eigen::Index d = dy.cols();
  CMapR<S> g(gain, d);
  MapR<S> dg(dgain, d);
  MapR<S> db(dbias, d);
  dg += (dy.array() * xhat.array()).colwise().sum().matrix();
  db += dy.colwise().sum();
  Mat<S> dx(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const RowV<S> dxh = (dy.row(i).array() * g.array()).matrix();
    const S m1 = dxh.mean();
    const S m2 = (dxh.array() * xhat.row(i).array()).mean();
    dx.row(i) = (dxh.array() - m1 - xhat.row(i).array() * m2) * rstd[static_cast<std::size_t>(i)];
  }
  return dx;
}

template <class S>
void make_mask(Mat<S>& mask, Eigen::Index rows, Eigen::Index cols, double p, std::uint64_t seed,
               std::uint64_t site) {
  mask.resize(rows, cols);
  const std::uint64_t base = splitmix64(seed + 0x9E3779B97F4A7C15ULL * (site + 1));
  const S keep = S(1.0 / (1.0 - p));
  S* m = mask.data();
  const std::size_t n = static_cast<std::size_t>(rows * cols);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = static_cast<double>(splitmix64(base + i) >> 11) * 0x1.0p-53;
    m[i] = u >= p ? keep : S(0);
  }
}

template <class S>
void softmax_rows(Mat<S>& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const S mx = m.row(i).maxCoeff();
    m.row(i) = (m.row(i).array() - mx).exp();
    m.row(i) /= m.row(i).sum();
  }
}

}  // namespace

void TransformerConfig::validate() const {
  if (vocab_size <= 0) throw Error("vocab size must be positive");
  if (d_model <= 0 || layers <= 0 || heads <= 0 || ff <= 0 || max_len <= 0) {
    throw Error("model dimensions must be positive");
  }
  if (d_model % heads != 0) throw Error("feature dimension must be divisible by heads");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw Error("dropout must lie in [0, 1)");
  if (motion_dim < 0) throw Error("motion_dim must be non-negative");
  for (int c : class_heads) {
    if (c < 2) throw Error("class heads need at least two classes");
  }
}

void Batch::add(const std::vector<std::int32_t>& seq) {
  tokens.insert(tokens.end(), seq.begin(), seq.end());
  offsets.push_back(tokens.size());
}

double motion_loss(const std::vector<std::vector<double>>& pred,
                   const std::vector<std::vector<double>>& target, double beta) {
  if (pred.size() != target.size() || pred.empty()) throw Error("motion_loss needs matching, non-empty batches");
  if (!(beta > 0.0)) throw Error("beta must be positive");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i].size() != target[i].size()) throw Error("motion vectors differ in length");
    for (std::size_t k = 0; k < pred[i].size(); ++k) {
      const double d = pred[i][k] - target[i][k];
      sum += d * d;
    }
  }
  return beta * sum / static_cast<double>(pred.size());
}

double state_loss(const std::vector<double>& dist, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= dist.size()) throw Error("label outside distribution");
  return -std::log(std::max(dist[static_cast<std::size_t>(label)], kProbFloor));
}

template <class S>
struct Transformer<S>::LayerCache {
  Mat<S> h_in, xhat1, a, qkv, o, mask1, h_mid, xhat2, b, f1, r, mask2;
  std::vector<S> rstd1, rstd2;
  std::vector<S> probs;  // attention maps, per sample then head, len x len
};

template <class S>
struct Transformer<S>::Cache {
  bool train = false;
  Mat<S> mask0;
  std::vector<LayerCache> layers;
  Mat<S> h_last, xhatf, hf, pooled;
  std::vector<S> rstdf;
  std::vector<std::size_t> attn_base;  // per sample offset into probs
};

template <class S>
Transformer<S>::Transformer(TransformerConfig cfg) : cfg_(std::move(cfg)), cache_(std::make_unique<Cache>()) {
  cfg_.validate();
  const int d = cfg_.d_model;
  std::size_t offset = 0;
  auto add = [&](const std::string& name, int rows, int cols, bool decay) {
    by_name_[name] = tensors_.size();
    tensors_.push_back({name, rows, cols, offset, decay});
    offset += static_cast<std::size_t>(rows) * cols;
  };
  add("tok_emb", cfg_.vocab_size, d, true);
  add("pos_emb", cfg_.max_len, d, true);
  for (int l = 0; l < cfg_.layers; ++l) {
    const std::string pre = "l" + std::to_string(l) + ".";
    add(pre + "ln1.g", 1, d, false);
    add(pre + "ln1.b", 1, d, false);
    add(pre + "qkv.w", d, 3 * d, true);
    add(pre + "qkv.b", 1, 3 * d, false);
    add(pre + "out.w", d, d, true);
    add(pre + "out.b", 1, d, false);
    add(pre + "ln2.g", 1, d, false);
    add(pre + "ln2.b", 1, d, false);
    add(pre + "ff1.w", d, cfg_.ff, true);
    add(pre + "ff1.b", 1, cfg_.ff, false);
    add(pre + "ff2.w", cfg_.ff, d, true);
    add(pre + "ff2.b", 1, d, false);
  }
  add("lnf.g", 1, d, false);
  add("lnf.b", 1, d, false);
  if (cfg_.motion_dim > 0) {
    add("head.motion.w", d, cfg_.motion_dim, true);
    add("head.motion.b", 1, cfg_.motion_dim, false);
  }
  for (std::size_t k = 0; k < cfg_.class_heads.size(); ++k) {
    add("head.c" + std::to_string(k) + ".w", d, cfg_.class_heads[k], true);
    add("head.c" + std::to_string(k) + ".b", 1, cfg_.class_heads[k], false);
  }
  params_.assign(offset, S(0));
  grads_.assign(offset, S(0));
}

template <class S>
Transformer<S>::~Transformer() = default;

template <class S>
Transformer<S>::Transformer(const Transformer& o)
    : cfg_(o.cfg_), tensors_(o.tensors_), params_(o.params_), grads_(o.grads_),
      by_name_(o.by_name_), cache_(std::make_unique<Cache>()) {}

template <class S>
Transformer<S>& Transformer<S>::operator=(const Transformer& o) {
  if (this != &o) {
    cfg_ = o.cfg_;
    tensors_ = o.tensors_;
    params_ = o.params_;
    grads_ = o.grads_;
    by_name_ = o.by_name_;
    cache_ = std::make_unique<Cache>();
  }
  return *this;
}

template <class S>
Transformer<S>::Transformer(Transformer&&) noexcept = default;
template <class S>
Transformer<S>& Transformer<S>::operator=(Transformer&&) noexcept = default;

template <class S>
const TensorInfo& Transformer<S>::tensor(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw Error("no tensor named " + name);
  return tensors_[it->second];
}

template <class S>
S* Transformer<S>::p(const std::string& name) {
  return params_.data() + tensor(name).offset;
}

template <class S>
S* Transformer<S>::g(const std::string& name) {
  return grads_.data() + tensor(name).offset;
}

template <class S>
void Transformer<S>::init(std::uint64_t seed) {
  Rng rng(seed);
  const double out_scale = 1.0 / std::sqrt(2.0 * cfg_.layers);
  for (const auto& t : tensors_) {
    S* data = params_.data() + t.offset;
    const bool gain = t.name.size() >= 2 && t.name.compare(t.name.size() - 2, 2, ".g") == 0;
    if (gain) {
      std::fill(data, data + t.size(), S(1));
    } else if (!t.decay) {
      std::fill(data, data + t.size(), S(0));
    } else {
      double sd = 0.02;
      if (t.name.find("out.w") != std::string::npos || t.name.find("ff2.w") != std::string::npos) {
        sd *= out_scale;
      }
      for (std::size_t i = 0; i < t.size(); ++i) data[i] = static_cast<S>(sd * rng.normal());
    }
  }
}

template <class S>
Output<S> Transformer<S>::forward(const Batch& batch, bool train, std::uint64_t dropout_seed) {
  const int d = cfg_.d_model;
  const int nh = cfg_.heads;
  const int hdim = d / nh;
  const S scale = S(1) / std::sqrt(static_cast<S>(hdim));
  const std::size_t ns = batch.samples();
  const auto ntok = static_cast<Eigen::Index>(batch.tokens.size());
  if (ns == 0) throw Error("empty batch");
  const bool drop = train && cfg_.dropout > 0.0;

  Cache& c = *cache_;
  c.train = drop;
  c.layers.resize(static_cast<std::size_t>(cfg_.layers));
  c.attn_base.assign(ns + 1, 0);
  for (std::size_t s = 0; s < ns; ++s) {
    const std::size_t n = batch.length(s);
    if (n == 0) throw Error("empty sequence in batch");
    if (n > static_cast<std::size_t>(cfg_.max_len)) throw Error("sequence longer than max_len");
    c.attn_base[s + 1] = c.attn_base[s] + static_cast<std::size_t>(nh) * n * n;
  }

  // Embeddings.
  CMapM<S> tok(p("tok_emb"), cfg_.vocab_size, d);
  CMapM<S> pos(p("pos_emb"), cfg_.max_len, d);
  Mat<S> h(ntok, d);
  for (std::size_t s = 0; s < ns; ++s) {
    for (std::size_t t = batch.offsets[s]; t < batch.offsets[s + 1]; ++t) {
      const auto id = batch.tokens[t];
      if (id < 0 || id >= cfg_.vocab_size) throw Error("token id " + std::to_string(id) + " outside vocabulary");
      h.row(static_cast<Eigen::Index>(t)) =
          tok.row(id) + pos.row(static_cast<Eigen::Index>(t - batch.offsets[s]));
    }
  }
  if (drop) {
    make_mask(c.mask0, ntok, d, cfg_.dropout, dropout_seed, 0);
    h.array() *= c.mask0.array();
  }

  for (int l = 0; l < cfg_.layers; ++l) {
    LayerCache& lc = c.layers[static_cast<std::size_t>(l)];
    const std::string pre = "l" + std::to_string(l) + ".";
    lc.h_in = h;
    ln_forward<S>(lc.h_in, p(pre + "ln1.g"), p(pre + "ln1.b"), lc.xhat1, lc.rstd1, lc.a);
    CMapM<S> wqkv(p(pre + "qkv.w"), d, 3 * d);
    lc.qkv.noalias() = lc.a * wqkv;
    lc.qkv.rowwise() += CMapR<S>(p(pre + "qkv.b"), 3 * d);

    lc.o.resize(ntok, d);
    lc.probs.resize(c.attn_base[ns]);
    for (std::size_t s = 0; s < ns; ++s) {
      const auto off = static_cast<Eigen::Index>(batch.offsets[s]);
      const auto n = static_cast<Eigen::Index>(batch.length(s));
      for (int hd = 0; hd < nh; ++hd) {
        MapM<S> pm(lc.probs.data() + c.attn_base[s] + static_cast<std::size_t>(hd * n * n), n, n);
        auto q = lc.qkv.block(off, hd * hdim, n, hdim);
        auto k = lc.qkv.block(off, d + hd * hdim, n, hdim);
        auto v = lc.qkv.block(off, 2 * d + hd * hdim, n, hdim);
        Mat<S> sc = (q * k.transpose()) * scale;
        softmax_rows(sc);
        pm = sc;
        lc.o.block(off, hd * hdim, n, hdim).noalias() = sc * v;
      }
    }
    CMapM<S> wo(p(pre + "out.w"), d, d);
    Mat<S> z = lc.o * wo;
    z.rowwise() += CMapR<S>(p(pre + "out.b"), d);
    if (drop) {
      make_mask(lc.mask1, ntok, d, cfg_.dropout, dropout_seed, 1 + 2 * static_cast<std::uint64_t>(l));
      z.array() *= lc.mask1.array();
    }
    lc.h_mid = lc.h_in + z;

    ln_forward<S>(lc.h_mid, p(pre + "ln2.g"), p(pre + "ln2.b"), lc.xhat2, lc.rstd2, lc.b);
    CMapM<S> w1(p(pre + "ff1.w"), d, cfg_.ff);
    lc.f1.noalias() = lc.b * w1;
    lc.f1.rowwise() += CMapR<S>(p(pre + "ff1.b"), cfg_.ff);
    lc.r = lc.f1.cwiseMax(S(0));
    CMapM<S> w2(p(pre + "ff2.w"), cfg_.ff, d);
    Mat<S> f2 = lc.r * w2;
    f2.rowwise() += CMapR<S>(p(pre + "ff2.b"), d);
    if (drop) {
      make_mask(lc.mask2, ntok, d, cfg_.dropout, dropout_seed, 2 + 2 * static_cast<std::uint64_t>(l));
      f2.array() *= lc.mask2.array();
    }
    h = lc.h_mid + f2;
  }

  c.h_last = h;
  ln_forward<S>(c.h_last, p("lnf.g"), p("lnf.b"), c.xhatf, c.rstdf, c.hf);
  c.pooled.resize(static_cast<Eigen::Index>(ns), d);
  for (std::size_t s = 0; s < ns; ++s) {
    c.pooled.row(static_cast<Eigen::Index>(s)) =
        c.hf.block(static_cast<Eigen::Index>(batch.offsets[s]), 0,
                   static_cast<Eigen::Index>(batch.length(s)), d)
            .colwise()
            .mean();
  }

  Output<S> out;
  if (cfg_.motion_dim > 0) {
    out.motion = c.pooled * CMapM<S>(p("head.motion.w"), d, cfg_.motion_dim);
    out.motion.rowwise() += CMapR<S>(p("head.motion.b"), cfg_.motion_dim);
  }
  for (std::size_t k = 0; k < cfg_.class_heads.size(); ++k) {
    const std::string pre = "head.c" + std::to_string(k) + ".";
    Mat<S> logits = c.pooled * CMapM<S>(p(pre + "w"), d, cfg_.class_heads[k]);
    logits.rowwise() += CMapR<S>(p(pre + "b"), cfg_.class_heads[k]);
    softmax_rows(logits);
    out.probs.push_back(std::move(logits));
  }
  return out;
}

template <class S>
LossParts Transformer<S>::loss(const Batch& batch, double beta, bool backward_pass, bool train,
                               std::uint64_t dropout_seed) {
  if (!(beta > 0.0)) throw Error("beta must be positive");
  const Output<S> out = forward(batch, train, dropout_seed);
  const std::size_t ns = batch.samples();
  const auto n = static_cast<double>(ns);
  LossParts lp;
  lp.samples = ns;

  Mat<S> d_motion;
  if (cfg_.motion_dim > 0) {
    if (batch.motion.size() != ns * static_cast<std::size_t>(cfg_.motion_dim)) {
      throw Error("batch motion targets do not match motion_dim");
    }
    CMapM<double> target(batch.motion.data(), static_cast<Eigen::Index>(ns), cfg_.motion_dim);
    const Mat<double> diff = out.motion.template cast<double>() - target;
    lp.motion = beta * diff.squaredNorm() / n;
    d_motion = (diff * (2.0 * beta / n)).template cast<S>();
  }

  std::vector<Mat<S>> d_logits;
  std::vector<char> all_right(ns, 1);
  if (batch.labels.size() != cfg_.class_heads.size()) throw Error("batch labels do not match class heads");
  for (std::size_t k = 0; k < cfg_.class_heads.size(); ++k) {
    const Mat<S>& pr = out.probs[k];
    Mat<S> dl = pr;
    double ce = 0.0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < ns; ++i) {
      const int y = batch.labels[k][i];
      if (y < 0 || y >= cfg_.class_heads[k]) throw Error("label outside class head");
      const auto row = static_cast<Eigen::Index>(i);
      const double py = static_cast<double>(pr(row, y));
      ce -= std::log(std::max(py, kProbFloor));
      Eigen::Index arg = 0;
      pr.row(row).maxCoeff(&arg);
      if (arg == y) {
        ++correct;
      } else {
        all_right[i] = 0;
      }
      if (py < kProbFloor) {
        dl.row(row).setZero();  // clamp active: flat loss
      } else {
        dl(row, y) -= S(1);
        dl.row(row) /= static_cast<S>(n);
      }
    }
    lp.ce.push_back(ce / n);
    lp.correct.push_back(correct);
    d_logits.push_back(std::move(dl));
  }
  lp.joint_correct = static_cast<std::size_t>(std::count(all_right.begin(), all_right.end(), 1));
  lp.total = lp.motion;
  for (double ce : lp.ce) lp.total += ce;
  if (backward_pass) backward(batch, d_motion, d_logits);
  return lp;
}

template <class S>
void Transformer<S>::backward(const Batch& batch, const Mat<S>& d_motion,
                              const std::vector<Mat<S>>& d_logits) {
  std::fill(grads_.begin(), grads_.end(), S(0));
  Cache& c = *cache_;
  const int d = cfg_.d_model;
  const int nh = cfg_.heads;
  const int hdim = d / nh;
  const S scale = S(1) / std::sqrt(static_cast<S>(hdim));
  const std::size_t ns = batch.samples();
  const auto ntok = static_cast<Eigen::Index>(batch.tokens.size());

  // Heads.
  Mat<S> d_pooled = Mat<S>::Zero(static_cast<Eigen::Index>(ns), d);
  if (cfg_.motion_dim > 0) {
    MapM<S>(g("head.motion.w"), d, cfg_.motion_dim).noalias() += c.pooled.transpose() * d_motion;
    MapR<S>(g("head.motion.b"), cfg_.motion_dim) += d_motion.colwise().sum();
    d_pooled.noalias() += d_motion * CMapM<S>(p("head.motion.w"), d, cfg_.motion_dim).transpose();
  }
  for (std::size_t k = 0; k < cfg_.class_heads.size(); ++k) {
    const std::string pre = "head.c" + std::to_string(k) + ".";
    const int nc = cfg_.class_heads[k];
    MapM<S>(g(pre + "w"), d, nc).noalias() += c.pooled.transpose() * d_logits[k];
    MapR<S>(g(pre + "b"), nc) += d_logits[k].colwise().sum();
    d_pooled.noalias() += d_logits[k] * CMapM<S>(p(pre + "w"), d, nc).transpose();
  }

  // Mean pooling.
  Mat<S> dh_f(ntok, d);
  for (std::size_t s = 0; s < ns; ++s) {
    const auto n = static_cast<Eigen::Index>(batch.length(s));
    const RowV<S> share = d_pooled.row(static_cast<Eigen::Index>(s)) / static_cast<S>(n);
    dh_f.block(static_cast<Eigen::Index>(batch.offsets[s]), 0, n, d) = share.replicate(n, 1);
  }
  Mat<S> dh = ln_backward<S>(dh_f, c.xhatf, c.rstdf, p("lnf.g"), g("lnf.g"), g("lnf.b"));

  for (int l = cfg_.layers - 1; l >= 0; --l) {
    LayerCache& lc = c.layers[static_cast<std::size_t>(l)];
    const std::string pre = "l" + std::to_string(l) + ".";

    // Feed-forward branch.
    Mat<S> df2 = dh;
    if (c.train) df2.array() *= lc.mask2.array();
    MapM<S>(g(pre + "ff2.w"), cfg_.ff, d).noalias() += lc.r.transpose() * df2;
    MapR<S>(g(pre + "ff2.b"), d) += df2.colwise().sum();
    Mat<S> df1 = df2 * CMapM<S>(p(pre + "ff2.w"), cfg_.ff, d).transpose();
    df1.array() *= (lc.f1.array() > S(0)).template cast<S>();
    MapM<S>(g(pre + "ff1.w"), d, cfg_.ff).noalias() += lc.b.transpose() * df1;
    MapR<S>(g(pre + "ff1.b"), cfg_.ff) += df1.colwise().sum();
    const Mat<S> db = df1 * CMapM<S>(p(pre + "ff1.w"), d, cfg_.ff).transpose();
    dh += ln_backward<S>(db, lc.xhat2, lc.rstd2, p(pre + "ln2.g"), g(pre + "ln2.g"), g(pre + "ln2.b"));

    // Attention branch.
    Mat<S> dz = dh;
    if (c.train) dz.array() *= lc.mask1.array();
    MapM<S>(g(pre + "out.w"), d, d).noalias() += lc.o.transpose() * dz;
    MapR<S>(g(pre + "out.b"), d) += dz.colwise().sum();
    const Mat<S> d_o = dz * CMapM<S>(p(pre + "out.w"), d, d).transpose();

    Mat<S> dqkv(ntok, 3 * d);
    for (std::size_t s = 0; s < ns; ++s) {
      const auto off = static_cast<Eigen::Index>(batch.offsets[s]);
      const auto n = static_cast<Eigen::Index>(batch.length(s));
      for (int hd = 0; hd < nh; ++hd) {
        CMapM<S> pm(lc.probs.data() + c.attn_base[s] + static_cast<std::size_t>(hd * n * n), n, n);
        auto q = lc.qkv.block(off, hd * hdim, n, hdim);
        auto k = lc.qkv.block(off, d + hd * hdim, n, hdim);
        auto v = lc.qkv.block(off, 2 * d + hd * hdim, n, hdim);
        auto dout = d_o.block(off, hd * hdim, n, hdim);
        const Mat<S> dp = dout * v.transpose();
        dqkv.block(off, 2 * d + hd * hdim, n, hdim).noalias() = pm.transpose() * dout;
        Mat<S> ds = pm.array() * (dp.array().colwise() - (dp.array() * pm.array()).rowwise().sum());
        ds *= scale;
        dqkv.block(off, hd * hdim, n, hdim).noalias() = ds * k;
        dqkv.block(off, d + hd * hdim, n, hdim).noalias() = ds.transpose() * q;
      }
    }
    MapM<S>(g(pre + "qkv.w"), d, 3 * d).noalias() += lc.a.transpose() * dqkv;
    MapR<S>(g(pre + "qkv.b"), 3 * d) += dqkv.colwise().sum();
    const Mat<S> da = dqkv * CMapM<S>(p(pre + "qkv.w"), d, 3 * d).transpose();
    dh += ln_backward<S>(da, lc.xhat1, lc.rstd1, p(pre + "ln1.g"), g(pre + "ln1.g"), g(pre + "ln1.b"));
  }

  if (c.train) dh.array() *= c.mask0.array();
  MapM<S> gtok(g("tok_emb"), cfg_.vocab_size, d);
  MapM<S> gpos(g("pos_emb"), cfg_.max_len, d);
  for (std::size_t s = 0; s < ns; ++s) {
    for (std::size_t t = batch.offsets[s]; t < batch.offsets[s + 1]; ++t) {
      const auto row = dh.row(static_cast<Eigen::Index>(t));
      gtok.row(batch.tokens[t]) += row;
      gpos.row(static_cast<Eigen::Index>(t - batch.offsets[s])) += row;
    }
  }
}

AdamW::AdamW(std::size_t n, Options opts) : opts_(opts), m_(n, 0.0f), v_(n, 0.0f) {}

void AdamW::step(ParamVec<float>& params, const ParamVec<float>& grads,
                 const std::vector<TensorInfo>& tensors) {
  ++t_;
  const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
  const auto b1 = static_cast<float>(opts_.beta1);
  const auto b2 = static_cast<float>(opts_.beta2);
  const auto lr = static_cast<float>(opts_.lr);
  const auto step_size = static_cast<float>(opts_.lr / bc1);
  const auto inv_sqrt_bc2 = static_cast<float>(1.0 / std::sqrt(bc2));
  const auto eps = static_cast<float>(opts_.eps);
  for (const auto& t : tensors) {
    const float decay = t.decay ? static_cast<float>(opts_.weight_decay) : 0.0f;
    for (std::size_t i = t.offset; i < t.offset + t.size(); ++i) {
      const float gr = grads[i];
      m_[i] = b1 * m_[i] + (1.0f - b1) * gr;
      v_[i] = b2 * v_[i] + (1.0f - b2) * gr * gr;
      params[i] -= lr * decay * params[i];
      params[i] -= step_size * m_[i] / (std::sqrt(v_[i]) * inv_sqrt_bc2 + eps);
    }
  }
}

template <class S>
std::uint64_t Transformer<S>::relu_signature() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& lc : cache_->layers) {
    const S* f = lc.f1.data();
    for (Eigen::Index i = 0; i < lc.f1.size(); ++i) {
      h ^= f[i] > S(0) ? 1u : 0u;
      h *= 1099511628211ULL;
    }
  }
  return h;
}

template class Transformer<float>;
template class Transformer<double>;

}  // namespace navstack::nn
