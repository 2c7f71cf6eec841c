#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include "navstack/datagen.hpp"
#include "navstack/l2mm.hpp"
#include "navstack/tokenizer.hpp"

using namespace navstack;

namespace {

const ClassLexicon& lex() { return ClassLexicon::standard(); }

const TokenVocab& vocab() {
  static const TokenVocab v = TokenVocab::build(lex());
  return v;
}

std::vector<TrainSample> corpus(std::size_t n, std::uint64_t seed) {
  DatagenOptions o;
  o.n = n;
  o.seed = seed;
  o.threads = 1;
  std::vector<TrainSample> out;
  for (const auto& line : generate_lines(o, lex())) out.push_back(sample_from_json(nlohmann::json::parse(line)));
  return out;
}

EncoderInput running_input() {
  EncoderInput in;
  in.prev_instruction = "go to the chair at 0.40 m/s";
  in.curr_instruction = in.prev_instruction;
  in.detection = Detection{"chair", 0.876, 0.5, 0.5, 0.2, 0.3};
  return in;
}

std::vector<double> slice(const nn::ParamVec<double>& v, const nn::TensorInfo& t) {
  return {v.begin() + static_cast<std::ptrdiff_t>(t.offset),
          v.begin() + static_cast<std::ptrdiff_t>(t.offset + t.size())};
}

double norm(const std::vector<double>& v) {
  return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("bucket tokens") {
  CHECK(bucket_label(0.876) == "0.88");
  CHECK(bucket_label(0.125) == "0.13");
  CHECK(bucket_label(0.0) == "0.00");
  CHECK(bucket_label(1.0) == "1.00");
  CHECK(vocab().bucket_value(vocab().bucket(0.876)) == doctest::Approx(0.88));
}

TEST_CASE("no detection encodes [NOOBJ] with zero buckets") {
  EncoderInput in = running_input();
  in.detection.reset();
  const auto ids = encode(in, vocab());
  const auto f = decode_fields(ids, vocab());
  CHECK(f.object == kNoObj);
  CHECK(f.cx == 0.0);
  CHECK(f.cy == 0.0);
  CHECK(f.w == 0.0);
  CHECK(f.h == 0.0);
  const auto zero = vocab().bucket(0.0);
  CHECK(std::count(ids.begin(), ids.end(), zero) >= 4);
  CHECK(std::count(ids.begin(), ids.end(), vocab().noobj()) == 1);
}

TEST_CASE("full input carries exactly 10 separators") {
  const auto ids = encode_padded(running_input(), vocab());
  CHECK(ids.size() == static_cast<std::size_t>(kMaxSeqLen));
  CHECK(std::count(ids.begin(), ids.end(), vocab().sep()) == 10);
  const auto bare = encode(running_input(), vocab(), false);
  CHECK(std::count(bare.begin(), bare.end(), vocab().sep()) == 0);
  CHECK(bare.size() + 10 == unpad(ids).size());
}

TEST_CASE("encoding errors on overlong input") {
  EncoderInput in = running_input();
  for (int i = 0; i < 40; ++i) in.curr_instruction += " chair";
  CHECK_THROWS_AS(encode(in, vocab()), EncodingError);
}

TEST_CASE("bucket round trip stays within half a bucket") {
  Rng rng(3);
  for (int i = 0; i < 5000; ++i) {
    EncoderInput in = running_input();
    in.detection = Detection{"chair", rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()};
    const auto f = decode_fields(encode(in, vocab()), vocab());
    CHECK(std::abs(f.confidence - in.detection->confidence) <= 0.005 + 1e-12);
    CHECK(std::abs(f.cx - in.detection->cx) <= 0.005 + 1e-12);
    CHECK(std::abs(f.h - in.detection->h) <= 0.005 + 1e-12);
  }
}

TEST_CASE("motion loss") {
  CHECK(nn::motion_loss({{0.5, 0, 0}}, {{0.4, 0, 0}}, 10.0) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(nn::motion_loss({{0.3, 0.2, -0.1}}, {{0.3, 0.2, -0.1}}, 10.0) == 0.0);
  // squared errors 0.01 and 0.03
  const double e2 = std::sqrt(0.03);
  CHECK(nn::motion_loss({{0.1, 0, 0}, {e2, 0, 0}}, {{0, 0, 0}, {0, 0, 0}}, 10.0) ==
        doctest::Approx(0.2).epsilon(1e-12));
  CHECK_THROWS_AS(nn::motion_loss({}, {}, 10.0), Error);
}

TEST_CASE("state loss") {
  CHECK(nn::state_loss({1.0, 0.0}, 0) == 0.0);
  CHECK(nn::state_loss({0.5, 0.5}, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(nn::state_loss({0.25, 0.75}, 1) == doctest::Approx(-std::log(0.75)).epsilon(1e-12));
  CHECK(nn::state_loss({1.0, 0.0}, 1) == doctest::Approx(-std::log(1e-12)));
}

TEST_CASE("presets land near the reference parameter counts") {
  const int v = static_cast<int>(vocab().size());
  nn::Transformer<float> small(preset_config("small").network(v));
  CHECK(std::abs(static_cast<double>(small.parameter_count()) - 0.47e6) <= 0.047e6);
  nn::Transformer<float> large(preset_config("large").network(v));
  CHECK(std::abs(static_cast<double>(large.parameter_count()) - 25.51e6) <= 2.551e6);
  CHECK_THROWS_AS(preset_config("huge"), Error);
}

TEST_CASE("fresh model gives finite outputs and valid distributions") {
  Checkpoint c;
  c.config = preset_config("small");
  c.vocab = vocab();
  c.network = c.config.network(static_cast<int>(vocab().size()));
  nn::Transformer<float> net(c.network);
  net.init(4);
  c.tensors = net.tensors();
  c.params = net.params();
  L2MM m(c);
  const auto a = m.predict(running_input());
  const auto b = m.predict(running_input());
  CHECK(std::isfinite(a.motion.v_x));
  CHECK(std::isfinite(a.motion.theta));
  CHECK(a.mission_dist[0] + a.mission_dist[1] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(a.search_dist[0] + a.search_dist[1] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(a.mission_dist[0] >= 0.0);
  CHECK(a.motion == b.motion);
  CHECK(a.mission_dist == b.mission_dist);
  CHECK(a.search_dist == b.search_dist);

  std::vector<std::int32_t> bad{static_cast<std::int32_t>(vocab().size()) + 5};
  CHECK_THROWS_AS(m.forward_tokens(bad), Error);
}

TEST_CASE("checkpoint round trip") {
  const auto path = std::filesystem::temp_directory_path() / "navstack_ckpt_test.bin";
  Checkpoint c;
  c.config = preset_config("tiny");
  c.vocab = vocab();
  c.network = c.config.network(static_cast<int>(vocab().size()));
  c.metadata["note"] = "x";
  nn::Transformer<float> net(c.network);
  net.init(9);
  c.tensors = net.tensors();
  c.params = net.params();
  save_checkpoint(path, c);
  const auto back = load_checkpoint(path);
  CHECK(back.params == c.params);
  CHECK(back.vocab == c.vocab);
  CHECK(back.metadata.at("note") == "x");
  CHECK(back.config.d_model == c.config.d_model);

  std::ofstream(path, std::ios::binary) << "NOPE";
  CHECK_THROWS_AS(load_checkpoint(path), Error);
  std::filesystem::remove(path);
}

TEST_CASE("gradient check on the tiny preset") {
  const auto samples = corpus(6, 2);
  auto model = tiny_double_model(vocab(), 3);
  const auto r = grad_check(model, make_batch(samples, vocab(), true), 10.0);
  CHECK(r.checked > 100);
  CHECK(r.max_rel_error <= 1e-4);
}

TEST_CASE("motion head gradient vanishes when the prediction equals the target") {
  const auto samples = corpus(4, 5);
  auto model = tiny_double_model(vocab(), 6);
  auto batch = make_batch(samples, vocab(), true);
  const auto out = model.forward(batch);
  for (std::size_t i = 0; i < batch.samples(); ++i)
    for (int k = 0; k < 3; ++k) batch.motion[i * 3 + k] = out.motion(static_cast<Eigen::Index>(i), k);
  model.loss(batch, 10.0, true);
  CHECK(norm(slice(model.grads(), model.tensor("head.motion.w"))) <= 1e-12);
  CHECK(norm(slice(model.grads(), model.tensor("head.motion.b"))) <= 1e-12);
}

TEST_CASE("doubling beta doubles the motion head gradient") {
  const auto samples = corpus(4, 7);
  auto model = tiny_double_model(vocab(), 8);
  const auto batch = make_batch(samples, vocab(), true);
  model.loss(batch, 10.0, true);
  const auto g1 = slice(model.grads(), model.tensor("head.motion.w"));
  model.loss(batch, 20.0, true);
  const auto g2 = slice(model.grads(), model.tensor("head.motion.w"));
  for (std::size_t i = 0; i < g1.size(); ++i) CHECK(g2[i] == doctest::Approx(2.0 * g1[i]).epsilon(1e-12));
}

TEST_CASE("speed metrics") {
  const auto z = speed_metrics({0.4, 0.4, 0.4}, 0.4);
  CHECK(z.sigma_v == doctest::Approx(0.0));
  CHECK(z.eps_v == doctest::Approx(0.0));
  const auto m = speed_metrics({0.39, 0.41}, 0.4);
  CHECK(m.sigma_v == doctest::Approx(0.01));
  CHECK(m.eps_v == doctest::Approx(0.0).epsilon(1e-12));
  CHECK_THROWS_AS(speed_metrics({}, 0.4), Error);
}

TEST_CASE("training is reproducible") {
  const auto samples = corpus(1500, 11);
  TrainOptions o;
  o.epochs = 2;
  o.batch_size = 64;
  o.lr = 1e-3;
  o.seed = 5;
  TrainResult a, b;
  train_l2mm(samples, preset_config("tiny"), o, vocab(), &a);
  train_l2mm(samples, preset_config("tiny"), o, vocab(), &b);
  CHECK(a.log.back().val_loss == b.log.back().val_loss);
  CHECK(a.best_params == b.best_params);
}

TEST_CASE("small preset learns on a 10k smoke set") {
  const auto samples = corpus(10000, 12);
  TrainOptions o;
  o.epochs = 3;
  o.seed = 1;
  TrainResult r;
  const auto ckpt = train_l2mm(samples, preset_config("small"), o, vocab(), &r);
  CHECK(r.best_val_loss < r.initial_val_loss);
  CHECK(ckpt.metadata.contains("best_val_loss"));
}

TEST_CASE("non-finite loss aborts training") {
  auto samples = corpus(50, 13);
  samples[3].motion.v_x = std::nan("");
  TrainOptions o;
  o.epochs = 1;
  o.batch_size = 8;
  CHECK_THROWS_AS(train_l2mm(samples, preset_config("tiny"), o, vocab()), TrainingError);
}

}  // TEST_SUITE
