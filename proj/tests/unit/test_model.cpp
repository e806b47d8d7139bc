// SPDX-License-Identifier: Apache-2.0
#include <gpn/autodiff.hpp>
#include <gpn/encoder.hpp>
#include <gpn/errors.hpp>
#include <gpn/memory.hpp>
#include <gpn/params.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

using namespace gpn;

namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  std::normal_distribution<double> normal;
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

}  // namespace

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  ParameterStore store;
  store.add("enc/w", scalar(0.7));
  store.slot(0).touched = true;
  adam_step(store, AdamOptions{.lr = 1e-3, .weight_decay = 0.0});
  EXPECT_EQ(store.slot(0).value(0, 0), 0.7);
}

TEST(Adam, ScalarRecurrence) {
  ParameterStore store;
  store.add("enc/w", scalar(0.5));
  const AdamOptions opt{.lr = 1e-3, .beta1 = 0.9, .beta2 = 0.999, .eps = 1e-8, .weight_decay = 0.0};
  double theta = 0.5, m = 0.0, v = 0.0;
  const double grads[] = {1.0, -0.5, 2.0};
  for (int t = 1; t <= 3; ++t) {
    const double g = grads[t - 1];
    store.zero_grad();
    store.slot(0).grad(0, 0) = g;
    store.slot(0).touched = true;
    adam_step(store, opt);
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1 - std::pow(0.9, t));
    const double vh = v / (1 - std::pow(0.999, t));
    theta -= 1e-3 * mh / (std::sqrt(vh) + 1e-8);
    EXPECT_NEAR(store.slot(0).value(0, 0), theta, 1e-15);
  }
}

TEST(Adam, WeightDecayAddsToGradient) {
  ParameterStore store;
  store.add("enc/w", scalar(2.0));
  store.slot(0).touched = true;
  adam_step(store, AdamOptions{.lr = 1e-3, .weight_decay = 0.1});
  // g = 0 + 0.1 * 2 > 0, so the first step is -lr (up to eps).
  EXPECT_NEAR(store.slot(0).value(0, 0), 2.0 - 1e-3, 1e-9);
}

TEST(Adam, UntouchedAndFrozenSlotsKeepState) {
  ParameterStore store;
  store.add("enc/a", scalar(1.0));
  store.add("enc/b", scalar(1.0));
  store.add("enc/c", scalar(1.0), false);
  store.slot(0).grad(0, 0) = 1.0;
  store.slot(0).touched = true;
  store.slot(2).grad(0, 0) = 1.0;
  store.slot(2).touched = true;
  adam_step(store, AdamOptions{});
  EXPECT_NE(store.slot(0).value(0, 0), 1.0);
  EXPECT_EQ(store.slot(1).value(0, 0), 1.0);
  EXPECT_EQ(store.slot(1).steps, 0);
  EXPECT_EQ(store.slot(2).value(0, 0), 1.0);
}

TEST(Adam, DeterministicAcrossStores) {
  Rng rng(3);
  const Matrix init = random_matrix(3, 2, rng);
  const Matrix grad = random_matrix(3, 2, rng);
  ParameterStore a, b;
  a.add("prop/w", init);
  b.add("prop/w", init);
  for (ParameterStore* s : {&a, &b}) {
    s->slot(0).grad = grad;
    s->slot(0).touched = true;
    adam_step(*s, AdamOptions{});
  }
  EXPECT_EQ(a.slot(0).value, b.slot(0).value);
}

TEST(ParameterStore, ZeroGradAndNamespaces) {
  ParameterStore store;
  store.add("enc/W0", Matrix::Ones(2, 2));
  store.add("prop/head0/h1/W", Matrix::Ones(2, 2));
  store.add("fc/W", Matrix::Ones(3, 2));
  store.slot(1).grad.setConstant(4.0);
  store.slot(1).touched = true;
  store.zero_grad();
  EXPECT_TRUE((store.slot(1).grad.array() == 0.0).all());
  EXPECT_FALSE(store.slot(1).touched);
  EXPECT_EQ(store.in_namespace("prop"), (std::vector<std::size_t>{1}));
  EXPECT_EQ(store.parameter_count(), 14u);
  EXPECT_THROW(store.add("fc/W", Matrix::Ones(1, 1)), ArgumentError);
  EXPECT_THROW(store.index("nope"), ArgumentError);
}

TEST(ParameterStore, GradientOfUnusedParameterIsZero) {
  ParameterStore store;
  store.add("enc/used", Matrix::Ones(1, 2));
  store.add("enc/unused", Matrix::Ones(1, 2));
  Tape tape;
  const Var loss = ad::sum(tape.parameter(store, 0));
  tape.backward(loss);
  EXPECT_TRUE((store.slot(1).grad.array() == 0.0).all());
  EXPECT_FALSE(store.slot(1).touched);
}

TEST(Container, RoundTripIsExact) {
  Rng rng(4);
  ParameterStore store;
  store.add("enc/W0", random_matrix(3, 4, rng));
  store.add("enc/b0", random_matrix(1, 3, rng));
  store.slot(0).grad = random_matrix(3, 4, rng);
  store.slot(0).touched = true;
  adam_step(store, AdamOptions{});
  std::stringstream buf;
  write_container(buf, to_container(store));
  const ParameterStore back = store_from_container(read_container(buf));
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back.slot(i).name, store.slot(i).name);
    EXPECT_EQ(back.slot(i).value, store.slot(i).value);
    EXPECT_EQ(back.slot(i).steps, store.slot(i).steps);
  }
  EXPECT_EQ(back.slot(0).first_moment, store.slot(0).first_moment);
  EXPECT_EQ(back.slot(0).second_moment, store.slot(0).second_moment);

  std::stringstream again;
  write_container(again, to_container(back));
  std::stringstream first;
  write_container(first, to_container(store));
  EXPECT_EQ(again.str(), first.str());
}

TEST(Container, RejectsBadInput) {
  std::stringstream junk("not a checkpoint");
  EXPECT_THROW(read_container(junk), ConfigError);
  std::stringstream buf;
  TensorContainer c;
  c.records.push_back({"enc/w", {2, 2}, {1, 2, 3, 4}});
  write_container(buf, c);
  const std::string full = buf.str();
  std::stringstream truncated(full.substr(0, full.size() - 9));
  EXPECT_THROW(read_container(truncated), ConfigError);
}

TEST(Encoder, IdentityMapWithoutHiddenLayers) {
  EncoderConfig cfg{.input_dim = 3, .hidden_dims = {}, .embed_dim = 3};
  ParameterStore store;
  Rng rng(1);
  Encoder enc = Encoder::create(cfg, store, rng);
  store.slot(store.index("enc/W0")).value = Matrix::Identity(3, 3);
  store.slot(store.index("enc/b0")).value.setZero();
  Matrix x(2, 3);
  x << 1, -2, 3, 0.5, 0, -1;
  EXPECT_EQ(enc.embed(store, x), x);
}

TEST(Encoder, MatchesDirectEvaluation) {
  EncoderConfig cfg{.input_dim = 4, .hidden_dims = {5, 6}, .embed_dim = 3};
  ParameterStore store;
  Rng rng(2);
  Encoder enc = Encoder::create(cfg, store, rng);
  const Matrix x = random_matrix(7, 4, rng);
  Matrix h = x;
  for (int l = 0; l < 3; ++l) {
    const Matrix& w = store.slot(store.index("enc/W" + std::to_string(l))).value;
    const Matrix& b = store.slot(store.index("enc/b" + std::to_string(l))).value;
    Matrix z = h * w.transpose();
    z.rowwise() += b.row(0);
    h = l < 2 ? Matrix(z.cwiseMax(0.0)) : z;
  }
  const Matrix out = enc.embed(store, x);
  EXPECT_LT((out - h).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(out, enc.embed(store, x));
  const Vector single = enc.embed(store, Vector(x.row(2).transpose()));
  EXPECT_LT((single - h.row(2).transpose()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Encoder, RejectsBadInput) {
  EncoderConfig cfg{.input_dim = 2, .hidden_dims = {3}, .embed_dim = 2};
  ParameterStore store;
  Rng rng(3);
  Encoder enc = Encoder::create(cfg, store, rng);
  Matrix x(1, 2);
  x << 1.0, std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(enc.embed(store, x), ArgumentError);
  x << 1.0, std::numeric_limits<double>::infinity();
  EXPECT_THROW(enc.embed(store, x), ArgumentError);
  EXPECT_THROW(enc.embed(store, Matrix(Matrix::Zero(1, 3))), ArgumentError);
  EXPECT_THROW((EncoderConfig{.input_dim = 0}).validate(), ArgumentError);
}

TEST(Encoder, BindSharesParameters) {
  EncoderConfig cfg{.input_dim = 3, .hidden_dims = {4}, .embed_dim = 2};
  ParameterStore store;
  Rng rng(4);
  const Encoder made = Encoder::create(cfg, store, rng);
  const Encoder bound = Encoder::bind(cfg, store);
  const Matrix x = random_matrix(3, 3, rng);
  EXPECT_EQ(made.embed(store, x), bound.embed(store, x));
  EncoderConfig other = cfg;
  other.hidden_dims = {5};
  EXPECT_THROW(Encoder::bind(other, store), ConfigError);
}

TEST(AuxLoss, UniformLogitsGiveLogC) {
  EncoderConfig cfg{.input_dim = 3, .hidden_dims = {4}, .embed_dim = 2};
  ParameterStore store;
  Rng rng(5);
  const Encoder enc = Encoder::create(cfg, store, rng);
  const AuxHead head = AuxHead::create(2, 7, store, rng);
  store.slot(store.index("fc/W")).value.setZero();
  store.slot(store.index("fc/b")).value.setZero();
  const Matrix batch = random_matrix(4, 3, rng);
  const std::vector<int> labels{0, 3, 6, 2};
  Tape tape(Tape::Mode::kInference);
  const Var loss = aux_loss(tape, ParamView(std::as_const(store)), enc, head, batch, labels);
  EXPECT_NEAR(loss.value()(0, 0), std::log(7.0), 1e-12);
}

TEST(AuxLoss, DominantLogitIsBelowLogC) {
  EncoderConfig cfg{.input_dim = 2, .hidden_dims = {}, .embed_dim = 2};
  ParameterStore store;
  Rng rng(6);
  const Encoder enc = Encoder::create(cfg, store, rng);
  const AuxHead head = AuxHead::create(2, 3, store, rng);
  store.slot(store.index("fc/W")).value.setZero();
  store.slot(store.index("fc/b")).value << 5.0, 0.0, 0.0;
  const std::vector<int> labels{0};
  Tape tape(Tape::Mode::kInference);
  const Var loss = aux_loss(tape, ParamView(std::as_const(store)), enc, head, Matrix::Ones(1, 2), labels);
  EXPECT_LT(loss.value()(0, 0), std::log(3.0));
}

TEST(AuxLoss, MatchesHandRolledCrossEntropy) {
  EncoderConfig cfg{.input_dim = 3, .hidden_dims = {4}, .embed_dim = 3};
  ParameterStore store;
  Rng rng(7);
  const Encoder enc = Encoder::create(cfg, store, rng);
  const AuxHead head = AuxHead::create(3, 5, store, rng);
  const Matrix batch = random_matrix(6, 3, rng);
  const std::vector<int> labels{4, 0, 1, 1, 3, 2};
  const Matrix emb = enc.embed(store, batch);
  const Matrix& w = store.slot(store.index("fc/W")).value;
  const Matrix& b = store.slot(store.index("fc/b")).value;
  double expected = 0.0;
  for (Eigen::Index i = 0; i < emb.rows(); ++i) {
    double denom = 0.0;
    std::vector<double> z(5);
    for (int c = 0; c < 5; ++c) {
      z[c] = emb.row(i).dot(w.row(c)) + b(0, c);
      denom += std::exp(z[c]);
    }
    expected += std::log(denom) - z[labels[i]];
  }
  expected /= 6.0;
  Tape tape(Tape::Mode::kInference);
  const Var loss = aux_loss(tape, ParamView(std::as_const(store)), enc, head, batch, labels);
  EXPECT_NEAR(loss.value()(0, 0), expected, 1e-12);
  EXPECT_THROW(aux_loss(tape, ParamView(std::as_const(store)), enc, head, Matrix(0, 3), {}), ArgumentError);
  const std::vector<int> bad{9};
  EXPECT_THROW(aux_loss(tape, ParamView(std::as_const(store)), enc, head, batch.topRows(1), bad), ArgumentError);
}

class MemoryTest : public ::testing::Test {
 protected:
  void SetUp() override {
    Rng rng(8);
    encoder_ = Encoder::create(EncoderConfig{.input_dim = 3, .hidden_dims = {4}, .embed_dim = 2}, store_, rng);
    pools_[0] = random_matrix(1, 3, rng);
    pools_[1] = random_matrix(8, 3, rng);
    pools_[2] = random_matrix(100, 3, rng);
    pools_[3] = Matrix(0, 3);
  }
  ParameterStore store_;
  Encoder encoder_;
  ClassPools pools_;
};

TEST_F(MemoryTest, SingleSamplePool) {
  PrototypeMemory memory;
  const std::vector<ClassId> cls{0};
  refresh(memory, encoder_, store_, pools_, cls, 3, RefreshOptions{});
  const Vector expected = encoder_.embed(store_, Vector(pools_[0].row(0).transpose()));
  ASSERT_NE(memory.fetch(0), nullptr);
  EXPECT_LT((*memory.fetch(0) - expected).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(memory.entries().at(0).refreshed_at, 3);
}

TEST_F(MemoryTest, FullPoolMeanAtCap) {
  PrototypeMemory memory;
  const std::vector<ClassId> cls{1};
  refresh(memory, encoder_, store_, pools_, cls, 0, RefreshOptions{.sample_cap = 8});
  Vector mean = Vector::Zero(2);
  for (Eigen::Index i = 0; i < 8; ++i) mean += encoder_.embed(store_, Vector(pools_[1].row(i).transpose()));
  mean /= 8.0;
  EXPECT_LT((*memory.fetch(1) - mean).cwiseAbs().maxCoeff(), 1e-12);
}

TEST_F(MemoryTest, CappedRefreshIsDeterministic) {
  PrototypeMemory a, b;
  const std::vector<ClassId> cls{1, 2};
  const RefreshOptions opt{.sample_cap = 16, .seed = 5};
  refresh(a, encoder_, store_, pools_, cls, 6, opt);
  refresh(b, encoder_, store_, pools_, cls, 6, opt);
  EXPECT_EQ(*a.fetch(2), *b.fetch(2));
  // A different episode draws a different subsample.
  refresh(b, encoder_, store_, pools_, cls, 9, opt);
  EXPECT_NE(*a.fetch(2), *b.fetch(2));
  EXPECT_THROW(refresh(b, encoder_, store_, pools_, cls, 9, RefreshOptions{.sample_cap = 0}), ArgumentError);
}

TEST_F(MemoryTest, SkipsEmptyPoolsAndAbsentClasses) {
  PrototypeMemory memory;
  const std::vector<ClassId> cls{3, 7, 0};
  const auto report = refresh(memory, encoder_, store_, pools_, cls, 0, RefreshOptions{});
  EXPECT_EQ(report.refreshed, (std::vector<ClassId>{0}));
  EXPECT_EQ(report.skipped_empty, (std::vector<ClassId>{3, 7}));
  EXPECT_EQ(memory.fetch(3), nullptr);
  EXPECT_EQ(memory.fetch(42), nullptr);
}

TEST_F(MemoryTest, StampsNeverDecrease) {
  PrototypeMemory memory;
  const std::vector<ClassId> cls{0};
  refresh(memory, encoder_, store_, pools_, cls, 6, RefreshOptions{});
  EXPECT_THROW(refresh(memory, encoder_, store_, pools_, cls, 3, RefreshOptions{}), StateError);
  EXPECT_EQ(memory.entries().at(0).refreshed_at, 6);
  EXPECT_THROW(memory.put(0, Vector::Zero(2), 5), StateError);
  Vector nan = Vector::Zero(2);
  nan[0] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(memory.put(1, nan, 7), NumericDomainError);
}

TEST_F(MemoryTest, FetchIsReadOnly) {
  PrototypeMemory memory;
  const std::vector<ClassId> cls{1, 2};
  refresh(memory, encoder_, store_, pools_, cls, 0, RefreshOptions{});
  const Vector first = *memory.fetch(1);
  EXPECT_EQ(*memory.fetch(1), first);
}

TEST_F(MemoryTest, SnapshotRoundTrip) {
  PrototypeMemory memory;
  const std::vector<ClassId> cls{0, 1, 2};
  refresh(memory, encoder_, store_, pools_, cls, 12, RefreshOptions{});
  std::stringstream buf;
  write_container(buf, memory_to_container(memory));
  const PrototypeMemory back = memory_from_container(read_container(buf));
  ASSERT_EQ(back.size(), 3u);
  for (const auto& [id, e] : memory.entries()) {
    EXPECT_EQ(back.entries().at(id).prototype, e.prototype);
    EXPECT_EQ(back.entries().at(id).refreshed_at, 12);
  }
}
