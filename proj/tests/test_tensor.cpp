// tests/test_tensor.cpp

// Copyright 2026  The dkdssd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>

#include "dkdssd/checkpoint.hpp"
#include "dkdssd/conv.hpp"
#include "dkdssd/nn.hpp"
#include "dkdssd/ops.hpp"
#include "dkdssd/optim.hpp"
#include "test_util.hpp"

using namespace dkd;
using namespace dkd::testing;
using Catch::Approx;

TEST_CASE("conv2d of ones over ones is the window sum", "[tensor][conv]") {
  auto x = TensorD::Full({1, 3, 3}, 1.0);
  auto w = TensorD::Full({1, 1, 3, 3}, 1.0);
  auto y = Conv2d(x, w, TensorD{});
  REQUIRE(y.shape() == Shape{1, 1, 1});
  CHECK(y.item() == 9.0);
}

TEST_CASE("1x1 unit kernel is the identity", "[tensor][conv]") {
  dkd::Rng rng(3);
  auto x = RandomTensor({1, 4, 5}, rng, -2, 2, false);
  auto y = Conv2d(x, TensorD::Full({1, 1, 1, 1}, 1.0), TensorD{});
  CHECK(y.vec() == x.vec());
}

TEST_CASE("conv2d matches the nested-loop oracle", "[tensor][conv]") {
  for (int seed = 0; seed < 5; ++seed) {
    dkd::Rng rng(seed);
    auto x = RandomTensor({2, 5, 5}, rng);
    auto w = RandomTensor({3, 2, 3, 3}, rng);
    auto b = RandomTensor({3}, rng);
    for (auto [s, p] : {std::pair{1, 0}, std::pair{1, 1}, std::pair{2, 1}}) {
      auto y = Conv2d(x, w, b, {s, s}, {p, p});
      int oh, ow;
      auto ref = NaiveConv2d(x.vec(), 2, 5, 5, w.vec(), 3, 3, 3, b.vec(), s, s, p, p, &oh, &ow);
      REQUIRE(y.shape() == Shape{3, oh, ow});
      for (std::size_t i = 0; i < ref.size(); ++i) CHECK(y[i] == Approx(ref[i]).margin(1e-12));
    }
  }
}

TEST_CASE("conv2d rejects mismatched shapes", "[tensor][conv]") {
  auto x = TensorD::Zeros({2, 5, 5});
  CHECK_THROWS_AS(Conv2d(x, TensorD::Zeros({1, 3, 3, 3}), TensorD{}), ShapeError);
  CHECK_THROWS_AS(Conv2d(x, TensorD::Zeros({1, 2, 7, 7}), TensorD{}), ShapeError);
  CHECK_THROWS_AS(Conv2d(TensorD::Zeros({5, 5}), TensorD::Zeros({1, 1, 3, 3}), TensorD{}), ShapeError);
}

TEST_CASE("pool2d examples", "[tensor][pool]") {
  auto x = TensorD::FromData({1, 2, 2}, {1, 2, 3, 4});
  CHECK(Pool2d(x, {2, 2}, {2, 2}, PoolMode::kMax).item() == 4.0);
  CHECK(Pool2d(x, {2, 2}, {2, 2}, PoolMode::kAvg).item() == 2.5);
  CHECK_THROWS_AS(Pool2d(x, {0, 2}, {1, 1}, PoolMode::kMax), ShapeError);
  CHECK_THROWS_AS(Pool2d(x, {3, 3}, {1, 1}, PoolMode::kMax), ShapeError);
}

TEST_CASE("pool2d matches per-window brute force and routes gradients", "[tensor][pool]") {
  dkd::Rng rng(11);
  auto x = RandomTensor({1, 4, 4}, rng);
  auto mx = Pool2d(x, {2, 2}, {2, 2}, PoolMode::kMax);
  auto av = Pool2d(x, {2, 2}, {2, 2}, PoolMode::kAvg);
  for (int y = 0; y < 2; ++y)
    for (int z = 0; z < 2; ++z) {
      double best = -1e300, sum = 0;
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
          const double v = x[(2 * y + i) * 4 + 2 * z + j];
          best = std::max(best, v);
          sum += v;
        }
      CHECK(mx[y * 2 + z] == best);
      CHECK(av[y * 2 + z] == Approx(sum / 4));
    }
  // One-hot per window for max, uniform quarter for avg.
  Backward(Sum(mx));
  auto g = x.grad();
  for (int y = 0; y < 2; ++y)
    for (int z = 0; z < 2; ++z) {
      double s = 0;
      int ones = 0;
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
          const double v = g[(2 * y + i) * 4 + 2 * z + j];
          s += v;
          ones += v == 1.0;
        }
      CHECK(s == 1.0);
      CHECK(ones == 1);
    }
  x.zero_grad();
  Backward(Sum(av));
  for (double v : x.grad()) CHECK(v == 0.25);
}

TEST_CASE("elementwise examples", "[tensor][elementwise]") {
  CHECK(Sigmoid(TensorD::Scalar(0.0)).item() == 0.5);
  auto sm = Softmax(TensorD::FromData({2}, {0.0, 0.0}));
  CHECK(sm[0] == 0.5);
  CHECK(sm[1] == 0.5);
  // Sigmoid stays strictly inside (0,1) for moderate arguments.
  auto s = Sigmoid(TensorD::FromData({2}, {-30.0, 30.0}));
  CHECK(s[0] > 0.0);
  CHECK(s[1] < 1.0);
  // log clamps at epsilon.
  CHECK(Log(TensorD::Scalar(0.0)).item() == Approx(std::log(1e-8)));
  CHECK_THROWS_AS(Add(TensorD::Zeros({2}), TensorD::Zeros({3})), ShapeError);
}

TEST_CASE("softmax rows sum to one", "[tensor][elementwise][property]") {
  for (int seed = 0; seed < 20; ++seed) {
    dkd::Rng rng(seed);
    auto x = RandomTensor({4, 7}, rng, -20, 20, false);
    auto y = Softmax(x);
    for (int r = 0; r < 4; ++r) {
      double s = 0;
      for (int c = 0; c < 7; ++c) s += y[r * 7 + c];
      CHECK(std::abs(s - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("backward examples", "[tensor][backward]") {
  auto p = TensorD::FromData({3}, {1, 2, 3}, true);
  Backward(Sum(p));
  CHECK(p.grad() == std::vector<double>{1, 1, 1});
  p.zero_grad();
  Backward(Sum(Mul(p, p)));
  CHECK(p.grad() == std::vector<double>{2, 4, 6});
}

TEST_CASE("backward rejects non-scalar losses and reuse", "[tensor][backward]") {
  auto p = TensorD::FromData({3}, {1, 2, 3}, true);
  CHECK_THROWS_AS(Backward(Mul(p, p)), GraphError);
  auto loss = Sum(Mul(p, p));
  Backward(loss);
  CHECK_THROWS_AS(Backward(loss), GraphError);
}

TEST_CASE("detach cuts the graph", "[tensor][backward]") {
  auto p = TensorD::FromData({2}, {1, 2}, true);
  auto loss = Sum(Add(Mul(p, p.detach()), p));
  Backward(loss);
  CHECK(p.grad() == std::vector<double>{2, 3});
}

TEST_CASE("softmax-KL composite gradient matches finite differences", "[tensor][gradcheck]") {
  for (int seed = 0; seed < 20; ++seed) {
    dkd::Rng rng(seed);
    auto zs = RandomTensor({2}, rng);
    auto zt = RandomTensor({2}, rng, -2, 2, false);
    auto f = [&] {
      auto pt = Softmax(zt);
      return Sum(Mul(pt, Sub(Log(pt), LogSoftmax(zs))));
    };
    auto rep = CheckGradients({zs}, f);
    INFO(rep.worst);
    CHECK(rep.max_rel_error < 1e-4);
  }
}

TEST_CASE("every op's gradient matches central differences", "[tensor][gradcheck][property]") {
  for (const auto& op : AllOps()) {
    for (int seed = 0; seed < 20; ++seed) {
      dkd::Rng rng(1000 + seed);
      auto inputs = op.make(rng);
      auto rep = CheckGradients(inputs, [&] { return Probe(op.apply(inputs), seed); });
      INFO(op.name << " seed " << seed << ": " << rep.worst);
      CHECK(rep.max_rel_error < 1e-4);
    }
  }
}

TEST_CASE("gru gradient matches central differences", "[tensor][gradcheck][gru]") {
  for (int seed = 0; seed < 5; ++seed) {
    ParamStore<double> ps(seed);
    GruLayer<double> gru(ps, "gru", 4, 3);
    dkd::Rng rng(seed);
    auto x = RandomTensor({4, 6}, rng);
    std::vector<TensorD> inputs{x};
    for (auto& [_, t] : ps.items()) inputs.push_back(t);
    auto rep = CheckGradients(inputs, [&] { return Probe(gru.Forward(x), seed); });
    INFO(rep.worst);
    CHECK(rep.max_rel_error < 1e-4);
  }
}

TEST_CASE("orthogonal init yields orthonormal columns", "[tensor][init]") {
  ParamStore<double> ps(5);
  auto u = ps.Add("u", {6, 6}, Init::kOrthogonal);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) {
      double d = 0;
      for (int k = 0; k < 6; ++k) d += u[k * 6 + i] * u[k * 6 + j];
      CHECK(d == Approx(i == j ? 1.0 : 0.0).margin(1e-12));
    }
}

TEST_CASE("initialization depends only on seed and parameter name", "[tensor][init]") {
  ParamStore<double> a(7), b(7);
  a.Add("other", {4}, Init::kKaimingUniform, 4);
  auto x = a.Add("conv.weight", {2, 1, 3, 3}, Init::kKaimingUniform, 9);
  auto y = b.Add("conv.weight", {2, 1, 3, 3}, Init::kKaimingUniform, 9);
  CHECK(x.vec() == y.vec());
}

TEST_CASE("backward is deterministic", "[tensor][property]") {
  auto run = [] {
    dkd::Rng rng(42);
    auto x = RandomTensor({2, 8, 8}, rng);
    auto w = RandomTensor({4, 2, 3, 3}, rng);
    Backward(Probe(Pool2d(Relu(Conv2d(x, w, TensorD{}, {1, 1}, {1, 1})), {2, 2}, {2, 2}, PoolMode::kMax)));
    auto g = w.grad();
    auto gx = x.grad();
    g.insert(g.end(), gx.begin(), gx.end());
    return g;
  };
  CHECK(run() == run());
}

TEST_CASE("adam examples", "[tensor][adam]") {
  AdamConfig cfg;
  cfg.lr = 0.1;
  {
    std::vector<double> p{1.5}, g{0.0};
    AdamState<double> st;
    AdamStep<double>(p, g, st, cfg);
    CHECK(p[0] == 1.5);
  }
  {
    std::vector<double> p{1.0}, g{1.0};
    AdamState<double> st;
    AdamStep<double>(p, g, st, cfg);
    CHECK(p[0] == Approx(0.9).epsilon(1e-7));
  }
  {
    // Independent scalar recurrence, two steps of constant gradient 0.3.
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8, lr = 0.1, gv = 0.3;
    double m = 0, v = 0, x = 2.0;
    for (int t = 1; t <= 2; ++t) {
      m = b1 * m + (1 - b1) * gv;
      v = b2 * v + (1 - b2) * gv * gv;
      x -= lr * (m / (1 - std::pow(b1, t))) / (std::sqrt(v / (1 - std::pow(b2, t))) + eps);
    }
    std::vector<double> p{2.0}, g{gv};
    AdamState<double> st;
    AdamStep<double>(p, g, st, cfg);
    AdamStep<double>(p, g, st, cfg);
    CHECK(p[0] == Approx(x).epsilon(1e-14));
  }
  std::vector<double> p{1.0, 2.0}, g{1.0};
  AdamState<double> st;
  CHECK_THROWS_AS(AdamStep<double>(p, g, st, cfg), ShapeError);
}

TEST_CASE("checkpoint round-trips names, shapes and float32 values", "[tensor][checkpoint]") {
  ParamStore<float> ps(3);
  ps.Add("a.weight", {2, 3, 3, 3}, Init::kKaimingUniform, 27);
  ps.Add("b", {5}, Init::kXavierUniform, 5);
  const auto path = (std::filesystem::temp_directory_path() / "dkdssd_ck_test.bin").string();
  SaveParams(path, ps);
  auto ck = ReadCheckpoint(path);
  REQUIRE(ck.size() == 2);
  CHECK(ck.at("a.weight").shape == Shape{2, 3, 3, 3});
  ParamStore<float> other(99);
  other.Add("a.weight", {2, 3, 3, 3}, Init::kZeros);
  other.Add("b", {5}, Init::kZeros);
  LoadParams(ck, other);
  CHECK(other.Get("a.weight").vec() == ps.Get("a.weight").vec());
  CHECK(other.Get("b").vec() == ps.Get("b").vec());

  ParamStore<float> wrong(1);
  wrong.Add("b", {4}, Init::kZeros);
  CHECK_THROWS_AS(LoadParams(ck, wrong), CheckpointError);

  // Header layout.
  std::FILE* f = std::fopen(path.c_str(), "rb");
  char head[12];
  REQUIRE(std::fread(head, 1, 12, f) == 12);
  std::fclose(f);
  CHECK(std::string(head, 4) == "DKDT");
  std::uint32_t version, count;
  std::memcpy(&version, head + 4, 4);
  std::memcpy(&count, head + 8, 4);
  CHECK(version == 1);
  CHECK(count == 2);
  std::filesystem::remove(path);
}
