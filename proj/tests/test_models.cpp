// tests/test_models.cpp

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

#include <complex>
#include <numbers>

#include "dkdssd/classifier.hpp"
#include "dkdssd/distill.hpp"
#include "dkdssd/enhancer.hpp"
#include "dkdssd/fusion.hpp"
#include "dkdssd/optim.hpp"
#include "test_util.hpp"

using namespace dkd;
using namespace dkd::testing;
using Catch::Approx;

namespace {

std::vector<double> RandomVec(std::size_t n, dkd::Rng& rng, double lo = -1, double hi = 1) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

}  // namespace

// ---------------------------------------------------------------- enhancer

TEST_CASE("enhancer output shape and sign", "[enhancer]") {
  ParamStore<double> ps(3);
  Enhancer<double> enh(ps, "enhancer");
  dkd::Rng rng(1);
  for (int frames : {1, 7, 30}) {
    auto y = enh(RandomTensor({161, frames}, rng, 0.0, 5.0, false));
    CHECK(y.shape() == Shape{161, frames});
    for (double v : y.data()) CHECK(v >= 0.0);
  }
  Randomize(ps, 5, 3.0);
  auto y = enh(RandomTensor({161, 9}, rng, 0.0, 50.0, false));
  for (double v : y.data()) CHECK(v >= 0.0);
  CHECK_THROWS_AS(enh(RandomTensor({160, 9}, rng)), ShapeError);
  EnhancerConfig bad;
  bad.frame.n_fft = 318;  // 160 bins
  ParamStore<double> ps2;
  CHECK_THROWS_AS(Enhancer<double>(ps2, "e", bad), ShapeError);
}

TEST_CASE("enhancer gradients match finite differences", "[enhancer][gradcheck]") {
  ParamStore<double> ps(11);
  Enhancer<double> enh(ps, "enhancer");
  dkd::Rng rng(2);
  auto x = RandomTensor({161, 4}, rng, 0.0, 3.0, true);
  std::vector<TensorD> inputs{x};
  std::vector<std::string> names{"input"};
  for (auto& [n, t] : ps.items()) {
    inputs.push_back(t);
    names.push_back(n);
  }
  auto rep = CheckGradients(inputs, [&] { return Sum(enh(x)); }, 1e-5, 12, 1e-6, 3, names);
  INFO(rep.worst);
  CHECK(rep.max_rel_error < 1e-3);
}

TEST_CASE("enhancer overfits a single pair", "[enhancer][training]") {
  ParamStore<double> ps(7);
  Enhancer<double> enh(ps, "enhancer");
  dkd::Rng rng(4);
  std::normal_distribution<double> nd(0, 0.05);
  Waveform cw, nw;
  for (int i = 0; i < 1920; ++i) {
    const double s = 0.3 * std::sin(2 * std::numbers::pi * 220 * i / 16000.0) +
                     0.1 * std::sin(2 * std::numbers::pi * 660 * i / 16000.0);
    cw.samples.push_back(s);
    nw.samples.push_back(s + nd(rng));
  }
  const FrameParams p{320, 160, WindowKind::kHann};
  auto clean = AnalyzeMagPhase(cw, p).MagnitudeTensor<double>();
  auto noisy = AnalyzeMagPhase(nw, p).MagnitudeTensor<double>();
  std::vector<TensorD> params;
  for (auto& [n, t] : ps.items()) params.push_back(t);
  Adam<double> opt(params, {.lr = 1e-2});
  double first = 0, last = 0;
  for (int step = 0; step < 50; ++step) {
    opt.ZeroGrad();
    auto loss = SeLoss(enh(noisy), clean);
    if (step == 0) first = loss.item();
    last = loss.item();
    Backward(loss);
    opt.Step();
  }
  INFO(first << " -> " << last);
  CHECK(last * 10 <= first);
}

TEST_CASE("se_loss examples and loop oracle", "[enhancer][formula]") {
  dkd::Rng rng(9);
  auto a = RandomTensor({161, 5}, rng, 0, 3, false);
  CHECK(SeLoss(a, a).item() == 0.0);
  CHECK(SeLoss(AddScalar(a, 1.0), a).item() == Approx(1.0).epsilon(1e-12));
  for (int k = 0; k < 20; ++k) {
    auto x = RandomTensor({161, 3 + k}, rng, 0, 3, false), y = RandomTensor({161, 3 + k}, rng, 0, 3, false);
    double s = 0;
    for (int f = 0; f < 161; ++f)
      for (int t = 0; t < 3 + k; ++t) {
        const double d = x[f * (3 + k) + t] - y[f * (3 + k) + t];
        s += d * d;
      }
    CHECK(std::abs(SeLoss(x, y).item() - s / (161.0 * (3 + k))) < 1e-9);
    CHECK(SeLoss(x, y).item() >= 0);
  }
  CHECK_THROWS_AS(SeLoss(a, RandomTensor({161, 6}, rng)), ShapeError);
}

TEST_CASE("reconstruct_time with noisy phase", "[enhancer][dsp]") {
  const FrameParams p{320, 160, WindowKind::kHann};
  dkd::Rng rng(12);
  std::normal_distribution<double> nd(0, 0.2);
  Waveform x;
  x.samples.resize(4000);
  for (auto& v : x.samples) v = nd(rng);
  auto mp = AnalyzeMagPhase(x, p);
  auto y = ReconstructTime(mp.MagnitudeTensor<double>(), mp, p);
  double err = 0, ref = 0;
  for (std::size_t i = 320; i + 320 < x.size(); ++i) {
    err += std::pow(y[i] - x.samples[i], 2);
    ref += x.samples[i] * x.samples[i];
  }
  CHECK(10 * std::log10(err / ref) < -50);

  auto zero = ReconstructTime(TensorD::Zeros({mp.bins, mp.frames}), mp, p);
  for (double v : zero.data()) CHECK(v == 0.0);

  auto mag = RandomVec(mp.magnitude.size(), rng, 0, 2);
  auto phase = RandomVec(mp.magnitude.size(), rng, -3, 3);
  MagPhase rp{mag, phase, mp.bins, mp.frames, x.size()};
  auto got = ReconstructTime(rp.MagnitudeTensor<double>(), rp, p);
  ComplexSpectrogram s;
  s.params = p;
  s.num_bins = mp.bins;
  s.num_frames = mp.frames;
  s.signal_length = x.size();
  s.bins.resize(mag.size());
  for (std::size_t i = 0; i < mag.size(); ++i) s.bins[i] = std::polar(mag[i], phase[i]);
  auto want = Istft(s);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(got[i] == Approx(want.samples[i]).margin(1e-12));
}

// ---------------------------------------------------------------- fusion

TEST_CASE("stem shape, zero input and loop oracle", "[fusion][stem]") {
  ParamStore<double> ps(1);
  Stem<double> stem(ps, "student.stem");
  auto big = stem(TensorD::Zeros({433, 600}));
  CHECK(big.shape() == Shape{16, 216, 300});
  for (double v : big.data()) CHECK(v == 0.0);

  dkd::Rng rng(2);
  auto x = RandomTensor({20, 14}, rng, -2, 2, false);
  Randomize(ps, 3);
  auto y = stem(x);
  int oh, ow;
  auto conv = NaiveConv2d(x.vec(), 1, 20, 14, stem.conv.weight.vec(), 16, 7, 7, stem.conv.bias.vec(), 1, 1, 3, 3, &oh, &ow);
  REQUIRE(y.shape() == Shape{16, 10, 7});
  for (int c = 0; c < 16; ++c)
    for (int i = 0; i < 10; ++i)
      for (int j = 0; j < 7; ++j) {
        double m = -1e300;
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b) m = std::max(m, conv[(c * 20 + 2 * i + a) * 14 + 2 * j + b]);
        CHECK(y[(c * 10 + i) * 7 + j] == Approx(m).margin(1e-12));
      }
}

TEST_CASE("channel interaction identities", "[fusion]") {
  ParamStore<double> ps(4);
  InteractiveFusion<double> f(ps, "fusion");
  dkd::Rng rng(5);
  auto xe = RandomTensor({16, 6, 5}, rng, -2, 2, false);
  auto s = f.ChannelInteract(xe, xe);
  CHECK(s.x_e_tilde.vec() == s.x_n_tilde.vec());

  for (auto& [n, t] : ps.items()) SetAll(t, 0.0);
  auto xn = RandomTensor({16, 6, 5}, rng, -2, 2, false);
  auto z = f.ChannelInteract(xe, xn);
  for (std::size_t i = 0; i < xe.numel(); ++i) {
    CHECK(z.x_fusion[i] == 0.0);
    CHECK(z.w[i] == 0.5);
    CHECK(z.x_e_tilde[i] == 0.5 * xe[i]);
  }
  CHECK_THROWS_AS(f.ChannelInteract(xe, RandomTensor({8, 6, 5}, rng)), ShapeError);
  CHECK_THROWS_AS(f.ChannelInteract(RandomTensor({8, 6, 5}, rng), RandomTensor({8, 6, 5}, rng)), ShapeError);
}

TEST_CASE("fusion matches the direct formula oracle", "[fusion][formula]") {
  for (int k = 0; k < 20; ++k) {
    ParamStore<double> ps(100 + k);
    InteractiveFusion<double> f(ps, "fusion");
    Randomize(ps, 200 + k, 0.4);
    dkd::Rng rng(k);
    const int H = 4 + k % 5, W = 3 + k % 7;
    auto xe = RandomTensor({16, H, W}, rng, -2, 2, false), xn = RandomTensor({16, H, W}, rng, -2, 2, false);
    auto s = f(xe, xn);
    auto o = ComputeFusionOracle(f, xe.vec(), xn.vec(), 16, H, W);
    double worst = 0;
    for (std::size_t i = 0; i < xe.numel(); ++i) {
      worst = std::max({worst, std::abs(s.w[i] - o.w[i]), std::abs(s.x_e_tilde[i] - o.xe_t[i]),
                        std::abs(s.x_n_tilde[i] - o.xn_t[i]), std::abs(s.x_inter[i] - o.inter[i])});
    }
    for (std::size_t p = 0; p < o.mask.size(); ++p) worst = std::max(worst, std::abs(s.mask[p] - o.mask[p]));
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("spatial fusion identities", "[fusion]") {
  ParamStore<double> ps(6);
  InteractiveFusion<double> f(ps, "fusion");
  Randomize(ps, 7);
  dkd::Rng rng(8);
  auto a = RandomTensor({16, 5, 6}, rng, -2, 2, false);
  FusionState<double> s;
  s.x_e_tilde = a;
  s.x_n_tilde = a;
  f.SpatialFuse(s);
  for (std::size_t i = 0; i < a.numel(); ++i) CHECK(s.x_inter[i] == Approx(a[i]).epsilon(1e-15));

  SetAll(f.mask_conv().bias, 50.0);
  FusionState<double> t;
  t.x_e_tilde = RandomTensor({16, 5, 6}, rng, -2, 2, false);
  t.x_n_tilde = RandomTensor({16, 5, 6}, rng, -2, 2, false);
  f.SpatialFuse(t);
  for (std::size_t i = 0; i < a.numel(); ++i) CHECK(t.x_inter[i] == Approx(t.x_n_tilde[i]).margin(1e-9));
}

TEST_CASE("untrained mask is exactly one half", "[fusion]") {
  ParamStore<double> ps(9);
  InteractiveFusion<double> f(ps, "fusion");
  dkd::Rng rng(1);
  auto s = f(RandomTensor({16, 4, 4}, rng, -2, 2, false), RandomTensor({16, 4, 4}, rng, -2, 2, false));
  for (double v : s.mask.data()) CHECK(v == 0.5);
}

TEST_CASE("fusion range, convexity and symmetry properties", "[fusion][property]") {
  for (int k = 0; k < 10; ++k) {
    ParamStore<double> ps(k);
    InteractiveFusion<double> f(ps, "fusion");
    Randomize(ps, 50 + k, 0.5);
    dkd::Rng rng(60 + k);
    auto s = f(RandomTensor({16, 5, 5}, rng, -2, 2, false), RandomTensor({16, 5, 5}, rng, -2, 2, false));
    for (double v : s.w.data()) CHECK((v > 0 && v < 1));
    for (double v : s.mask.data()) CHECK((v > 0 && v < 1));
    for (std::size_t i = 0; i < s.x_inter.numel(); ++i) {
      const double lo = std::min(s.x_e_tilde[i], s.x_n_tilde[i]), hi = std::max(s.x_e_tilde[i], s.x_n_tilde[i]);
      CHECK(s.x_inter[i] >= lo - 1e-12);
      CHECK(s.x_inter[i] <= hi + 1e-12);
    }
    auto swapped = BlendWithMask(s.x_n_tilde, s.x_e_tilde, RSub(1.0, s.mask));
    for (std::size_t i = 0; i < s.x_inter.numel(); ++i) CHECK(swapped[i] == Approx(s.x_inter[i]).margin(1e-12));
  }
}

TEST_CASE("fusion gradients reach both branches and match finite differences", "[fusion][gradcheck]") {
  ParamStore<double> ps(21);
  InteractiveFusion<double> f(ps, "fusion");
  Randomize(ps, 22, 0.4);
  dkd::Rng rng(23);
  auto xe = RandomTensor({16, 4, 5}, rng), xn = RandomTensor({16, 4, 5}, rng);
  Backward(Probe(f(xe, xn).x_inter, 5));
  auto ge = xe.grad(), gn = xn.grad();
  CHECK(*std::max_element(ge.begin(), ge.end(), [](double a, double b) { return std::abs(a) < std::abs(b); }) != 0.0);
  CHECK(*std::max_element(gn.begin(), gn.end(), [](double a, double b) { return std::abs(a) < std::abs(b); }) != 0.0);
  std::vector<TensorD> inputs{xe, xn};
  for (auto& [n, t] : ps.items()) inputs.push_back(t);
  auto rep = CheckGradients(inputs, [&] { return Probe(f(xe, xn).x_inter, 5); }, 1e-5, 20);
  INFO(rep.worst);
  CHECK(rep.max_rel_error < 1e-4);
}

TEST_CASE("mask statistics examples", "[fusion][maskstats]") {
  auto c = ComputeMaskStats("u", std::vector<double>(12, 0.9));
  CHECK(c.max == 0.9);
  CHECK(c.min == 0.9);
  CHECK(c.mean == Approx(0.9));
  CHECK(c.median == 0.9);
  auto q = ComputeMaskStats("v", {0.8, 0.2, 0.6, 0.4});
  CHECK(q.mean == Approx(0.5));
  CHECK(q.median == Approx(0.5));
  CHECK(q.min == 0.2);
  CHECK(q.max == 0.8);
  MaskHistogram h(10);
  h.Add({0.0, 0.05, 0.5, 0.99, 1.0});
  std::size_t total = 0;
  for (auto n : h.counts) total += n;
  CHECK(total == 5);
  CHECK(h.counts[0] == 2);
  CHECK(h.counts[9] == 2);
  CHECK_THROWS(ComputeMaskStats("w", {}));
}

// ---------------------------------------------------------------- classifier

TEST_CASE("classifier output shapes and architecture manifest", "[classifier]") {
  ParamStore<double> ps(1);
  Classifier<double> student(ps, "student.cls"), teacher(ps, "teacher.cls");
  dkd::Rng rng(2);
  auto out = student(RandomTensor({16, 12, 10}, rng, -1, 1, false));
  CHECK(out.logits.shape() == Shape{2});
  CHECK(out.embedding.shape() == Shape{128});
  CHECK(out.norm.item() == Approx(std::sqrt(std::inner_product(out.embedding.data().begin(), out.embedding.data().end(),
                                                               out.embedding.data().begin(), 0.0))));
  std::vector<std::pair<std::string, Shape>> s_manifest, t_manifest;
  for (auto& [n, t] : ps.items()) {
    if (n.rfind("student.cls.", 0) == 0) s_manifest.emplace_back(n.substr(12), t.shape());
    if (n.rfind("teacher.cls.", 0) == 0) t_manifest.emplace_back(n.substr(12), t.shape());
  }
  CHECK(!s_manifest.empty());
  CHECK(s_manifest == t_manifest);
}

TEST_CASE("SE gate with zero excitation weights is one half", "[classifier]") {
  ParamStore<double> ps(3);
  SeBlock<double> blk(ps, "b", 16, 16, 1, 4);
  Randomize(ps, 4);
  SetAll(blk.fc2.weight, 0.0);
  SetAll(blk.fc2.bias, 0.0);
  dkd::Rng rng(5);
  auto x = RandomTensor({16, 6, 6}, rng, -1, 1, false);
  auto y = blk.conv2(Relu(blk.conv1(x)));
  const auto gate = blk.Gate(y);
  for (double g : gate.data()) CHECK(g == 0.5);
  auto out = blk(x);
  for (std::size_t i = 0; i < out.numel(); ++i) CHECK(out[i] == Approx(std::max(0.0, x[i] + 0.5 * y[i])).margin(1e-14));
}

TEST_CASE("classifier block gradients match finite differences", "[classifier][gradcheck]") {
  ParamStore<double> ps(8);
  SeBlock<double> blk(ps, "b", 8, 12, 2, 4);
  Randomize(ps, 9, 0.5);
  dkd::Rng rng(10);
  auto x = RandomTensor({8, 6, 5}, rng);
  std::vector<TensorD> inputs{x};
  for (auto& [n, t] : ps.items()) inputs.push_back(t);
  auto rep = CheckGradients(inputs, [&] { return Probe(blk(x), 2); }, 1e-5, 15);
  INFO(rep.worst);
  CHECK(rep.max_rel_error < 1e-3);

  ParamStore<double> ps2(12);
  Classifier<double> cls(ps2, "student.cls");
  auto feat = RandomTensor({16, 8, 8}, rng, -1, 1, true);
  std::vector<TensorD> all{feat};
  for (auto& [n, t] : ps2.items()) all.push_back(t);
  MarginConfig mc;
  auto rep2 = CheckGradients(all, [&] {
    auto o = cls(feat);
    return HardLoss(o.logits, o.norm, kSpoof, mc, 600);
  }, 1e-5, 6);
  INFO(rep2.worst);
  CHECK(rep2.max_rel_error < 1e-3);
}

TEST_CASE("hard loss at m = 1 is cross-entropy", "[classifier][loss]") {
  MarginConfig m1;
  m1.m = 1;
  auto logits = TensorD::FromData({2}, {std::log(3.0), 0.0});
  auto norm = TensorD::Scalar(2.0);
  CHECK(HardLoss(logits, norm, 0, m1, 0).item() == Approx(-std::log(0.75)).epsilon(1e-12));
  CHECK(-std::log(0.75) == Approx(0.2877).margin(1e-4));
  dkd::Rng rng(3);
  std::uniform_real_distribution<double> u(-4, 4);
  for (int k = 0; k < 200; ++k) {
    const double z0 = u(rng), z1 = u(rng);
    const int y = k % 2;
    auto l = HardLoss(TensorD::FromData({2}, {z0, z1}), TensorD::Scalar(5.0), y, m1, k);
    CHECK(std::abs(l.item() - TextbookCe(z0, z1, y)) < 1e-9);
  }
  CHECK_THROWS_AS(HardLoss(logits, norm, 2, m1, 0), std::invalid_argument);
}

TEST_CASE("psi is continuous and decreasing; margin raises the loss", "[classifier][loss]") {
  for (int m : {1, 2, 3, 4}) {
    for (int i = 0; i <= 200; ++i) {
      const double c = -1 + i / 100.0;
      const double theta = std::acos(std::clamp(c, -1.0, 1.0));
      CHECK(detail::Chebyshev(m, c).first == Approx(std::cos(m * theta)).margin(1e-12));
    }
    double prev = 1e9;
    for (int i = 0; i <= 1000; ++i) {
      const double theta = std::numbers::pi * i / 1000;
      const double v = AngularPsi(TensorD::Scalar(std::cos(theta)), m).item();
      CHECK(v <= prev + 1e-9);
      prev = v;
    }
    CHECK(AngularPsi(TensorD::Scalar(-1.0), m).item() == Approx(-(2.0 * m - 1)));
  }
  dkd::Rng rng(4);
  std::uniform_real_distribution<double> u(-1, 1);
  MarginConfig m1, m2;
  m1.m = 1;
  for (int k = 0; k < 200; ++k) {
    std::vector<double> e(8);
    for (auto& v : e) v = u(rng);
    double n = 0;
    for (double v : e) n += v * v;
    n = std::sqrt(n);
    const double c0 = u(rng), c1 = u(rng);
    auto logits = TensorD::FromData({2}, {n * c0, n * c1});
    const int y = k % 2;
    const long step = k * 7;
    CHECK(HardLoss(logits, TensorD::Scalar(n), y, m2, step).item() >=
          HardLoss(logits, TensorD::Scalar(n), y, m1, step).item() - 1e-12);
  }
  MarginConfig sched;
  CHECK(sched.Lambda(0) == 1000.0);
  CHECK(sched.Lambda(1) == Approx(990.0));
  CHECK(sched.Lambda(100000) == 5.0);
}

TEST_CASE("classifier loss decreases on a separable batch", "[classifier][training]") {
  ParamStore<float> ps(5);
  Classifier<float> cls(ps, "student.cls");
  dkd::Rng rng(6);
  std::normal_distribution<float> nd(0, 1);
  std::vector<Tensor<float>> feats;
  for (int i = 0; i < 8; ++i) {
    std::vector<float> d(16 * 8 * 8);
    for (std::size_t j = 0; j < d.size(); ++j) d[j] = nd(rng) + ((i % 2) && j < 256 ? 1.5f : 0.0f);
    feats.push_back(Tensor<float>::FromData({16, 8, 8}, d));
  }
  std::vector<Tensor<float>> params;
  for (auto& [n, t] : ps.items()) params.push_back(t);
  Adam<float> opt(params, {.lr = 1e-3});
  MarginConfig mc;
  std::vector<double> losses;
  for (int step = 0; step < 20; ++step) {
    opt.ZeroGrad();
    std::vector<Tensor<float>> parts;
    for (int i = 0; i < 8; ++i) {
      auto o = cls(feats[i]);
      parts.push_back(HardLoss(o.logits, o.norm, i % 2, mc, step));
    }
    auto loss = Mean(Concat(parts, 0));
    losses.push_back(loss.item());
    Backward(loss);
    opt.Step();
  }
  INFO(losses.front() << " -> " << losses.back());
  CHECK(losses.back() < 0.5 * losses.front());
}

// ---------------------------------------------------------------- distill

TEST_CASE("kd loss examples", "[distill][formula]") {
  auto y = TensorD::FromData({2}, {0.3, -1.2});
  for (double tau : {0.5, 1.0, 3.0, 10.0}) CHECK(std::abs(KdLoss(y, y, tau).item()) < 1e-15);
  auto yt = TensorD::FromData({2}, {2.0, 0.0}), ys = TensorD::FromData({2}, {0.0, 0.0});
  const double oracle = ScalarKd({0, 0}, {2, 0}, 3.0);
  CHECK(oracle == Approx(9 * (0.66076 * std::log(0.66076 / 0.5) + 0.33924 * std::log(0.33924 / 0.5))).epsilon(1e-4));
  CHECK(KdLoss(ys, yt, 3.0).item() == Approx(oracle).epsilon(1e-12));
  CHECK(std::abs(KdLoss(yt, ys, 3.0).item() - KdLoss(ys, yt, 3.0).item()) > 1e-3);
  CHECK(KdLoss(yt, ys, 3.0).item() == Approx(ScalarKd({2, 0}, {0, 0}, 3.0)).epsilon(1e-12));
  CHECK_THROWS_AS(KdLoss(ys, yt, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(KdLoss(ys, yt, -1.0), std::invalid_argument);
}

TEST_CASE("kd loss matches the scalar oracle in both directions", "[distill][formula][property]") {
  dkd::Rng rng(1);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int k = 0; k < 20; ++k) {
    std::vector<double> a{u(rng), u(rng)}, b{u(rng), u(rng)};
    const double tau = 0.5 + k * 0.25;
    auto ta = TensorD::FromData({2}, a), tb = TensorD::FromData({2}, b);
    CHECK(std::abs(KdLoss(ta, tb, tau).item() - ScalarKd(a, b, tau)) < 1e-6);
    CHECK(std::abs(KdLoss(tb, ta, tau).item() - ScalarKd(b, a, tau)) < 1e-6);
    CHECK(KdLoss(ta, tb, tau).item() >= 0);
  }
}

TEST_CASE("kd gradient never reaches detached teacher logits", "[distill]") {
  dkd::Rng rng(2);
  auto ys = RandomTensor({2}, rng), yt = RandomTensor({2}, rng);
  Backward(KdLoss(ys, yt, 3.0));
  for (double g : yt.grad()) CHECK(g == 0.0);
  bool any = false;
  for (double g : ys.grad()) any |= g != 0.0;
  CHECK(any);
  auto rep = CheckGradients({ys}, [&] { return KdLoss(ys, yt, 3.0); });
  CHECK(rep.max_rel_error < 1e-6);
  auto rep2 = CheckGradients({ys, yt}, [&] { return KdLoss(ys, yt, 2.0, false); });
  CHECK(rep2.max_rel_error < 1e-6);
}

TEST_CASE("ssd loss combination", "[distill][formula]") {
  auto s = [](double v) { return TensorD::Scalar(v); };
  CHECK(SsdLoss(s(1.0), s(2.0), s(0.5), 0.05).item() == Approx(1.55));
  CHECK(SsdLoss(s(1.0), s(2.0), s(0.5), 0.0).item() == 1.5);
  CHECK(SsdLoss(s(1.0), s(2.0), s(0.5), 1.0).item() == 2.5);
  dkd::Rng rng(3);
  std::uniform_real_distribution<double> u(0, 3), ua(0, 1);
  for (int k = 0; k < 20; ++k) {
    const double a = u(rng), b = u(rng), c = u(rng), al = ua(rng);
    CHECK(std::abs(SsdLoss(s(a), s(b), s(c), al).item() - ((1 - al) * a + al * b + c)) < 1e-12);
  }
  DistillConfig bad;
  bad.tau = 0;
  CHECK_THROWS(bad.Validate());
  bad = {};
  bad.alpha = 1.5;
  CHECK_THROWS(bad.Validate());
}
