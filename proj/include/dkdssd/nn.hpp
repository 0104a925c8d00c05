// dkdssd/nn.hpp

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

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "dkdssd/conv.hpp"
#include "dkdssd/ops.hpp"
#include "dkdssd/rng.hpp"

namespace dkd {

enum class Init { kZeros, kKaimingUniform, kOrthogonal, kXavierUniform };

/// Ordered, named collection of learnable tensors. Initialization draws from
/// a substream keyed by the parameter name, so a parameter's initial value
/// does not depend on which other parameters exist.
template <typename T>
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed = 0) : seed_(seed) {}

  Tensor<T> Add(const std::string& name, Shape shape, Init init, int fan_in = 0) {
    if (index_.count(name)) throw std::invalid_argument("duplicate parameter " + name);
    std::vector<T> data(NumElements(shape), T(0));
    Rng rng = Substream(seed_, "init/" + name);
    switch (init) {
      case Init::kZeros: break;
      case Init::kKaimingUniform: {
        const double bound = std::sqrt(6.0 / std::max(fan_in, 1));
        std::uniform_real_distribution<double> u(-bound, bound);
        for (auto& v : data) v = static_cast<T>(u(rng));
        break;
      }
      case Init::kXavierUniform: {
        const int fan_out = shape.at(0);
        const double bound = std::sqrt(6.0 / (std::max(fan_in, 1) + fan_out));
        std::uniform_real_distribution<double> u(-bound, bound);
        for (auto& v : data) v = static_cast<T>(u(rng));
        break;
      }
      case Init::kOrthogonal: {
        if (shape.size() != 2) throw ShapeError("orthogonal init needs a matrix, got " + ShapeString(shape));
        const int r = shape[0], c = shape[1];
        std::normal_distribution<double> nd(0.0, 1.0);
        Eigen::MatrixXd a(std::max(r, c), std::min(r, c));
        for (int i = 0; i < a.rows(); ++i)
          for (int j = 0; j < a.cols(); ++j) a(i, j) = nd(rng);
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
        Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(a.rows(), a.cols());
        // Sign fix makes the draw uniform over the orthogonal group.
        Eigen::MatrixXd rm = qr.matrixQR().topLeftCorner(a.cols(), a.cols());
        for (int j = 0; j < q.cols(); ++j)
          if (rm(j, j) < 0) q.col(j) *= -1;
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < c; ++j) data[static_cast<std::size_t>(i) * c + j] = static_cast<T>(r >= c ? q(i, j) : q(j, i));
        break;
      }
    }
    auto t = Tensor<T>::FromData(std::move(shape), std::move(data), true);
    index_[name] = params_.size();
    params_.emplace_back(name, t);
    return t;
  }

  const std::vector<std::pair<std::string, Tensor<T>>>& items() const { return params_; }
  bool contains(const std::string& name) const { return index_.count(name) > 0; }
  Tensor<T> Get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("no parameter " + name);
    return params_[it->second].second;
  }
  std::size_t NumScalars() const {
    std::size_t n = 0;
    for (const auto& [_, t] : params_) n += t.numel();
    return n;
  }
  void ZeroGrad() {
    for (auto& [_, t] : params_) t.zero_grad();
  }
  /// Parameters whose names start with any of the prefixes.
  std::vector<Tensor<T>> WithPrefix(const std::vector<std::string>& prefixes) const {
    std::vector<Tensor<T>> out;
    for (const auto& [n, t] : params_)
      for (const auto& p : prefixes)
        if (n.rfind(p, 0) == 0) {
          out.push_back(t);
          break;
        }
    return out;
  }
  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::vector<std::pair<std::string, Tensor<T>>> params_;
  std::map<std::string, std::size_t> index_;
};

template <typename T>
struct Conv2dLayer {
  Tensor<T> weight, bias;
  Hw stride{1, 1}, pad{0, 0};

  Conv2dLayer() = default;
  Conv2dLayer(ParamStore<T>& ps, const std::string& name, int in_c, int out_c, Hw kernel, Hw stride_,
              Hw pad_, Init init = Init::kKaimingUniform)
      : stride(stride_), pad(pad_) {
    weight = ps.Add(name + ".weight", {out_c, in_c, kernel.h, kernel.w}, init, in_c * kernel.h * kernel.w);
    bias = ps.Add(name + ".bias", {out_c}, Init::kZeros);
  }
  Tensor<T> operator()(const Tensor<T>& x) const { return Conv2d(x, weight, bias, stride, pad); }
};

template <typename T>
struct ConvTranspose2dLayer {
  Tensor<T> weight, bias;
  Hw stride{1, 1}, pad{0, 0};

  ConvTranspose2dLayer() = default;
  ConvTranspose2dLayer(ParamStore<T>& ps, const std::string& name, int in_c, int out_c, Hw kernel,
                       Hw stride_, Hw pad_)
      : stride(stride_), pad(pad_) {
    weight = ps.Add(name + ".weight", {in_c, out_c, kernel.h, kernel.w}, Init::kKaimingUniform,
                    in_c * kernel.h * kernel.w);
    bias = ps.Add(name + ".bias", {out_c}, Init::kZeros);
  }
  Tensor<T> operator()(const Tensor<T>& x) const { return ConvTranspose2d(x, weight, bias, stride, pad); }
};

template <typename T>
struct LinearLayer {
  Tensor<T> weight, bias;

  LinearLayer() = default;
  LinearLayer(ParamStore<T>& ps, const std::string& name, int in, int out, bool with_bias = true,
              Init init = Init::kKaimingUniform) {
    weight = ps.Add(name + ".weight", {out, in}, init, in);
    if (with_bias) bias = ps.Add(name + ".bias", {out}, Init::kZeros);
  }
  Tensor<T> operator()(const Tensor<T>& x) const { return Affine(x, weight, bias); }
  /// Applies the layer to every column of x[in, n] -> [out, n].
  Tensor<T> Columns(const Tensor<T>& x) const {
    Tensor<T> y = MatMul(weight, x);
    if (!bias.defined()) return y;
    return Add(y, BroadcastTo(Reshape(bias, {bias.dim(0), 1}), y.shape()));
  }
};

/// Two-gate gated recurrent unit (update z, reset r):
///   z = sig(Wz x + Uz h + bz), r = sig(Wr x + Ur h + br),
///   n = tanh(Wn x + r * (Un h) + bn), h' = (1 - z) * n + z * h.
template <typename T>
struct GruLayer {
  int input = 0, hidden = 0;
  Tensor<T> w_in;    // [3H, input], rows ordered z, r, n
  Tensor<T> b_in;    // [3H]
  Tensor<T> u_z, u_r, u_n;  // [H, H] each, orthogonal

  GruLayer() = default;
  GruLayer(ParamStore<T>& ps, const std::string& name, int input_, int hidden_)
      : input(input_), hidden(hidden_) {
    w_in = ps.Add(name + ".w_in", {3 * hidden, input}, Init::kXavierUniform, input);
    b_in = ps.Add(name + ".b_in", {3 * hidden}, Init::kZeros);
    u_z = ps.Add(name + ".u_z", {hidden, hidden}, Init::kOrthogonal);
    u_r = ps.Add(name + ".u_r", {hidden, hidden}, Init::kOrthogonal);
    u_n = ps.Add(name + ".u_n", {hidden, hidden}, Init::kOrthogonal);
  }

  Tensor<T> Cell(const Tensor<T>& xz, const Tensor<T>& xr, const Tensor<T>& xn, const Tensor<T>& h) const {
    const Tensor<T> hc = Reshape(h, {hidden, 1});
    Tensor<T> z = Sigmoid(Add(xz, Reshape(MatMul(u_z, hc), {hidden})));
    Tensor<T> r = Sigmoid(Add(xr, Reshape(MatMul(u_r, hc), {hidden})));
    Tensor<T> n = Tanh(Add(xn, Mul(r, Reshape(MatMul(u_n, hc), {hidden}))));
    return Add(Mul(RSub(T(1), z), n), Mul(z, h));
  }

  /// Runs over the columns of x[input, T] from a zero state; returns [hidden, T].
  Tensor<T> Forward(const Tensor<T>& x) const {
    RequireRank(x, 2, "gru");
    if (x.dim(0) != input) throw ShapeError("gru: input " + ShapeString(x.shape()) + " vs size " + std::to_string(input));
    const int steps = x.dim(1);
    LinearLayer<T> proj;
    proj.weight = w_in;
    proj.bias = b_in;
    const Tensor<T> pre = proj.Columns(x);  // [3H, T]
    Tensor<T> h = Tensor<T>::Zeros({hidden});
    std::vector<Tensor<T>> outs;
    outs.reserve(steps);
    for (int t = 0; t < steps; ++t) {
      const Tensor<T> col = Reshape(Slice(pre, 1, t, 1), {3 * hidden});
      h = Cell(Slice(col, 0, 0, hidden), Slice(col, 0, hidden, hidden), Slice(col, 0, 2 * hidden, hidden), h);
      outs.push_back(Reshape(h, {hidden, 1}));
    }
    return Concat(outs, 1);
  }
};

}  // namespace dkd
