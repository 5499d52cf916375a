#include "gadst/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "gadst/error.hpp"

namespace gadst {

namespace kernels {

void conv2d_accum(const double* in, int H, int W, int Cin, const double* ker, int K, int Cout,
                  double* out) {
  int P = K / 2;
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      double* op = out + (static_cast<size_t>(y) * W + x) * Cout;
      for (int dy = 0; dy < K; ++dy) {
        int yy = y + dy - P;
        if (yy < 0 || yy >= H) continue;
        for (int dx = 0; dx < K; ++dx) {
          int xx = x + dx - P;
          if (xx < 0 || xx >= W) continue;
          const double* ip = in + (static_cast<size_t>(yy) * W + xx) * Cin;
          const double* kp = ker + (static_cast<size_t>(dy) * K + dx) * Cin * Cout;
          for (int ci = 0; ci < Cin; ++ci) {
            double a = ip[ci];
            const double* kc = kp + static_cast<size_t>(ci) * Cout;
            for (int co = 0; co < Cout; ++co) op[co] += a * kc[co];
          }
        }
      }
    }
  }
}

void conv2d_back(const double* in, int H, int W, int Cin, const double* ker, int K, int Cout,
                 const double* dout, double* din, double* dker) {
  int P = K / 2;
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const double* gp = dout + (static_cast<size_t>(y) * W + x) * Cout;
      for (int dy = 0; dy < K; ++dy) {
        int yy = y + dy - P;
        if (yy < 0 || yy >= H) continue;
        for (int dx = 0; dx < K; ++dx) {
          int xx = x + dx - P;
          if (xx < 0 || xx >= W) continue;
          size_t ioff = (static_cast<size_t>(yy) * W + xx) * Cin;
          size_t koff = (static_cast<size_t>(dy) * K + dx) * Cin * Cout;
          for (int ci = 0; ci < Cin; ++ci) {
            const double* kc = ker + koff + static_cast<size_t>(ci) * Cout;
            if (din) {
              double s = 0;
              for (int co = 0; co < Cout; ++co) s += kc[co] * gp[co];
              din[ioff + static_cast<size_t>(ci)] += s;
            }
            if (dker) {
              double a = in[ioff + static_cast<size_t>(ci)];
              double* dkc = dker + koff + static_cast<size_t>(ci) * Cout;
              for (int co = 0; co < Cout; ++co) dkc[co] += a * gp[co];
            }
          }
        }
      }
    }
  }
}

}  // namespace kernels

Tensor conv2d_same(const Tensor& input, const Tensor& kernels, const Tensor& bias) {
  if (input.rank() != 3) throw ShapeError("conv2d_same input must be (H,W,Cin)");
  if (kernels.rank() != 4) throw ShapeError("conv2d_same kernels must be (K,K,Cin,Cout)");
  int H = input.dim(0), W = input.dim(1), Cin = input.dim(2);
  int K = kernels.dim(0), Cout = kernels.dim(3);
  if (kernels.dim(1) != K) throw ShapeError("conv2d_same kernel must be square");
  if (K % 2 == 0) throw ShapeError("conv2d_same kernel size must be odd");
  if (kernels.dim(2) != Cin)
    throw ShapeError("conv2d_same channel mismatch: input " + std::to_string(Cin) +
                     ", kernel " + std::to_string(kernels.dim(2)));
  bool has_bias = bias.size() > 0;
  if (has_bias && (bias.rank() != 1 || bias.dim(0) != Cout))
    throw ShapeError("conv2d_same bias must have Cout elements");

  Tensor out = Tensor::zeros({H, W, Cout});
  kernels::conv2d_accum(input.data(), H, W, Cin, kernels.data(), K, Cout, out.data());
  if (has_bias) {
    for (int64_t p = 0; p < int64_t{H} * W; ++p)
      for (int co = 0; co < Cout; ++co) out[p * Cout + co] += bias[co];
  }
  return out;
}

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }
double leaky_relu_slope() { return 0.3; }

Tensor activation(Act kind, const Tensor& x) {
  Tensor out = x;
  switch (kind) {
    case Act::sigmoid:
      for (auto& v : out.vec()) v = sigmoid(v);
      return out;
    case Act::tanh:
      for (auto& v : out.vec()) v = std::tanh(v);
      return out;
    case Act::relu:
      for (auto& v : out.vec()) v = v > 0 ? v : 0;
      return out;
    case Act::leaky_relu:
      for (auto& v : out.vec()) v = v > 0 ? v : leaky_relu_slope() * v;
      return out;
    case Act::softmax_last: {
      if (out.rank() < 1) throw ShapeError("softmax needs rank >= 1");
      int64_t n = out.dim(out.rank() - 1);
      if (n < 1) throw ShapeError("softmax over empty axis");
      for (int64_t row = 0; row < out.size() / n; ++row) {
        double* p = out.data() + row * n;
        double mx = *std::max_element(p, p + n);
        double sum = 0;
        for (int64_t i = 0; i < n; ++i) sum += (p[i] = std::exp(p[i] - mx));
        for (int64_t i = 0; i < n; ++i) p[i] /= sum;
      }
      return out;
    }
  }
  throw ValidationError("unknown activation");
}

Tensor dense(const Tensor& x, const Tensor& W, const Tensor& b) {
  if (x.rank() != 1 || W.rank() != 2) throw ShapeError("dense expects x (n), W (n,m)");
  int n = x.dim(0), m = W.dim(1);
  if (W.dim(0) != n) throw ShapeError("dense: W rows != x length");
  if (b.rank() != 1 || b.dim(0) != m) throw ShapeError("dense: bias length != m");
  Tensor out = Tensor::zeros({m});
  for (int j = 0; j < m; ++j) out[j] = b[j];
  for (int i = 0; i < n; ++i) {
    double a = x[i];
    const double* wr = W.data() + static_cast<size_t>(i) * m;
    for (int j = 0; j < m; ++j) out[j] += a * wr[j];
  }
  return out;
}

Tensor glorot_uniform(std::vector<int> shape, int64_t fan_in, int64_t fan_out, Rng& rng) {
  double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t(std::move(shape));
  for (auto& v : t.vec()) v = rng.uniform(-limit, limit);
  return t;
}

BatchNormState::BatchNormState(int features)
    : gamma(Tensor::full({features}, 1.0)),
      beta(Tensor::zeros({features})),
      running_mean(Tensor::zeros({features})),
      running_var(Tensor::full({features}, 1.0)) {}

Tensor batch_norm(const Tensor& x, BatchNormState& state, Mode mode, double momentum,
                  double eps) {
  if (x.rank() != 2) throw ShapeError("batch_norm expects (batch, features)");
  int B = x.dim(0), F = x.dim(1);
  if (state.gamma.dim(0) != F) throw ShapeError("batch_norm feature mismatch");
  Tensor out = Tensor::zeros({B, F});
  if (mode == Mode::train) {
    if (B < 2) throw ValidationError("batch_norm train mode needs batch >= 2");
    for (int f = 0; f < F; ++f) {
      double mu = 0;
      for (int b = 0; b < B; ++b) mu += x[static_cast<int64_t>(b) * F + f];
      mu /= B;
      double var = 0;
      for (int b = 0; b < B; ++b) {
        double d = x[static_cast<int64_t>(b) * F + f] - mu;
        var += d * d;
      }
      var /= B;
      double inv = 1.0 / std::sqrt(var + eps);
      for (int b = 0; b < B; ++b)
        out[static_cast<int64_t>(b) * F + f] =
            state.gamma[f] * (x[static_cast<int64_t>(b) * F + f] - mu) * inv + state.beta[f];
      state.running_mean[f] = momentum * state.running_mean[f] + (1 - momentum) * mu;
      state.running_var[f] = momentum * state.running_var[f] + (1 - momentum) * var;
    }
  } else {
    for (int f = 0; f < F; ++f) {
      double inv = 1.0 / std::sqrt(state.running_var[f] + eps);
      for (int b = 0; b < B; ++b)
        out[static_cast<int64_t>(b) * F + f] =
            state.gamma[f] * (x[static_cast<int64_t>(b) * F + f] - state.running_mean[f]) * inv +
            state.beta[f];
    }
  }
  return out;
}

Tensor dropout(const Tensor& x, double rate, Mode mode, Rng& rng) {
  if (rate < 0 || rate >= 1) throw ValidationError("dropout rate must be in [0,1)");
  if (mode == Mode::infer || rate == 0) return x;
  Tensor out = x;
  double keep = 1.0 - rate;
  for (auto& v : out.vec()) v = rng.uniform() < rate ? 0.0 : v / keep;
  return out;
}

void AdamState::init(const std::vector<Tensor>& params) {
  t = 0;
  m.clear();
  v.clear();
  for (const Tensor& p : params) {
    m.push_back(Tensor::zeros(p.shape()));
    v.push_back(Tensor::zeros(p.shape()));
  }
}

void adam_update(std::vector<Tensor>& params, const std::vector<Tensor>& grads,
                 AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw ShapeError("adam_update: parameter/gradient/state count mismatch");
  ++state.t;
  double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (size_t i = 0; i < params.size(); ++i) {
    check_same_shape(params[i], grads[i], "adam_update");
    double* p = params[i].data();
    const double* g = grads[i].data();
    double* m = state.m[i].data();
    double* v = state.v[i].data();
    for (int64_t j = 0; j < params[i].size(); ++j) {
      double gc = std::clamp(g[j], -state.clip_value, state.clip_value);
      m[j] = state.beta1 * m[j] + (1 - state.beta1) * gc;
      v[j] = state.beta2 * v[j] + (1 - state.beta2) * gc * gc;
      double mhat = m[j] / bc1;
      double vhat = v[j] / bc2;
      p[j] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

std::string GradCheckReport::str() const {
  char buf[256];
  std::snprintf(buf, sizeof buf, "max_rel=%.3e at %s[%lld] analytic=%.6e numeric=%.6e",
                max_rel, worst_param.c_str(), static_cast<long long>(worst_index), analytic,
                numeric);
  return buf;
}

GradCheckReport grad_check(const std::function<double(const std::vector<Tensor>&)>& loss,
                           std::vector<Tensor> params, const std::vector<Tensor>& analytic,
                           const std::vector<std::string>& names, double eps, double abs_floor) {
  if (params.size() != analytic.size())
    throw ShapeError("grad_check: params/gradients count mismatch");
  GradCheckReport rep;
  for (size_t i = 0; i < params.size(); ++i) {
    check_same_shape(params[i], analytic[i], "grad_check");
    for (int64_t j = 0; j < params[i].size(); ++j) {
      double saved = params[i][j];
      params[i][j] = saved + eps;
      double up = loss(params);
      params[i][j] = saved - eps;
      double down = loss(params);
      params[i][j] = saved;
      double numeric = (up - down) / (2 * eps);
      double a = analytic[i][j];
      double rel = std::abs(a - numeric) /
                   std::max({std::abs(a), std::abs(numeric), abs_floor});
      if (rel > rep.max_rel) {
        rep.max_rel = rel;
        rep.worst_param = i < names.size() ? names[i] : "param" + std::to_string(i);
        rep.worst_index = j;
        rep.analytic = a;
        rep.numeric = numeric;
      }
    }
  }
  return rep;
}

}  // namespace gadst
