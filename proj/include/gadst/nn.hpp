#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gadst/rng.hpp"
#include "gadst/tensor.hpp"

namespace gadst {

enum class Mode { train, infer };

namespace kernels {
// Zero-padded same-shape cross-correlation, channel-last layout.
// out (H*W*Cout) is accumulated into, not overwritten.
void conv2d_accum(const double* in, int H, int W, int Cin, const double* ker, int K, int Cout,
                  double* out);
// Gradients of the above; din/dker may be null to skip.
void conv2d_back(const double* in, int H, int W, int Cin, const double* ker, int K, int Cout,
                 const double* dout, double* din, double* dker);
}  // namespace kernels

// input (H,W,Cin), kernels (K,K,Cin,Cout), bias (Cout) or rank-0 empty -> (H,W,Cout)
Tensor conv2d_same(const Tensor& input, const Tensor& kernels, const Tensor& bias);

enum class Act { sigmoid, tanh, relu, leaky_relu, softmax_last };

// Elementwise activation; leaky_relu uses slope 0.3; softmax normalizes the
// last axis.
Tensor activation(Act kind, const Tensor& x);

double sigmoid(double v);
double leaky_relu_slope();

// x (n), W (n,m), b (m) -> xW + b
Tensor dense(const Tensor& x, const Tensor& W, const Tensor& b);

Tensor glorot_uniform(std::vector<int> shape, int64_t fan_in, int64_t fan_out, Rng& rng);

struct BatchNormState {
  Tensor gamma, beta;            // (features)
  Tensor running_mean, running_var;
  explicit BatchNormState(int features);
};

inline constexpr double kBatchNormEps = 1e-3;
inline constexpr double kBatchNormMomentum = 0.99;

// x (batch, features). Train mode normalizes with batch statistics and updates
// running stats; infer mode uses the running stats. Train needs batch >= 2.
Tensor batch_norm(const Tensor& x, BatchNormState& state, Mode mode,
                  double momentum = kBatchNormMomentum, double eps = kBatchNormEps);

// Train: zero with probability `rate`, scale survivors by 1/(1-rate).
Tensor dropout(const Tensor& x, double rate, Mode mode, Rng& rng);

struct AdamState {
  int64_t t = 0;
  double lr = 0.001;
  double beta1 = 0.9, beta2 = 0.999;
  double eps = 1e-7;
  double clip_value = 1.0;
  std::vector<Tensor> m, v;

  void init(const std::vector<Tensor>& params);
};

// Elementwise value clip of grads to [-clip, clip] before the moment update,
// then a standard bias-corrected Adam step.
void adam_update(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& state);

struct GradCheckReport {
  double max_rel = 0;
  std::string worst_param;
  int64_t worst_index = -1;
  double analytic = 0, numeric = 0;
  bool pass(double tol) const { return max_rel <= tol; }
  std::string str() const;
};

// Central finite differences of `loss` against the supplied reverse-mode
// gradients. Relative error uses max(|analytic|, |numeric|, abs_floor) as the
// denominator.
GradCheckReport grad_check(const std::function<double(const std::vector<Tensor>&)>& loss,
                           std::vector<Tensor> params, const std::vector<Tensor>& analytic,
                           const std::vector<std::string>& names, double eps = 1e-3,
                           double abs_floor = 1e-2);

}  // namespace gadst
