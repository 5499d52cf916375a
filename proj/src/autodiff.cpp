#include "gadst/autodiff.hpp"

#include <cmath>

#include "gadst/error.hpp"

namespace gadst::ad {

Value Tape::leaf(Tensor v) {
  nodes_.push_back(Node{std::move(v), Tensor{}, nullptr, -1});
  return Value{static_cast<int32_t>(nodes_.size() - 1)};
}

Value Tape::param(const Tensor& v, int slot) {
  nodes_.push_back(Node{v, Tensor{}, nullptr, slot});
  return Value{static_cast<int32_t>(nodes_.size() - 1)};
}

Value Tape::push(Tensor out, std::function<void(Tape&, Value)> back) {
  nodes_.push_back(Node{std::move(out), Tensor{}, std::move(back), -1});
  return Value{static_cast<int32_t>(nodes_.size() - 1)};
}

void Tape::backward(Value root) {
  if (!root.ok()) throw ValidationError("backward on invalid value");
  if (nodes_[static_cast<size_t>(root.id)].value.size() != 1)
    throw ShapeError("backward root must hold one element");
  for (int32_t i = 0; i <= root.id; ++i)
    nodes_[static_cast<size_t>(i)].grad = Tensor::zeros(nodes_[static_cast<size_t>(i)].value.shape());
  nodes_[static_cast<size_t>(root.id)].grad[0] = 1.0;
  for (int32_t i = root.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (n.back) n.back(*this, Value{i});
  }
}

void Tape::harvest(std::vector<Tensor>& sink) const {
  for (const Node& n : nodes_) {
    if (n.slot < 0 || n.grad.size() == 0) continue;
    if (static_cast<size_t>(n.slot) >= sink.size())
      throw ShapeError("harvest: slot out of range");
    sink[static_cast<size_t>(n.slot)] += n.grad;
  }
}

namespace {

void require_same(const Tensor& a, const Tensor& b, const char* what) {
  check_same_shape(a, b, what);
}

}  // namespace

Value add(Tape& t, Value a, Value b) {
  require_same(t.val(a), t.val(b), "ad::add");
  Tensor out = t.val(a);
  out += t.val(b);
  return t.push(std::move(out), [a, b](Tape& tp, Value self) {
    tp.grad(a) += tp.grad(self);
    tp.grad(b) += tp.grad(self);
  });
}

Value sub(Tape& t, Value a, Value b) {
  require_same(t.val(a), t.val(b), "ad::sub");
  Tensor out = t.val(a);
  out -= t.val(b);
  return t.push(std::move(out), [a, b](Tape& tp, Value self) {
    tp.grad(a) += tp.grad(self);
    tp.grad(b) -= tp.grad(self);
  });
}

Value mul(Tape& t, Value a, Value b) {
  require_same(t.val(a), t.val(b), "ad::mul");
  Tensor out = t.val(a);
  const Tensor& bv = t.val(b);
  for (int64_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return t.push(std::move(out), [a, b](Tape& tp, Value self) {
    const Tensor& g = tp.grad(self);
    const Tensor& av = tp.val(a);
    const Tensor& bv2 = tp.val(b);
    Tensor& ga = tp.grad(a);
    Tensor& gb = tp.grad(b);
    for (int64_t i = 0; i < g.size(); ++i) {
      ga[i] += g[i] * bv2[i];
      gb[i] += g[i] * av[i];
    }
  });
}

Value scale(Tape& t, Value a, double s) {
  Tensor out = t.val(a);
  out *= s;
  return t.push(std::move(out), [a, s](Tape& tp, Value self) {
    const Tensor& g = tp.grad(self);
    Tensor& ga = tp.grad(a);
    for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] * s;
  });
}

Value add_bias_channels(Tape& t, Value x, Value bias) {
  const Tensor& xv = t.val(x);
  const Tensor& bv = t.val(bias);
  if (bv.rank() != 1 || bv.size() == 0 || xv.size() % bv.size() != 0)
    throw ShapeError("add_bias_channels: length not a multiple of channel count");
  int64_t C = bv.size();
  Tensor out = xv;
  for (int64_t i = 0; i < out.size(); ++i) out[i] += bv[i % C];
  return t.push(std::move(out), [x, bias, C](Tape& tp, Value self) {
    const Tensor& g = tp.grad(self);
    tp.grad(x) += g;
    Tensor& gb = tp.grad(bias);
    for (int64_t i = 0; i < g.size(); ++i) gb[i % C] += g[i];
  });
}

Value sigmoid_op(Tape& t, Value a) {
  Tensor out = t.val(a);
  for (auto& v : out.vec()) v = sigmoid(v);
  return t.push(std::move(out), [a](Tape& tp, Value self) {
    const Tensor& g = tp.grad(self);
    const Tensor& y = tp.val(self);
    Tensor& ga = tp.grad(a);
    for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Value tanh_op(Tape& t, Value a) {
  Tensor out = t.val(a);
  for (auto& v : out.vec()) v = std::tanh(v);
  return t.push(std::move(out), [a](Tape& tp, Value self) {
    const Tensor& g = tp.grad(self);
    const Tensor& y = tp.val(self);
    Tensor& ga = tp.grad(a);
    for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

Value relu_op(Tape& t, Value a) {
  Tensor out = t.val(a);
  for (auto& v : out.vec()) v = v > 0 ? v : 0;
  return t.push(std::move(out), [a](Tape& tp, Value self) {
    const Tensor& g = tp.grad(self);
    const Tensor& xv = tp.val(a);
    Tensor& ga = tp.grad(a);
    for (int64_t i = 0; i < g.size(); ++i)
      if (xv[i] > 0) ga[i] += g[i];
  });
}

Value leaky_relu_op(Tape& t, Value a) {
  double slope = leaky_relu_slope();
  Tensor out = t.val(a);
  for (auto& v : out.vec()) v = v > 0 ? v : slope * v;
  return t.push(std::move(out), [a, slope](Tape& tp, Value self) {
    const Tensor& g = tp.grad(self);
    const Tensor& xv = tp.val(a);
    Tensor& ga = tp.grad(a);
    for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (xv[i] > 0 ? 1.0 : slope);
  });
}

Value softmax_op(Tape& t, Value a) {
  const Tensor& xv = t.val(a);
  if (xv.rank() != 1 || xv.size() == 0) throw ShapeError("softmax_op expects nonempty rank-1");
  Tensor out = activation(Act::softmax_last, xv);
  return t.push(std::move(out), [a](Tape& tp, Value self) {
    const Tensor& g = tp.grad(self);
    const Tensor& y = tp.val(self);
    Tensor& ga = tp.grad(a);
    double dotgy = 0;
    for (int64_t i = 0; i < g.size(); ++i) dotgy += g[i] * y[i];
    for (int64_t i = 0; i < g.size(); ++i) ga[i] += y[i] * (g[i] - dotgy);
  });
}

Value matvec(Tape& t, Value x, Value W) {
  const Tensor& xv = t.val(x);
  const Tensor& wv = t.val(W);
  if (xv.rank() != 1 || wv.rank() != 2 || wv.dim(0) != xv.dim(0))
    throw ShapeError("matvec expects x (n), W (n,m)");
  int n = wv.dim(0), m = wv.dim(1);
  Tensor out = Tensor::zeros({m});
  for (int i = 0; i < n; ++i) {
    double a = xv[i];
    const double* wr = wv.data() + static_cast<size_t>(i) * m;
    for (int j = 0; j < m; ++j) out[j] += a * wr[j];
  }
  return t.push(std::move(out), [x, W, n, m](Tape& tp, Value self) {
    const Tensor& g = tp.grad(self);
    const Tensor& xv2 = tp.val(x);
    const Tensor& wv2 = tp.val(W);
    Tensor& gx = tp.grad(x);
    Tensor& gw = tp.grad(W);
    for (int i = 0; i < n; ++i) {
      const double* wr = wv2.data() + static_cast<size_t>(i) * m;
      double* gwr = gw.data() + static_cast<size_t>(i) * m;
      double s = 0, a = xv2[i];
      for (int j = 0; j < m; ++j) {
        s += wr[j] * g[j];
        gwr[j] += a * g[j];
      }
      gx[i] += s;
    }
  });
}

Value dot(Tape& t, Value a, Value b) {
  require_same(t.val(a), t.val(b), "ad::dot");
  const Tensor& av = t.val(a);
  const Tensor& bv = t.val(b);
  double s = 0;
  for (int64_t i = 0; i < av.size(); ++i) s += av[i] * bv[i];
  return t.push(Tensor{s}, [a, b](Tape& tp, Value self) {
    double g = tp.grad(self)[0];
    const Tensor& av2 = tp.val(a);
    const Tensor& bv2 = tp.val(b);
    Tensor& ga = tp.grad(a);
    Tensor& gb = tp.grad(b);
    for (int64_t i = 0; i < av2.size(); ++i) {
      ga[i] += g * bv2[i];
      gb[i] += g * av2[i];
    }
  });
}

Value stack_scalars(Tape& t, const std::vector<Value>& xs) {
  Tensor out = Tensor::zeros({static_cast<int>(xs.size())});
  for (size_t i = 0; i < xs.size(); ++i) {
    if (t.val(xs[i]).size() != 1) throw ShapeError("stack_scalars input must be scalar");
    out[static_cast<int64_t>(i)] = t.val(xs[i])[0];
  }
  return t.push(std::move(out), [xs](Tape& tp, Value self) {
    const Tensor& g = tp.grad(self);
    for (size_t i = 0; i < xs.size(); ++i) tp.grad(xs[i])[0] += g[static_cast<int64_t>(i)];
  });
}

Value weighted_sum(Tape& t, Value weights, const std::vector<Value>& frames) {
  const Tensor& wv = t.val(weights);
  if (wv.rank() != 1 || static_cast<size_t>(wv.size()) != frames.size())
    throw ShapeError("weighted_sum: weight count != frame count");
  if (frames.empty()) throw ShapeError("weighted_sum of nothing");
  Tensor out = Tensor::zeros(t.val(frames[0]).shape());
  for (size_t i = 0; i < frames.size(); ++i) {
    const Tensor& f = t.val(frames[i]);
    require_same(out, f, "weighted_sum frames");
    double w = wv[static_cast<int64_t>(i)];
    for (int64_t j = 0; j < out.size(); ++j) out[j] += w * f[j];
  }
  return t.push(std::move(out), [weights, frames](Tape& tp, Value self) {
    const Tensor& g = tp.grad(self);
    const Tensor& wv2 = tp.val(weights);
    Tensor& gw = tp.grad(weights);
    for (size_t i = 0; i < frames.size(); ++i) {
      const Tensor& f = tp.val(frames[i]);
      Tensor& gf = tp.grad(frames[i]);
      double w = wv2[static_cast<int64_t>(i)], s = 0;
      for (int64_t j = 0; j < g.size(); ++j) {
        s += f[j] * g[j];
        gf[j] += w * g[j];
      }
      gw[static_cast<int64_t>(i)] += s;
    }
  });
}

Value concat_vec(Tape& t, const std::vector<Value>& xs) {
  int64_t total = 0;
  for (Value v : xs) total += t.val(v).size();
  Tensor out = Tensor::zeros({static_cast<int>(total)});
  int64_t off = 0;
  for (Value v : xs) {
    const Tensor& x = t.val(v);
    std::copy(x.vec().begin(), x.vec().end(), out.vec().begin() + off);
    off += x.size();
  }
  return t.push(std::move(out), [xs](Tape& tp, Value self) {
    const Tensor& g = tp.grad(self);
    int64_t off2 = 0;
    for (Value v : xs) {
      Tensor& gx = tp.grad(v);
      for (int64_t i = 0; i < gx.size(); ++i) gx[i] += g[off2 + i];
      off2 += gx.size();
    }
  });
}

Value slice(Tape& t, Value x, int64_t offset, int64_t len) {
  const Tensor& xv = t.val(x);
  if (offset < 0 || len < 0 || offset + len > xv.size())
    throw ShapeError("slice out of range");
  Tensor out = Tensor::zeros({static_cast<int>(len)});
  std::copy(xv.vec().begin() + offset, xv.vec().begin() + offset + len, out.vec().begin());
  return t.push(std::move(out), [x, offset, len](Tape& tp, Value self) {
    const Tensor& g = tp.grad(self);
    Tensor& gx = tp.grad(x);
    for (int64_t i = 0; i < len; ++i) gx[offset + i] += g[i];
  });
}

Value slice_row(Tape& t, Value m, int row, int64_t row_len) {
  return slice(t, m, row * row_len, row_len);
}

Value concat_channels(Tape& t, Value a, int ca, Value b, int cb) {
  const Tensor& av = t.val(a);
  const Tensor& bv = t.val(b);
  if (ca < 1 || cb < 1 || av.size() % ca != 0 || bv.size() % cb != 0 ||
      av.size() / ca != bv.size() / cb)
    throw ShapeError("concat_channels: cell counts disagree");
  int64_t cells = av.size() / ca;
  int co = ca + cb;
  Tensor out = Tensor::zeros({static_cast<int>(cells * co)});
  for (int64_t cell = 0; cell < cells; ++cell) {
    for (int c = 0; c < ca; ++c) out[cell * co + c] = av[cell * ca + c];
    for (int c = 0; c < cb; ++c) out[cell * co + ca + c] = bv[cell * cb + c];
  }
  return t.push(std::move(out), [a, b, ca, cb, cells, co](Tape& tp, Value self) {
    const Tensor& g = tp.grad(self);
    Tensor& ga = tp.grad(a);
    Tensor& gb = tp.grad(b);
    for (int64_t cell = 0; cell < cells; ++cell) {
      for (int c = 0; c < ca; ++c) ga[cell * ca + c] += g[cell * co + c];
      for (int c = 0; c < cb; ++c) gb[cell * cb + c] += g[cell * co + ca + c];
    }
  });
}

Value mean_channels(Tape& t, Value x, int channels) {
  const Tensor& xv = t.val(x);
  if (channels < 1 || xv.size() % channels != 0)
    throw ShapeError("mean_channels: length not a multiple of channels");
  int64_t cells = xv.size() / channels;
  Tensor out = Tensor::zeros({channels});
  for (int64_t cell = 0; cell < cells; ++cell)
    for (int c = 0; c < channels; ++c) out[c] += xv[cell * channels + c];
  for (int c = 0; c < channels; ++c) out[c] /= static_cast<double>(cells);
  return t.push(std::move(out), [x, channels, cells](Tape& tp, Value self) {
    const Tensor& g = tp.grad(self);
    Tensor& gx = tp.grad(x);
    for (int64_t cell = 0; cell < cells; ++cell)
      for (int c = 0; c < channels; ++c)
        gx[cell * channels + c] += g[c] / static_cast<double>(cells);
  });
}

Value sum_squares(Tape& t, Value x) {
  const Tensor& xv = t.val(x);
  double s = 0;
  for (int64_t i = 0; i < xv.size(); ++i) s += xv[i] * xv[i];
  return t.push(Tensor{s}, [x](Tape& tp, Value self) {
    double g = tp.grad(self)[0];
    const Tensor& xv2 = tp.val(x);
    Tensor& gx = tp.grad(x);
    for (int64_t i = 0; i < xv2.size(); ++i) gx[i] += 2.0 * g * xv2[i];
  });
}

Value batch_norm_train(Tape& t, Value x, Value gamma, Value beta, int features,
                       Tensor& running_mean, Tensor& running_var, double momentum, double eps) {
  const Tensor& xv = t.val(x);
  if (features < 1 || xv.size() % features != 0)
    throw ShapeError("batch_norm_train: length not a multiple of features");
  int64_t B = xv.size() / features;
  if (B < 2) throw ValidationError("batch_norm_train needs batch >= 2");
  if (t.val(gamma).size() != features || t.val(beta).size() != features ||
      running_mean.size() != features || running_var.size() != features)
    throw ShapeError("batch_norm_train: feature count mismatch");

  std::vector<double> mu(static_cast<size_t>(features), 0.0);
  std::vector<double> var(static_cast<size_t>(features), 0.0);
  for (int64_t b = 0; b < B; ++b)
    for (int f = 0; f < features; ++f) mu[static_cast<size_t>(f)] += xv[b * features + f];
  for (int f = 0; f < features; ++f) mu[static_cast<size_t>(f)] /= static_cast<double>(B);
  for (int64_t b = 0; b < B; ++b)
    for (int f = 0; f < features; ++f) {
      double d = xv[b * features + f] - mu[static_cast<size_t>(f)];
      var[static_cast<size_t>(f)] += d * d;
    }
  for (int f = 0; f < features; ++f) var[static_cast<size_t>(f)] /= static_cast<double>(B);

  for (int f = 0; f < features; ++f) {
    running_mean[f] = momentum * running_mean[f] + (1 - momentum) * mu[static_cast<size_t>(f)];
    running_var[f] = momentum * running_var[f] + (1 - momentum) * var[static_cast<size_t>(f)];
  }

  const Tensor& gv = t.val(gamma);
  const Tensor& bv = t.val(beta);
  Tensor out = xv;
  for (int64_t b = 0; b < B; ++b)
    for (int f = 0; f < features; ++f) {
      double inv = 1.0 / std::sqrt(var[static_cast<size_t>(f)] + eps);
      out[b * features + f] =
          gv[f] * (xv[b * features + f] - mu[static_cast<size_t>(f)]) * inv + bv[f];
    }

  return t.push(std::move(out),
                [x, gamma, beta, features, B, mu, var, eps](Tape& tp, Value self) {
    const Tensor& g = tp.grad(self);
    const Tensor& xv2 = tp.val(x);
    const Tensor& gv2 = tp.val(gamma);
    Tensor& gx = tp.grad(x);
    Tensor& ggamma = tp.grad(gamma);
    Tensor& gbeta = tp.grad(beta);
    for (int f = 0; f < features; ++f) {
      double m = mu[static_cast<size_t>(f)];
      double inv = 1.0 / std::sqrt(var[static_cast<size_t>(f)] + eps);
      double sum_g = 0, sum_g_xhat = 0;
      for (int64_t b = 0; b < B; ++b) {
        double xhat = (xv2[b * features + f] - m) * inv;
        double gy = g[b * features + f];
        sum_g += gy;
        sum_g_xhat += gy * xhat;
      }
      ggamma[f] += sum_g_xhat;
      gbeta[f] += sum_g;
      double k = gv2[f] * inv / static_cast<double>(B);
      for (int64_t b = 0; b < B; ++b) {
        double xhat = (xv2[b * features + f] - m) * inv;
        double gy = g[b * features + f];
        gx[b * features + f] += k * (static_cast<double>(B) * gy - sum_g - xhat * sum_g_xhat);
      }
    }
  });
}

Value batch_norm_infer(Tape& t, Value x, Value gamma, Value beta, const Tensor& mean,
                       const Tensor& var, double eps) {
  const Tensor& xv = t.val(x);
  int features = static_cast<int>(mean.size());
  if (features < 1 || xv.size() % features != 0)
    throw ShapeError("batch_norm_infer: length not a multiple of features");
  if (t.val(gamma).size() != features || t.val(beta).size() != features ||
      var.size() != features)
    throw ShapeError("batch_norm_infer: feature count mismatch");
  int64_t B = xv.size() / features;
  const Tensor& gv = t.val(gamma);
  const Tensor& bv = t.val(beta);
  // Buffers are captured by value: they may be updated by later forwards.
  Tensor m = mean, vr = var;
  Tensor out = xv;
  for (int64_t b = 0; b < B; ++b)
    for (int f = 0; f < features; ++f) {
      double inv = 1.0 / std::sqrt(vr[f] + eps);
      out[b * features + f] = gv[f] * (xv[b * features + f] - m[f]) * inv + bv[f];
    }
  return t.push(std::move(out),
                [x, gamma, beta, features, B, m, vr, eps](Tape& tp, Value self) {
    const Tensor& g = tp.grad(self);
    const Tensor& xv2 = tp.val(x);
    const Tensor& gv2 = tp.val(gamma);
    Tensor& gx = tp.grad(x);
    Tensor& ggamma = tp.grad(gamma);
    Tensor& gbeta = tp.grad(beta);
    for (int f = 0; f < features; ++f) {
      double inv = 1.0 / std::sqrt(vr[f] + eps);
      for (int64_t b = 0; b < B; ++b) {
        double gy = g[b * features + f];
        gx[b * features + f] += gy * gv2[f] * inv;
        ggamma[f] += gy * (xv2[b * features + f] - m[f]) * inv;
        gbeta[f] += gy;
      }
    }
  });
}

Value dropout_op(Tape& t, Value x, double rate, Rng& rng) {
  if (rate < 0 || rate >= 1) throw ValidationError("dropout rate must be in [0,1)");
  const Tensor& xv = t.val(x);
  if (rate == 0) {
    Tensor out = xv;
    return t.push(std::move(out),
                  [x](Tape& tp, Value self) { tp.grad(x) += tp.grad(self); });
  }
  double keep = 1.0 - rate;
  std::vector<double> mask(static_cast<size_t>(xv.size()));
  for (auto& mv : mask) mv = rng.uniform() < rate ? 0.0 : 1.0 / keep;
  Tensor out = xv;
  for (int64_t i = 0; i < out.size(); ++i) out[i] *= mask[static_cast<size_t>(i)];
  return t.push(std::move(out), [x, mask](Tape& tp, Value self) {
    const Tensor& g = tp.grad(self);
    Tensor& gx = tp.grad(x);
    for (int64_t i = 0; i < g.size(); ++i) gx[i] += g[i] * mask[static_cast<size_t>(i)];
  });
}

}  // namespace gadst::ad

namespace gadst {

int ParamStore::add(std::string name, Tensor value, bool train) {
  if (index_of(name) >= 0) throw ValidationError("duplicate parameter name '" + name + "'");
  names.push_back(std::move(name));
  values.push_back(std::move(value));
  trainable.push_back(train ? 1 : 0);
  return static_cast<int>(values.size() - 1);
}

int ParamStore::index_of(const std::string& name) const {
  for (size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<int>(i);
  return -1;
}

std::vector<Tensor> ParamStore::zero_grads() const {
  std::vector<Tensor> g;
  g.reserve(values.size());
  for (const Tensor& v : values) g.push_back(Tensor::zeros(v.shape()));
  return g;
}

}  // namespace gadst
