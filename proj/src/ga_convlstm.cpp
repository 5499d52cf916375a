#include "gadst/ga_convlstm.hpp"

#include <cmath>

#include "gadst/error.hpp"
#include "gadst/nn.hpp"

namespace gadst {

static void check_frame(const Tensor& frame, const GeoIndexTable& table, int cin,
                        const char* what) {
  if (frame.rank() != 1 || frame.size() != table.flat_len() * cin)
    throw ShapeError(std::string(what) + ": frame length " + std::to_string(frame.size()) +
                     " != table length " + std::to_string(table.flat_len()) + " x " +
                     std::to_string(cin) + " channels");
}

Tensor ga_conv(const Tensor& frame, const GeoIndexTable& table, const Tensor& kernels,
               const Tensor& bias) {
  if (kernels.rank() != 4) throw ShapeError("ga_conv kernels must be (K,K,Cin,Cout)");
  int K = kernels.dim(0), cin = kernels.dim(2), cout = kernels.dim(3);
  if (kernels.dim(1) != K || K % 2 == 0) throw ShapeError("ga_conv kernel must be square, odd");
  check_frame(frame, table, cin, "ga_conv");
  bool has_bias = bias.size() > 0;
  if (has_bias && (bias.rank() != 1 || bias.dim(0) != cout))
    throw ShapeError("ga_conv bias must have Cout elements");

  Tensor out = Tensor::zeros({static_cast<int>(table.flat_len()) * cout});
  for (const GeoIndexEntry& e : table.entries)
    kernels::conv2d_accum(frame.data() + e.index_start * cin, e.h, e.w, cin, kernels.data(), K,
                          cout, out.data() + e.index_start * cout);
  if (has_bias)
    for (int64_t cell = 0; cell < table.flat_len(); ++cell)
      for (int co = 0; co < cout; ++co) out[cell * cout + co] += bias[co];
  return out;
}

void GALayerWeights::check(const GeoIndexTable& table) const {
  int K = kernel(), ci = cin(), f = filters();
  for (int g = 0; g < 4; ++g) {
    if (wx[g].rank() != 4 || wx[g].dim(0) != K || wx[g].dim(1) != K || wx[g].dim(2) != ci ||
        wx[g].dim(3) != f)
      throw ShapeError("GALayerWeights: input kernel shape mismatch");
    if (wh[g].rank() != 4 || wh[g].dim(0) != K || wh[g].dim(1) != K || wh[g].dim(2) != f ||
        wh[g].dim(3) != f)
      throw ShapeError("GALayerWeights: recurrent kernel shape mismatch");
    if (b[g].rank() != 1 || b[g].dim(0) != f)
      throw ShapeError("GALayerWeights: bias shape mismatch");
  }
  for (int p = 0; p < 3; ++p)
    if (wc[p].rank() != 1 || wc[p].size() != table.flat_len() * f)
      throw ShapeError("GALayerWeights: peephole length must match state length");
}

GAStateT zero_state(const GeoIndexTable& table, int filters) {
  GAStateT s;
  s.h = Tensor::zeros({static_cast<int>(table.flat_len()) * filters});
  s.c = s.h;
  return s;
}

namespace {

Tensor hadamard(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "hadamard");
  Tensor out = a;
  for (int64_t i = 0; i < out.size(); ++i) out[i] *= b[i];
  return out;
}

void add_bias_per_channel(Tensor& x, const Tensor& bias) {
  int64_t C = bias.size();
  for (int64_t i = 0; i < x.size(); ++i) x[i] += bias[i % C];
}

Tensor map_unary(const Tensor& x, double (*f)(double)) {
  Tensor out = x;
  for (auto& v : out.vec()) v = f(v);
  return out;
}

}  // namespace

GAStateT cell_step(const Tensor& x, const GAStateT& prev, const GALayerWeights& w,
                   const GeoIndexTable& table) {
  w.check(table);
  check_frame(x, table, w.cin(), "cell_step input");
  int f = w.filters();
  if (prev.h.size() != table.flat_len() * f || prev.c.size() != prev.h.size())
    throw ShapeError("cell_step: state length mismatch");

  Tensor empty;
  Tensor pre_i = ga_conv(x, table, w.wx[0], empty) + ga_conv(prev.h, table, w.wh[0], empty) +
                 hadamard(w.wc[0], prev.c);
  add_bias_per_channel(pre_i, w.b[0]);
  Tensor i = map_unary(pre_i, [](double v) { return sigmoid(v); });

  Tensor pre_f = ga_conv(x, table, w.wx[1], empty) + ga_conv(prev.h, table, w.wh[1], empty) +
                 hadamard(w.wc[1], prev.c);
  add_bias_per_channel(pre_f, w.b[1]);
  Tensor fg = map_unary(pre_f, [](double v) { return sigmoid(v); });

  Tensor pre_c = ga_conv(x, table, w.wx[2], empty) + ga_conv(prev.h, table, w.wh[2], empty);
  add_bias_per_channel(pre_c, w.b[2]);
  Tensor cand = map_unary(pre_c, [](double v) { return std::tanh(v); });

  GAStateT next;
  next.c = hadamard(fg, prev.c) + hadamard(i, cand);

  Tensor pre_o = ga_conv(x, table, w.wx[3], empty) + ga_conv(prev.h, table, w.wh[3], empty) +
                 hadamard(w.wc[2], next.c);
  add_bias_per_channel(pre_o, w.b[3]);
  Tensor o = map_unary(pre_o, [](double v) { return sigmoid(v); });

  next.h = hadamard(o, map_unary(next.c, [](double v) { return std::tanh(v); }));
  return next;
}

LayerForwardResult layer_forward(const std::vector<Tensor>& xs, const GALayerWeights& w,
                                 const GeoIndexTable& table, bool return_sequences) {
  if (xs.empty()) throw ValidationError("layer_forward on empty sequence");
  LayerForwardResult res;
  GAStateT state = zero_state(table, w.filters());
  for (const Tensor& x : xs) {
    state = cell_step(x, state, w, table);
    if (return_sequences) res.hs.push_back(state.h);
  }
  if (!return_sequences) res.hs.push_back(state.h);
  res.final_state = std::move(state);
  return res;
}

// --- tape versions -------------------------------------------------------

GAConvLSTMLayer add_ga_convlstm(ParamStore& store, const std::string& prefix, int cin,
                                int filters, int kernel, int64_t state_len, Rng& init) {
  if (kernel % 2 == 0 || kernel < 1) throw ValidationError("kernel size must be odd");
  GAConvLSTMLayer def;
  def.cin = cin;
  def.filters = filters;
  def.kernel = kernel;
  static const char* gate[4] = {"i", "f", "c", "o"};
  for (int g = 0; g < 4; ++g)
    def.wx[g] = store.add(prefix + "/wx" + gate[g],
                          glorot_uniform({kernel, kernel, cin, filters},
                                         int64_t{kernel} * kernel * cin,
                                         int64_t{kernel} * kernel * filters, init));
  for (int g = 0; g < 4; ++g)
    def.wh[g] = store.add(prefix + "/wh" + gate[g],
                          glorot_uniform({kernel, kernel, filters, filters},
                                         int64_t{kernel} * kernel * filters,
                                         int64_t{kernel} * kernel * filters, init));
  for (int g = 0; g < 4; ++g)
    def.b[g] = store.add(prefix + "/b" + gate[g], Tensor::zeros({filters}));
  static const char* peep[3] = {"i", "f", "o"};
  for (int p = 0; p < 3; ++p)
    def.wc[p] = store.add(prefix + "/wc" + peep[p],
                          Tensor::zeros({static_cast<int>(state_len)}));
  return def;
}

BoundGALayer bind_layer(ad::Tape&, const std::vector<ad::Value>& slots,
                        const GAConvLSTMLayer& def) {
  BoundGALayer b;
  b.def = &def;
  for (int g = 0; g < 4; ++g) {
    b.wx[g] = slots[static_cast<size_t>(def.wx[g])];
    b.wh[g] = slots[static_cast<size_t>(def.wh[g])];
    b.b[g] = slots[static_cast<size_t>(def.b[g])];
  }
  for (int p = 0; p < 3; ++p) b.wc[p] = slots[static_cast<size_t>(def.wc[p])];
  return b;
}

GAState zero_state(ad::Tape& tape, const GeoIndexTable& table, int filters) {
  GAState s;
  s.h = tape.leaf(Tensor::zeros({static_cast<int>(table.flat_len()) * filters}));
  s.c = tape.leaf(tape.val(s.h));
  return s;
}

ad::Value ga_conv_op(ad::Tape& tape, ad::Value frame, ad::Value kernels,
                     const GeoIndexTable& table) {
  const Tensor& kv = tape.val(kernels);
  if (kv.rank() != 4) throw ShapeError("ga_conv_op kernels must be (K,K,Cin,Cout)");
  int K = kv.dim(0), cin = kv.dim(2), cout = kv.dim(3);
  if (kv.dim(1) != K || K % 2 == 0) throw ShapeError("ga_conv_op kernel must be square, odd");
  check_frame(tape.val(frame), table, cin, "ga_conv_op");

  Tensor out = Tensor::zeros({static_cast<int>(table.flat_len()) * cout});
  const Tensor& fv = tape.val(frame);
  for (const GeoIndexEntry& e : table.entries)
    kernels::conv2d_accum(fv.data() + e.index_start * cin, e.h, e.w, cin, kv.data(), K, cout,
                          out.data() + e.index_start * cout);

  const GeoIndexTable* tbl = &table;
  return tape.push(std::move(out),
                   [frame, kernels, tbl, K, cin, cout](ad::Tape& tp, ad::Value self) {
    const Tensor& g = tp.grad(self);
    const Tensor& fv2 = tp.val(frame);
    const Tensor& kv2 = tp.val(kernels);
    Tensor& gf = tp.grad(frame);
    Tensor& gk = tp.grad(kernels);
    for (const GeoIndexEntry& e : tbl->entries)
      kernels::conv2d_back(fv2.data() + e.index_start * cin, e.h, e.w, cin, kv2.data(), K, cout,
                           g.data() + e.index_start * cout, gf.data() + e.index_start * cin,
                           gk.data());
  });
}

GAState cell_step(ad::Tape& tape, const GeoIndexTable& table, const BoundGALayer& layer,
                  ad::Value x, const GAState& prev) {
  using namespace ad;
  auto gate_pre = [&](int g) {
    Value s = add(tape, ga_conv_op(tape, x, layer.wx[g], table),
                  ga_conv_op(tape, prev.h, layer.wh[g], table));
    return s;
  };
  Value pre_i = add(tape, gate_pre(0), mul(tape, layer.wc[0], prev.c));
  Value i = sigmoid_op(tape, add_bias_channels(tape, pre_i, layer.b[0]));
  Value pre_f = add(tape, gate_pre(1), mul(tape, layer.wc[1], prev.c));
  Value f = sigmoid_op(tape, add_bias_channels(tape, pre_f, layer.b[1]));
  Value cand = tanh_op(tape, add_bias_channels(tape, gate_pre(2), layer.b[2]));
  GAState next;
  next.c = add(tape, mul(tape, f, prev.c), mul(tape, i, cand));
  Value pre_o = add(tape, gate_pre(3), mul(tape, layer.wc[2], next.c));
  Value o = sigmoid_op(tape, add_bias_channels(tape, pre_o, layer.b[3]));
  next.h = mul(tape, o, tanh_op(tape, next.c));
  return next;
}

std::vector<ad::Value> layer_forward(ad::Tape& tape, const GeoIndexTable& table,
                                     const BoundGALayer& layer, const std::vector<ad::Value>& xs,
                                     GAState* final_state) {
  if (xs.empty()) throw ValidationError("layer_forward on empty sequence");
  std::vector<ad::Value> hs;
  GAState state = zero_state(tape, table, layer.def->filters);
  for (ad::Value x : xs) {
    state = cell_step(tape, table, layer, x, state);
    hs.push_back(state.h);
  }
  if (final_state) *final_state = state;
  return hs;
}

}  // namespace gadst
