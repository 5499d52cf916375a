#include "gadst/model.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <utility>

#include "gadst/error.hpp"

namespace gadst {

void HyperConfig::validate() const {
  if (filters < 1) throw ConfigError("filters must be >= 1");
  if (kernel < 1 || kernel % 2 == 0) throw ConfigError("kernel size must be odd and positive");
  if (depth < 1) throw ConfigError("depth must be >= 1");
  if (d_a < 1) throw ConfigError("attention width must be >= 1");
  if (ext_units < 1) throw ConfigError("ext_units must be >= 1");
  if (horizon < 1) throw ConfigError("horizon must be >= 1");
  if (dropout < 0 || dropout >= 1) throw ConfigError("dropout must be in [0, 1)");
  if (lambda1 < 0 || lambda2 < 0) throw ConfigError("loss weights must be nonnegative");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (!(lr > 0)) throw ConfigError("learning rate must be positive");
  if (!(lr_decay > 0) || lr_decay > 1) throw ConfigError("lr_decay must be in (0, 1]");
}

namespace {

Tensor plain_matvec(const Tensor& x, const Tensor& W) {
  if (W.rank() != 2 || x.size() != W.dim(0))
    throw ShapeError("matvec mismatch: " + x.shape_str() + " . " + W.shape_str());
  const int n = W.dim(0), m = W.dim(1);
  Tensor out = Tensor::zeros({m});
  for (int j = 0; j < n; ++j) {
    const double xv = x[j];
    if (xv == 0) continue;
    for (int k = 0; k < m; ++k) out[k] += xv * W[static_cast<int64_t>(j) * m + k];
  }
  return out;
}

}  // namespace

AttentionResult attention_context(const Tensor& s_prev, const std::vector<Tensor>& annotations,
                                  const AttentionWeightsT& w) {
  if (annotations.empty()) throw ValidationError("attention needs at least one annotation");
  const int64_t da = w.v.size();
  Tensor q = plain_matvec(s_prev, w.ws);
  if (q.size() != da) throw ShapeError("attention widths disagree between ws and v");

  const size_t T = annotations.size();
  Tensor scores = Tensor::zeros({static_cast<int>(T)});
  for (size_t j = 0; j < T; ++j) {
    Tensor u = plain_matvec(annotations[j], w.wh);
    double e = 0;
    for (int64_t k = 0; k < da; ++k) e += w.v[k] * std::tanh(q[k] + u[k]);
    scores[static_cast<int64_t>(j)] = e;
  }

  AttentionResult res;
  res.alpha = activation(Act::softmax_last, scores);
  res.context = Tensor::zeros(annotations[0].shape());
  for (size_t j = 0; j < T; ++j) {
    check_same_shape(annotations[j], res.context, "annotation");
    for (int64_t k = 0; k < res.context.size(); ++k)
      res.context[k] += res.alpha[static_cast<int64_t>(j)] * annotations[j][k];
  }
  return res;
}

GadstModel::GadstModel(GeoIndexTable table_, HyperConfig cfg_)
    : table(std::move(table_)), cfg(cfg_) {
  cfg.validate();
  table.validate();
  const int64_t cells = table.flat_len();
  if (cells < 2) throw ValidationError("geo-index table needs at least two cells");
  const int F = cfg.filters;
  const int L = static_cast<int>(cells);
  Rng init(subseed(cfg.seed, 0));

  for (int ci = 0; ci < 2; ++ci) {
    const std::string cp = "c" + std::to_string(ci);
    ComponentDef& def = comp[ci];
    for (int l = 0; l < cfg.depth; ++l) {
      const std::string lp = cp + "/enc" + std::to_string(l);
      def.enc.push_back(
          add_ga_convlstm(params, lp, l == 0 ? 1 : F, F, cfg.kernel, cells * F, init));
      BNLayerDef bn;
      bn.gamma = params.add(lp + "_bn/gamma", Tensor::full({F}, 1.0));
      bn.beta = params.add(lp + "_bn/beta", Tensor::zeros({F}));
      bn.mean = params.add(lp + "_bn/mean", Tensor::zeros({F}), false);
      bn.var = params.add(lp + "_bn/var", Tensor::full({F}, 1.0), false);
      def.enc_bn.push_back(bn);
    }
    const int ann_dim = L * F;
    def.att.ws = params.add(cp + "/att/ws", glorot_uniform({F, cfg.d_a}, F, cfg.d_a, init));
    def.att.wh =
        params.add(cp + "/att/wh", glorot_uniform({ann_dim, cfg.d_a}, ann_dim, cfg.d_a, init));
    def.att.v = params.add(cp + "/att/v", glorot_uniform({cfg.d_a}, cfg.d_a, 1, init));
    for (int l = 0; l < cfg.depth; ++l) {
      const std::string lp = cp + "/dec" + std::to_string(l);
      def.dec.push_back(
          add_ga_convlstm(params, lp, l == 0 ? F + 1 : F, F, cfg.kernel, cells * F, init));
      BNLayerDef bn;
      bn.gamma = params.add(lp + "_bn/gamma", Tensor::full({F}, 1.0));
      bn.beta = params.add(lp + "_bn/beta", Tensor::zeros({F}));
      bn.mean = params.add(lp + "_bn/mean", Tensor::zeros({F}), false);
      bn.var = params.add(lp + "_bn/var", Tensor::full({F}, 1.0), false);
      def.dec_bn.push_back(bn);
    }
    def.proj = add_ga_convlstm(params, cp + "/proj", F, 1, cfg.kernel, cells, init);
  }

  fusion.w1 = params.add("fusion/w1", Tensor::full({cfg.horizon, L}, 0.5));
  fusion.w2 = params.add("fusion/w2", Tensor::full({cfg.horizon, L}, 0.5));

  ext.w1 = params.add("ext/w1", glorot_uniform({2, cfg.ext_units}, 2, cfg.ext_units, init));
  ext.b1 = params.add("ext/b1", Tensor::zeros({cfg.ext_units}));
  ext.w2 = params.add("ext/w2", glorot_uniform({cfg.ext_units, L}, cfg.ext_units, cells, init));
  ext.b2 = params.add("ext/b2", Tensor::zeros({L}));

  meta_scale_ = params.add("meta/scale_max", Tensor::full({1}, 1.0), false);
}

double GadstModel::scale_max() const { return params.values[static_cast<size_t>(meta_scale_)][0]; }

void GadstModel::set_scale_max(double v) {
  if (!(v > 0)) throw ValidationError("scale_max must be positive");
  params.values[static_cast<size_t>(meta_scale_)][0] = v;
}

std::vector<ad::Value> GadstModel::bind_slots(ad::Tape& tape) const {
  std::vector<ad::Value> slots(params.size());
  for (size_t i = 0; i < params.size(); ++i)
    if (params.trainable[i]) slots[i] = tape.param(params.values[i], static_cast<int>(i));
  return slots;
}

std::vector<ad::Value> GadstModel::component_forward(ad::Tape& tape, ComponentDef& def,
                                                     const std::vector<ad::Value>& slots,
                                                     const std::vector<Tensor>& week, Mode mode,
                                                     Rng* dropout_rng,
                                                     const std::vector<Tensor>* teacher) {
  const int64_t cells = table.flat_len();
  const int F = cfg.filters;
  const int T = static_cast<int>(week.size());
  const bool train = mode == Mode::train;
  const bool drop = train && cfg.dropout > 0;

  auto post = [&](ad::Value x, const BNLayerDef& bn) {
    ad::Value y;
    if (train)
      y = ad::batch_norm_train(tape, x, slots[static_cast<size_t>(bn.gamma)],
                               slots[static_cast<size_t>(bn.beta)], F,
                               params.values[static_cast<size_t>(bn.mean)],
                               params.values[static_cast<size_t>(bn.var)]);
    else
      y = ad::batch_norm_infer(tape, x, slots[static_cast<size_t>(bn.gamma)],
                               slots[static_cast<size_t>(bn.beta)],
                               params.values[static_cast<size_t>(bn.mean)],
                               params.values[static_cast<size_t>(bn.var)]);
    y = ad::leaky_relu_op(tape, y);
    if (drop) y = ad::dropout_op(tape, y, cfg.dropout, *dropout_rng);
    return y;
  };

  std::vector<ad::Value> xs;
  xs.reserve(week.size());
  for (const Tensor& f : week) xs.push_back(tape.leaf(f));
  for (int l = 0; l < cfg.depth; ++l) {
    BoundGALayer layer = bind_layer(tape, slots, def.enc[l]);
    std::vector<ad::Value> hs = layer_forward(tape, table, layer, xs);
    ad::Value processed = post(ad::concat_vec(tape, hs), def.enc_bn[l]);
    xs.clear();
    for (int j = 0; j < T; ++j)
      xs.push_back(ad::slice(tape, processed, static_cast<int64_t>(j) * cells * F, cells * F));
  }
  const std::vector<ad::Value>& annotations = xs;

  std::vector<ad::Value> keys;
  keys.reserve(annotations.size());
  for (ad::Value a : annotations)
    keys.push_back(ad::matvec(tape, a, slots[static_cast<size_t>(def.att.wh)]));

  std::vector<BoundGALayer> dec_layers;
  std::vector<GAState> dec_state;
  for (int l = 0; l < cfg.depth; ++l) {
    dec_layers.push_back(bind_layer(tape, slots, def.dec[l]));
    dec_state.push_back(zero_state(tape, table, F));
  }
  BoundGALayer proj_layer = bind_layer(tape, slots, def.proj);
  GAState proj_state = zero_state(tape, table, 1);

  ad::Value prev = tape.leaf(Tensor::zeros({static_cast<int>(cells)}));
  std::vector<ad::Value> outputs;
  for (int i = 0; i < cfg.horizon; ++i) {
    ad::Value s_prev = ad::mean_channels(tape, dec_state.back().h, F);
    ad::Value q = ad::matvec(tape, s_prev, slots[static_cast<size_t>(def.att.ws)]);
    std::vector<ad::Value> scores;
    scores.reserve(keys.size());
    for (ad::Value k : keys)
      scores.push_back(ad::dot(tape, slots[static_cast<size_t>(def.att.v)],
                               ad::tanh_op(tape, ad::add(tape, q, k))));
    ad::Value alpha = ad::softmax_op(tape, ad::stack_scalars(tape, scores));
    ad::Value ctx = ad::weighted_sum(tape, alpha, annotations);

    ad::Value x = ad::concat_channels(tape, ctx, F, prev, 1);
    for (int l = 0; l < cfg.depth; ++l) {
      dec_state[static_cast<size_t>(l)] =
          cell_step(tape, table, dec_layers[static_cast<size_t>(l)], x,
                    dec_state[static_cast<size_t>(l)]);
      x = post(dec_state[static_cast<size_t>(l)].h, def.dec_bn[static_cast<size_t>(l)]);
    }
    proj_state = cell_step(tape, table, proj_layer, x, proj_state);
    outputs.push_back(proj_state.h);
    prev = teacher ? tape.leaf((*teacher)[static_cast<size_t>(i)]) : proj_state.h;
  }
  return outputs;
}

std::vector<ad::Value> GadstModel::forward(ad::Tape& tape, const WindowFrames& w, Mode mode,
                                           Rng* dropout_rng) {
  const int64_t cells = table.flat_len();
  if (w.week_a.empty() || w.week_a.size() != w.week_b.size())
    throw ValidationError("window needs two equal-length, nonempty history weeks");
  if (static_cast<int>(w.ext.size()) != cfg.horizon)
    throw ValidationError("window needs one external feature row per forecast day");
  if (!w.target.empty() && static_cast<int>(w.target.size()) != cfg.horizon)
    throw ValidationError("window target length must match the horizon");
  for (const auto* week : {&w.week_a, &w.week_b, &w.target})
    for (const Tensor& f : *week)
      if (f.size() != cells) throw ShapeError("frame length does not match the geo-index table");
  for (const Tensor& e : w.ext)
    if (e.size() != 2) throw ShapeError("external feature rows must have two entries");
  if (mode == Mode::train && cfg.dropout > 0 && dropout_rng == nullptr)
    throw ValidationError("train mode with dropout needs an rng");

  std::vector<ad::Value> slots = bind_slots(tape);
  const std::vector<Tensor>* teacher =
      (mode == Mode::train && cfg.teacher_forcing && !w.target.empty()) ? &w.target : nullptr;
  std::vector<ad::Value> y1 = component_forward(tape, comp[0], slots, w.week_a, mode, dropout_rng,
                                                teacher);
  std::vector<ad::Value> y2 = component_forward(tape, comp[1], slots, w.week_b, mode, dropout_rng,
                                                teacher);

  std::vector<ad::Value> preds;
  preds.reserve(static_cast<size_t>(cfg.horizon));
  for (int i = 0; i < cfg.horizon; ++i) {
    ad::Value f1 = ad::mul(tape, ad::slice_row(tape, slots[static_cast<size_t>(fusion.w1)], i, cells),
                           y1[static_cast<size_t>(i)]);
    ad::Value f2 = ad::mul(tape, ad::slice_row(tape, slots[static_cast<size_t>(fusion.w2)], i, cells),
                           y2[static_cast<size_t>(i)]);
    ad::Value fused = ad::add(tape, f1, f2);

    ad::Value e = tape.leaf(w.ext[static_cast<size_t>(i)]);
    e = ad::relu_op(tape, ad::add_bias_channels(tape,
                                                ad::matvec(tape, e, slots[static_cast<size_t>(ext.w1)]),
                                                slots[static_cast<size_t>(ext.b1)]));
    e = ad::relu_op(tape, ad::add_bias_channels(tape,
                                                ad::matvec(tape, e, slots[static_cast<size_t>(ext.w2)]),
                                                slots[static_cast<size_t>(ext.b2)]));
    preds.push_back(ad::add(tape, fused, e));
  }
  return preds;
}

std::vector<Tensor> GadstModel::component_output(const std::vector<Tensor>& week, int comp_idx) {
  if (comp_idx < 0 || comp_idx > 1) throw ValidationError("component index must be 0 or 1");
  ad::Tape tape;
  std::vector<ad::Value> slots = bind_slots(tape);
  std::vector<ad::Value> ys =
      component_forward(tape, comp[comp_idx], slots, week, Mode::infer, nullptr, nullptr);
  std::vector<Tensor> out;
  out.reserve(ys.size());
  for (ad::Value y : ys) out.push_back(tape.val(y));
  return out;
}

std::vector<Tensor> GadstModel::external_output(const std::vector<Tensor>& ext_rows) {
  ad::Tape tape;
  std::vector<ad::Value> slots = bind_slots(tape);
  std::vector<Tensor> out;
  out.reserve(ext_rows.size());
  for (const Tensor& row : ext_rows) {
    ad::Value e = tape.leaf(row);
    e = ad::relu_op(tape, ad::add_bias_channels(tape,
                                                ad::matvec(tape, e, slots[static_cast<size_t>(ext.w1)]),
                                                slots[static_cast<size_t>(ext.b1)]));
    e = ad::relu_op(tape, ad::add_bias_channels(tape,
                                                ad::matvec(tape, e, slots[static_cast<size_t>(ext.w2)]),
                                                slots[static_cast<size_t>(ext.b2)]));
    out.push_back(tape.val(e));
  }
  return out;
}

WindowFrames window_frames(const SupervisedWindow& w, const GeoIndexTable& table, int horizon) {
  WindowFrames f;
  auto push = [&table](const VisitCountRaster& day, std::vector<Tensor>& dst) {
    std::vector<double> frame = grid_to_frame(day.grid, table);
    const int len = static_cast<int>(frame.size());
    dst.push_back(Tensor({len}, std::move(frame)));
  };
  for (const auto& d : w.week_a) push(d, f.week_a);
  for (const auto& d : w.week_b) push(d, f.week_b);
  if (!w.target.empty()) {
    if (static_cast<int>(w.target.size()) < horizon)
      throw ValidationError("window target must cover the horizon");
    for (int t = 0; t < horizon; ++t) push(w.target[static_cast<size_t>(t)], f.target);
  }
  if (static_cast<int>(w.ext.size()) < horizon)
    throw ValidationError("window needs one external feature row per forecast day");
  for (int t = 0; t < horizon; ++t) {
    const ExtFeature& e = w.ext[static_cast<size_t>(t)];
    f.ext.push_back(Tensor({e.is_weekend, e.work_reported}));
  }
  return f;
}

double composite_loss(const std::vector<Tensor>& preds, const std::vector<Tensor>& targets,
                      double lambda1, double lambda2) {
  if (preds.empty() || preds.size() != targets.size())
    throw ValidationError("loss needs matching, nonempty prediction and target lists");
  int64_t n1 = 0, n2 = 0;
  double se = 0, ape = 0;
  for (size_t i = 0; i < preds.size(); ++i) {
    check_same_shape(preds[i], targets[i], "loss frame");
    for (int64_t k = 0; k < preds[i].size(); ++k) {
      const double y = targets[i][k];
      const double d = y - preds[i][k];
      se += d * d;
      ++n1;
      if (y != 0) {
        const double r = d / y;
        ape += r * r;
        ++n2;
      }
    }
  }
  double loss = lambda1 * se / static_cast<double>(n1);
  if (n2 > 0) loss += 100.0 * lambda2 * ape / static_cast<double>(n2);
  return loss;
}

ad::Value composite_loss_op(ad::Tape& tape, const std::vector<ad::Value>& preds,
                            const std::vector<Tensor>& targets, double lambda1, double lambda2) {
  if (preds.empty() || preds.size() != targets.size())
    throw ValidationError("loss needs matching, nonempty prediction and target lists");
  int64_t n1 = 0, n2 = 0;
  double se = 0, ape = 0;
  for (size_t i = 0; i < preds.size(); ++i) {
    const Tensor& p = tape.val(preds[i]);
    check_same_shape(p, targets[i], "loss frame");
    for (int64_t k = 0; k < p.size(); ++k) {
      const double y = targets[i][k];
      const double d = y - p[k];
      se += d * d;
      ++n1;
      if (y != 0) {
        const double r = d / y;
        ape += r * r;
        ++n2;
      }
    }
  }
  double loss = lambda1 * se / static_cast<double>(n1);
  if (n2 > 0) loss += 100.0 * lambda2 * ape / static_cast<double>(n2);

  return tape.push(Tensor({loss}), [preds, targets, lambda1, lambda2, n1, n2](ad::Tape& t,
                                                                              ad::Value self) {
    const double g = t.grad(self)[0];
    const double c1 = 2.0 * lambda1 / static_cast<double>(n1);
    const double c2 = n2 > 0 ? 200.0 * lambda2 / static_cast<double>(n2) : 0.0;
    for (size_t i = 0; i < preds.size(); ++i) {
      Tensor& gp = t.grad(preds[i]);
      const Tensor& p = t.val(preds[i]);
      const Tensor& y = targets[i];
      for (int64_t k = 0; k < p.size(); ++k) {
        const double d = y[k] - p[k];
        double dv = -c1 * d;
        if (y[k] != 0) dv -= c2 * d / (y[k] * y[k]);
        gp[k] += g * dv;
      }
    }
  });
}

std::vector<Tensor> fuse(const std::vector<Tensor>& y1, const std::vector<Tensor>& y2,
                         const Tensor& w1, const Tensor& w2) {
  if (y1.size() != y2.size()) throw ValidationError("fusion needs equal-length component outputs");
  check_same_shape(w1, w2, "fusion weights");
  if (w1.rank() != 2 || w1.dim(0) != static_cast<int>(y1.size()))
    throw ShapeError("fusion weights must have one row per forecast step");
  const int64_t cells = w1.dim(1);
  std::vector<Tensor> out;
  out.reserve(y1.size());
  for (size_t i = 0; i < y1.size(); ++i) {
    check_same_shape(y1[i], y2[i], "fusion inputs");
    if (y1[i].size() != cells) throw ShapeError("fusion weight row length does not match frames");
    Tensor o(y1[i].shape());
    const int64_t base = static_cast<int64_t>(i) * cells;
    for (int64_t k = 0; k < cells; ++k) o[k] = w1[base + k] * y1[i][k] + w2[base + k] * y2[i][k];
    out.push_back(std::move(o));
  }
  return out;
}

std::vector<CountGrid> predict(GadstModel& model, const SupervisedWindow& window) {
  WindowFrames frames = window_frames(window, model.table, model.cfg.horizon);
  ad::Tape tape;
  std::vector<ad::Value> preds = model.forward(tape, frames, Mode::infer, nullptr);
  const double s = model.scale_max();
  std::vector<CountGrid> out;
  out.reserve(preds.size());
  for (ad::Value p : preds) {
    Tensor t = tape.val(p);
    for (int64_t k = 0; k < t.size(); ++k) t[k] = std::max(0.0, t[k]) * s;
    out.push_back(frame_to_grid(t.vec(), model.table));
  }
  return out;
}

FitResult fit(GadstModel& model, const std::vector<SupervisedWindow>& train,
              const std::vector<SupervisedWindow>& val) {
  std::vector<WindowFrames> tf, vf;
  tf.reserve(train.size());
  vf.reserve(val.size());
  for (const auto& w : train) tf.push_back(window_frames(w, model.table, model.cfg.horizon));
  for (const auto& w : val) vf.push_back(window_frames(w, model.table, model.cfg.horizon));
  return fit_frames(model, tf, vf);
}

FitResult fit_frames(GadstModel& model, const std::vector<WindowFrames>& train,
                     const std::vector<WindowFrames>& val) {
  if (train.empty()) throw ValidationError("training needs at least one window");
  for (const auto* set : {&train, &val})
    for (const WindowFrames& w : *set)
      if (w.target.empty()) throw ValidationError("fitting windows need target frames");

  const HyperConfig& cfg = model.cfg;
  AdamState opt;
  opt.lr = cfg.lr;
  opt.init(model.params.values);
  Rng shuffle_rng(subseed(cfg.seed, 1));
  Rng dropout_rng(subseed(cfg.seed, 2));

  FitResult res;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<Tensor> best_params;
  std::vector<size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    opt.lr = cfg.lr * std::pow(cfg.lr_decay, epoch);
    shuffle_rng.shuffle(order);
    double total = 0;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
      const size_t stop = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
      std::vector<Tensor> grads = model.params.zero_grads();
      for (size_t k = start; k < stop; ++k) {
        const WindowFrames& w = train[order[k]];
        ad::Tape tape;
        std::vector<ad::Value> preds = model.forward(tape, w, Mode::train, &dropout_rng);
        ad::Value loss = composite_loss_op(tape, preds, w.target, cfg.lambda1, cfg.lambda2);
        const double lv = tape.val(loss)[0];
        if (!std::isfinite(lv))
          throw DivergenceError("training loss became non-finite in epoch " +
                                std::to_string(epoch + 1));
        total += lv;
        tape.backward(loss);
        tape.harvest(grads);
      }
      const double inv = 1.0 / static_cast<double>(stop - start);
      for (Tensor& g : grads) g *= inv;
      adam_update(model.params.values, grads, opt);
    }

    EpochStats st;
    st.train_loss = total / static_cast<double>(train.size());
    if (!val.empty()) {
      double vtotal = 0;
      for (const WindowFrames& w : val) {
        ad::Tape tape;
        std::vector<ad::Value> preds = model.forward(tape, w, Mode::infer, nullptr);
        std::vector<Tensor> pv;
        pv.reserve(preds.size());
        for (ad::Value p : preds) pv.push_back(tape.val(p));
        vtotal += composite_loss(pv, w.target, cfg.lambda1, cfg.lambda2);
      }
      st.val_loss = vtotal / static_cast<double>(val.size());
      if (st.val_loss < best_val) {
        best_val = st.val_loss;
        res.best_epoch = epoch;
        best_params = model.params.values;
      }
    }
    res.history.push_back(st);
  }

  if (res.best_epoch >= 0) model.params.values = std::move(best_params);
  return res;
}

// --- checkpoints ---------------------------------------------------------

namespace {

constexpr char kCheckpointMagic[8] = {'G', 'A', 'D', 'S', 'T', 'C', 'K', '1'};

const std::array<uint32_t, 256>& crc_table() {
  static const std::array<uint32_t, 256> table = [] {
    std::array<uint32_t, 256> t{};
    for (uint32_t i = 0; i < 256; ++i) {
      uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  return table;
}

uint32_t crc32(const unsigned char* p, size_t n) {
  const auto& table = crc_table();
  uint32_t crc = 0xFFFFFFFFu;
  for (size_t i = 0; i < n; ++i) crc = table[(crc ^ p[i]) & 0xFFu] ^ (crc >> 8);
  return crc ^ 0xFFFFFFFFu;
}

struct ByteSink {
  std::vector<unsigned char> out;

  void bytes(const void* p, size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    out.insert(out.end(), b, b + n);
  }
  void u8(uint8_t v) { bytes(&v, 1); }
  void u16(uint16_t v) {
    const unsigned char b[2] = {static_cast<unsigned char>(v),
                                static_cast<unsigned char>(v >> 8)};
    bytes(b, 2);
  }
  void u32(uint32_t v) {
    const unsigned char b[4] = {
        static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    bytes(b, 4);
  }
  void f64(double v) {
    const uint64_t u = std::bit_cast<uint64_t>(v);
    const unsigned char b[8] = {
        static_cast<unsigned char>(u),       static_cast<unsigned char>(u >> 8),
        static_cast<unsigned char>(u >> 16), static_cast<unsigned char>(u >> 24),
        static_cast<unsigned char>(u >> 32), static_cast<unsigned char>(u >> 40),
        static_cast<unsigned char>(u >> 48), static_cast<unsigned char>(u >> 56)};
    bytes(b, 8);
  }
};

struct ByteCursor {
  const unsigned char* p;
  size_t n, at = 0;

  void need(size_t k) const {
    if (at + k > n) throw IntegrityError("checkpoint is truncated");
  }
  uint8_t u8() {
    need(1);
    return p[at++];
  }
  uint16_t u16() {
    need(2);
    uint16_t v = static_cast<uint16_t>(p[at] | (p[at + 1] << 8));
    at += 2;
    return v;
  }
  uint32_t u32() {
    need(4);
    uint32_t v = static_cast<uint32_t>(p[at]) | (static_cast<uint32_t>(p[at + 1]) << 8) |
                 (static_cast<uint32_t>(p[at + 2]) << 16) |
                 (static_cast<uint32_t>(p[at + 3]) << 24);
    at += 4;
    return v;
  }
  double f64() {
    need(8);
    uint64_t u = 0;
    for (int i = 7; i >= 0; --i) u = (u << 8) | p[at + static_cast<size_t>(i)];
    at += 8;
    return std::bit_cast<double>(u);
  }
  std::string str(size_t k) {
    need(k);
    std::string s(reinterpret_cast<const char*>(p + at), k);
    at += k;
    return s;
  }
};

}  // namespace

void save_checkpoint(const GadstModel& model, const std::string& path) {
  ByteSink body;
  body.u32(static_cast<uint32_t>(model.params.size()));
  for (size_t i = 0; i < model.params.size(); ++i) {
    const std::string& name = model.params.names[i];
    body.u16(static_cast<uint16_t>(name.size()));
    body.bytes(name.data(), name.size());
    body.u8(1);  // dtype: f64
    body.u8(model.params.trainable[i] ? 1 : 0);
    const Tensor& t = model.params.values[i];
    body.u8(static_cast<uint8_t>(t.rank()));
    for (int d = 0; d < t.rank(); ++d) body.u32(static_cast<uint32_t>(t.dim(d)));
  }
  for (const Tensor& t : model.params.values)
    for (int64_t k = 0; k < t.size(); ++k) body.f64(t[k]);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  out.write(reinterpret_cast<const char*>(body.out.data()),
            static_cast<std::streamsize>(body.out.size()));
  ByteSink tail;
  tail.u32(crc32(body.out.data(), body.out.size()));
  out.write(reinterpret_cast<const char*>(tail.out.data()), 4);
  out.flush();
  if (!out) throw IoError("failed writing checkpoint: " + path);
}

void load_checkpoint(GadstModel& model, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  std::vector<unsigned char> raw((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  if (raw.size() < sizeof(kCheckpointMagic) + 8) throw IntegrityError("checkpoint is truncated");
  if (std::memcmp(raw.data(), kCheckpointMagic, sizeof kCheckpointMagic) != 0)
    throw IntegrityError("not a model checkpoint: " + path);

  const size_t body_len = raw.size() - sizeof(kCheckpointMagic) - 4;
  const unsigned char* body = raw.data() + sizeof(kCheckpointMagic);
  ByteCursor tail{raw.data() + raw.size() - 4, 4};
  if (crc32(body, body_len) != tail.u32())
    throw IntegrityError("checkpoint checksum mismatch: " + path);

  ByteCursor cur{body, body_len};
  const uint32_t count = cur.u32();
  if (count != model.params.size())
    throw IntegrityError("checkpoint holds " + std::to_string(count) + " tensors, model expects " +
                         std::to_string(model.params.size()));
  for (size_t i = 0; i < model.params.size(); ++i) {
    const std::string name = cur.str(cur.u16());
    if (name != model.params.names[i])
      throw IntegrityError("checkpoint tensor '" + name + "' does not match model tensor '" +
                           model.params.names[i] + "'");
    if (cur.u8() != 1) throw IntegrityError("unsupported dtype for tensor '" + name + "'");
    const bool train_flag = cur.u8() != 0;
    if (train_flag != static_cast<bool>(model.params.trainable[i]))
      throw IntegrityError("trainable flag mismatch for tensor '" + name + "'");
    const int rank = cur.u8();
    std::vector<int> shape(static_cast<size_t>(rank));
    for (int d = 0; d < rank; ++d) shape[static_cast<size_t>(d)] = static_cast<int>(cur.u32());
    if (shape != model.params.values[i].shape())
      throw IntegrityError("shape mismatch for tensor '" + name + "'");
  }
  for (size_t i = 0; i < model.params.size(); ++i) {
    Tensor& t = model.params.values[i];
    for (int64_t k = 0; k < t.size(); ++k) t[k] = cur.f64();
  }
  if (cur.at != cur.n) throw IntegrityError("checkpoint has trailing bytes: " + path);
}

}  // namespace gadst
