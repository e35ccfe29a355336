#include "ntg/network.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace ntg {

namespace {

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

VectorXd sigmoid(const VectorXd &v) {
  return v.unaryExpr([](double a) { return 1.0 / (1.0 + std::exp(-a)); });
}

double log_sum_exp(const VectorXd &v) {
  double m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().sum());
}

VectorXd softmax(const VectorXd &v) {
  VectorXd e = (v.array() - v.maxCoeff()).exp();
  return e / e.sum();
}

// log(1 + exp(s)) without overflow.
double softplus(double s) { return s > 0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s)); }

Eigen::Index argmax(const VectorXd &v) {
  Eigen::Index i = 0;
  v.maxCoeff(&i);
  return i;
}

VectorXd gru_forward(const GruTensors &w, const VectorXd &x, const VectorXd &h, GruStep *cache) {
  const Eigen::Index H = h.size();
  VectorXd a = w.W * x + w.b.col(0);
  VectorXd zr = a.head(2 * H) + w.U.topRows(2 * H) * h;
  VectorXd z = sigmoid(zr.head(H));
  VectorXd r = sigmoid(zr.tail(H));
  VectorXd c = (a.tail(H) + w.U.bottomRows(H) * r.cwiseProduct(h)).array().tanh().matrix();
  VectorXd out = (1.0 - z.array()).matrix().cwiseProduct(h) + z.cwiseProduct(c);
  if (cache) *cache = GruStep{x, h, std::move(z), std::move(r), std::move(c)};
  return out;
}

// Accumulates weight gradients into gw; returns input and state gradients.
void gru_backward(const GruTensors &w, const GruStep &s, const VectorXd &dh_next, GruTensors &gw,
                  VectorXd &dx, VectorXd &dh) {
  const Eigen::Index H = s.h.size();
  const auto one = Eigen::ArrayXd::Ones(H);
  VectorXd dz = dh_next.cwiseProduct(s.c - s.h);
  VectorXd dc = dh_next.cwiseProduct(s.z);
  dh = dh_next.array() * (one - s.z.array());
  VectorXd da(3 * H);
  da.tail(H) = dc.array() * (one - s.c.array().square());
  da.head(H) = dz.array() * s.z.array() * (one - s.z.array());
  VectorXd rh = s.r.cwiseProduct(s.h);
  VectorXd drh = w.U.bottomRows(H).transpose() * da.tail(H);
  VectorXd dr = drh.cwiseProduct(s.h);
  dh += drh.cwiseProduct(s.r);
  da.segment(H, H) = dr.array() * s.r.array() * (one - s.r.array());

  gw.W.noalias() += da * s.x.transpose();
  gw.b.col(0) += da;
  gw.U.topRows(2 * H).noalias() += da.head(2 * H) * s.h.transpose();
  gw.U.bottomRows(H).noalias() += da.tail(H) * rh.transpose();
  dx = w.W.transpose() * da;
  dh.noalias() += w.U.topRows(2 * H).transpose() * da.head(2 * H);
}

VectorXd polar_features(const ModelConfig &c, const PolarStep &s) {
  VectorXd f(3);
  f << s.r / c.offset_range, std::cos(s.theta), std::sin(s.theta);
  return f;
}

VectorXd step_input(const ModelParams &p, const PathInput &path, std::size_t t) {
  const auto &tn = p.tensors;
  if (p.config.encoder_mode == EncoderMode::ContinuousPolar) {
    return tn.polar_w * polar_features(p.config, path.polar.at(t)) + tn.polar_b.col(0);
  }
  const int E = p.config.embed_size;
  VectorXd x(2 * E);
  x.head(E) = tn.emb_x.row(path.bin_x.at(t)).transpose();
  x.tail(E) = tn.emb_y.row(path.bin_y.at(t)).transpose();
  return x;
}

void check_path(const ModelParams &p, const PathInput &path) {
  if (path.steps() == 0) throw std::invalid_argument("empty incoming path");
  if (p.config.encoder_mode == EncoderMode::ContinuousPolar) {
    if (path.polar.empty()) throw std::invalid_argument("polar encoder needs polar steps");
    return;
  }
  if (path.bin_x.size() != path.bin_y.size()) throw std::invalid_argument("bin sequences differ");
  const int B = p.config.bins();
  for (std::size_t t = 0; t < path.bin_x.size(); ++t)
    if (path.bin_x[t] < 0 || path.bin_x[t] >= B || path.bin_y[t] < 0 || path.bin_y[t] >= B)
      throw std::out_of_range("encoder offset outside the discrete range");
}

VectorXd token_embedding(const ModelParams &p, int bx, int by) {
  const int E = p.config.embed_size;
  VectorXd v(2 * E);
  v.head(E) = p.tensors.emb_x.row(bx).transpose();
  v.tail(E) = p.tensors.emb_y.row(by).transpose();
  return v;
}

// Paths are summed in sorted order so the context is exactly independent of
// the order the path set arrives in.
std::vector<std::size_t> canonical_order(std::span<const PathInput> paths) {
  std::vector<std::size_t> idx(paths.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return paths[a] < paths[b]; });
  return idx;
}

struct PathCache {
  std::vector<GruStep> fwd, bwd;  // bwd in processing order (last step first)
};

struct Counts {
  std::size_t correct_x = 0, correct_y = 0;
};

// Loss summed over the sample's decoder steps; with `g` set, adds the
// gradient of scale * loss.
double sample_pass(const ModelParams &p, const NetSample &s, double scale, Gradients *g,
                   Counts &counts) {
  const auto &cfg = p.config;
  const auto &tn = p.tensors;
  const int H = cfg.hidden_size, E = cfg.embed_size, C = cfg.context_size();
  if (s.paths.empty()) throw std::invalid_argument("sample without incoming paths");
  if (s.outputs.empty()) throw std::invalid_argument("sample without outgoing nodes");
  for (const auto &o : s.outputs)
    if (o.bin_x < 0 || o.bin_x >= cfg.bins() || o.bin_y < 0 || o.bin_y >= cfg.bins())
      throw std::out_of_range("target offset outside the discrete range");

  // Encoder.
  const auto order = canonical_order(s.paths);
  std::vector<PathCache> caches(s.paths.size());
  VectorXd enc = VectorXd::Zero(2 * H);
  for (std::size_t k : order) {
    const auto &path = s.paths[k];
    check_path(p, path);
    const std::size_t T = path.steps();
    auto &pc = caches[k];
    pc.fwd.resize(T);
    pc.bwd.resize(T);
    VectorXd hf = VectorXd::Zero(H), hb = VectorXd::Zero(H);
    for (std::size_t t = 0; t < T; ++t) hf = gru_forward(tn.enc_fwd, step_input(p, path, t), hf, &pc.fwd[t]);
    for (std::size_t i = 0; i < T; ++i)
      hb = gru_forward(tn.enc_bwd, step_input(p, path, T - 1 - i), hb, &pc.bwd[i]);
    enc.head(H) += hf;
    enc.tail(H) += hb;
  }
  VectorXd ctx(C);
  ctx.head(2 * H) = enc;
  if (cfg.attr_mode != AttrMode::None) ctx.tail(E) = attribute_vector(p, s.attr);

  // Decoder, teacher forced.
  const std::size_t N = s.outputs.size();
  std::vector<GruStep> dsteps(N);
  std::vector<VectorXd> hs(N);
  std::vector<VectorXd> px(N), py(N), pe(N);
  std::vector<double> ps(N);
  double loss = 0.0;
  VectorXd h = VectorXd::Zero(H);
  VectorXd x(C + 2 * E);
  x.head(C) = ctx;
  for (std::size_t t = 0; t < N; ++t) {
    const auto &target = s.outputs[t];
    x.tail(2 * E) = t == 0 ? VectorXd(tn.start.col(0))
                           : token_embedding(p, s.outputs[t - 1].bin_x, s.outputs[t - 1].bin_y);
    h = gru_forward(tn.dec, x, h, &dsteps[t]);
    hs[t] = h;
    VectorXd lx = tn.head_x_w * h + tn.head_x_b.col(0);
    VectorXd ly = tn.head_y_w * h + tn.head_y_b.col(0);
    double ls = (tn.stop_w * h)(0) + tn.stop_b(0, 0);
    const double stop_target = t + 1 == N ? 1.0 : 0.0;
    loss += log_sum_exp(lx) - lx(target.bin_x);
    loss += log_sum_exp(ly) - ly(target.bin_y);
    loss += softplus(ls) - stop_target * ls;
    if (argmax(lx) == target.bin_x) ++counts.correct_x;
    if (argmax(ly) == target.bin_y) ++counts.correct_y;
    if (cfg.edge_type_head && target.type) {
      VectorXd le = tn.edge_w * h + tn.edge_b.col(0);
      int cls = *target.type == RoadType::Major ? 0 : 1;
      loss += log_sum_exp(le) - le(cls);
      if (g) {
        pe[t] = softmax(le);
        pe[t](cls) -= 1.0;
      }
    }
    if (g) {
      px[t] = softmax(lx);
      px[t](target.bin_x) -= 1.0;
      py[t] = softmax(ly);
      py[t](target.bin_y) -= 1.0;
      ps[t] = sigmoid(ls) - stop_target;
    }
  }
  if (!std::isfinite(loss)) throw NonFiniteLoss(s.id);
  if (!g) return loss;

  auto &gt = g->tensors;
  VectorXd dh_next = VectorXd::Zero(H);
  VectorXd dctx = VectorXd::Zero(C);
  VectorXd dx, dh_prev;
  for (std::size_t t = N; t-- > 0;) {
    VectorXd dlx = px[t] * scale, dly = py[t] * scale;
    double dls = ps[t] * scale;
    VectorXd dh = dh_next;
    dh.noalias() += tn.head_x_w.transpose() * dlx;
    dh.noalias() += tn.head_y_w.transpose() * dly;
    dh += tn.stop_w.row(0).transpose() * dls;
    gt.head_x_w.noalias() += dlx * hs[t].transpose();
    gt.head_x_b.col(0) += dlx;
    gt.head_y_w.noalias() += dly * hs[t].transpose();
    gt.head_y_b.col(0) += dly;
    gt.stop_w.row(0) += dls * hs[t].transpose();
    gt.stop_b(0, 0) += dls;
    if (pe[t].size()) {
      VectorXd dle = pe[t] * scale;
      dh.noalias() += tn.edge_w.transpose() * dle;
      gt.edge_w.noalias() += dle * hs[t].transpose();
      gt.edge_b.col(0) += dle;
    }
    gru_backward(tn.dec, dsteps[t], dh, gt.dec, dx, dh_prev);
    dh_next = dh_prev;
    dctx += dx.head(C);
    if (t == 0) {
      gt.start.col(0) += dx.tail(2 * E);
    } else {
      const auto &prev = s.outputs[t - 1];
      gt.emb_x.row(prev.bin_x) += dx.segment(C, E).transpose();
      gt.emb_y.row(prev.bin_y) += dx.tail(E).transpose();
    }
  }

  if (cfg.attr_mode == AttrMode::Style && s.attr.style) {
    gt.style_emb.row(*s.attr.style) += dctx.tail(E).transpose();
  } else if (cfg.attr_mode == AttrMode::Raster) {
    gt.attr_w.noalias() += dctx.tail(E) * s.attr.pooled.transpose();
    gt.attr_b.col(0) += dctx.tail(E);
  }

  auto input_grad = [&](const PathInput &path, std::size_t t, const VectorXd &gx) {
    if (cfg.encoder_mode == EncoderMode::ContinuousPolar) {
      gt.polar_w.noalias() += gx * polar_features(cfg, path.polar[t]).transpose();
      gt.polar_b.col(0) += gx;
    } else {
      gt.emb_x.row(path.bin_x[t]) += gx.head(E).transpose();
      gt.emb_y.row(path.bin_y[t]) += gx.tail(E).transpose();
    }
  };
  for (std::size_t k : order) {
    const auto &path = s.paths[k];
    const std::size_t T = path.steps();
    VectorXd dh = dctx.head(H);
    for (std::size_t t = T; t-- > 0;) {
      gru_backward(tn.enc_fwd, caches[k].fwd[t], dh, gt.enc_fwd, dx, dh_prev);
      dh = dh_prev;
      input_grad(path, t, dx);
    }
    dh = dctx.segment(H, H);
    for (std::size_t i = T; i-- > 0;) {
      gru_backward(tn.enc_bwd, caches[k].bwd[i], dh, gt.enc_bwd, dx, dh_prev);
      dh = dh_prev;
      input_grad(path, T - 1 - i, dx);
    }
  }
  return loss;
}

}  // namespace

PathInput make_path_input(const ModelConfig &c, std::span<const Vec2> positions) {
  PathInput in;
  if (c.encoder_mode == EncoderMode::ContinuousPolar) {
    in.polar = polar_motion_sequence(positions);
    return in;
  }
  for (Vec2 d : motion_sequence(positions)) {
    in.bin_x.push_back(offset_to_bin(d.x, c));
    in.bin_y.push_back(offset_to_bin(d.y, c));
  }
  return in;
}

PathInput make_path_input(const ModelConfig &c, const RoadGraph &g, const Path &p) {
  auto pos = path_positions(g, p);
  return make_path_input(c, pos);
}

VectorXd gru_cell(const GruTensors &w, const VectorXd &x, const VectorXd &h) {
  if (!x.allFinite() || !h.allFinite()) throw std::invalid_argument("non-finite GRU input");
  if (x.size() != w.W.cols() || h.size() != w.U.cols())
    throw std::invalid_argument("GRU dimension mismatch");
  return gru_forward(w, x, h, nullptr);
}

VectorXd attribute_vector(const ModelParams &p, const AttrInput &attr) {
  const int E = p.config.embed_size;
  switch (p.config.attr_mode) {
    case AttrMode::None:
      return VectorXd(0);
    case AttrMode::Style:
      if (!attr.style) return VectorXd::Zero(E);
      if (*attr.style < 0 || *attr.style >= p.config.n_styles)
        throw std::out_of_range("style id out of range");
      return p.tensors.style_emb.row(*attr.style).transpose();
    case AttrMode::Raster:
      if (attr.pooled.size() != p.config.pooled_size())
        throw std::invalid_argument("raster attribute needs a pooled patch of the configured size");
      return p.tensors.attr_w * attr.pooled + p.tensors.attr_b.col(0);
  }
  return VectorXd(0);
}

VectorXd encode(const ModelParams &p, std::span<const PathInput> paths, const AttrInput &attr) {
  if (paths.empty()) throw std::invalid_argument("empty path set");
  const auto &tn = p.tensors;
  const int H = p.config.hidden_size;
  VectorXd ctx = VectorXd::Zero(p.config.context_size());
  for (std::size_t k : canonical_order(paths)) {
    const auto &path = paths[k];
    check_path(p, path);
    const std::size_t T = path.steps();
    VectorXd hf = VectorXd::Zero(H), hb = VectorXd::Zero(H);
    for (std::size_t t = 0; t < T; ++t) hf = gru_forward(tn.enc_fwd, step_input(p, path, t), hf, nullptr);
    for (std::size_t t = T; t-- > 0;) hb = gru_forward(tn.enc_bwd, step_input(p, path, t), hb, nullptr);
    ctx.head(H) += hf;
    ctx.segment(H, H) += hb;
  }
  if (p.config.attr_mode != AttrMode::None) ctx.tail(p.config.embed_size) = attribute_vector(p, attr);
  return ctx;
}

Decoder::Decoder(const ModelParams &p, VectorXd context)
    : p_(&p), ctx_(std::move(context)), h_(VectorXd::Zero(p.config.hidden_size)),
      prev_(p.tensors.start.col(0)) {
  if (ctx_.size() != p.config.context_size()) throw std::invalid_argument("context size mismatch");
}

StepLogits Decoder::step() {
  const auto &tn = p_->tensors;
  VectorXd x(ctx_.size() + prev_.size());
  x << ctx_, prev_;
  h_ = gru_forward(tn.dec, x, h_, nullptr);
  StepLogits out;
  out.x = tn.head_x_w * h_ + tn.head_x_b.col(0);
  out.y = tn.head_y_w * h_ + tn.head_y_b.col(0);
  out.stop = (tn.stop_w * h_)(0) + tn.stop_b(0, 0);
  if (tn.edge_w.size()) out.edge = tn.edge_w * h_ + tn.edge_b.col(0);
  return out;
}

void Decoder::feed(int bin_x, int bin_y) { prev_ = token_embedding(*p_, bin_x, bin_y); }

Rollout decode_rollout(const ModelParams &p, const VectorXd &context, std::size_t max_steps,
                       std::span<const OutNode> teacher) {
  Rollout r;
  Decoder dec(p, context);
  if (!teacher.empty()) {
    for (std::size_t t = 0; t < teacher.size(); ++t) {
      if (t == max_steps) {
        r.truncated = true;
        break;
      }
      r.steps.push_back(dec.step());
      dec.feed(teacher[t].bin_x, teacher[t].bin_y);
    }
    return r;
  }
  while (true) {
    if (r.steps.size() == max_steps) {
      r.truncated = true;
      break;
    }
    r.steps.push_back(dec.step());
    const auto &s = r.steps.back();
    dec.feed(static_cast<int>(argmax(s.x)), static_cast<int>(argmax(s.y)));
    if (sigmoid(s.stop) > 0.5) break;
  }
  return r;
}

LossResult loss_and_grad(const ModelParams &p, std::span<const NetSample> batch,
                         const LossOptions &opt) {
  LossResult res;
  for (const auto &s : batch) res.steps += s.outputs.size();
  if (res.steps == 0) throw std::invalid_argument("empty batch");
  const double scale = 1.0 / static_cast<double>(res.steps);

  const std::size_t chunks =
      std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(std::max(opt.threads, 1)), batch.size()));
  std::vector<Gradients> grads(chunks);
  std::vector<double> losses(chunks, 0.0);
  std::vector<Counts> counts(chunks);
  std::vector<std::exception_ptr> errors(chunks);
  auto work = [&](std::size_t c) {
    try {
      grads[c] = Gradients::zeros_like(p);
      const std::size_t lo = batch.size() * c / chunks, hi = batch.size() * (c + 1) / chunks;
      for (std::size_t i = lo; i < hi; ++i) losses[c] += sample_pass(p, batch[i], scale, &grads[c], counts[c]);
    } catch (...) {
      errors[c] = std::current_exception();
    }
  };
  if (chunks == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t c = 0; c < chunks; ++c) pool.emplace_back(work, c);
  }
  for (auto &e : errors)
    if (e) std::rethrow_exception(e);

  res.grads = std::move(grads[0]);
  double total = losses[0];
  res.correct_x = counts[0].correct_x;
  res.correct_y = counts[0].correct_y;
  for (std::size_t c = 1; c < chunks; ++c) {
    res.grads.add(grads[c]);
    total += losses[c];
    res.correct_x += counts[c].correct_x;
    res.correct_y += counts[c].correct_y;
  }
  res.loss = total * scale;
  res.grads.norm_before_clip = res.grads.global_norm();
  if (opt.clip_norm > 0.0 && res.grads.norm_before_clip > opt.clip_norm)
    res.grads.scale(opt.clip_norm / res.grads.norm_before_clip);
  return res;
}

EvalResult evaluate(const ModelParams &p, std::span<const NetSample> samples) {
  EvalResult r;
  Counts counts;
  double total = 0.0;
  for (const auto &s : samples) {
    total += sample_pass(p, s, 0.0, nullptr, counts);
    r.steps += s.outputs.size();
  }
  r.loss = r.steps ? total / static_cast<double>(r.steps) : 0.0;
  r.correct_x = counts.correct_x;
  r.correct_y = counts.correct_y;
  return r;
}

}  // namespace ntg
