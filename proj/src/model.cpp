#include "ntg/model.hpp"

#include <cmath>
#include <stdexcept>

namespace ntg {

int ModelConfig::bins() const {
  return static_cast<int>(std::lround(2.0 * offset_range / offset_resolution)) + 1;
}

void ModelConfig::validate() const {
  if (hidden_size < 1) throw std::invalid_argument("hidden_size must be >= 1");
  if (embed_size < 1) throw std::invalid_argument("embed_size must be >= 1");
  if (!(offset_range > 0.0) || !(offset_resolution > 0.0))
    throw std::invalid_argument("offset range and resolution must be positive");
  double ratio = offset_range / offset_resolution;
  if (std::abs(ratio - std::round(ratio)) > 1e-9)
    throw std::invalid_argument("offset_range must be a multiple of offset_resolution");
  if (max_path_len < 1 || max_paths < 1) throw std::invalid_argument("path limits must be >= 1");
  if (n_styles < 1) throw std::invalid_argument("n_styles must be >= 1");
  if (attr_mode == AttrMode::Raster && (patch_size < 4 || patch_size % 4 != 0))
    throw std::invalid_argument("patch_size must be a positive multiple of 4");
}

namespace {
const char *mode_name(EncoderMode m) {
  return m == EncoderMode::DiscreteCartesian ? "discrete-cartesian" : "continuous-polar";
}
const char *attr_name(AttrMode m) {
  switch (m) {
    case AttrMode::None: return "none";
    case AttrMode::Style: return "style";
    case AttrMode::Raster: return "raster";
  }
  return "none";
}
}  // namespace

nlohmann::json to_json(const ModelConfig &c) {
  return {{"hidden_size", c.hidden_size},
          {"embed_size", c.embed_size},
          {"offset_range", c.offset_range},
          {"offset_resolution", c.offset_resolution},
          {"max_path_len", c.max_path_len},
          {"max_paths", c.max_paths},
          {"n_styles", c.n_styles},
          {"edge_type_head", c.edge_type_head},
          {"encoder_mode", mode_name(c.encoder_mode)},
          {"attr_mode", attr_name(c.attr_mode)},
          {"patch_size", c.patch_size}};
}

ModelConfig model_config_from_json(const nlohmann::json &j) {
  ModelConfig c;
  c.hidden_size = j.at("hidden_size").get<int>();
  c.embed_size = j.at("embed_size").get<int>();
  c.offset_range = j.at("offset_range").get<double>();
  c.offset_resolution = j.at("offset_resolution").get<double>();
  c.max_path_len = j.at("max_path_len").get<int>();
  c.max_paths = j.at("max_paths").get<int>();
  c.n_styles = j.at("n_styles").get<int>();
  c.edge_type_head = j.at("edge_type_head").get<bool>();
  auto mode = j.at("encoder_mode").get<std::string>();
  if (mode == "discrete-cartesian")
    c.encoder_mode = EncoderMode::DiscreteCartesian;
  else if (mode == "continuous-polar")
    c.encoder_mode = EncoderMode::ContinuousPolar;
  else
    throw std::invalid_argument("unknown encoder_mode " + mode);
  auto attr = j.at("attr_mode").get<std::string>();
  if (attr == "none")
    c.attr_mode = AttrMode::None;
  else if (attr == "style")
    c.attr_mode = AttrMode::Style;
  else if (attr == "raster")
    c.attr_mode = AttrMode::Raster;
  else
    throw std::invalid_argument("unknown attr_mode " + attr);
  c.patch_size = j.at("patch_size").get<int>();
  c.validate();
  return c;
}

int offset_to_bin(double delta, const ModelConfig &c) {
  double steps = std::round(delta / c.offset_resolution);
  double bin = steps + c.center_bin();
  if (!std::isfinite(delta) || bin < 0 || bin >= c.bins())
    throw std::out_of_range("offset " + std::to_string(delta) + " m outside the decoder range");
  return static_cast<int>(bin);
}

double bin_to_offset(int bin, const ModelConfig &c) {
  if (bin < 0 || bin >= c.bins()) throw std::out_of_range("bin index out of range");
  return (bin - c.center_bin()) * c.offset_resolution;
}

std::size_t Tensors::parameter_count() const {
  std::size_t n = 0;
  visit([&](const char *, const MatrixXd &m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

bool Tensors::all_finite() const {
  bool ok = true;
  visit([&](const char *, const MatrixXd &m) { ok = ok && m.allFinite(); });
  return ok;
}

ModelParams ModelParams::zeros(const ModelConfig &c) {
  c.validate();
  ModelParams p;
  p.config = c;
  auto &t = p.tensors;
  const int B = c.bins(), E = c.embed_size, H = c.hidden_size;
  t.emb_x = MatrixXd::Zero(B, E);
  t.emb_y = MatrixXd::Zero(B, E);
  t.start = MatrixXd::Zero(2 * E, 1);
  if (c.encoder_mode == EncoderMode::ContinuousPolar) {
    t.polar_w = MatrixXd::Zero(2 * E, 3);
    t.polar_b = MatrixXd::Zero(2 * E, 1);
  }
  if (c.attr_mode == AttrMode::Style) t.style_emb = MatrixXd::Zero(c.n_styles, E);
  if (c.attr_mode == AttrMode::Raster) {
    t.attr_w = MatrixXd::Zero(E, c.pooled_size());
    t.attr_b = MatrixXd::Zero(E, 1);
  }
  auto gru = [](int in, int h) {
    return GruTensors{MatrixXd::Zero(3 * h, in), MatrixXd::Zero(3 * h, h), MatrixXd::Zero(3 * h, 1)};
  };
  t.enc_fwd = gru(2 * E, H);
  t.enc_bwd = gru(2 * E, H);
  t.dec = gru(c.context_size() + 2 * E, H);
  t.head_x_w = MatrixXd::Zero(B, H);
  t.head_x_b = MatrixXd::Zero(B, 1);
  t.head_y_w = MatrixXd::Zero(B, H);
  t.head_y_b = MatrixXd::Zero(B, 1);
  t.stop_w = MatrixXd::Zero(1, H);
  t.stop_b = MatrixXd::Zero(1, 1);
  if (c.edge_type_head) {
    t.edge_w = MatrixXd::Zero(2, H);
    t.edge_b = MatrixXd::Zero(2, 1);
  }
  return p;
}

ModelParams ModelParams::initialized(const ModelConfig &c, std::uint64_t seed) {
  ModelParams p = zeros(c);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> emb_dist(0.0, 0.02);
  auto fill_normal = [&](MatrixXd &m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = emb_dist(rng);
  };
  auto fill_uniform = [&](MatrixXd &m, int fan_in) {
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> d(-bound, bound);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
  };
  auto &t = p.tensors;
  fill_normal(t.emb_x);
  fill_normal(t.emb_y);
  fill_normal(t.start);
  if (t.style_emb.size()) fill_normal(t.style_emb);
  if (t.polar_w.size()) {
    fill_uniform(t.polar_w, 3);
    fill_uniform(t.polar_b, 3);
  }
  if (t.attr_w.size()) {
    fill_uniform(t.attr_w, c.pooled_size());
    fill_uniform(t.attr_b, c.pooled_size());
  }
  const int H = c.hidden_size;
  for (GruTensors *g : {&t.enc_fwd, &t.enc_bwd, &t.dec}) {
    fill_uniform(g->W, static_cast<int>(g->W.cols()));
    fill_uniform(g->U, H);
    fill_uniform(g->b, H);
  }
  fill_uniform(t.head_x_w, H);
  fill_uniform(t.head_x_b, H);
  fill_uniform(t.head_y_w, H);
  fill_uniform(t.head_y_b, H);
  fill_uniform(t.stop_w, H);
  fill_uniform(t.stop_b, H);
  if (t.edge_w.size()) {
    fill_uniform(t.edge_w, H);
    fill_uniform(t.edge_b, H);
  }
  return p;
}

Gradients Gradients::zeros_like(const ModelParams &p) {
  Gradients g;
  g.tensors = ModelParams::zeros(p.config).tensors;
  return g;
}

double Gradients::global_norm() const {
  double s = 0.0;
  tensors.visit([&](const char *, const MatrixXd &m) { s += m.squaredNorm(); });
  return std::sqrt(s);
}

void Gradients::scale(double f) {
  tensors.visit([&](const char *, MatrixXd &m) { m *= f; });
}

void Gradients::add(const Gradients &o) {
  std::vector<const MatrixXd *> rhs;
  o.tensors.visit([&](const char *, const MatrixXd &m) { rhs.push_back(&m); });
  std::size_t i = 0;
  tensors.visit([&](const char *, MatrixXd &m) { m += *rhs.at(i++); });
}

}  // namespace ntg
