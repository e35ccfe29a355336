#pragma once

#include <cstdint>
#include <random>
#include <string>

#include <Eigen/Dense>
#include <json.hpp>

namespace ntg {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class EncoderMode { DiscreteCartesian, ContinuousPolar };
/// What feeds the attribute slot of the context: nothing, a learned style
/// embedding, or a projection of a pooled likelihood patch.
enum class AttrMode { None, Style, Raster };

struct ModelConfig {
  int hidden_size = 500;
  int embed_size = 64;
  double offset_range = 100.0;      // meters
  double offset_resolution = 1.0;   // meters per bin
  int max_path_len = 10;
  int max_paths = 8;
  int n_styles = 1;
  bool edge_type_head = false;
  EncoderMode encoder_mode = EncoderMode::DiscreteCartesian;
  AttrMode attr_mode = AttrMode::Style;
  int patch_size = 64;  // pixels, raster attribute mode only

  int bins() const;
  int center_bin() const { return bins() / 2; }
  int attr_size() const { return attr_mode == AttrMode::None ? 0 : embed_size; }
  int pooled_size() const { return (patch_size / 4) * (patch_size / 4); }
  int context_size() const { return 2 * hidden_size + attr_size(); }
  void validate() const;

  bool operator==(const ModelConfig &) const = default;
};

nlohmann::json to_json(const ModelConfig &c);
ModelConfig model_config_from_json(const nlohmann::json &j);

/// Bin index of a metric offset; throws std::out_of_range beyond the range.
int offset_to_bin(double delta, const ModelConfig &c);
double bin_to_offset(int bin, const ModelConfig &c);

/// GRU weights with the gates stacked as [update; reset; candidate].
struct GruTensors {
  MatrixXd W;  // 3H x in
  MatrixXd U;  // 3H x H
  MatrixXd b;  // 3H x 1
};

/// Every learnable tensor. Tensors that the config does not use stay empty.
struct Tensors {
  MatrixXd emb_x, emb_y;      // bins x E
  MatrixXd start;             // 2E x 1, decoder start token
  MatrixXd polar_w, polar_b;  // 2E x 3, 2E x 1
  MatrixXd style_emb;         // n_styles x E
  MatrixXd attr_w, attr_b;    // E x pooled, E x 1
  GruTensors enc_fwd, enc_bwd, dec;
  MatrixXd head_x_w, head_x_b;  // bins x H, bins x 1
  MatrixXd head_y_w, head_y_b;
  MatrixXd stop_w, stop_b;  // 1 x H, 1 x 1
  MatrixXd edge_w, edge_b;  // 2 x H, 2 x 1

  template <class Self, class Fn>
  static void visit_impl(Self &s, Fn &&fn) {
    auto v = [&](const char *name, auto &m) {
      if (m.size() > 0) fn(name, m);
    };
    v("emb_x", s.emb_x);
    v("emb_y", s.emb_y);
    v("start", s.start);
    v("polar_w", s.polar_w);
    v("polar_b", s.polar_b);
    v("style_emb", s.style_emb);
    v("attr_w", s.attr_w);
    v("attr_b", s.attr_b);
    v("enc_fwd.W", s.enc_fwd.W);
    v("enc_fwd.U", s.enc_fwd.U);
    v("enc_fwd.b", s.enc_fwd.b);
    v("enc_bwd.W", s.enc_bwd.W);
    v("enc_bwd.U", s.enc_bwd.U);
    v("enc_bwd.b", s.enc_bwd.b);
    v("dec.W", s.dec.W);
    v("dec.U", s.dec.U);
    v("dec.b", s.dec.b);
    v("head_x_w", s.head_x_w);
    v("head_x_b", s.head_x_b);
    v("head_y_w", s.head_y_w);
    v("head_y_b", s.head_y_b);
    v("stop_w", s.stop_w);
    v("stop_b", s.stop_b);
    v("edge_w", s.edge_w);
    v("edge_b", s.edge_b);
  }
  /// fn(name, tensor) for every allocated tensor, in a fixed order.
  template <class Fn> void visit(Fn &&fn) { visit_impl(*this, fn); }
  template <class Fn> void visit(Fn &&fn) const { visit_impl(*this, fn); }

  std::size_t parameter_count() const;
  bool all_finite() const;
};

struct ModelParams {
  ModelConfig config;
  Tensors tensors;

  /// Allocates every tensor the config needs, filled with zeros.
  static ModelParams zeros(const ModelConfig &c);
  /// Weights uniform in +-1/sqrt(fan_in), embeddings N(0, 0.02).
  static ModelParams initialized(const ModelConfig &c, std::uint64_t seed);
};

struct Gradients {
  Tensors tensors;
  double norm_before_clip = 0.0;

  static Gradients zeros_like(const ModelParams &p);
  double global_norm() const;
  void scale(double s);
  void add(const Gradients &o);
};

}  // namespace ntg
