#include "ntg/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "ntg/adam.hpp"
#include "ntg/aerial.hpp"
#include "ntg/checkpoint.hpp"
#include "ntg/graph_ops.hpp"
#include "ntg/kv_config.hpp"

namespace ntg {

void TrainConfig::validate() const {
  model.validate();
  auto require = [](bool ok, const char *what) {
    if (!ok) throw std::invalid_argument(std::string("train config: ") + what);
  };
  require(epochs >= 1, "epochs must be positive");
  require(batch_size >= 1, "batch_size must be positive");
  require(lr > 0.0 && std::isfinite(lr), "lr must be positive");
  require(lr_decay > 0.0 && std::isfinite(lr_decay), "lr_decay must be positive");
  require(weight_decay >= 0.0, "weight_decay must be non-negative");
  require(clip_norm >= 0.0, "clip_norm must be non-negative");
  require(threads >= 1, "threads must be positive");
  require(checkpoint_every >= 0, "checkpoint_every must be non-negative");
  require(init == "random" || init == "zeros", "init must be random or zeros");
}

TrainConfig parse_train_config(const std::string &text, TrainConfig base) {
  nlohmann::json model = to_json(base.model);
  for (const auto &[k, v] : parse_kv(text)) {
    if (k == "hidden_size" || k == "embed_size" || k == "max_path_len" || k == "max_paths" ||
        k == "n_styles" || k == "patch_size")
      model[k] = kv_int(k, v);
    else if (k == "offset_range" || k == "offset_resolution")
      model[k] = kv_double(k, v);
    else if (k == "edge_type_head")
      model[k] = kv_bool(k, v);
    else if (k == "encoder_mode" || k == "attr_mode")
      model[k] = v;
    else if (k == "epochs")
      base.epochs = kv_int(k, v);
    else if (k == "batch_size")
      base.batch_size = kv_int(k, v);
    else if (k == "lr")
      base.lr = kv_double(k, v);
    else if (k == "lr_decay")
      base.lr_decay = kv_double(k, v);
    else if (k == "weight_decay")
      base.weight_decay = kv_double(k, v);
    else if (k == "clip_norm")
      base.clip_norm = kv_double(k, v);
    else if (k == "seed")
      base.seed = kv_u64(k, v);
    else if (k == "threads")
      base.threads = kv_int(k, v);
    else if (k == "checkpoint_every")
      base.checkpoint_every = kv_int(k, v);
    else if (k == "init")
      base.init = v;
    else if (k == "checkpoint_dir")
      base.checkpoint_dir = v;
    else if (k == "metrics_log")
      base.metrics_log = v;
    else
      throw DataError("train config: unknown key " + k);
  }
  try {
    base.model = model_config_from_json(model);
    base.validate();
  } catch (const std::invalid_argument &e) {
    throw DataError(e.what());
  }
  return base;
}

std::vector<NetSample> build_samples(const TrainItem &item, const ModelConfig &cfg, Rng &rng,
                                     std::size_t first_id) {
  if (item.graph.node_count() < 2) throw std::invalid_argument("training graph needs two nodes");
  const RoadGraph g = subdivide(item.graph, cfg.offset_range);
  const auto L = static_cast<std::size_t>(cfg.max_path_len);
  const auto M = static_cast<std::size_t>(cfg.max_paths);
  std::vector<NetSample> out;
  for (const auto &[id, node] : g.nodes()) {
    if (node.neighbors.empty()) continue;
    std::size_t avail = std::min(count_incoming_paths(g, id, L, M), M);
    std::size_t k = std::uniform_int_distribution<std::size_t>(1, avail)(rng);
    NetSample s;
    s.id = first_id + out.size();
    for (const auto &p : sample_incoming_paths(g, id, k, L, rng))
      s.paths.push_back(make_path_input(cfg, g, p));
    s.attr = make_attr(cfg, item.style, item.raster.get(), node.pos);
    std::vector<NodeId> nbrs(node.neighbors.begin(), node.neighbors.end());
    for (NodeId n : ccw_sort(g, id, nbrs)) {
      Vec2 d = g.position(n) - node.pos;
      OutNode o{offset_to_bin(d.x, cfg), offset_to_bin(d.y, cfg), g.edge_type(id, n)};
      if (!cfg.edge_type_head) o.type.reset();
      s.outputs.push_back(o);
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::uint64_t sample_seed(std::uint64_t seed, int epoch, std::size_t graph_index) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(seed) ^ static_cast<std::uint64_t>(epoch)) ^ graph_index);
}

std::vector<NetSample> epoch_samples(const std::vector<TrainItem> &data, const ModelConfig &cfg,
                                     std::uint64_t seed, int epoch) {
  std::vector<NetSample> all;
  for (std::size_t i = 0; i < data.size(); ++i) {
    Rng rng(sample_seed(seed, epoch, i));
    auto s = build_samples(data[i], cfg, rng, all.size());
    std::move(s.begin(), s.end(), std::back_inserter(all));
  }
  return all;
}

std::string to_json_line(const EpochMetrics &m) {
  nlohmann::ordered_json j;
  j["epoch"] = m.epoch;
  j["loss"] = m.loss;
  j["accuracy_x"] = m.accuracy_x;
  j["accuracy_y"] = m.accuracy_y;
  j["steps"] = m.steps;
  j["seconds"] = m.seconds;
  return j.dump();
}

namespace {

void write_checkpoint(const TrainConfig &cfg, const ModelParams &p, const std::string &name) {
  if (cfg.checkpoint_dir.empty()) return;
  std::filesystem::create_directories(cfg.checkpoint_dir);
  save_checkpoint(p, cfg.checkpoint_dir / name);
}

std::string epoch_name(int epoch) {
  std::string n = std::to_string(epoch);
  return "epoch_" + std::string(4 - std::min<std::size_t>(4, n.size()), '0') + n + ".ntgw";
}

}  // namespace

TrainResult train(const std::vector<TrainItem> &data, const TrainConfig &cfg) {
  cfg.validate();
  if (data.empty()) throw std::invalid_argument("empty training set");
  using Clock = std::chrono::steady_clock;

  std::vector<TrainItem> items = data;
  for (auto &it : items) it.graph = subdivide(it.graph, cfg.model.offset_range);

  TrainResult res;
  res.params = cfg.init == "zeros" ? ModelParams::zeros(cfg.model)
                                   : ModelParams::initialized(cfg.model, cfg.seed);
  std::ofstream log_file;
  if (!cfg.metrics_log.empty()) {
    if (cfg.metrics_log.has_parent_path()) std::filesystem::create_directories(cfg.metrics_log.parent_path());
    log_file.open(cfg.metrics_log);
    if (!log_file) throw std::runtime_error("cannot write " + cfg.metrics_log.string());
  }
  auto record = [&](const EpochMetrics &m) {
    res.log.push_back(m);
    if (log_file) log_file << to_json_line(m) << '\n' << std::flush;
  };

  {
    auto t0 = Clock::now();
    auto samples = epoch_samples(items, cfg.model, cfg.seed, 0);
    EvalResult ev = evaluate(res.params, samples);
    record({0, ev.loss, ev.accuracy_x(), ev.accuracy_y(), ev.steps,
            std::chrono::duration<double>(Clock::now() - t0).count()});
  }

  AdamState state = AdamState::for_params(res.params);
  AdamConfig adam{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay};
  LossOptions lopt{cfg.clip_norm, cfg.threads};
  ModelParams last_good = res.params;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    auto t0 = Clock::now();
    auto samples = epoch_samples(items, cfg.model, cfg.seed, epoch);
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(sample_seed(cfg.seed ^ 0x5bd1e995ULL, epoch, 0));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    std::size_t steps = 0, cx = 0, cy = 0;
    try {
      std::vector<NetSample> batch;
      for (std::size_t i = 0; i < order.size(); i += static_cast<std::size_t>(cfg.batch_size)) {
        batch.clear();
        for (std::size_t j = i; j < std::min(order.size(), i + cfg.batch_size); ++j)
          batch.push_back(samples[order[j]]);
        LossResult lr = loss_and_grad(res.params, batch, lopt);
        if (!std::isfinite(lr.loss)) throw NonFiniteLoss(batch.front().id);
        adam_step(res.params, lr.grads, state, adam);
        if (!res.params.tensors.all_finite()) throw NonFiniteLoss(batch.front().id);
        loss_sum += lr.loss * static_cast<double>(lr.steps);
        steps += lr.steps;
        cx += lr.correct_x;
        cy += lr.correct_y;
      }
    } catch (const NonFiniteLoss &e) {
      res.diverged = true;
      res.error = "epoch " + std::to_string(epoch) + ": " + e.what();
      res.params = last_good;
      break;
    }
    EpochMetrics m;
    m.epoch = epoch;
    m.steps = steps;
    m.loss = steps ? loss_sum / static_cast<double>(steps) : 0.0;
    m.accuracy_x = steps ? static_cast<double>(cx) / static_cast<double>(steps) : 0.0;
    m.accuracy_y = steps ? static_cast<double>(cy) / static_cast<double>(steps) : 0.0;
    m.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    record(m);
    last_good = res.params;
    adam.lr *= cfg.lr_decay;
    if (cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0)
      write_checkpoint(cfg, res.params, epoch_name(epoch));
  }
  write_checkpoint(cfg, res.params, "final.ntgw");
  return res;
}

}  // namespace ntg
