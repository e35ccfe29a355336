#include "ntg/cli.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <cctype>
#include <csignal>
#include <fstream>
#include <iostream>

#include "ntg/aerial.hpp"
#include "ntg/checkpoint.hpp"
#include "ntg/generator.hpp"
#include "ntg/graph_io.hpp"
#include "ntg/ingest.hpp"
#include "ntg/metrics.hpp"
#include "ntg/service.hpp"
#include "ntg/sketch.hpp"
#include "ntg/trainer.hpp"

namespace ntg {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::atomic<Service *> g_service{nullptr};

extern "C" void on_signal(int) {
  if (Service *s = g_service.load()) s->stop();
}

Limits read_limits(const std::string &path) {
  if (path.empty()) return Limits{};
  try {
    return limits_from_json(json::parse(read_text_file(path)));
  } catch (const json::exception &e) {
    throw DataError("limits file " + path + ": " + e.what());
  }
}

BBox parse_box(const std::vector<double> &v, const char *what) {
  if (v.size() != 4) throw UsageError(std::string(what) + " needs min_x,min_y,max_x,max_y");
  BBox b{v[0], v[1], v[2], v[3]};
  if (b.empty()) throw UsageError(std::string(what) + " is empty");
  return b;
}

std::vector<std::vector<Vec2>> read_strokes(const std::string &path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception &e) {
    throw DataError("sketch " + path + ": " + e.what());
  }
  const json &arr = j.is_object() ? j.at("strokes") : j;
  std::vector<std::vector<Vec2>> strokes;
  for (const auto &st : arr) {
    std::vector<Vec2> pts;
    for (const auto &p : st) {
      if (!p.is_array() || p.size() != 2) throw DataError("sketch point must be [x, y]");
      pts.push_back({p[0].get<double>(), p[1].get<double>()});
    }
    strokes.push_back(std::move(pts));
  }
  return strokes;
}

void write_events(const std::string &path, const GenSession &s) {
  std::string text;
  for (const auto &e : s.events) text += to_json_string(e) + "\n";
  write_text_file(path, text);
}

void emit(std::ostream &out, const ordered_json &j) { out << j.dump() << "\n"; }

ordered_json apls_json(const AplsResult &r) {
  return {{"score", r.score}, {"forward", r.forward}, {"backward", r.backward},
          {"forward_pairs", r.forward_pairs}, {"backward_pairs", r.backward_pairs}};
}

std::optional<double> urban_frechet(const RoadGraph &a, const RoadGraph &b, std::uint64_t seed) {
  try {
    return frechet_distance(urban_feature_stats({a}, seed), urban_feature_stats({b}, seed));
  } catch (const std::invalid_argument &) {
    return std::nullopt;
  }
}

ordered_json eval_report(const RoadGraph &pred, const RoadGraph &gt, std::uint64_t seed, double buffer,
                         double raster_res, double half_width) {
  AplsOptions ao;
  ao.buffer = buffer;
  ao.seed = seed;
  BBox box = gt.bbox();
  box.extend(pred.bbox());
  box = box.expanded(half_width * raster_res + raster_res);
  IouF1 px = iou_f1(rasterize(pred, box, raster_res, half_width), rasterize(gt, box, raster_res, half_width));
  ordered_json r;
  r["apls"] = apls_json(apls_report(pred, gt, ao));
  r["iou"] = px.iou;
  r["f1"] = px.f1;
  r["diversity"] = diversity(pred, gt);
  auto fd = urban_frechet(pred, gt, seed);
  r["urban_frechet"] = fd ? json(*fd) : json(nullptr);
  r["params"] = {{"seed", seed},
                 {"apls_buffer", ao.buffer},
                 {"apls_simplify", ao.simplify_tolerance},
                 {"apls_subdivide", ao.subdivide_length},
                 {"apls_exhaustive_max_nodes", ao.exhaustive_max_nodes},
                 {"apls_sampled_pairs", ao.sampled_pairs},
                 {"raster_resolution", raster_res},
                 {"raster_half_width_px", half_width},
                 {"diversity_step", 1.0},
                 {"diversity_radius", 10.0},
                 {"convenience_partners", 32}};
  return r;
}

std::vector<std::pair<std::string, RoadGraph>> dataset_graphs(const std::string &manifest, const std::string &split,
                                                              std::vector<std::optional<int>> *styles = nullptr) {
  Dataset d = load_manifest(manifest);
  std::vector<std::pair<std::string, RoadGraph>> out;
  for (const auto &e : d.entries) {
    if (split != "all" && to_string(e.split) != split) continue;
    out.emplace_back(e.name, load_entry(d, e));
    if (styles) styles->push_back(e.style);
  }
  if (out.empty()) throw DataError("no dataset entries in split " + split);
  return out;
}

}  // namespace

int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  CLI::App app{"Road network generation, parsing and evaluation", "ntg"};
  app.require_subcommand(1);
  app.fallthrough(false);

  // ingest
  std::vector<std::string> osm_inputs;
  std::string out_path;
  std::uint64_t seed = 0;
  double tile_size = 0.0, min_tile_length = 500.0;
  bool edge_types = false, all_components = false;
  auto *ingest = app.add_subcommand("ingest", "OSM extracts to a graph dataset");
  ingest->add_option("--osm", osm_inputs, "city=path.osm (repeatable)")->required();
  ingest->add_option("--out", out_path, "output directory")->required();
  ingest->add_option("--seed", seed, "split assignment seed")->required();
  ingest->add_option("--tile-size", tile_size, "tile size in meters (0 keeps whole extracts)");
  ingest->add_option("--min-tile-length", min_tile_length, "minimum road length per tile");
  ingest->add_flag("--edge-types", edge_types, "keep major/minor road types");
  ingest->add_flag("--all-components", all_components, "keep every connected component");

  // limits
  std::string dataset, split = "train";
  std::vector<std::string> graph_files;
  auto *limits_cmd = app.add_subcommand("limits", "generation limits from a dataset");
  limits_cmd->add_option("--dataset", dataset, "dataset manifest");
  limits_cmd->add_option("--graph", graph_files, "graph JSON files");
  limits_cmd->add_option("--split", split, "train, val, test or all");
  limits_cmd->add_option("--out", out_path, "limits JSON")->required();

  // stats
  auto *stats = app.add_subcommand("stats", "dataset statistics");
  stats->add_option("--dataset", dataset, "dataset manifest")->required();
  stats->add_option("--split", split, "train, val, test or all");

  // train
  std::string config_file;
  std::vector<std::string> overrides;
  auto *train_cmd = app.add_subcommand("train", "train a model");
  train_cmd->add_option("--dataset", dataset, "dataset manifest");
  train_cmd->add_option("--graph", graph_files, "graph JSON files");
  train_cmd->add_option("--split", split, "dataset split");
  train_cmd->add_option("--config", config_file, "key=value training config");
  train_cmd->add_option("--set", overrides, "key=value override (repeatable)");
  train_cmd->add_option("--out", out_path, "checkpoint directory")->required();
  train_cmd->add_option("--seed", seed, "training seed")->required();

  // generate
  std::string checkpoint, template_name, sketch_file, seed_graph, limits_file, events_file;
  double arm = 50.0, rotation = 0.0, temperature = 1.0;
  std::vector<double> center{0.0, 0.0}, region;
  std::optional<int> style;
  std::size_t max_nodes = 2000;
  std::optional<long> max_steps;
  auto *gen_cmd = app.add_subcommand("generate", "grow a road graph from a seed");
  gen_cmd->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  gen_cmd->add_option("--seed", seed, "random seed")->required();
  gen_cmd->add_option("--out", out_path, "output graph JSON")->required();
  gen_cmd->add_option("--template", template_name, "root template name");
  gen_cmd->add_option("--arm", arm, "template arm length");
  gen_cmd->add_option("--rotation", rotation, "template rotation (radians)");
  gen_cmd->add_option("--center", center, "template center x y")->expected(2);
  gen_cmd->add_option("--sketch", sketch_file, "sketch strokes JSON");
  gen_cmd->add_option("--seed-graph", seed_graph, "seed graph JSON");
  gen_cmd->add_option("--style", style, "style id");
  gen_cmd->add_option("--limits", limits_file, "limits JSON");
  gen_cmd->add_option("--temperature", temperature, "sampling temperature (0 = greedy)");
  gen_cmd->add_option("--region", region, "min_x min_y max_x max_y")->expected(4);
  gen_cmd->add_option("--max-nodes", max_nodes, "node budget");
  gen_cmd->add_option("--max-steps", max_steps, "step budget");
  gen_cmd->add_option("--events", events_file, "write the event log (JSON lines)");

  // complete
  std::string graph_in;
  auto *complete_cmd = app.add_subcommand("complete", "extend a graph from its dead ends");
  complete_cmd->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  complete_cmd->add_option("--graph", graph_in, "input graph JSON")->required();
  complete_cmd->add_option("--seed", seed, "random seed")->required();
  complete_cmd->add_option("--out", out_path, "output graph JSON")->required();
  complete_cmd->add_option("--style", style, "style id");
  complete_cmd->add_option("--limits", limits_file, "limits JSON");
  complete_cmd->add_option("--temperature", temperature, "sampling temperature");
  complete_cmd->add_option("--max-nodes", max_nodes, "node budget");

  // parse
  std::string raster_file, gt_file, report_file;
  double threshold = 0.05, lambda = 1.0;
  auto *parse_cmd = app.add_subcommand("parse", "extract a road graph from a likelihood raster");
  parse_cmd->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  parse_cmd->add_option("--raster", raster_file, "NTGR raster")->required();
  parse_cmd->add_option("--seed", seed, "random seed")->required();
  parse_cmd->add_option("--out", out_path, "output graph JSON")->required();
  parse_cmd->add_option("--gt", gt_file, "ground-truth graph for a metrics report");
  parse_cmd->add_option("--report", report_file, "metrics report JSON");
  parse_cmd->add_option("--threshold", threshold, "stop threshold");
  parse_cmd->add_option("--lambda", lambda, "likelihood exponent");
  parse_cmd->add_option("--temperature", temperature, "sampling temperature");
  parse_cmd->add_option("--limits", limits_file, "limits JSON");
  parse_cmd->add_option("--max-nodes", max_nodes, "node budget");

  // render
  double resolution = 1.0, halfwidth = 4.0, noise = 0.0, margin = 50.0;
  std::vector<double> bbox;
  std::optional<std::uint64_t> noise_seed;
  auto *render_cmd = app.add_subcommand("render", "render a graph to a likelihood raster");
  render_cmd->add_option("--graph", graph_in, "graph JSON")->required();
  render_cmd->add_option("--out", out_path, "NTGR raster")->required();
  render_cmd->add_option("--resolution", resolution, "meters per pixel");
  render_cmd->add_option("--halfwidth", halfwidth, "road half width in meters");
  render_cmd->add_option("--margin", margin, "margin around the graph bbox");
  render_cmd->add_option("--bbox", bbox, "min_x min_y max_x max_y")->expected(4);
  render_cmd->add_option("--noise", noise, "Gaussian noise sigma");
  render_cmd->add_option("--seed", noise_seed, "noise seed (required with --noise)");

  // eval
  std::string pred_file;
  double buffer = 5.0, raster_res = 2.0, half_width = 2.0;
  std::uint64_t eval_seed = 0;
  auto *eval_cmd = app.add_subcommand("eval", "compare a predicted graph with ground truth");
  eval_cmd->add_option("--pred", pred_file, "predicted graph JSON")->required();
  eval_cmd->add_option("--gt", gt_file, "ground-truth graph JSON")->required();
  eval_cmd->add_option("--seed", eval_seed, "sampling seed (default 0)");
  eval_cmd->add_option("--buffer", buffer, "APLS buffer in meters");
  eval_cmd->add_option("--raster-resolution", raster_res, "IOU raster resolution");
  eval_cmd->add_option("--half-width", half_width, "IOU road half width in pixels");
  eval_cmd->add_option("--out", out_path, "report JSON");

  // serve
  std::string host, ckpt_dir;
  std::optional<int> port;
  auto *serve_cmd = app.add_subcommand("serve", "run the interactive generation service");
  serve_cmd->add_option("--config", config_file, "service config (NTG_CONFIG overrides)");
  serve_cmd->add_option("--host", host, "bind address");
  serve_cmd->add_option("--port", port, "port (0 picks a free one)");
  serve_cmd->add_option("--checkpoint-dir", ckpt_dir, "checkpoint directory");

  // name unknown flags before CLI11 complains about missing required ones
  CLI::App *sub = nullptr;
  for (const auto &a : args) {
    if (!sub) {
      if (a.rfind('-', 0) == 0) continue;
      sub = app.get_subcommand_no_throw(a);
      if (!sub) break;
      continue;
    }
    if (a.size() < 2 || a[0] != '-' || a == "--" || std::isdigit(static_cast<unsigned char>(a[1])) || a[1] == '.')
      continue;
    std::string name = a.substr(0, a.find('='));
    if (!sub->get_option_no_throw(name)) {
      err << "unknown option " << name << " for " << sub->get_name() << "\nRun with --help for more information.\n";
      return kExitUsage;
    }
  }

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError &e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (*ingest) {
      IngestOptions opt;
      opt.seed = seed;
      opt.tile_size = tile_size;
      opt.min_tile_length = min_tile_length;
      opt.osm.edge_types = edge_types;
      opt.osm.keep_largest = !all_components;
      std::vector<std::pair<std::string, std::filesystem::path>> cities;
      for (const auto &s : osm_inputs) {
        auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0) throw UsageError("--osm expects city=path, got " + s);
        cities.emplace_back(s.substr(0, eq), s.substr(eq + 1));
      }
      Dataset d = ingest_osm_files(cities, out_path, opt);
      emit(out, {{"manifest", (std::filesystem::path(out_path) / "manifest.json").string()},
                 {"entries", d.entries.size()},
                 {"styles", d.styles}});
    } else if (*limits_cmd) {
      std::vector<RoadGraph> graphs;
      if (!dataset.empty())
        for (auto &[n, g] : dataset_graphs(dataset, split)) graphs.push_back(std::move(g));
      for (const auto &f : graph_files) graphs.push_back(load_graph(f));
      if (graphs.empty()) throw UsageError("limits needs --dataset or --graph");
      Limits l = limits_from_dataset(graphs);
      write_text_file(out_path, to_json(l).dump(2) + "\n");
      emit(out, to_json(l));
    } else if (*stats) {
      auto graphs = dataset_graphs(dataset, split);
      ordered_json rows = ordered_json::array();
      GraphStats total;
      for (const auto &[name, g] : graphs) {
        GraphStats s = graph_stats(g);
        rows.push_back({{"name", name}, {"nodes", s.nodes}, {"edges", s.edges}, {"area_km2", s.area_km2},
                        {"length_km", s.length_km}});
        total.nodes += s.nodes;
        total.edges += s.edges;
        total.area_km2 += s.area_km2;
        total.length_km += s.length_km;
      }
      emit(out, {{"graphs", rows},
                 {"total", {{"nodes", total.nodes}, {"edges", total.edges}, {"area_km2", total.area_km2},
                            {"length_km", total.length_km}}}});
    } else if (*train_cmd) {
      TrainConfig cfg = parse_train_config(config_file.empty() ? "" : read_text_file(config_file));
      std::string extra;
      for (const auto &o : overrides) extra += o + "\n";
      cfg = parse_train_config(extra, cfg);
      cfg.seed = seed;
      cfg.checkpoint_dir = out_path;
      if (cfg.metrics_log.empty()) cfg.metrics_log = std::filesystem::path(out_path) / "metrics.jsonl";
      std::vector<TrainItem> items;
      if (!dataset.empty()) {
        std::vector<std::optional<int>> styles;
        auto graphs = dataset_graphs(dataset, split, &styles);
        for (std::size_t i = 0; i < graphs.size(); ++i)
          items.push_back({graphs[i].first, std::move(graphs[i].second), styles[i], nullptr});
      }
      for (const auto &f : graph_files) items.push_back({f, load_graph(f), std::nullopt, nullptr});
      if (items.empty()) throw UsageError("train needs --dataset or --graph");
      if (cfg.model.attr_mode == AttrMode::Raster)
        for (auto &it : items)
          it.raster = std::make_shared<LikelihoodRaster>(
              render_likelihood(it.graph, it.graph.bbox().expanded(cfg.model.patch_size), 1.0, 4.0));
      std::filesystem::create_directories(out_path);
      TrainResult r = train(items, cfg);
      const EpochMetrics &last = r.log.back();
      emit(out, {{"checkpoint", (std::filesystem::path(out_path) / "final.ntgw").string()},
                 {"epochs", last.epoch},
                 {"loss", last.loss},
                 {"accuracy_x", last.accuracy_x},
                 {"accuracy_y", last.accuracy_y},
                 {"diverged", r.diverged}});
      if (r.diverged) {
        err << "error: training diverged: " << r.error << "\n";
        return kExitData;
      }
    } else if (*gen_cmd) {
      int sources = !template_name.empty() + !sketch_file.empty() + !seed_graph.empty();
      if (sources > 1) throw UsageError("give at most one of --template, --sketch, --seed-graph");
      ModelParams model = load_checkpoint(checkpoint);
      RoadGraph root;
      if (!template_name.empty()) {
        root = template_graph(find_template(template_name), {center[0], center[1]}, arm, rotation);
      } else if (!sketch_file.empty()) {
        SketchOptions so;
        so.resolution = model.config.offset_resolution;
        so.max_edge = model.config.offset_range;
        SketchSeed s = match_template(read_strokes(sketch_file), so);
        for (const auto &w : s.warnings) err << "warning: " << w << "\n";
        root = s.graph;
      } else if (!seed_graph.empty()) {
        root = load_graph(seed_graph);
      } else {
        Rng rng(seed);
        root = random_template_seed(rng);
      }
      GenOptions opt;
      opt.temperature = temperature;
      if (!region.empty()) opt.region = parse_box(region, "--region");
      GenSession s = init_session(root, style, read_limits(limits_file), seed, opt);
      RoadGraph g = generate(s, model, Budget{max_nodes, max_steps});
      save_graph(g, out_path);
      if (!events_file.empty()) write_events(events_file, s);
      emit(out, {{"out", out_path}, {"nodes", g.node_count()}, {"edges", g.edge_count()}, {"steps", s.step},
                 {"status", to_string(s.status)}});
    } else if (*complete_cmd) {
      ModelParams model = load_checkpoint(checkpoint);
      RoadGraph in = load_graph(graph_in);
      GenOptions opt;
      opt.temperature = temperature;
      RoadGraph g = complete(in, model, style, read_limits(limits_file), seed, Budget{max_nodes, std::nullopt}, opt);
      save_graph(g, out_path);
      emit(out, {{"out", out_path}, {"input_nodes", in.node_count()}, {"nodes", g.node_count()},
                 {"edges", g.edge_count()}});
    } else if (*parse_cmd) {
      ModelParams model = load_checkpoint(checkpoint);
      LikelihoodRaster r = load_raster(raster_file);
      ParseConfig pc;
      pc.stop_threshold = threshold;
      pc.lambda = lambda;
      pc.temperature = temperature;
      pc.seed = seed;
      pc.budget.max_nodes = max_nodes;
      RoadGraph g = parse_with_prior(r, model, read_limits(limits_file), pc);
      save_graph(g, out_path);
      ordered_json summary{{"out", out_path}, {"nodes", g.node_count()}, {"edges", g.edge_count()}};
      if (!gt_file.empty()) {
        RoadGraph gt = load_graph(gt_file);
        ordered_json rep = eval_report(g, gt, seed, 5.0, 2.0, 2.0);
        summary["apls"] = rep["apls"]["score"];
        summary["iou"] = rep["iou"];
        summary["f1"] = rep["f1"];
        if (!report_file.empty()) write_text_file(report_file, rep.dump(2) + "\n");
      }
      emit(out, summary);
    } else if (*render_cmd) {
      if (noise > 0.0 && !noise_seed) throw UsageError("--noise requires --seed");
      RoadGraph g = load_graph(graph_in);
      BBox box = bbox.empty() ? g.bbox().expanded(margin) : parse_box(bbox, "--bbox");
      LikelihoodRaster r = render_likelihood(g, box, resolution, halfwidth,
                                             noise > 0.0 ? noise_seed : std::nullopt, noise);
      save_raster(r, out_path);
      emit(out, {{"out", out_path}, {"width", r.width}, {"height", r.height}});
    } else if (*eval_cmd) {
      ordered_json rep = eval_report(load_graph(pred_file), load_graph(gt_file), eval_seed, buffer, raster_res,
                                     half_width);
      if (!out_path.empty()) write_text_file(out_path, rep.dump(2) + "\n");
      emit(out, rep);
    } else if (*serve_cmd) {
      ServiceConfig cfg = load_service_config(config_file.empty() ? std::nullopt
                                                                  : std::optional<std::filesystem::path>(config_file));
      if (!host.empty()) cfg.host = host;
      if (port) cfg.port = *port;
      if (!ckpt_dir.empty()) cfg.checkpoint_dir = ckpt_dir;
      auto model = std::make_shared<const ModelParams>(load_checkpoint(cfg.checkpoint_path()));
      Limits limits = cfg.limits.empty() ? Limits{} : read_limits(cfg.limits.string());
      SessionManager mgr(model, limits, cfg);
      Service svc(mgr);
      int bound = svc.bind(cfg.host, cfg.port);
      if (bound < 0) throw DataError("cannot bind " + cfg.host + ":" + std::to_string(cfg.port));
      emit(out, {{"listening", cfg.host + ":" + std::to_string(bound)}});
      out.flush();
      g_service = &svc;
      auto prev_int = std::signal(SIGINT, on_signal);
      auto prev_term = std::signal(SIGTERM, on_signal);
      svc.run();
      std::signal(SIGINT, prev_int);
      std::signal(SIGTERM, prev_term);
      g_service = nullptr;
    }
  } catch (const UsageError &e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument &e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}

}  // namespace ntg
