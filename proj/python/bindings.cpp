#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "ntg/aerial.hpp"
#include "ntg/checkpoint.hpp"
#include "ntg/cli.hpp"
#include "ntg/generator.hpp"
#include "ntg/graph_io.hpp"
#include "ntg/ingest.hpp"
#include "ntg/metrics.hpp"
#include "ntg/sketch.hpp"
#include "ntg/trainer.hpp"

namespace py = pybind11;
using namespace ntg;

namespace {

using Point = std::pair<double, double>;

Vec2 vec(const Point &p) { return {p.first, p.second}; }
Point point(Vec2 v) { return {v.x, v.y}; }

BBox box(const std::tuple<double, double, double, double> &b) {
  return {std::get<0>(b), std::get<1>(b), std::get<2>(b), std::get<3>(b)};
}

py::dict apls_dict(const AplsResult &r) {
  py::dict d;
  d["score"] = r.score;
  d["forward"] = r.forward;
  d["backward"] = r.backward;
  d["forward_pairs"] = r.forward_pairs;
  d["backward_pairs"] = r.backward_pairs;
  return d;
}

std::vector<std::vector<Vec2>> strokes_of(const std::vector<std::vector<Point>> &in) {
  std::vector<std::vector<Vec2>> out;
  for (const auto &s : in) {
    std::vector<Vec2> pts;
    for (const auto &p : s) pts.push_back(vec(p));
    out.push_back(std::move(pts));
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Road network generation, parsing and evaluation";

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);

  py::class_<RoadGraph>(m, "RoadGraph")
      .def(py::init<>())
      .def("add_node", [](RoadGraph &g, NodeId id, double x, double y) { g.add_node(id, {x, y}); }, py::arg("id"),
           py::arg("x"), py::arg("y"))
      .def("add_edge", [](RoadGraph &g, NodeId a, NodeId b) { return g.add_edge(a, b); })
      .def("remove_edge", &RoadGraph::remove_edge)
      .def("has_edge", &RoadGraph::has_edge)
      .def("position", [](const RoadGraph &g, NodeId id) { return point(g.position(id)); })
      .def("degree", &RoadGraph::degree)
      .def("node_count", &RoadGraph::node_count)
      .def("edge_count", &RoadGraph::edge_count)
      .def("total_length", &RoadGraph::total_length)
      .def("nodes",
           [](const RoadGraph &g) {
             std::vector<std::tuple<NodeId, double, double>> out;
             for (const auto &[id, n] : g.nodes()) out.emplace_back(id, n.pos.x, n.pos.y);
             return out;
           })
      .def("edges",
           [](const RoadGraph &g) {
             std::vector<std::pair<NodeId, NodeId>> out;
             for (const auto &e : g.edges()) out.emplace_back(e.a, e.b);
             return out;
           })
      .def("bbox",
           [](const RoadGraph &g) {
             BBox b = g.bbox();
             return std::make_tuple(b.min_x, b.min_y, b.max_x, b.max_y);
           })
      .def("violations", [](const RoadGraph &g) { return validate_invariants(g); })
      .def("to_json", [](const RoadGraph &g) { return to_canonical_json(g); })
      .def("to_geojson", [](const RoadGraph &g) { return to_geojson(g); })
      .def_static("from_json", &from_canonical_json)
      .def("__eq__", [](const RoadGraph &a, const RoadGraph &b) { return a == b; })
      .def("__repr__", [](const RoadGraph &g) {
        return "<RoadGraph nodes=" + std::to_string(g.node_count()) + " edges=" + std::to_string(g.edge_count()) +
               ">";
      });

  m.def("load_graph", &load_graph);
  m.def("save_graph", &save_graph);
  m.def("parse_osm", [](const std::string &xml, bool edge_types) { return parse_osm(xml, {edge_types}).graph; },
        py::arg("xml"), py::arg("edge_types") = false);

  py::class_<LikelihoodRaster>(m, "Raster")
      .def_readonly("width", &LikelihoodRaster::width)
      .def_readonly("height", &LikelihoodRaster::height)
      .def_readonly("origin_x", &LikelihoodRaster::origin_x)
      .def_readonly("origin_y", &LikelihoodRaster::origin_y)
      .def_readonly("resolution", &LikelihoodRaster::resolution)
      .def("values",
           [](const LikelihoodRaster &r) {
             py::array_t<float> a({static_cast<py::ssize_t>(r.height), static_cast<py::ssize_t>(r.width)});
             std::copy(r.values.begin(), r.values.end(), a.mutable_data());
             return a;
           })
      .def("sample", [](const LikelihoodRaster &r, double x, double y) { return r.sample({x, y}); });

  m.def(
      "render_likelihood",
      [](const RoadGraph &g, std::tuple<double, double, double, double> b, double resolution, double halfwidth,
         std::optional<std::uint64_t> noise_seed, double sigma) {
        return render_likelihood(g, box(b), resolution, halfwidth, noise_seed, sigma);
      },
      py::arg("graph"), py::arg("bbox"), py::arg("resolution") = 1.0, py::arg("halfwidth") = 4.0,
      py::arg("noise_seed") = py::none(), py::arg("noise_sigma") = 0.1);
  m.def(
      "raster_from_array",
      [](py::array_t<float, py::array::c_style | py::array::forcecast> a, double origin_x, double origin_y,
         double resolution) {
        if (a.ndim() != 2) throw std::invalid_argument("raster array must be 2-D");
        LikelihoodRaster r;
        r.height = static_cast<std::uint32_t>(a.shape(0));
        r.width = static_cast<std::uint32_t>(a.shape(1));
        r.origin_x = origin_x;
        r.origin_y = origin_y;
        r.resolution = resolution;
        r.values.assign(a.data(), a.data() + a.size());
        validate_raster(r);
        return r;
      },
      py::arg("values"), py::arg("origin_x"), py::arg("origin_y"), py::arg("resolution") = 1.0);
  m.def("save_raster", &save_raster);
  m.def("load_raster", &load_raster);
  m.def("skeleton_graph", [](const LikelihoodRaster &r, double threshold) {
    SkeletonOptions o;
    o.threshold = threshold;
    return graph_from_raster(r, o);
  }, py::arg("raster"), py::arg("threshold") = 0.5);

  py::class_<ModelParams>(m, "Model")
      .def_property_readonly("config", [](const ModelParams &p) { return to_json(p.config).dump(); })
      .def("save", [](const ModelParams &p, const std::filesystem::path &path) { save_checkpoint(p, path); });
  m.def("load_checkpoint", &load_checkpoint);

  m.def(
      "train",
      [](const std::vector<RoadGraph> &graphs, const std::string &config, std::uint64_t seed,
         const std::filesystem::path &out_dir) {
        TrainConfig cfg = parse_train_config(config);
        cfg.seed = seed;
        cfg.checkpoint_dir = out_dir;
        std::vector<TrainItem> items;
        for (std::size_t i = 0; i < graphs.size(); ++i)
          items.push_back({"graph_" + std::to_string(i), graphs[i], std::nullopt, nullptr});
        TrainResult r;
        {
          py::gil_scoped_release release;
          if (!out_dir.empty()) std::filesystem::create_directories(out_dir);
          r = train(items, cfg);
        }
        std::vector<py::dict> log;
        for (const auto &e : r.log) {
          py::dict d;
          d["epoch"] = e.epoch;
          d["loss"] = e.loss;
          d["accuracy_x"] = e.accuracy_x;
          d["accuracy_y"] = e.accuracy_y;
          log.push_back(d);
        }
        if (r.diverged) throw std::runtime_error("training diverged: " + r.error);
        return std::make_pair(r.params, log);
      },
      py::arg("graphs"), py::arg("config"), py::arg("seed"), py::arg("out_dir") = std::filesystem::path());

  m.def("templates", [] {
    std::vector<std::string> names;
    for (const auto &t : node_templates()) names.push_back(t.name);
    return names;
  });
  m.def(
      "template_graph",
      [](const std::string &name, Point center, double arm, double rotation) {
        return template_graph(find_template(name), vec(center), arm, rotation);
      },
      py::arg("name"), py::arg("center") = Point{0, 0}, py::arg("arm") = 50.0, py::arg("rotation") = 0.0);
  m.def(
      "sketch_seed",
      [](const std::vector<std::vector<Point>> &strokes) {
        SketchSeed s = match_template(strokes_of(strokes));
        std::vector<std::string> names;
        for (const auto &j : s.junctions) names.push_back(j.name);
        return std::make_tuple(s.graph, names, s.warnings);
      },
      py::arg("strokes"));

  m.def(
      "generate",
      [](const ModelParams &model, const RoadGraph &seed_graph, std::uint64_t seed, double temperature,
         std::size_t max_nodes, std::optional<int> style) {
        GenOptions opt;
        opt.temperature = temperature;
        py::gil_scoped_release release;
        GenSession s = init_session(seed_graph, style, Limits{}, seed, opt);
        RoadGraph g = generate(s, model, Budget{max_nodes, std::nullopt});
        std::vector<std::string> events;
        for (const auto &e : s.events) events.push_back(to_json_string(e));
        return std::make_tuple(g, events, std::string(to_string(s.status)));
      },
      py::arg("model"), py::arg("seed_graph"), py::arg("seed"), py::arg("temperature") = 1.0,
      py::arg("max_nodes") = 2000, py::arg("style") = py::none());
  m.def("replay", [](const std::vector<std::string> &events) {
    std::vector<GenEvent> ev;
    for (const auto &e : events) ev.push_back(event_from_json(nlohmann::json::parse(e)));
    return replay(ev);
  });
  m.def(
      "parse_raster",
      [](const LikelihoodRaster &r, const ModelParams &model, std::uint64_t seed, double temperature, double lambda,
         double stop_threshold, std::size_t max_nodes) {
        ParseConfig cfg;
        cfg.seed = seed;
        cfg.temperature = temperature;
        cfg.lambda = lambda;
        cfg.stop_threshold = stop_threshold;
        cfg.budget.max_nodes = max_nodes;
        py::gil_scoped_release release;
        return parse_with_prior(r, model, Limits{}, cfg);
      },
      py::arg("raster"), py::arg("model"), py::arg("seed"), py::arg("temperature") = 0.0, py::arg("lam") = 1.0,
      py::arg("stop_threshold") = 0.05, py::arg("max_nodes") = 2000);

  m.def(
      "apls",
      [](const RoadGraph &pred, const RoadGraph &gt, double buffer, std::uint64_t seed) {
        AplsOptions o;
        o.buffer = buffer;
        o.seed = seed;
        AplsResult r;
        {
          py::gil_scoped_release release;
          r = apls_report(pred, gt, o);
        }
        return apls_dict(r);
      },
      py::arg("pred"), py::arg("gt"), py::arg("buffer") = 5.0, py::arg("seed") = 0);
  m.def(
      "diversity", [](const RoadGraph &a, const RoadGraph &b) { return diversity(a, b); }, py::arg("a"),
      py::arg("b"));
  m.def(
      "iou_f1",
      [](const RoadGraph &pred, const RoadGraph &gt, double resolution, double half_width_px) {
        BBox b = gt.bbox();
        b.extend(pred.bbox());
        b = b.expanded(half_width_px * resolution + resolution);
        IouF1 r = iou_f1(rasterize(pred, b, resolution, half_width_px), rasterize(gt, b, resolution, half_width_px));
        return std::make_pair(r.iou, r.f1);
      },
      py::arg("pred"), py::arg("gt"), py::arg("resolution") = 2.0, py::arg("half_width_px") = 2.0);
  m.def(
      "urban_frechet",
      [](const std::vector<RoadGraph> &a, const std::vector<RoadGraph> &b, std::uint64_t seed) {
        py::gil_scoped_release release;
        return frechet_distance(urban_feature_stats(a, seed), urban_feature_stats(b, seed));
      },
      py::arg("a"), py::arg("b"), py::arg("seed") = 0);

  m.def(
      "run_cli",
      [](const std::vector<std::string> &args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = run_cli(args, out, err);
        }
        return std::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));
}
