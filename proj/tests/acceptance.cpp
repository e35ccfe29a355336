// Acceptance suite: one PASS/FAIL line per criterion.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>

#include "net_fixtures.hpp"
#include "ntg/aerial.hpp"
#include "ntg/checkpoint.hpp"
#include "ntg/generator.hpp"
#include "ntg/graph_io.hpp"
#include "ntg/ingest.hpp"
#include "ntg/sketch.hpp"
#include "ntg/trainer.hpp"
#include "oracles.hpp"

using namespace ntg;
using namespace ntg::testing;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char *f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void check(bool ok, const std::string &what) {
    pass = pass && ok;
    notes.push_back(std::string(ok ? "" : "!") + what);
  }
};

std::string fixture(const std::string &name) { return read_text_file(std::filesystem::path(NTG_FIXTURES) / name); }

std::filesystem::path scratch(const std::string &name) {
  auto p = std::filesystem::temp_directory_path() / ("ntg_accept_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

RoadGraph toy_grid() { return make_grid(12, 12, 100.0); }

TrainConfig toy_train_config() {
  TrainConfig t;
  t.model.hidden_size = 32;
  t.model.embed_size = 16;
  t.model.max_path_len = 4;
  t.model.max_paths = 4;
  t.model.n_styles = 1;
  t.model.attr_mode = AttrMode::None;
  t.epochs = 50;
  t.batch_size = 16;
  t.lr = 1e-2;
  t.seed = 1;
  return t;
}

RoadGraph center_cross(Vec2 c, double arm) { return template_graph(find_template("plus"), c, arm); }

// trained in criterion 2 and reused by 7 and 8
std::optional<ModelParams> g_toy_model;

Outcome gradients() {
  Outcome o;
  auto t0 = Clock::now();
  double worst = 0.0;
  int configs = 0;
  for (EncoderMode enc : {EncoderMode::DiscreteCartesian, EncoderMode::ContinuousPolar})
    for (AttrMode attr : {AttrMode::None, AttrMode::Style, AttrMode::Raster})
      for (bool edge : {false, true}) {
        ModelConfig c = tiny_config(enc, attr, edge, 8, 20.0);
        ModelParams p = random_params(c, 13 + configs);
        std::mt19937_64 rng(31 + configs);
        std::vector<NetSample> batch{random_sample(c, rng, 2, 3, 0), random_sample(c, rng, 3, 2, 1)};
        worst = std::max(worst, gradient_check(p, batch, 1e-4).max_rel);
        ++configs;
      }
  double secs = seconds_since(t0);
  o.check(worst < 1e-4, "max rel err " + fmt("%.2e", worst) + " < 1e-4 over " + std::to_string(configs) + " configs");
  o.check(secs < 60.0, fmt("%.1f s", secs) + " < 60 s");
  return o;
}

Outcome toy_overfit() {
  Outcome o;
  auto t0 = Clock::now();
  RoadGraph grid = toy_grid();
  TrainConfig t = toy_train_config();
  std::vector<TrainItem> data{{"grid", grid, std::nullopt, nullptr}};
  TrainResult r = train(data, t);
  o.check(!r.diverged, "training finite");
  // teacher-forced accuracy on freshly sampled paths
  std::vector<NetSample> fresh;
  for (int e = 1000; e < 1003; ++e) {
    auto s = epoch_samples(data, t.model, 99, e);
    fresh.insert(fresh.end(), s.begin(), s.end());
  }
  EvalResult ev = evaluate(r.params, fresh);
  o.check(ev.accuracy_x() >= 0.9 && ev.accuracy_y() >= 0.9,
          "accuracy x " + fmt("%.3f", ev.accuracy_x()) + " y " + fmt("%.3f", ev.accuracy_y()) + " >= 0.90");
  ModelParams model = r.params;
  quantize_to_f32(model);
  GenOptions opt;
  opt.temperature = 0.0;
  opt.region = grid.bbox();
  GenSession s = init_session(center_cross({500, 500}, 100.0), std::nullopt, Limits{}, 1, opt);
  RoadGraph out = generate(s, model, Budget{2000, std::nullopt});
  double div = diversity(out, grid);
  o.check(div <= 15.0, "greedy diversity " + fmt("%.2f", div) + "% <= 15% (" + std::to_string(out.node_count()) +
                           " nodes)");
  double secs = seconds_since(t0);
  o.check(secs < 600.0, fmt("%.1f s", secs) + " < 600 s");
  g_toy_model = model;
  return o;
}

Outcome apls_oracle_equivalence() {
  Outcome o;
  std::vector<RoadGraph> fixtures = small_graphs();
  fixtures.push_back(parse_osm(fixture("crossing.osm")).graph);
  double worst = 0.0;
  std::size_t pairs = 0;
  std::uint64_t k = 0;
  for (const RoadGraph &g : fixtures) {
    if (g.node_count() > 12) continue;
    for (const RoadGraph &t : {g, perturbed(g, 50 + k++)}) {
      if (t.node_count() < 2) continue;
      worst = std::max(worst, std::abs(apls(g, t) - apls_oracle(g, t)));
      ++pairs;
    }
  }
  o.check(worst <= 1e-9, "max |apls - oracle| " + fmt("%.1e", worst) + " <= 1e-9 over " + std::to_string(pairs) +
                             " pairs");
  std::vector<RoadGraph> identity = fixtures;
  identity.push_back(toy_grid());
  for (const char *name : {"city_a.osm", "city_b.osm", "crossing.osm"}) {
    RoadGraph g = parse_osm(fixture(name)).graph;
    identity.push_back(g);
    BBox b = g.bbox();
    RoadGraph c = crop(g, {b.min_x + b.width() * 0.3, b.min_y + b.height() * 0.3, b.min_x + b.width() * 0.7,
                           b.min_y + b.height() * 0.7});
    if (c.node_count() >= 2) identity.push_back(c);
  }
  double dev = 0.0;
  for (const RoadGraph &g : identity) dev = std::max(dev, std::abs(apls(g, g) - 1.0));
  o.check(dev <= 1e-9, "max |apls(g,g) - 1| " + fmt("%.1e", dev) + " over " + std::to_string(identity.size()) +
                           " fixtures incl. OSM crops");
  return o;
}

Outcome urban_oracles() {
  Outcome o;
  std::vector<RoadGraph> gs{toy_grid()};
  for (std::uint64_t s = 1; s <= 5; ++s) gs.push_back(random_connected_graph(50, 1200.0, 260.0, s));
  ConvenienceOptions exhaustive{1000000, 500.0};
  double reach_err = 0.0, conv_err = 0.0;
  std::size_t density_mismatch = 0, conv_mismatch = 0, nodes = 0;
  for (const RoadGraph &g : gs) {
    Dense m = floyd_warshall(g);
    auto fs = urban_features_all(g, 3, exhaustive);
    for (std::size_t k = 0; k < m.ids.size(); ++k, ++nodes) {
      NodeId id = m.ids[k];
      Vec2 p = g.position(id);
      for (std::size_t r = 0; r < 3; ++r) {
        std::size_t cnt = 0;
        for (NodeId other : m.ids) cnt += distance(p, g.position(other)) <= kDensityRadii[r];
        density_mismatch += fs[k].density[r] != static_cast<double>(cnt);
        reach_err = std::max(reach_err, std::abs(fs[k].reach[r] - reach_oracle(g, m, id, kReachRadii[r])));
      }
      density_mismatch += fs[k].connectivity != static_cast<double>(g.degree(id));
      double sum = 0.0;
      std::size_t n = 0;
      for (NodeId other : m.ids) {
        double ed = distance(p, g.position(other)), nd = m.d[k][m.index[other]];
        if (ed > 500.0 && std::isfinite(nd)) {
          sum += ed / nd;
          ++n;
        }
      }
      if ((n == 0) != !fs[k].convenience) ++conv_mismatch;
      else if (n > 0) conv_err = std::max(conv_err, std::abs(*fs[k].convenience - sum / n));
    }
  }
  o.check(density_mismatch == 0, "density/connectivity exact on " + std::to_string(nodes) + " nodes");
  o.check(reach_err <= 1e-6, "max reach err " + fmt("%.1e", reach_err) + " m <= 1e-6");
  o.check(conv_mismatch == 0 && conv_err <= 1e-12, "exhaustive convenience err " + fmt("%.1e", conv_err));
  double straight = 0.0;
  for (const auto &f : urban_features_all(make_line(15, 100.0), 2))
    straight = std::max(straight, f.convenience ? std::abs(*f.convenience - 1.0) : 1.0);
  o.check(straight <= 1e-12, "straight road convenience |c - 1| " + fmt("%.1e", straight) + " <= 1e-12");
  return o;
}

Outcome frechet() {
  Outcome o;
  FeatureStats grid = urban_feature_stats({toy_grid()}, 1);
  double self = std::abs(frechet_distance(grid, grid));
  std::mt19937_64 rng(4);
  Eigen::VectorXd mu = Eigen::VectorXd::Random(8);
  Eigen::MatrixXd cov = random_psd(rng, 8, 5);
  self = std::max(self, std::abs(frechet_distance(stats_of(mu, cov), stats_of(mu, cov))));
  o.check(self <= 1e-8, "identical stats " + fmt("%.1e", self) + " <= 1e-8");
  Eigen::VectorXd m0(1), m1(1);
  m0 << 0.0;
  m1 << 1.0;
  Eigen::MatrixXd s1(1, 1), s2(1, 1);
  s1 << 1.0;
  s2 << 4.0;
  double closed = frechet_distance(stats_of(m0, s1), stats_of(m1, s2));
  o.check(std::abs(closed - 2.0) <= 1e-10, "1-D closed form " + fmt("%.12f", closed) + " vs 2 (1e-10)");
  double asym = 0.0, oracle = 0.0;
  std::normal_distribution<double> n;
  for (int i = 0; i < 20; ++i) {
    int dim = 2 + i % 7;
    Eigen::VectorXd ma(dim), mb(dim);
    for (int j = 0; j < dim; ++j) {
      ma(j) = n(rng);
      mb(j) = n(rng);
    }
    FeatureStats a = stats_of(ma, random_psd(rng, dim, 1 + i % dim)), b = stats_of(mb, random_psd(rng, dim, dim));
    double ab = frechet_distance(a, b), ba = frechet_distance(b, a);
    asym = std::max(asym, std::abs(ab - ba));
    oracle = std::max(oracle, std::abs(ab - frechet_oracle(a, b)) / std::max(1.0, std::abs(ab)));
  }
  o.check(asym <= 1e-8, "symmetry " + fmt("%.1e", asym) + " <= 1e-8 on 20 PSD pairs");
  o.check(oracle <= 1e-6, "eigenvalue oracle rel err " + fmt("%.1e", oracle));
  return o;
}

Outcome diversity_checks() {
  Outcome o;
  RoadGraph g = random_connected_graph(30, 600.0, 200.0, 8);
  o.check(diversity(g, g) == 0.0, "identity " + fmt("%.3f", diversity(g, g)));
  RoadGraph far = make_grid(4, 4, 100.0, {2000, 2000});
  double d_far = diversity(make_grid(4, 4, 100.0), far);
  o.check(d_far == 100.0, "1 km apart " + fmt("%.3f", d_far));
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    RoadGraph a = random_connected_graph(20, 500.0, 180.0, 200 + s);
    RoadGraph b = perturbed(a, 300 + s);
    if (b.edge_count() == 0) b = random_connected_graph(20, 500.0, 180.0, 400 + s);
    worst = std::max(worst, std::abs(diversity(a, b) - diversity_oracle(a, b, 0.1)));
  }
  o.check(worst <= 1.0, "max deviation from 0.1 m oracle " + fmt("%.3f", worst) + " pp <= 1 on 10 pairs");
  return o;
}

Outcome generation_sweep() {
  Outcome o;
  if (!g_toy_model) {
    o.check(false, "toy model unavailable");
    return o;
  }
  RoadGraph grid = toy_grid();
  // seeds must be admissible: the limits come from the grid plus every seed
  std::vector<RoadGraph> seeds, corpus{grid};
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    seeds.push_back(random_template_seed(rng));
    corpus.push_back(seeds.back());
  }
  Limits lim = limits_from_dataset(corpus);
  std::size_t violations = 0, mismatches = 0, nodes = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto run = [&] {
      GenSession s = init_session(seeds[seed], std::nullopt, lim, seed);
      return generate(s, *g_toy_model, Budget{300, std::nullopt});
    };
    RoadGraph a = run(), b = run();
    nodes += a.node_count();
    auto v = validate_generated(a, lim);
    if (!v.empty() && std::getenv("NTG_ACCEPT_VERBOSE")) std::cerr << seed << ": " << v.front() << "\n";
    violations += v.size();
    mismatches += to_canonical_json(a) != to_canonical_json(b);
  }
  o.check(violations == 0, std::to_string(violations) + " violations of limits/planarity/invariants");
  o.check(mismatches == 0, std::to_string(mismatches) + " non-identical reruns");
  o.notes.push_back(std::to_string(nodes) + " nodes over 100 runs; max degree " + std::to_string(lim.max_degree) +
                    ", min angle " + fmt("%.1f", lim.min_angle * 180.0 / kPi) + " deg");
  return o;
}

Outcome parsing_round_trip() {
  Outcome o;
  if (!g_toy_model) {
    o.check(false, "toy model unavailable");
    return o;
  }
  auto t0 = Clock::now();
  RoadGraph grid = toy_grid();
  LikelihoodRaster r = render_likelihood(grid, grid.bbox().expanded(50.0), 1.0, 4.0, 7, 0.1);
  ParseConfig cfg;
  cfg.seed = 2;
  cfg.temperature = 0.0;
  cfg.budget.max_nodes = 2000;
  RoadGraph out = parse_with_prior(r, *g_toy_model, Limits{}, cfg);
  double score = apls(out, grid);
  double secs = seconds_since(t0);
  o.check(score >= 0.85, "APLS " + fmt("%.4f", score) + " >= 0.85");
  o.check(secs < 120.0, fmt("%.1f s", secs) + " < 120 s");
  LikelihoodRaster zero = r;
  std::fill(zero.values.begin(), zero.values.end(), 0.0f);
  RootSelection sel = select_root(zero, cfg.skeleton);
  RoadGraph z = parse_with_prior(zero, *g_toy_model, Limits{}, cfg);
  o.check(z == subdivide(sel.seed, g_toy_model->config.offset_range),
          "zero raster gives seed only (" + std::to_string(z.node_count()) + " node)");
  return o;
}

Outcome format_round_trips() {
  Outcome o;
  auto dir = scratch("formats");
  RoadGraph g = random_connected_graph(40, 800.0, 200.0, 5);
  LikelihoodRaster r = render_likelihood(g, g.bbox().expanded(20.0), 1.5, 3.0, 9, 0.1);
  save_raster(r, dir / "a.ntgr");
  std::string rb = read_text_file(dir / "a.ntgr");
  save_raster(load_raster(dir / "a.ntgr"), dir / "b.ntgr");
  o.check(rb == read_text_file(dir / "b.ntgr") && raster_bytes(raster_from_bytes(rb)) == rb, "NTGR bit-exact");
  ModelParams p = random_params(tiny_config(EncoderMode::ContinuousPolar, AttrMode::Style, true, 8, 50.0), 3);
  quantize_to_f32(p);
  save_checkpoint(p, dir / "a.ntgw");
  std::string cb = read_text_file(dir / "a.ntgw");
  save_checkpoint(load_checkpoint(dir / "a.ntgw"), dir / "b.ntgw");
  o.check(cb == read_text_file(dir / "b.ntgw") && checkpoint_bytes(checkpoint_from_bytes(cb)) == cb,
          "checkpoint bit-exact");
  std::string js = to_canonical_json(g);
  RoadGraph back = from_canonical_json(js);
  o.check(back == g && to_canonical_json(back) == js, "canonical JSON exact");
  RoadGraph cross = parse_osm(fixture("crossing.osm")).graph;
  o.check(cross.node_count() == 5 && cross.edge_count() == 4,
          "OSM crossing " + std::to_string(cross.node_count()) + " nodes / " + std::to_string(cross.edge_count()) +
              " edges");
  return o;
}

Outcome entropy() {
  Outcome o;
  TrainConfig t = toy_train_config();
  t.epochs = 1;
  t.init = "zeros";
  TrainResult r = train({{"grid", toy_grid(), std::nullopt, nullptr}}, t);
  double expect = 2.0 * std::log(201.0) + std::log(2.0);
  double err = std::abs(r.log.at(0).loss - expect);
  o.check(err <= 1e-6, "epoch-0 loss " + fmt("%.9f", r.log.at(0).loss) + " vs " + fmt("%.9f", expect) + " (1e-6)");
  return o;
}

}  // namespace

int main() {
  struct Item {
    int id;
    const char *name;
    std::function<Outcome()> run;
  };
  std::vector<Item> items{
      {1, "gradient correctness", gradients},
      {2, "toy overfit and regeneration", toy_overfit},
      {3, "APLS oracle equivalence", apls_oracle_equivalence},
      {4, "urban feature oracles", urban_oracles},
      {5, "Frechet distance", frechet},
      {6, "diversity", diversity_checks},
      {7, "generation validity sweep", generation_sweep},
      {8, "parsing round trip", parsing_round_trip},
      {9, "format round trips", format_round_trips},
      {10, "uniform-model entropy", entropy},
  };
  int failed = 0;
  for (const auto &it : items) {
    auto t0 = Clock::now();
    Outcome o;
    try {
      o = it.run();
    } catch (const std::exception &e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    std::ostringstream line;
    line << (o.pass ? "PASS" : "FAIL") << " [" << it.id << "] " << it.name << ":";
    for (std::size_t i = 0; i < o.notes.size(); ++i) line << (i ? "; " : " ") << o.notes[i];
    line << " (" << fmt("%.1f", seconds_since(t0)) << " s)";
    std::cout << line.str() << std::endl;
    failed += !o.pass;
  }
  std::cout << (failed == 0 ? "ALL PASS" : std::to_string(failed) + " FAILED") << std::endl;
  return failed == 0 ? 0 : 1;
}
