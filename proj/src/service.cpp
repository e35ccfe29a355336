#include "ntg/service.hpp"

#include <httplib.h>

#include <cstdlib>
#include <random>
#include <sstream>

#include "ntg/graph_io.hpp"
#include "ntg/kv_config.hpp"
#include "ntg/sketch.hpp"

namespace ntg {

using nlohmann::json;

std::filesystem::path ServiceConfig::checkpoint_path() const {
  std::filesystem::path p(checkpoint);
  return p.is_absolute() ? p : checkpoint_dir / p;
}

ServiceConfig parse_service_config(const std::string &text, ServiceConfig c) {
  for (const auto &[k, v] : parse_kv(text)) {
    if (k == "host") c.host = v;
    else if (k == "port") c.port = kv_int(k, v);
    else if (k == "checkpoint_dir") c.checkpoint_dir = v;
    else if (k == "checkpoint") c.checkpoint = v;
    else if (k == "limits") c.limits = v;
    else if (k == "max_nodes") c.max_nodes = kv_u64(k, v);
    else if (k == "max_sessions") c.max_sessions = kv_u64(k, v);
    else if (k == "max_steps_per_request") c.max_steps_per_request = kv_int(k, v);
    else if (k == "temperature") c.temperature = kv_double(k, v);
    else if (k == "region_margin") c.region_margin = kv_double(k, v);
    else if (k == "styles") {
      c.styles.clear();
      std::stringstream ss(v);
      for (std::string item; std::getline(ss, item, ',');) {
        auto b = item.find_first_not_of(' '), e = item.find_last_not_of(' ');
        if (b != std::string::npos) c.styles.push_back(item.substr(b, e - b + 1));
      }
    } else {
      throw DataError("unknown service config key: " + k);
    }
  }
  if (c.port < 0 || c.port > 65535) throw DataError("port out of range");
  if (c.max_steps_per_request < 1) throw DataError("max_steps_per_request must be positive");
  if (!(c.temperature >= 0.0)) throw DataError("temperature must be non-negative");
  return c;
}

ServiceConfig load_service_config(const std::optional<std::filesystem::path> &fallback) {
  ServiceConfig c;
  std::optional<std::filesystem::path> path = fallback;
  if (const char *env = std::getenv("NTG_CONFIG"); env && *env) path = env;
  if (path) c = parse_service_config(read_text_file(*path));
  if (const char *dir = std::getenv("NTG_CHECKPOINT_DIR"); dir && *dir) c.checkpoint_dir = dir;
  return c;
}

namespace {

ApiResponse error(int status, const std::string &msg) { return {status, json{{"error", msg}}.dump()}; }

/// Appends raw event encodings as `"key":[...]` to a dumped JSON object.
std::string with_raw_array(const json &head, const std::string &key, const std::vector<std::string> &items) {
  std::string s = head.dump();
  s.pop_back();
  s += (head.empty() ? "\"" : ",\"") + key + "\":[";
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) s += ',';
    s += items[i];
  }
  return s + "]}";
}

Vec2 vec_of(const json &j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw DataError("point must be [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace

SessionManager::SessionManager(std::shared_ptr<const ModelParams> model, Limits limits, ServiceConfig cfg)
    : model_(std::move(model)), limits_(limits), cfg_(std::move(cfg)), salt_(std::random_device{}()) {
  if (!model_) throw std::invalid_argument("service needs a model");
}

std::shared_ptr<SessionManager::Session> SessionManager::find(const std::string &id) const {
  std::shared_lock lock(map_mu_);
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

ApiResponse SessionManager::styles() const {
  const ModelConfig &mc = model_->config;
  json arr = json::array();
  if (mc.attr_mode == AttrMode::Style) {
    for (int i = 0; i < mc.n_styles; ++i) {
      std::string name = static_cast<std::size_t>(i) < cfg_.styles.size() ? cfg_.styles[i] : "style_" + std::to_string(i);
      arr.push_back({{"id", i}, {"name", name}});
    }
  }
  return {200, json{{"styles", arr}}.dump()};
}

std::string SessionManager::summary(const Session &s) const {
  json j{{"id", s.id},
         {"status", to_string(s.gen.status)},
         {"step", s.gen.step},
         {"style", s.gen.style ? json(*s.gen.style) : json(nullptr)},
         {"seed", s.gen.seed},
         {"nodes", s.gen.graph.node_count()},
         {"edges", s.gen.graph.edge_count()},
         {"events", s.gen.events.size()},
         {"queues", s.gen.queues.size()}};
  return j.dump();
}

ApiResponse SessionManager::create(const std::string &body) {
  if (stopping_) return error(503, "service is stopping");
  json req;
  try {
    req = json::parse(body);
  } catch (const json::parse_error &e) {
    return error(400, std::string("malformed JSON: ") + e.what());
  }
  if (!req.is_object()) return error(400, "request body must be an object");
  for (const auto &[k, v] : req.items())
    if (k != "strokes" && k != "template" && k != "style" && k != "seed" && k != "temperature" && k != "region")
      return error(400, "unknown field: " + k);
  if (!req.contains("seed") || !req["seed"].is_number_unsigned()) return error(400, "seed must be a non-negative integer");
  if (req.contains("strokes") == req.contains("template")) return error(400, "give exactly one of strokes or template");

  std::optional<int> style;
  if (req.contains("style") && !req["style"].is_null()) {
    if (!req["style"].is_number_integer()) return error(400, "style must be an integer or null");
    int v = req["style"].get<int>();
    if (model_->config.attr_mode == AttrMode::Style && (v < 0 || v >= model_->config.n_styles))
      return error(400, "style out of range: " + std::to_string(v));
    style = v;
  }
  GenOptions opt;
  opt.temperature = cfg_.temperature;
  opt.region_margin = cfg_.region_margin;
  if (req.contains("temperature")) {
    if (!req["temperature"].is_number() || !(req["temperature"].get<double>() >= 0.0))
      return error(400, "temperature must be a non-negative number");
    opt.temperature = req["temperature"].get<double>();
  }

  SketchSeed seed;
  try {
    if (req.contains("region")) {
      const json &r = req["region"];
      if (!r.is_array() || r.size() != 4) throw DataError("region must be [min_x, min_y, max_x, max_y]");
      BBox b{r[0].get<double>(), r[1].get<double>(), r[2].get<double>(), r[3].get<double>()};
      if (b.empty()) throw DataError("region is empty");
      opt.region = b;
    }
    if (req.contains("strokes")) {
      const json &js = req["strokes"];
      if (!js.is_array()) throw DataError("strokes must be an array of point arrays");
      std::vector<std::vector<Vec2>> strokes;
      for (const auto &st : js) {
        if (!st.is_array()) throw DataError("stroke must be an array of [x, y] points");
        std::vector<Vec2> pts;
        for (const auto &p : st) pts.push_back(vec_of(p));
        strokes.push_back(std::move(pts));
      }
      SketchOptions so;
      so.resolution = model_->config.offset_resolution;
      so.max_edge = model_->config.offset_range;
      seed = match_template(strokes, so);
    } else {
      const json &t = req["template"];
      if (!t.is_object()) throw DataError("template must be an object");
      const NodeTemplate &nt = find_template(t.value("name", std::string("plus")));
      Vec2 c = t.contains("center") ? vec_of(t["center"]) : Vec2{};
      seed.graph = template_graph(nt, c, t.value("arm", 50.0), t.value("rotation", 0.0));
    }
  } catch (const DataError &e) {
    return error(400, e.what());
  } catch (const std::invalid_argument &e) {
    return error(400, e.what());
  } catch (const json::exception &e) {
    return error(400, e.what());
  }

  auto s = std::make_shared<Session>();
  s->created = std::chrono::system_clock::now();
  try {
    s->gen = init_session(seed.graph, style, limits_, req["seed"].get<std::uint64_t>(), opt);
  } catch (const std::exception &e) {
    return error(400, e.what());
  }
  {
    std::unique_lock lock(map_mu_);
    if (sessions_.size() >= cfg_.max_sessions) return error(503, "too many sessions");
    std::ostringstream id;
    id << std::hex << ((salt_ << 20) ^ next_id_++);
    s->id = id.str();
    sessions_[s->id] = s;
  }
  json head = json::parse(summary(*s));
  json junctions = json::array();
  for (const auto &m : seed.junctions)
    junctions.push_back({{"node", m.node}, {"template", m.name}, {"rotation", m.rotation}, {"residual", m.residual}});
  head["junctions"] = junctions;
  head["warnings"] = seed.warnings;
  return {201, head.dump()};
}

ApiResponse SessionManager::list() const {
  std::vector<std::shared_ptr<Session>> all;
  {
    std::shared_lock lock(map_mu_);
    for (const auto &[id, s] : sessions_) all.push_back(s);
  }
  json arr = json::array();
  for (const auto &s : all) {
    std::lock_guard g(s->mu);
    arr.push_back(json::parse(summary(*s)));
  }
  return {200, json{{"sessions", arr}}.dump()};
}

ApiResponse SessionManager::info(const std::string &id) const {
  auto s = find(id);
  if (!s) return error(404, "unknown session: " + id);
  std::lock_guard g(s->mu);
  return {200, summary(*s)};
}

ApiResponse SessionManager::step(const std::string &id, const std::optional<std::string> &n_text) {
  long n = 1;
  if (n_text) {
    try {
      std::size_t used = 0;
      n = std::stol(*n_text, &used);
      if (used != n_text->size()) throw std::invalid_argument("trailing");
    } catch (const std::exception &) {
      return error(400, "n must be an integer");
    }
    if (n < 1 || n > cfg_.max_steps_per_request)
      return error(400, "n must be in [1, " + std::to_string(cfg_.max_steps_per_request) + "]");
  }
  auto s = find(id);
  if (!s) return error(404, "unknown session: " + id);
  std::vector<std::string> out;
  {
    std::lock_guard g(s->mu);
    if (s->deleted) return error(404, "unknown session: " + id);
    GenSession &gs = s->gen;
    const std::size_t before = gs.events.size();
    for (long i = 0; i < n && gs.status == SessionStatus::Active; ++i) {
      if (gs.graph.node_count() >= cfg_.max_nodes) {
        gs.status = SessionStatus::BudgetReached;
        break;
      }
      if (gs.exhausted()) break;
      ntg::step(gs, *model_);
    }
    if (gs.status == SessionStatus::Active && gs.exhausted()) gs.status = SessionStatus::Exhausted;
    for (std::size_t i = before; i < gs.events.size(); ++i) out.push_back(to_json_string(gs.events[i]));
    std::string body = with_raw_array(json::parse(summary(*s)), "new_events", out);
    s->cv.notify_all();
    return {200, body};
  }
}

ApiResponse SessionManager::graph(const std::string &id, const std::string &format) const {
  auto s = find(id);
  if (!s) return error(404, "unknown session: " + id);
  if (format != "json" && format != "geojson") return error(400, "format must be json or geojson");
  std::lock_guard g(s->mu);
  if (format == "geojson") return {200, to_geojson(s->gen.graph), "application/geo+json"};
  return {200, to_canonical_json(s->gen.graph)};
}

ApiResponse SessionManager::events(const std::string &id, std::size_t from) const {
  auto s = find(id);
  if (!s) return error(404, "unknown session: " + id);
  std::lock_guard g(s->mu);
  std::vector<std::string> out;
  for (std::size_t i = from; i < s->gen.events.size(); ++i) out.push_back(to_json_string(s->gen.events[i]));
  json head{{"id", id}, {"status", to_string(s->gen.status)}, {"next", s->gen.events.size()}};
  return {200, with_raw_array(head, "events", out)};
}

ApiResponse SessionManager::remove(const std::string &id) {
  std::shared_ptr<Session> s;
  {
    std::unique_lock lock(map_mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) return error(404, "unknown session: " + id);
    s = it->second;
    sessions_.erase(it);
  }
  {
    std::lock_guard g(s->mu);
    s->deleted = true;
  }
  s->cv.notify_all();
  return {200, json{{"deleted", id}}.dump()};
}

EventBatch SessionManager::wait_events(const std::string &id, std::size_t from,
                                       std::chrono::milliseconds timeout) const {
  EventBatch b;
  b.next = from;
  auto s = find(id);
  if (!s) {
    b.gone = true;
    return b;
  }
  std::unique_lock lock(s->mu);
  s->cv.wait_for(lock, timeout, [&] {
    return s->deleted || stopping_ || s->gen.events.size() > from || s->gen.status != SessionStatus::Active;
  });
  if (s->deleted) {
    b.gone = true;
    return b;
  }
  for (std::size_t i = from; i < s->gen.events.size(); ++i) b.events.push_back(to_json_string(s->gen.events[i]));
  b.next = s->gen.events.size();
  b.terminal = s->gen.status != SessionStatus::Active;
  return b;
}

void SessionManager::shutdown() {
  stopping_ = true;
  std::vector<std::shared_ptr<Session>> all;
  {
    std::shared_lock lock(map_mu_);
    for (const auto &[id, s] : sessions_) all.push_back(s);
  }
  for (auto &s : all) {
    std::lock_guard g(s->mu);
    s->cv.notify_all();
  }
}

namespace {

void reply(httplib::Response &res, const ApiResponse &r) {
  res.status = r.status;
  res.set_content(r.body, r.content_type);
}

std::optional<std::string> param(const httplib::Request &req, const char *name) {
  if (!req.has_param(name)) return std::nullopt;
  return req.get_param_value(name);
}

std::size_t cursor_param(const httplib::Request &req) {
  auto v = param(req, "from");
  if (!v) return 0;
  std::size_t used = 0;
  unsigned long long n = std::stoull(*v, &used);
  if (used != v->size()) throw std::invalid_argument("bad cursor");
  return static_cast<std::size_t>(n);
}

}  // namespace

Service::Service(SessionManager &m) : manager_(m), server_(std::make_unique<httplib::Server>()) {
  auto &srv = *server_;
  SessionManager *mgr = &manager_;
  srv.Get("/v1/health", [](const httplib::Request &, httplib::Response &res) {
    res.set_content(R"({"status":"ok"})", "application/json");
  });
  srv.Get("/v1/styles", [mgr](const httplib::Request &, httplib::Response &res) { reply(res, mgr->styles()); });
  srv.Get("/v1/sessions", [mgr](const httplib::Request &, httplib::Response &res) { reply(res, mgr->list()); });
  srv.Post("/v1/sessions", [mgr](const httplib::Request &req, httplib::Response &res) {
    reply(res, mgr->create(req.body));
  });
  srv.Get(R"(/v1/sessions/([0-9a-f]+))", [mgr](const httplib::Request &req, httplib::Response &res) {
    reply(res, mgr->info(req.matches[1]));
  });
  srv.Delete(R"(/v1/sessions/([0-9a-f]+))", [mgr](const httplib::Request &req, httplib::Response &res) {
    reply(res, mgr->remove(req.matches[1]));
  });
  srv.Post(R"(/v1/sessions/([0-9a-f]+)/step)", [mgr](const httplib::Request &req, httplib::Response &res) {
    reply(res, mgr->step(req.matches[1], param(req, "n")));
  });
  srv.Get(R"(/v1/sessions/([0-9a-f]+)/graph)", [mgr](const httplib::Request &req, httplib::Response &res) {
    reply(res, mgr->graph(req.matches[1], param(req, "format").value_or("json")));
  });
  srv.Get(R"(/v1/sessions/([0-9a-f]+)/events)", [mgr](const httplib::Request &req, httplib::Response &res) {
    try {
      reply(res, mgr->events(req.matches[1], cursor_param(req)));
    } catch (const std::exception &) {
      reply(res, error(400, "from must be a non-negative integer"));
    }
  });
  srv.Get(R"(/v1/sessions/([0-9a-f]+)/stream)", [mgr](const httplib::Request &req, httplib::Response &res) {
    std::string id = req.matches[1];
    std::size_t from = 0;
    try {
      from = cursor_param(req);
    } catch (const std::exception &) {
      reply(res, error(400, "from must be a non-negative integer"));
      return;
    }
    auto probe = mgr->info(id);
    if (probe.status != 200) {
      reply(res, probe);
      return;
    }
    auto cursor = std::make_shared<std::size_t>(from);
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider("text/event-stream", [mgr, id, cursor](std::size_t, httplib::DataSink &sink) {
      EventBatch b = mgr->wait_events(id, *cursor, std::chrono::milliseconds(200));
      for (const auto &e : b.events) {
        std::string msg = "data: " + e + "\n\n";
        if (!sink.write(msg.data(), msg.size())) return false;
      }
      *cursor = b.next;
      if (b.gone || b.terminal || mgr->stopping()) sink.done();
      return true;
    });
  });
  srv.set_error_handler([](const httplib::Request &, httplib::Response &res) {
    if (res.body.empty()) res.set_content(json{{"error", "not found"}}.dump(), "application/json");
  });
  srv.set_exception_handler([](const httplib::Request &, httplib::Response &res, std::exception_ptr ep) {
    std::string msg = "internal error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception &e) {
      msg = e.what();
    } catch (...) {
    }
    res.status = 500;
    res.set_content(json{{"error", msg}}.dump(), "application/json");
  });
}

Service::~Service() { stop(); }

int Service::bind(const std::string &host, int port) {
  if (port == 0) return server_->bind_to_any_port(host);
  return server_->bind_to_port(host, port) ? port : -1;
}

bool Service::run() { return server_->listen_after_bind(); }

void Service::stop() {
  manager_.shutdown();
  if (server_->is_running()) server_->stop();
}

void Service::wait_until_ready() const { server_->wait_until_ready(); }

}  // namespace ntg
