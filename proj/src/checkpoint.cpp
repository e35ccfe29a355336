#include "ntg/checkpoint.hpp"

#include <map>

#include "ntg/binary_io.hpp"
#include "ntg/graph_io.hpp"

namespace ntg {

std::string checkpoint_bytes(const ModelParams &p) {
  std::string out = "NTGW";
  binio::put<std::uint32_t>(out, kCheckpointVersion);
  std::string cfg = to_json(p.config).dump();
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.size()));
  out += cfg;
  std::uint32_t count = 0;
  p.tensors.visit([&](const char *, const MatrixXd &) { ++count; });
  binio::put<std::uint32_t>(out, count);
  p.tensors.visit([&](const char *name, const MatrixXd &m) {
    std::string n(name);
    binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(n.size()));
    out += n;
    if (m.cols() == 1) {
      binio::put<std::uint32_t>(out, 1);
      binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(m.rows()));
    } else {
      binio::put<std::uint32_t>(out, 2);
      binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(m.rows()));
      binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(m.cols()));
    }
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) binio::put<float>(out, static_cast<float>(m(r, c)));
  });
  return out;
}

ModelParams checkpoint_from_bytes(const std::string &bytes) {
  binio::Reader in(bytes, "checkpoint");
  if (in.bytes(4) != "NTGW") throw DataError("checkpoint: bad magic");
  auto version = in.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw DataError("checkpoint: unsupported version " + std::to_string(version));
  auto cfg_len = in.get<std::uint32_t>();
  ModelConfig cfg;
  try {
    cfg = model_config_from_json(nlohmann::json::parse(in.bytes(cfg_len)));
  } catch (const nlohmann::json::exception &e) {
    throw DataError(std::string("checkpoint: bad config block: ") + e.what());
  } catch (const std::invalid_argument &e) {
    throw DataError(std::string("checkpoint: bad config block: ") + e.what());
  }
  ModelParams p = ModelParams::zeros(cfg);
  std::map<std::string, MatrixXd *> slots;
  p.tensors.visit([&](const char *name, MatrixXd &m) { slots[name] = &m; });

  auto count = in.get<std::uint32_t>();
  if (count != slots.size()) throw DataError("checkpoint: tensor count does not match config");
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = in.bytes(in.get<std::uint32_t>());
    auto it = slots.find(name);
    if (it == slots.end()) throw DataError("checkpoint: unexpected tensor '" + name + "'");
    MatrixXd &m = *it->second;
    auto rank = in.get<std::uint32_t>();
    Eigen::Index rows = 0, cols = 1;
    if (rank == 1) {
      rows = in.get<std::uint32_t>();
    } else if (rank == 2) {
      rows = in.get<std::uint32_t>();
      cols = in.get<std::uint32_t>();
    } else {
      throw DataError("checkpoint: unsupported rank for '" + name + "'");
    }
    if (rows != m.rows() || cols != m.cols())
      throw DataError("checkpoint: shape mismatch for '" + name + "'");
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = in.get<float>();
    slots.erase(it);
  }
  if (in.remaining() != 0) throw DataError("checkpoint: trailing bytes");
  if (!p.tensors.all_finite()) throw DataError("checkpoint: non-finite parameter");
  return p;
}

void save_checkpoint(const ModelParams &p, const std::filesystem::path &path) {
  write_text_file(path, checkpoint_bytes(p));
}

ModelParams load_checkpoint(const std::filesystem::path &path) {
  return checkpoint_from_bytes(read_text_file(path));
}

void quantize_to_f32(ModelParams &p) {
  p.tensors.visit([](const char *, MatrixXd &m) {
    m = m.unaryExpr([](double v) { return static_cast<double>(static_cast<float>(v)); });
  });
}

}  // namespace ntg
