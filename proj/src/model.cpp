#include "trust/model.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"
#include "trust/error.hpp"
#include "trust/format.hpp"
#include "trust/random.hpp"

namespace trust {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::array<const char*, 6> kParamNames = {"w1", "b1", "w2", "b2", "wh", "bh"};

Matrix affine(const Matrix& x, const Matrix& w, const Matrix& b) {
  Matrix out = matmul(x, w);
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += b(0, j);
  return out;
}

}  // namespace

VisionModel VisionModel::init(std::size_t input_dim, std::size_t hidden, std::size_t feature_dim,
                              std::size_t classes, std::uint64_t seed) {
  if (input_dim == 0 || hidden == 0 || feature_dim == 0 || classes < 2) {
    throw ConfigError("vision model: dimensions must be positive and classes >= 2");
  }
  Rng rng(seed);
  auto scaled = [&rng](std::size_t fan_in, std::size_t fan_out) {
    return gaussian_matrix(rng, fan_in, fan_out, 1.0 / std::sqrt(static_cast<double>(fan_in)));
  };
  VisionModel m;
  m.w1 = scaled(input_dim, hidden);
  m.b1 = Matrix(1, hidden);
  m.w2 = scaled(hidden, feature_dim);
  m.b2 = Matrix(1, feature_dim);
  m.wh = scaled(feature_dim, classes);
  m.bh = Matrix(1, classes);
  return m;
}

Matrix VisionModel::features(const Matrix& x) const {
  if (x.cols() != input_dim()) {
    throw ShapeError("vision model expects input dim " + std::to_string(input_dim()) + ", got " +
                     std::to_string(x.cols()));
  }
  Matrix h = affine(x, w1, b1);
  for (double& v : h.data()) v = std::tanh(v);
  return affine(h, w2, b2);
}

Matrix VisionModel::logits(const Matrix& x) const { return affine(features(x), wh, bh); }

BoundModel bind(Graph& g, const VisionModel& model) {
  return {g.leaf(model.w1), g.leaf(model.b1), g.leaf(model.w2),
          g.leaf(model.b2), g.leaf(model.wh), g.leaf(model.bh)};
}

NodeId extract_features(Graph& g, const BoundModel& m, NodeId x) {
  const NodeId hidden = g.tanh(g.add(g.matmul(x, m.w1), m.b1));
  return g.add(g.matmul(hidden, m.w2), m.b2);
}

NodeId classify(Graph& g, const BoundModel& m, NodeId features) {
  return g.add(g.matmul(features, m.wh), m.bh);
}

void save_model(const VisionModel& model, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
  json files = json::object();
  const auto params = model.parameters();
  for (std::size_t k = 0; k < params.size(); ++k) {
    const std::string name = std::string(kParamNames[k]) + ".emb";
    write_matrix_file(dir / name, *params[k]);
    files[kParamNames[k]] = name;
  }
  const json manifest = {{"format_version", kFormatVersion},
                         {"kind", "vision_model"},
                         {"input_dim", model.input_dim()},
                         {"hidden", model.hidden_dim()},
                         {"feature_dim", model.feature_dim()},
                         {"classes", model.num_classes()},
                         {"files", files}};
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw IoError("cannot write model manifest in '" + dir.string() + "'");
  out << manifest.dump(2) << '\n';
}

VisionModel load_model(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw IoError("missing model manifest in '" + dir.string() + "'");
  json manifest;
  std::size_t d_in = 0, hidden = 0, p = 0, c = 0;
  try {
    manifest = json::parse(in);
    if (manifest.at("kind").get<std::string>() != "vision_model") {
      throw FormatError("model manifest: kind is not vision_model");
    }
    d_in = manifest.at("input_dim").get<std::size_t>();
    hidden = manifest.at("hidden").get<std::size_t>();
    p = manifest.at("feature_dim").get<std::size_t>();
    c = manifest.at("classes").get<std::size_t>();
  } catch (const json::exception& e) {
    throw FormatError("model manifest: " + std::string(e.what()));
  }
  const std::array<std::pair<std::size_t, std::size_t>, 6> shapes = {
      {{d_in, hidden}, {1, hidden}, {hidden, p}, {1, p}, {p, c}, {1, c}}};
  VisionModel model;
  auto params = model.parameters();
  for (std::size_t k = 0; k < params.size(); ++k) {
    std::string file;
    try {
      file = manifest.at("files").at(kParamNames[k]).get<std::string>();
    } catch (const json::exception& e) {
      throw FormatError("model manifest: " + std::string(e.what()));
    }
    *params[k] = read_matrix_file(dir / file);
    if (params[k]->rows() != shapes[k].first || params[k]->cols() != shapes[k].second) {
      throw FormatError("model parameter " + std::string(kParamNames[k]) + " has shape " +
                        params[k]->shape_string() + ", manifest implies " + std::to_string(shapes[k].first) +
                        "x" + std::to_string(shapes[k].second));
    }
  }
  return model;
}

}  // namespace trust
