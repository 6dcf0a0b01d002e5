#include "trust/format.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "json.hpp"
#include "trust/error.hpp"

namespace trust {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::size_t kMagicSize = 8;
constexpr std::size_t kMaxDim = 0xFFFFFFFFu;

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const std::string& buf, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[offset + i])) << (8 * i);
  }
  return v;
}

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > kMaxDim) throw FormatError(std::string(what) + " exceeds u32 range");
  return static_cast<std::uint32_t>(v);
}

void write_bytes(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::string format_error(const fs::path& path, std::size_t offset, const std::string& msg) {
  return path.filename().string() + " @ byte " + std::to_string(offset) + ": " + msg;
}

void check_magic(const fs::path& path, const std::string& buf, const char* magic) {
  if (buf.size() < kMagicSize + 4) {
    throw FormatError(format_error(path, buf.size(), "file too short for header"));
  }
  if (std::memcmp(buf.data(), magic, kMagicSize) != 0) {
    throw FormatError(format_error(path, 0, std::string("bad magic, expected ") + magic));
  }
}

void check_payload_size(const fs::path& path, const std::string& buf, std::size_t header,
                        std::size_t payload) {
  const std::size_t expected = header + payload;
  if (buf.size() < expected) {
    throw FormatError(format_error(path, buf.size(),
                                   "truncated payload, expected " + std::to_string(expected) +
                                       " bytes, found " + std::to_string(buf.size())));
  }
  if (buf.size() > expected) {
    throw FormatError(format_error(path, expected,
                                   "trailing bytes after payload (" +
                                       std::to_string(buf.size() - expected) + " extra)"));
  }
}

}  // namespace

Matrix quantize_f32(const Matrix& m) {
  Matrix out = m;
  for (double& v : out.data()) v = static_cast<double>(static_cast<float>(v));
  return out;
}

void write_matrix_file(const fs::path& path, const Matrix& m) {
  require_finite(m, "write_matrix_file " + path.filename().string());
  std::string buf(kEmbeddingMagic, kMagicSize);
  put_u32(buf, checked_u32(m.rows(), "rows"));
  put_u32(buf, checked_u32(m.cols(), "cols"));
  buf.reserve(buf.size() + 4 * m.size());
  for (double v : m.data()) put_u32(buf, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  write_bytes(path, buf);
}

Matrix read_matrix_file(const fs::path& path) {
  const std::string buf = read_bytes(path);
  check_magic(path, buf, kEmbeddingMagic);
  if (buf.size() < kMagicSize + 8) throw FormatError(format_error(path, buf.size(), "file too short for header"));
  const std::size_t rows = get_u32(buf, kMagicSize);
  const std::size_t cols = get_u32(buf, kMagicSize + 4);
  const std::size_t header = kMagicSize + 8;
  check_payload_size(path, buf, header, 4 * rows * cols);
  Matrix m(rows, cols);
  for (std::size_t k = 0; k < rows * cols; ++k) {
    const std::size_t offset = header + 4 * k;
    const float f = std::bit_cast<float>(get_u32(buf, offset));
    if (!std::isfinite(f)) {
      throw FormatError(format_error(path, offset,
                                     "non-finite value at row " + std::to_string(k / cols) +
                                         ", col " + std::to_string(k % cols)));
    }
    m.data()[k] = f;
  }
  return m;
}

void write_labels_file(const fs::path& path, const std::vector<int>& labels) {
  std::string buf(kLabelsMagic, kMagicSize);
  put_u32(buf, checked_u32(labels.size(), "label count"));
  for (int y : labels) {
    if (y < 0) throw FormatError("negative class id " + std::to_string(y));
    put_u32(buf, static_cast<std::uint32_t>(y));
  }
  write_bytes(path, buf);
}

std::vector<int> read_labels_file(const fs::path& path) {
  const std::string buf = read_bytes(path);
  check_magic(path, buf, kLabelsMagic);
  const std::size_t n = get_u32(buf, kMagicSize);
  const std::size_t header = kMagicSize + 4;
  check_payload_size(path, buf, header, 4 * n);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t v = get_u32(buf, header + 4 * i);
    if (v > 0x7FFFFFFFu) throw FormatError(format_error(path, header + 4 * i, "class id out of range"));
    labels[i] = static_cast<int>(v);
  }
  return labels;
}

void write_mask_file(const fs::path& path, const std::vector<std::uint8_t>& mask) {
  std::string buf(kMaskMagic, kMagicSize);
  put_u32(buf, checked_u32(mask.size(), "mask length"));
  for (std::uint8_t b : mask) buf.push_back(static_cast<char>(b ? 1 : 0));
  write_bytes(path, buf);
}

std::vector<std::uint8_t> read_mask_file(const fs::path& path) {
  const std::string buf = read_bytes(path);
  check_magic(path, buf, kMaskMagic);
  const std::size_t n = get_u32(buf, kMagicSize);
  const std::size_t header = kMagicSize + 4;
  check_payload_size(path, buf, header, n);
  std::vector<std::uint8_t> mask(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto b = static_cast<std::uint8_t>(buf[header + i]);
    if (b > 1) throw FormatError(format_error(path, header + i, "mask byte is not 0/1"));
    mask[i] = b;
  }
  return mask;
}

void save_dataset(const EmbeddingDataset& dataset, const fs::path& dir) {
  dataset.validate();

  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());

  json files = {{"image", "image.emb"},
                {"caption", "caption.emb"},
                {"clip_img", "clip_img.emb"},
                {"clip_txt", "clip_txt.emb"}};
  write_matrix_file(dir / "image.emb", dataset.image_emb);
  write_matrix_file(dir / "caption.emb", dataset.caption_emb);
  write_matrix_file(dir / "clip_img.emb", dataset.clip_img);
  write_matrix_file(dir / "clip_txt.emb", dataset.clip_txt);
  if (dataset.labels) {
    files["labels"] = "labels.lbl";
    write_labels_file(dir / "labels.lbl", *dataset.labels);
  }
  if (dataset.corrupted_mask) {
    files["corrupted"] = "corrupted.msk";
    write_mask_file(dir / "corrupted.msk", *dataset.corrupted_mask);
  }

  json manifest = {
      {"format_version", kFormatVersion},
      {"domain", domain_name(dataset.domain)},
      {"n", dataset.size()},
      {"c", dataset.num_classes},
      {"dims",
       {{"image", dataset.image_emb.cols()},
        {"caption", dataset.caption_emb.cols()},
        {"clip", dataset.clip_img.cols()}}},
      {"files", files},
  };
  if (dataset.seed) manifest["seed"] = *dataset.seed;

  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw IoError("cannot write manifest in '" + dir.string() + "'");
  out << manifest.dump(2) << '\n';
}

EmbeddingDataset load_dataset(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) throw IoError("missing manifest: '" + manifest_path.string() + "'");

  json manifest;
  try {
    std::ifstream in(manifest_path);
    manifest = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError("manifest.json: " + std::string(e.what()));
  }

  EmbeddingDataset ds;
  std::size_t n = 0;
  std::size_t d_image = 0, d_caption = 0, d_clip = 0;
  json files;
  try {
    if (manifest.at("format_version").get<int>() != kFormatVersion) {
      throw FormatError("manifest.json: unsupported format_version " +
                        manifest.at("format_version").dump());
    }
    ds.domain = parse_domain(manifest.at("domain").get<std::string>());
    n = manifest.at("n").get<std::size_t>();
    ds.num_classes = manifest.at("c").get<std::size_t>();
    d_image = manifest.at("dims").at("image").get<std::size_t>();
    d_caption = manifest.at("dims").at("caption").get<std::size_t>();
    d_clip = manifest.at("dims").at("clip").get<std::size_t>();
    files = manifest.at("files");
    if (manifest.contains("seed")) ds.seed = manifest.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw FormatError("manifest.json: " + std::string(e.what()));
  }

  auto file_path = [&](const char* key) -> fs::path {
    if (!files.contains(key) || !files.at(key).is_string()) {
      throw FormatError(std::string("manifest.json: files.") + key + " missing");
    }
    const fs::path p = dir / files.at(key).get<std::string>();
    if (!fs::exists(p)) throw IoError("missing file '" + p.string() + "'");
    return p;
  };
  auto load_matrix = [&](const char* key, std::size_t cols) {
    const fs::path p = file_path(key);
    Matrix m = read_matrix_file(p);
    if (m.rows() != n || m.cols() != cols) {
      throw FormatError(p.filename().string() + " @ byte 8: header dims " + m.shape_string() +
                        " do not match manifest " + std::to_string(n) + "x" + std::to_string(cols));
    }
    return m;
  };

  ds.image_emb = load_matrix("image", d_image);
  ds.caption_emb = load_matrix("caption", d_caption);
  ds.clip_img = load_matrix("clip_img", d_clip);
  ds.clip_txt = load_matrix("clip_txt", d_clip);
  if (files.contains("labels")) ds.labels = read_labels_file(file_path("labels"));
  if (files.contains("corrupted")) ds.corrupted_mask = read_mask_file(file_path("corrupted"));

  ds.validate();
  return ds;
}

}  // namespace trust
