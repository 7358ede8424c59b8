#include "gaan/container.hpp"

#include <json.hpp>

#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace gaan::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void put_u64(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  os.write(b, 8);
}

std::uint64_t get_u64(const unsigned char* b) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

std::ofstream open_out(const fs::path& path, ElementType type, std::uint64_t count) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot write " + path.string());
  os.write(kArrayMagic, sizeof(kArrayMagic));
  const char t = static_cast<char>(type);
  os.write(&t, 1);
  put_u64(os, count);
  return os;
}

struct RawArray {
  ElementType type;
  std::uint64_t count;
  std::vector<unsigned char> payload;
};

std::size_t element_size(ElementType t) {
  switch (t) {
    case ElementType::u64: return 8;
    case ElementType::f32: return 4;
    case ElementType::f64: return 8;
    case ElementType::u8: return 1;
  }
  return 0;
}

RawArray read_raw(const fs::path& path, bool header_only = false) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string());
  char magic[8];
  unsigned char head[9];
  if (!is.read(magic, 8) || std::memcmp(magic, kArrayMagic, 8) != 0) {
    throw FormatError(path.string() + ": bad array magic (expected GAANARR)");
  }
  if (!is.read(reinterpret_cast<char*>(head), 9)) throw FormatError(path.string() + ": truncated header");
  if (head[0] > 3) throw FormatError(path.string() + ": unknown element type " + std::to_string(head[0]));
  RawArray raw{static_cast<ElementType>(head[0]), get_u64(head + 1), {}};
  if (header_only) return raw;
  const std::uint64_t bytes = raw.count * element_size(raw.type);
  raw.payload.resize(bytes);
  if (bytes && !is.read(reinterpret_cast<char*>(raw.payload.data()), static_cast<std::streamsize>(bytes))) {
    throw FormatError(path.string() + ": truncated payload");
  }
  if (is.peek() != std::char_traits<char>::eof()) throw FormatError(path.string() + ": trailing bytes");
  return raw;
}

json read_meta(const fs::path& dir) {
  std::ifstream is(dir / "meta.json");
  if (!is) throw FormatError("missing meta.json in " + dir.string());
  json meta;
  try {
    is >> meta;
  } catch (const json::exception& e) {
    throw FormatError("malformed header: " + std::string(e.what()));
  }
  if (!meta.is_object()) throw FormatError("malformed header: meta.json is not an object");
  if (meta.value("format_version", 0) != kFormatVersion) throw FormatError("malformed header: unsupported format_version");
  return meta;
}

template <typename T>
T meta_get(const json& meta, const char* key) {
  if (!meta.contains(key)) throw FormatError(std::string("malformed header: missing '") + key + "'");
  try {
    return meta.at(key).get<T>();
  } catch (const json::exception&) {
    throw FormatError(std::string("malformed header: bad type for '") + key + "'");
  }
}

void write_meta(const fs::path& dir, const json& meta) {
  std::ofstream os(dir / "meta.json", std::ios::trunc);
  if (!os) throw FormatError("cannot write meta.json in " + dir.string());
  os << meta.dump(2) << "\n";
}

Matrix to_matrix(const std::vector<double>& flat, Index rows, Index cols, const std::string& what) {
  if (static_cast<Index>(flat.size()) != rows * cols) {
    throw FormatError(what + ": expected " + std::to_string(rows * cols) + " values, found " +
                      std::to_string(flat.size()));
  }
  Matrix m(rows, cols);
  std::copy(flat.begin(), flat.end(), m.data());
  if (!m.allFinite()) throw FormatError(what + ": non-finite value");
  return m;
}

std::span<const double> as_span(const Matrix& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }

std::pair<std::vector<Index>, std::vector<NodeId>> read_csr(const fs::path& dir) {
  auto ptr = read_array_u64(dir / "indptr.bin");
  auto idx = read_array_u64(dir / "indices.bin");
  return {std::vector<Index>(ptr.begin(), ptr.end()), std::vector<NodeId>(idx.begin(), idx.end())};
}

void write_csr(const fs::path& dir, const Graph& g) {
  std::vector<std::uint64_t> ptr(g.indptr().begin(), g.indptr().end());
  std::vector<std::uint64_t> idx(g.indices().begin(), g.indices().end());
  write_array(dir / "indptr.bin", ptr);
  write_array(dir / "indices.bin", idx);
}

Graph graph_from_meta(const fs::path& dir, const json& meta) {
  const auto n = meta_get<Index>(meta, "num_nodes");
  const bool directed = meta_get<bool>(meta, "directed");
  auto [ptr, idx] = read_csr(dir);
  // an indptr larger than the header allows would otherwise pass silently
  if (ptr.size() != static_cast<std::size_t>(n) + 1) throw FormatError("malformed header: indptr length disagrees with num_nodes");
  Graph g = Graph::canonicalize(n, std::move(ptr), std::move(idx), directed);
  if (!directed && !g.is_symmetric()) throw FormatError("graph marked undirected has asymmetric adjacency");
  return g;
}

}  // namespace

void write_array(const fs::path& path, std::span<const std::uint64_t> data) {
  auto os = open_out(path, ElementType::u64, data.size());
  for (auto v : data) put_u64(os, v);
}

void write_array(const fs::path& path, std::span<const double> data) {
  auto os = open_out(path, ElementType::f64, data.size());
  for (double v : data) put_u64(os, std::bit_cast<std::uint64_t>(v));
}

void write_array(const fs::path& path, std::span<const std::uint8_t> data) {
  auto os = open_out(path, ElementType::u8, data.size());
  os.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
}

ElementType peek_array_type(const fs::path& path) { return read_raw(path, true).type; }

std::vector<std::uint64_t> read_array_u64(const fs::path& path) {
  auto raw = read_raw(path);
  if (raw.type != ElementType::u64) throw FormatError(path.string() + ": expected u64 elements");
  std::vector<std::uint64_t> out(raw.count);
  for (std::uint64_t i = 0; i < raw.count; ++i) out[i] = get_u64(raw.payload.data() + 8 * i);
  return out;
}

std::vector<double> read_array_real(const fs::path& path) {
  auto raw = read_raw(path);
  std::vector<double> out(raw.count);
  if (raw.type == ElementType::f64) {
    for (std::uint64_t i = 0; i < raw.count; ++i) out[i] = std::bit_cast<double>(get_u64(raw.payload.data() + 8 * i));
  } else if (raw.type == ElementType::f32) {
    for (std::uint64_t i = 0; i < raw.count; ++i) {
      const unsigned char* b = raw.payload.data() + 4 * i;
      const std::uint32_t bits = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
                                 (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
      out[i] = static_cast<double>(std::bit_cast<float>(bits));
    }
  } else {
    throw FormatError(path.string() + ": expected real elements");
  }
  return out;
}

std::vector<std::uint8_t> read_array_u8(const fs::path& path) {
  auto raw = read_raw(path);
  if (raw.type != ElementType::u8) throw FormatError(path.string() + ": expected u8 elements");
  return std::vector<std::uint8_t>(raw.payload.begin(), raw.payload.end());
}

NodeDataset load_graph(const fs::path& dir) {
  const json meta = read_meta(dir);
  NodeDataset out;
  out.graph = graph_from_meta(dir, meta);
  const Index n = out.graph.num_nodes();
  const auto fdim = meta_get<Index>(meta, "feature_dims");
  if (fdim < 0) throw FormatError("malformed header: negative feature_dims");
  out.features = fdim > 0 ? to_matrix(read_array_real(dir / "features.bin"), n, fdim, "features.bin") : Matrix(n, 0);

  const auto kind = meta.value("label_kind", std::string("none"));
  if (kind != "none") {
    LabelSet labels;
    labels.num_classes = meta_get<Index>(meta, "num_classes");
    if (kind == "single") {
      labels.kind = LabelKind::single;
      auto raw = read_array_u64(dir / "labels.bin");
      if (static_cast<Index>(raw.size()) != n) throw FormatError("labels.bin: expected one label per node");
      labels.classes.assign(raw.begin(), raw.end());
      for (std::size_t i = 0; i < raw.size(); ++i) {
        if (raw[i] >= static_cast<std::uint64_t>(labels.num_classes)) {
          throw FormatError("label/class mismatch: label " + std::to_string(raw[i]) + " with " +
                            std::to_string(labels.num_classes) + " classes");
        }
      }
    } else if (kind == "multi") {
      labels.kind = LabelKind::multi;
      auto raw = read_array_u8(dir / "labels.bin");
      if (static_cast<Index>(raw.size()) != n * labels.num_classes) throw FormatError("labels.bin: indicator count mismatch");
      labels.indicators.resize(n, labels.num_classes);
      for (std::size_t i = 0; i < raw.size(); ++i) labels.indicators.data()[i] = raw[i];
    } else {
      throw FormatError("malformed header: label_kind '" + kind + "'");
    }
    labels.validate();
    out.labels = std::move(labels);
  }
  if (fs::exists(dir / "split.bin")) {
    auto split = read_array_u8(dir / "split.bin");
    if (static_cast<Index>(split.size()) != n) throw FormatError("split.bin: expected one tag per node");
    for (auto s : split) {
      if (s > 2) throw FormatError("split.bin: tag must be 0, 1 or 2");
    }
    out.split = std::move(split);
  }
  return out;
}

void save_graph(const fs::path& dir, const NodeDataset& data) {
  fs::create_directories(dir);
  const Graph& g = data.graph;
  if (data.features.rows() != g.num_nodes()) throw ShapeError("features must have one row per node");
  json meta = {{"format_version", kFormatVersion},
               {"num_nodes", g.num_nodes()},
               {"directed", g.directed()},
               {"feature_dims", data.features.cols()},
               {"label_kind", "none"},
               {"num_classes", 0}};
  write_csr(dir, g);
  if (data.features.cols() > 0) write_array(dir / "features.bin", as_span(data.features));
  if (data.labels) {
    const auto& l = *data.labels;
    l.validate();
    meta["num_classes"] = l.num_classes;
    if (l.kind == LabelKind::single) {
      meta["label_kind"] = "single";
      std::vector<std::uint64_t> raw(l.classes.begin(), l.classes.end());
      write_array(dir / "labels.bin", raw);
    } else {
      meta["label_kind"] = "multi";
      std::vector<std::uint8_t> raw(static_cast<std::size_t>(l.indicators.size()));
      for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = l.indicators.data()[i] != 0.0 ? 1 : 0;
      write_array(dir / "labels.bin", raw);
    }
  }
  if (data.split) write_array(dir / "split.bin", std::span<const std::uint8_t>(*data.split));
  write_meta(dir, meta);
}

SequenceDataset load_sequence_dataset(const fs::path& dir) {
  const json meta = read_meta(dir);
  SequenceDataset out;
  out.graph = graph_from_meta(dir, meta);
  const auto t = meta_get<Index>(meta, "num_timestamps");
  const auto d = meta_get<Index>(meta, "signal_dims");
  out.window_in = meta_get<Index>(meta, "window_in");
  out.window_out = meta_get<Index>(meta, "window_out");
  out.train_fraction = meta_get<double>(meta, "train_fraction");
  out.val_fraction = meta_get<double>(meta, "val_fraction");
  out.test_fraction = meta_get<double>(meta, "test_fraction");
  const Index n = out.graph.num_nodes();
  const Matrix flat = to_matrix(read_array_real(dir / "signal.bin"), t, n * d, "signal.bin");
  out.frames.reserve(static_cast<std::size_t>(t));
  for (Index i = 0; i < t; ++i) {
    Matrix f(n, d);
    std::copy(flat.row(i).data(), flat.row(i).data() + n * d, f.data());
    out.frames.push_back(std::move(f));
  }
  out.validate();
  return out;
}

void save_sequence_dataset(const fs::path& dir, const SequenceDataset& data) {
  data.validate();
  fs::create_directories(dir);
  const Index n = data.graph.num_nodes();
  const Index d = data.signal_dim();
  json meta = {{"format_version", kFormatVersion},
               {"num_nodes", n},
               {"directed", data.graph.directed()},
               {"feature_dims", 0},
               {"label_kind", "none"},
               {"num_classes", 0},
               {"num_timestamps", data.num_timestamps()},
               {"signal_dims", d},
               {"window_in", data.window_in},
               {"window_out", data.window_out},
               {"train_fraction", data.train_fraction},
               {"val_fraction", data.val_fraction},
               {"test_fraction", data.test_fraction}};
  write_csr(dir, data.graph);
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(data.num_timestamps() * n * d));
  for (const auto& f : data.frames) flat.insert(flat.end(), f.data(), f.data() + f.size());
  write_array(dir / "signal.bin", std::span<const double>(flat));
  write_meta(dir, meta);
}

Graph read_edge_list(const fs::path& path, Index num_nodes, bool directed) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open " + path.string());
  std::vector<std::pair<NodeId, NodeId>> arcs;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    NodeId u, v;
    if (!(ls >> u)) continue;
    if (!(ls >> v)) throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected 'src dst'");
    arcs.emplace_back(u, v);
  }
  Graph g = Graph::from_edges(num_nodes, arcs, true);
  return directed ? g : to_undirected(g);
}

Matrix read_feature_csv(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw FormatError(path.string() + ": bad number '" + cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size()) throw FormatError(path.string() + ": ragged rows");
    rows.push_back(std::move(row));
  }
  Matrix m(static_cast<Index>(rows.size()), rows.empty() ? 0 : static_cast<Index>(rows.front().size()));
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) m(r, c) = rows[r][c];
  }
  if (!m.allFinite()) throw FormatError(path.string() + ": non-finite feature value");
  return m;
}

namespace {

std::string tensor_file(std::size_t i, const std::string& name) {
  std::string clean;
  for (char c : name) clean += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-') ? c : '_';
  std::ostringstream os;
  os << "t" << std::setw(3) << std::setfill('0') << i << "_" << clean << ".bin";
  return os.str();
}

}  // namespace

void save_checkpoint(const fs::path& dir, const ParamStore& params) {
  fs::create_directories(dir);
  json tensors = json::array();
  std::size_t i = 0;
  for (const auto& [name, t] : params.tensors()) {
    const std::string file = tensor_file(i++, name);
    write_array(dir / file, as_span(t.value));
    tensors.push_back({{"name", name}, {"rows", t.value.rows()}, {"cols", t.value.cols()}, {"dtype", "f64"}, {"file", file}});
  }
  json manifest = {{"format_version", kFormatVersion}, {"step", params.step()}, {"tensors", tensors}};
  std::ofstream os(dir / "manifest.json", std::ios::trunc);
  if (!os) throw FormatError("cannot write manifest in " + dir.string());
  os << manifest.dump(2) << "\n";
}

void load_checkpoint(const fs::path& dir, ParamStore& params) {
  std::ifstream is(dir / "manifest.json");
  if (!is) throw FormatError("missing manifest.json in " + dir.string());
  json manifest;
  try {
    is >> manifest;
  } catch (const json::exception& e) {
    throw FormatError("malformed manifest: " + std::string(e.what()));
  }
  if (manifest.value("format_version", 0) != kFormatVersion) throw FormatError("unsupported manifest version");
  const auto& list = manifest.at("tensors");
  if (list.size() != params.tensors().size()) {
    throw FormatError("manifest lists " + std::to_string(list.size()) + " tensors, model has " +
                      std::to_string(params.tensors().size()));
  }
  for (const auto& entry : list) {
    const auto name = entry.at("name").get<std::string>();
    if (!params.contains(name)) throw FormatError("manifest tensor '" + name + "' not in model");
    auto& dst = params.value(name);
    const auto rows = entry.at("rows").get<Index>();
    const auto cols = entry.at("cols").get<Index>();
    if (rows != dst.rows() || cols != dst.cols()) throw FormatError("shape mismatch for tensor '" + name + "'");
    dst = to_matrix(read_array_real(dir / entry.at("file").get<std::string>()), rows, cols, name);
  }
  params.set_step(manifest.value("step", std::int64_t{0}));
}

}  // namespace gaan::io
