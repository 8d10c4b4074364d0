#include "hyconex/persist.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <utility>
#include <vector>

#include "hyconex/digest.hpp"
#include "hyconex/error.hpp"

namespace hcx {

namespace {

static_assert(std::endian::native == std::endian::little, "bundle payload assumes a little-endian host");

struct Section {
  std::string name;
  Matrix value;
};

std::vector<Section> sections_of(const Model& m) {
  std::vector<Section> s;
  s.push_back({"prep.offset", m.prep.means()});
  s.push_back({"prep.scale", m.prep.stds()});
  for (std::size_t i = 0; i < m.net.params().size(); ++i) s.push_back({"net." + m.net.params().name(i), m.net.params()[i]});
  for (std::size_t i = 0; i < m.net.buffers().size(); ++i) {
    s.push_back({"net." + m.net.buffers().name(i), m.net.buffers()[i]});
  }
  for (std::size_t i = 0; i < m.flow.params().size(); ++i) s.push_back({"flow." + m.flow.params().name(i), m.flow.params()[i]});
  s.push_back({"thresholds.global", Matrix::Constant(1, 1, m.thresholds.global)});
  Matrix per_class(1, static_cast<Eigen::Index>(m.thresholds.per_class.size()));
  for (std::size_t c = 0; c < m.thresholds.per_class.size(); ++c) per_class(0, static_cast<Eigen::Index>(c)) = m.thresholds.per_class[c];
  s.push_back({"thresholds.per_class", std::move(per_class)});
  for (std::size_t c = 0; c < m.clusters.centers.size(); ++c) {
    s.push_back({"clusters." + std::to_string(c), m.clusters.centers[c]});
  }
  s.push_back({"reference", m.reference});
  return s;
}

nlohmann::json net_config_json(const HyperNetConfig& c) {
  return {{"input_dim", c.input_dim}, {"num_classes", c.num_classes}, {"hidden", c.hidden},
          {"blocks", c.blocks},       {"dropout", c.dropout},         {"bn_momentum", c.bn_momentum},
          {"bn_eps", c.bn_eps},       {"head_init_scale", c.head_init_scale}};
}

HyperNetConfig net_config_from(const nlohmann::json& j) {
  HyperNetConfig c;
  c.input_dim = j.at("input_dim").get<int>();
  c.num_classes = j.at("num_classes").get<int>();
  c.hidden = j.at("hidden").get<int>();
  c.blocks = j.at("blocks").get<int>();
  c.dropout = j.at("dropout").get<double>();
  c.bn_momentum = j.at("bn_momentum").get<double>();
  c.bn_eps = j.at("bn_eps").get<double>();
  c.head_init_scale = j.at("head_init_scale").get<double>();
  return c;
}

nlohmann::json flow_config_json(const FlowConfig& c) {
  return {{"dim", c.dim},       {"num_classes", c.num_classes}, {"hidden", c.hidden},
          {"layers", c.layers}, {"blocks", c.blocks},           {"log_scale_bound", c.log_scale_bound}};
}

FlowConfig flow_config_from(const nlohmann::json& j) {
  FlowConfig c;
  c.dim = j.at("dim").get<int>();
  c.num_classes = j.at("num_classes").get<int>();
  c.hidden = j.at("hidden").get<int>();
  c.layers = j.at("layers").get<int>();
  c.blocks = j.at("blocks").get<int>();
  c.log_scale_bound = j.at("log_scale_bound").get<double>();
  return c;
}

// Header without the hash, plus the payload bytes.
std::pair<nlohmann::json, std::string> encode(const ModelBundle& b) {
  const Model& m = b.model;
  const auto sections = sections_of(m);
  nlohmann::json table = nlohmann::json::array();
  std::string payload;
  for (const auto& s : sections) {
    table.push_back({{"name", s.name}, {"rows", s.value.rows()}, {"cols", s.value.cols()}});
    const std::size_t n = static_cast<std::size_t>(s.value.size()) * sizeof(double);
    const std::size_t at = payload.size();
    payload.resize(at + n);
    if (n > 0) std::memcpy(payload.data() + at, s.value.data(), n);
  }
  nlohmann::json header{{"format", "hyconex-bundle"},
                        {"version", kBundleVersion},
                        {"schema", m.schema()},
                        {"config", m.config},
                        {"noise_sigma", m.prep.noise_sigma()},
                        {"hypernet", net_config_json(m.net.config())},
                        {"flow", flow_config_json(m.flow.config())},
                        {"clusters", m.clusters.centers.size()},
                        {"metadata", b.metadata},
                        {"sections", std::move(table)},
                        {"payload_bytes", payload.size()}};
  return {std::move(header), std::move(payload)};
}

std::string digest_of(const nlohmann::json& header_without_hash, const std::string& payload) {
  std::string bytes = header_without_hash.dump();
  bytes.push_back('\n');
  bytes += payload;
  return sha256_hex(bytes);
}

void assign(ParamSet& target, const std::string& prefix, std::map<std::string, Matrix>& loaded) {
  for (std::size_t i = 0; i < target.size(); ++i) {
    auto it = loaded.find(prefix + target.name(i));
    if (it == loaded.end()) throw IoError("bundle is missing section '" + prefix + target.name(i) + "'");
    if (it->second.rows() != target[i].rows() || it->second.cols() != target[i].cols()) {
      throw IoError("bundle section '" + it->first + "' has the wrong shape");
    }
    target[i] = std::move(it->second);
    loaded.erase(it);
  }
}

Matrix take(std::map<std::string, Matrix>& loaded, const std::string& name) {
  auto it = loaded.find(name);
  if (it == loaded.end()) throw IoError("bundle is missing section '" + name + "'");
  Matrix m = std::move(it->second);
  loaded.erase(it);
  return m;
}

}  // namespace

std::string hash_model(const ModelBundle& bundle) {
  const auto [header, payload] = encode(bundle);
  return digest_of(header, payload);
}

nlohmann::json save_bundle(const ModelBundle& bundle, const std::filesystem::path& path) {
  auto [header, payload] = encode(bundle);
  header["hash"] = digest_of(header, payload);
  const std::string text = header.dump(1);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << kBundleMagic << ' ' << text.size() << '\n' << text << payload;
  out.flush();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
  return header;
}

ModelBundle load_bundle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open bundle '" + path.string() + "'");
  std::string first;
  if (!std::getline(in, first)) throw IoError("bundle '" + path.string() + "' is empty");
  std::istringstream line(first);
  std::string magic;
  std::size_t header_len = 0;
  if (!(line >> magic >> header_len) || magic != kBundleMagic) {
    throw IoError("'" + path.string() + "' is not a model bundle");
  }
  std::string text(header_len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(header_len))) throw IoError("bundle header is truncated");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bundle header is not valid JSON: ") + e.what());
  }
  if (!header.contains("version") || !header["version"].is_number_integer()) {
    throw IoError("bundle header has no version");
  }
  if (header["version"].get<int>() != kBundleVersion) {
    throw IoError("unsupported bundle version " + header["version"].dump() + " (expected " +
                  std::to_string(kBundleVersion) + ")");
  }
  ModelBundle b;
  try {
    const std::string stored_hash = header.at("hash").get<std::string>();
    const auto payload_bytes = header.at("payload_bytes").get<std::size_t>();
    std::string payload(payload_bytes, '\0');
    if (!in.read(payload.data(), static_cast<std::streamsize>(payload_bytes))) throw IoError("bundle payload is truncated");
    if (in.peek() != std::char_traits<char>::eof()) throw IoError("bundle has trailing bytes after the payload");
    nlohmann::json unsigned_header = header;
    unsigned_header.erase("hash");
    if (digest_of(unsigned_header, payload) != stored_hash) throw IoError("bundle hash mismatch");

    std::map<std::string, Matrix> loaded;
    std::size_t offset = 0;
    for (const auto& s : header.at("sections")) {
      const auto rows = s.at("rows").get<Eigen::Index>();
      const auto cols = s.at("cols").get<Eigen::Index>();
      const std::size_t n = static_cast<std::size_t>(rows * cols) * sizeof(double);
      if (offset + n > payload.size()) throw IoError("bundle section table exceeds the payload");
      Matrix m(rows, cols);
      if (n > 0) std::memcpy(m.data(), payload.data() + offset, n);
      offset += n;
      loaded.emplace(s.at("name").get<std::string>(), std::move(m));
    }
    if (offset != payload.size()) throw IoError("bundle payload size does not match its section table");

    Model& m = b.model;
    const Schema schema = header.at("schema").get<Schema>();
    m.config = header.at("config").get<TrainConfig>();
    Matrix offset_row = take(loaded, "prep.offset");
    Matrix scale_row = take(loaded, "prep.scale");
    m.prep = Preprocessor::from_parts(schema, offset_row.row(0), scale_row.row(0), header.at("noise_sigma").get<double>());
    m.net = HyperNet(net_config_from(header.at("hypernet")), 0);
    assign(m.net.params(), "net.", loaded);
    assign(m.net.buffers(), "net.", loaded);
    m.flow = MafFlow(flow_config_from(header.at("flow")), 0);
    assign(m.flow.params(), "flow.", loaded);
    m.thresholds.global = take(loaded, "thresholds.global")(0, 0);
    const Matrix per_class = take(loaded, "thresholds.per_class");
    m.thresholds.per_class.assign(per_class.data(), per_class.data() + per_class.size());
    const auto clusters = header.at("clusters").get<std::size_t>();
    for (std::size_t c = 0; c < clusters; ++c) m.clusters.centers.push_back(take(loaded, "clusters." + std::to_string(c)));
    m.reference = take(loaded, "reference");
    if (!loaded.empty()) throw IoError("bundle has unexpected section '" + loaded.begin()->first + "'");
    b.metadata = header.at("metadata");
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bundle header is malformed: ") + e.what());
  } catch (const DataError& e) {
    throw IoError(std::string("bundle header is malformed: ") + e.what());
  } catch (const ShapeError& e) {
    throw IoError(std::string("bundle header is malformed: ") + e.what());
  }
  return b;
}

}  // namespace hcx
