#include "adrd/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "adrd/errors.hpp"

namespace adrd {

namespace {

constexpr char kMagic[] = "ADRD1";

void write_f32_payload(std::ostream& os, std::span<const float> values) {
  std::vector<unsigned char> bytes(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto u = std::bit_cast<std::uint32_t>(values[i]);
    bytes[4 * i + 0] = static_cast<unsigned char>(u & 0xFF);
    bytes[4 * i + 1] = static_cast<unsigned char>((u >> 8) & 0xFF);
    bytes[4 * i + 2] = static_cast<unsigned char>((u >> 16) & 0xFF);
    bytes[4 * i + 3] = static_cast<unsigned char>((u >> 24) & 0xFF);
  }
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  os.put('\n');
}

std::vector<float> read_f32_payload(std::istream& is, std::size_t count, const std::string& what) {
  std::vector<unsigned char> bytes(count * 4);
  is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!is) throw DataError("checkpoint: truncated payload for " + what);
  if (is.get() != '\n') throw DataError("checkpoint: missing payload terminator for " + what);
  std::vector<float> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint32_t u = static_cast<std::uint32_t>(bytes[4 * i]) |
                            (static_cast<std::uint32_t>(bytes[4 * i + 1]) << 8) |
                            (static_cast<std::uint32_t>(bytes[4 * i + 2]) << 16) |
                            (static_cast<std::uint32_t>(bytes[4 * i + 3]) << 24);
    values[i] = std::bit_cast<float>(u);
  }
  return values;
}

std::string expect_line(std::istream& is, const std::string& context) {
  std::string line;
  if (!std::getline(is, line)) throw DataError("checkpoint: truncated file (" + context + ")");
  return line;
}

}  // namespace

void save_checkpoint(const std::string& path, const AdrdNetwork<float>& net,
                     const AdamOptimizer<float>* optimizer) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open '" + path + "' for writing");
  os << kMagic << '\n';
  os << "config_begin\n" << net.config().to_kv() << "config_end\n";

  const auto params = net.parameters();
  os << "params " << params.size() << '\n';
  for (const auto* p : params) {
    os << "param " << p->name() << ' ' << p->shape().size();
    for (auto d : p->shape()) os << ' ' << d;
    os << '\n';
    write_f32_payload(os, p->values());
  }

  if (optimizer) {
    // parameters() order is stable, so a fresh network can re-associate
    // moments positionally after checking names.
    auto snap = optimizer->snapshot(const_cast<AdrdNetwork<float>&>(net).parameters());
    os << "adam " << snap.step << '\n';
    for (std::size_t i = 0; i < snap.names.size(); ++i) {
      os << "moments " << snap.names[i] << '\n';
      write_f32_payload(os, snap.m[i]);
      write_f32_payload(os, snap.v[i]);
    }
  }
  os << "end\n";
  if (!os) throw DataError("failed while writing '" + path + "'");
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open '" + path + "' for reading");

  if (expect_line(is, "magic") != kMagic)
    throw DataError("'" + path + "' is not a checkpoint (missing " + kMagic + " magic)");
  if (expect_line(is, "config") != "config_begin")
    throw DataError("checkpoint: expected config_begin");
  std::ostringstream config_text;
  for (;;) {
    const std::string line = expect_line(is, "config body");
    if (line == "config_end") break;
    config_text << line << '\n';
  }
  NetworkConfig config = NetworkConfig::from_kv(config_text.str());
  try {
    config.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("checkpoint: invalid config: ") + e.what());
  }

  LoadedCheckpoint result{AdrdNetwork<float>(config, 0), std::nullopt, 0};
  auto params = result.net.parameters();
  std::unordered_map<std::string, Parameter<float>*> by_name;
  for (auto* p : params) by_name.emplace(p->name(), p);

  std::istringstream header(expect_line(is, "params header"));
  std::string token;
  std::size_t count = 0;
  header >> token >> count;
  if (token != "params") throw DataError("checkpoint: expected params header");
  if (count != params.size())
    throw DataError("checkpoint: has " + std::to_string(count) + " parameters, network expects " +
                    std::to_string(params.size()));

  for (std::size_t i = 0; i < count; ++i) {
    std::istringstream rec(expect_line(is, "parameter record"));
    std::string kind, name;
    std::size_t ndim = 0;
    rec >> kind >> name >> ndim;
    if (kind != "param" || !rec) throw DataError("checkpoint: malformed parameter record");
    Shape shape(ndim);
    for (auto& d : shape) rec >> d;
    if (!rec) throw DataError("checkpoint: malformed shape for '" + name + "'");

    auto it = by_name.find(name);
    if (it == by_name.end()) throw DataError("checkpoint: unknown parameter name '" + name + "'");
    if (it->second->shape() != shape)
      throw DataError("checkpoint: shape mismatch for '" + name + "': file " + shape_str(shape) +
                      " vs network " + shape_str(it->second->shape()));
    auto values = read_f32_payload(is, static_cast<std::size_t>(shape_numel(shape)), "'" + name + "'");
    auto dst = it->second->values();
    std::copy(values.begin(), values.end(), dst.begin());
  }

  std::string line = expect_line(is, "trailer");
  if (line.rfind("adam ", 0) == 0) {
    AdamSnapshot<float> snap;
    snap.step = std::stoll(line.substr(5));
    for (std::size_t i = 0; i < count; ++i) {
      std::istringstream rec(expect_line(is, "moments record"));
      std::string kind, name;
      rec >> kind >> name;
      if (kind != "moments" || !rec) throw DataError("checkpoint: malformed moments record");
      auto it = by_name.find(name);
      if (it == by_name.end()) throw DataError("checkpoint: moments for unknown parameter '" + name + "'");
      const auto numel = static_cast<std::size_t>(it->second->numel());
      snap.names.push_back(name);
      snap.m.push_back(read_f32_payload(is, numel, "moments m of '" + name + "'"));
      snap.v.push_back(read_f32_payload(is, numel, "moments v of '" + name + "'"));
    }
    result.adam = std::move(snap);
    result.global_step = result.adam->step;
    line = expect_line(is, "trailer");
  }
  if (line != "end") throw DataError("checkpoint: missing end marker");
  return result;
}

}  // namespace adrd
