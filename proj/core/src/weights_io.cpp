#include "loren/weights_io.hpp"

#include <cstring>
#include <fstream>
#include <set>

#include "loren/errors.hpp"

namespace loren {

namespace {

void write_bytes(std::ofstream& out, const void* p, size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void write_u16(std::ofstream& out, uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
  write_bytes(out, b, 2);
}

void write_u32(std::ofstream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  write_bytes(out, b, 4);
}

void write_u64(std::ofstream& out, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  write_bytes(out, b, 8);
}

void read_bytes(std::ifstream& in, void* p, size_t n, const std::string& path) {
  in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (!in) throw IoError("weight file truncated: " + path);
}

uint16_t read_u16(std::ifstream& in, const std::string& path) {
  unsigned char b[2];
  read_bytes(in, b, 2, path);
  return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

uint32_t read_u32(std::ifstream& in, const std::string& path) {
  unsigned char b[4];
  read_bytes(in, b, 4, path);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

uint64_t read_u64(std::ifstream& in, const std::string& path) {
  unsigned char b[8];
  read_bytes(in, b, 8, path);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

double bits_to_double(uint64_t bits) {
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}

uint64_t double_to_bits(double d) {
  uint64_t bits;
  std::memcpy(&bits, &d, 8);
  return bits;
}

}  // namespace

ContainerEntry ContainerEntry::tensor(std::string name, const Tensor& t) {
  ContainerEntry e;
  e.name = std::move(name);
  e.dtype = 0;
  e.shape = t.shape();
  e.f64.assign(t.data(), t.data() + t.numel());
  return e;
}

ContainerEntry ContainerEntry::scalar_u64(std::string name, uint64_t v) {
  ContainerEntry e;
  e.name = std::move(name);
  e.dtype = 2;
  e.shape = {1};
  e.u64 = {v};
  return e;
}

ContainerEntry ContainerEntry::u64_list(std::string name, std::vector<uint64_t> v) {
  ContainerEntry e;
  e.name = std::move(name);
  e.dtype = 2;
  e.shape = {static_cast<int64_t>(v.size())};
  e.u64 = std::move(v);
  return e;
}

ContainerEntry ContainerEntry::scalar_f64(std::string name, double v) {
  ContainerEntry e;
  e.name = std::move(name);
  e.dtype = 0;
  e.shape = {1};
  e.f64 = {v};
  return e;
}

int64_t ContainerEntry::numel() const { return shape_numel(shape); }

void save_container(const std::string& path, const std::vector<ContainerEntry>& entries) {
  if (entries.size() > 0xffff) throw IoError("too many tensors for container");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.write("LRNW", 4);
  write_u16(out, 1);  // version
  write_u16(out, static_cast<uint16_t>(entries.size()));
  for (const auto& e : entries) {
    if (e.name.size() > 0xffff) throw IoError("tensor name too long");
    if (e.shape.size() > 0xff) throw IoError("tensor rank too large");
    const int64_t n = e.numel();
    if (e.dtype == 2) {
      if (static_cast<int64_t>(e.u64.size()) != n) throw IoError("u64 payload size mismatch");
    } else if (e.dtype <= 1) {
      if (static_cast<int64_t>(e.f64.size()) != n) throw IoError("f64 payload size mismatch");
    } else {
      throw IoError("unknown dtype tag");
    }
    write_u16(out, static_cast<uint16_t>(e.name.size()));
    write_bytes(out, e.name.data(), e.name.size());
    const uint8_t rank = static_cast<uint8_t>(e.shape.size());
    write_bytes(out, &rank, 1);
    for (int64_t d : e.shape) write_u32(out, static_cast<uint32_t>(d));
    write_bytes(out, &e.dtype, 1);
    if (e.dtype == 0) {
      for (double v : e.f64) write_u64(out, double_to_bits(v));
    } else if (e.dtype == 1) {
      for (double v : e.f64) {
        const float f = static_cast<float>(v);
        uint32_t bits;
        std::memcpy(&bits, &f, 4);
        write_u32(out, bits);
      }
    } else {
      for (uint64_t v : e.u64) write_u64(out, v);
    }
  }
  if (!out) throw IoError("write failed: " + path);
}

std::vector<ContainerEntry> load_container(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError("weight file not found: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "LRNW", 4) != 0)
    throw IoError("not a weight container: " + path);
  const uint16_t version = read_u16(in, path);
  if (version != 1) throw IoError("unsupported weight container version");
  const uint16_t count = read_u16(in, path);
  std::vector<ContainerEntry> entries(count);
  for (auto& e : entries) {
    const uint16_t name_len = read_u16(in, path);
    e.name.resize(name_len);
    read_bytes(in, e.name.data(), name_len, path);
    uint8_t rank;
    read_bytes(in, &rank, 1, path);
    e.shape.resize(rank);
    for (auto& d : e.shape) d = static_cast<int64_t>(read_u32(in, path));
    read_bytes(in, &e.dtype, 1, path);
    const int64_t n = e.numel();
    if (e.dtype == 0) {
      e.f64.resize(static_cast<size_t>(n));
      for (auto& v : e.f64) v = bits_to_double(read_u64(in, path));
    } else if (e.dtype == 1) {
      e.f64.resize(static_cast<size_t>(n));
      for (auto& v : e.f64) {
        const uint32_t bits = read_u32(in, path);
        float f;
        std::memcpy(&f, &bits, 4);
        v = static_cast<double>(f);
      }
    } else if (e.dtype == 2) {
      e.u64.resize(static_cast<size_t>(n));
      for (auto& v : e.u64) v = read_u64(in, path);
    } else {
      throw IoError("unknown dtype tag in " + path);
    }
  }
  return entries;
}

const ContainerEntry* find_entry(const std::vector<ContainerEntry>& entries,
                                 const std::string& name) {
  for (const auto& e : entries)
    if (e.name == name) return &e;
  return nullptr;
}

namespace {

void fill_param(const std::vector<ContainerEntry>& entries, Parameter* p) {
  const ContainerEntry* e = find_entry(entries, p->name);
  if (!e) throw IoError("weight container is missing tensor '" + p->name + "'");
  if (e->shape != p->value.shape())
    throw ConfigError("tensor '" + p->name + "' has shape mismatch: file " +
                      Tensor::zeros(e->shape).shape_str() + " vs model " +
                      p->value.shape_str());
  for (int64_t i = 0; i < p->value.numel(); ++i) p->value[i] = e->f64[static_cast<size_t>(i)];
}

}  // namespace

std::vector<ContainerEntry> weight_entries(const ModelConfig& cfg, const BaseWeights& base,
                                           const AdapterRegistry* registry) {
  std::vector<ContainerEntry> entries;
  entries.push_back(ContainerEntry::u64_list(
      "meta/model",
      {static_cast<uint64_t>(cfg.T), static_cast<uint64_t>(cfg.F),
       static_cast<uint64_t>(cfg.channels), static_cast<uint64_t>(cfg.num_res_blocks),
       static_cast<uint64_t>(cfg.kernel), static_cast<uint64_t>(cfg.num_rx),
       static_cast<uint64_t>(cfg.bits_per_symbol)}));
  entries.push_back(ContainerEntry::u64_list(
      "meta/adapter", {static_cast<uint64_t>(cfg.rank),
                       static_cast<uint64_t>(cfg.num_adapter_layers)}));
  entries.push_back(ContainerEntry::scalar_f64("meta/alpha", cfg.alpha));
  entries.push_back(ContainerEntry::scalar_f64("meta/ln_eps", cfg.ln_eps));
  for (Parameter* p : const_cast<BaseWeights&>(base).params())
    entries.push_back(ContainerEntry::tensor(p->name, p->value));
  if (registry) {
    for (int milli : registry->registered()) {
      for (const auto& [id, adapter] : registry->set_for(milli)) {
        entries.push_back(ContainerEntry::tensor(adapter.A.name, adapter.A.value));
        entries.push_back(ContainerEntry::tensor(adapter.B.name, adapter.B.value));
      }
    }
  }
  return entries;
}

void save_weights(const std::string& path, const ModelConfig& cfg,
                  const BaseWeights& base, const AdapterRegistry* registry) {
  save_container(path, weight_entries(cfg, base, registry));
}

void fill_base_weights(const std::vector<ContainerEntry>& entries, const ModelConfig& cfg,
                       BaseWeights* base) {
  const ContainerEntry* meta = find_entry(entries, "meta/model");
  if (!meta) throw IoError("weight container is missing meta/model");
  const std::vector<uint64_t> expect = {
      static_cast<uint64_t>(cfg.T), static_cast<uint64_t>(cfg.F),
      static_cast<uint64_t>(cfg.channels), static_cast<uint64_t>(cfg.num_res_blocks),
      static_cast<uint64_t>(cfg.kernel), static_cast<uint64_t>(cfg.num_rx),
      static_cast<uint64_t>(cfg.bits_per_symbol)};
  if (meta->u64 != expect)
    throw ConfigError("weight container was written for a different model geometry");
  for (Parameter* p : base->params()) fill_param(entries, p);
}

void fill_registry(const std::vector<ContainerEntry>& entries, const ModelConfig& cfg,
                   const BaseWeights& base, AdapterRegistry* registry) {
  // Adapter tensors are named adapter/<milli>/<layer id>/A or /B.
  std::set<std::pair<int, std::string>> found;
  for (const auto& e : entries) {
    if (e.name.rfind("adapter/", 0) != 0) continue;
    const size_t p1 = e.name.find('/', 8);
    const size_t p2 = e.name.rfind('/');
    if (p1 == std::string::npos || p2 == std::string::npos || p2 <= p1)
      throw IoError("malformed adapter tensor name '" + e.name + "'");
    const int milli = static_cast<int>(std::stol(e.name.substr(8, p1 - 8)));
    found.insert({milli, e.name.substr(p1 + 1, p2 - p1 - 1)});
  }
  for (const auto& [milli, layer] : found) {
    ConvLayer* conv = const_cast<BaseWeights&>(base).find_conv(layer);
    if (!conv) throw ConfigError("adapter tensor targets unknown layer '" + layer + "'");
    const std::string prefix = "adapter/" + std::to_string(milli) + "/" + layer;
    const ContainerEntry* ea = find_entry(entries, prefix + "/A");
    const ContainerEntry* eb = find_entry(entries, prefix + "/B");
    if (!ea || !eb) throw IoError("adapter pair incomplete for '" + prefix + "'");
    if (ea->shape.size() != 2 || eb->shape.size() != 2 ||
        ea->shape[0] != conv->cin() || eb->shape[1] != conv->cout() ||
        ea->shape[1] != eb->shape[0])
      throw ConfigError("adapter '" + prefix + "' dimensions do not fit layer");
    if (ea->shape[1] != cfg.rank)
      throw ConfigError("adapter '" + prefix + "' rank differs from configured rank");
    LorenAdapter adapter;
    adapter.rank = static_cast<int>(ea->shape[1]);
    adapter.alpha = cfg.alpha;
    adapter.A = Parameter(Tensor::from(ea->shape, ea->f64), prefix + "/A");
    adapter.B = Parameter(Tensor::from(eb->shape, eb->f64), prefix + "/B");
    if (!registry->has(milli)) registry->insert(milli, {});
    registry->set_for(milli).emplace(layer, std::move(adapter));
  }
}

LoadedModel load_weights(const std::string& path, const ModelConfig& cfg) {
  const auto entries = load_container(path);
  LoadedModel model;
  model.base = BaseWeights::init(cfg, Rng(0));
  fill_base_weights(entries, cfg, &model.base);
  const ContainerEntry* alpha = find_entry(entries, "meta/alpha");
  if (alpha && !alpha->f64.empty() && alpha->f64[0] != cfg.alpha)
    throw ConfigError("weight container alpha differs from configured alpha");
  fill_registry(entries, cfg, model.base, &model.registry);
  return model;
}

}  // namespace loren
