#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "loren/receiver.hpp"

namespace loren {

// One named tensor in the weight container. dtype 0 = f64, 1 = f32 (widened
// to double on load), 2 = u64.
struct ContainerEntry {
  std::string name;
  uint8_t dtype = 0;
  std::vector<int64_t> shape;
  std::vector<double> f64;   // dtype 0 and 1
  std::vector<uint64_t> u64; // dtype 2

  static ContainerEntry tensor(std::string name, const Tensor& t);
  static ContainerEntry scalar_u64(std::string name, uint64_t v);
  static ContainerEntry u64_list(std::string name, std::vector<uint64_t> v);
  static ContainerEntry scalar_f64(std::string name, double v);
  int64_t numel() const;
};

void save_container(const std::string& path, const std::vector<ContainerEntry>& entries);
std::vector<ContainerEntry> load_container(const std::string& path);

const ContainerEntry* find_entry(const std::vector<ContainerEntry>& entries,
                                 const std::string& name);

// Serializes the base network, and the adapter registry when given.
void save_weights(const std::string& path, const ModelConfig& cfg,
                  const BaseWeights& base, const AdapterRegistry* registry = nullptr);

struct LoadedModel {
  BaseWeights base;
  AdapterRegistry registry;
};

// Rebuilds weights from a container, checking every dimension against cfg.
LoadedModel load_weights(const std::string& path, const ModelConfig& cfg);

// Base/adapter reconstruction from already-loaded entries (checkpoints reuse
// the same layout plus their own bookkeeping entries).
void fill_base_weights(const std::vector<ContainerEntry>& entries, const ModelConfig& cfg,
                       BaseWeights* base);
void fill_registry(const std::vector<ContainerEntry>& entries, const ModelConfig& cfg,
                   const BaseWeights& base, AdapterRegistry* registry);
std::vector<ContainerEntry> weight_entries(const ModelConfig& cfg, const BaseWeights& base,
                                           const AdapterRegistry* registry);

}  // namespace loren
