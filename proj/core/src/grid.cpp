#include "loren/grid.hpp"

#include <algorithm>
#include <cmath>

#include "loren/errors.hpp"

namespace loren {

PilotPattern PilotPattern::qpsk(std::vector<int> symbols, int F, uint64_t seed) {
  std::sort(symbols.begin(), symbols.end());
  PilotPattern p;
  p.pilot_symbols = std::move(symbols);
  p.seed = seed;
  Rng rng(seed, {stream::kPilots});
  const double amp = 1.0 / std::sqrt(2.0);
  p.values.resize(p.pilot_symbols.size() * static_cast<size_t>(F));
  for (auto& v : p.values) {
    const double re = rng.bit() ? amp : -amp;
    const double im = rng.bit() ? amp : -amp;
    v = {re, im};
  }
  return p;
}

bool PilotPattern::is_pilot_symbol(int t) const { return pilot_row(t) >= 0; }

int PilotPattern::pilot_row(int t) const {
  for (size_t i = 0; i < pilot_symbols.size(); ++i)
    if (pilot_symbols[i] == t) return static_cast<int>(i);
  return -1;
}

void GridSpec::validate() const {
  if (T <= 0 || F <= 0) throw ConfigError("grid: T and F must be positive");
  if (bits_per_symbol != 4) throw ConfigError("grid: only 4 bits per symbol supported");
  if (pilots.pilot_symbols.empty()) throw ConfigError("grid: at least one pilot symbol required");
  int prev = -1;
  for (int t : pilots.pilot_symbols) {
    if (t < 0 || t >= T) throw ConfigError("grid: pilot symbol index out of range");
    if (t <= prev) throw ConfigError("grid: pilot symbols must be ascending and distinct");
    prev = t;
  }
  if (static_cast<int>(pilots.pilot_symbols.size()) >= T)
    throw ConfigError("grid: no data symbols left");
  if (pilots.values.size() != pilots.pilot_symbols.size() * static_cast<size_t>(F))
    throw ConfigError("grid: pilot value count does not match layout");
}

std::vector<int32_t> GridSpec::data_re_flat() const {
  std::vector<int32_t> out;
  out.reserve(static_cast<size_t>(data_re_count()));
  for (int t = 0; t < T; ++t) {
    if (pilots.is_pilot_symbol(t)) continue;
    for (int f = 0; f < F; ++f) out.push_back(static_cast<int32_t>(t * F + f));
  }
  return out;
}

ResourceGrid assemble_grid(const GridSpec& spec,
                           const std::vector<std::complex<double>>& data_symbols) {
  if (static_cast<int>(data_symbols.size()) != spec.data_re_count())
    throw ShapeError("assemble_grid: expected " + std::to_string(spec.data_re_count()) +
                     " data symbols, got " + std::to_string(data_symbols.size()));
  ResourceGrid grid(spec.T, spec.F);
  size_t next = 0;
  for (int t = 0; t < spec.T; ++t) {
    const int row = spec.pilots.pilot_row(t);
    for (int f = 0; f < spec.F; ++f) {
      grid.at(t, f) = row >= 0
                          ? spec.pilots.values[static_cast<size_t>(row) * spec.F + f]
                          : data_symbols[next++];
    }
  }
  return grid;
}

std::vector<std::complex<double>> extract_data(const GridSpec& spec,
                                               const ResourceGrid& grid) {
  if (grid.T != spec.T || grid.F != spec.F)
    throw ShapeError("extract_data: grid dimensions mismatch");
  std::vector<std::complex<double>> out;
  out.reserve(static_cast<size_t>(spec.data_re_count()));
  for (int t = 0; t < spec.T; ++t) {
    if (spec.pilots.is_pilot_symbol(t)) continue;
    for (int f = 0; f < spec.F; ++f) out.push_back(grid.at(t, f));
  }
  return out;
}

}  // namespace loren
