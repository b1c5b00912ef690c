#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "loren/rng.hpp"

namespace loren {

// Pilot layout: a set of OFDM symbols fully loaded with known unit-power
// QPSK values drawn from a seeded stream.
struct PilotPattern {
  std::vector<int> pilot_symbols;                // ascending
  std::vector<std::complex<double>> values;      // [pilot index][f], row-major
  uint64_t seed = 0;

  static PilotPattern qpsk(std::vector<int> symbols, int F, uint64_t seed);
  bool is_pilot_symbol(int t) const;
  // Position of t within pilot_symbols, -1 if t carries data.
  int pilot_row(int t) const;
};

// Geometry of one transport block: a T x F grid whose data resource elements
// carry exactly one codeword.
struct GridSpec {
  int T = 14;
  int F = 128;
  int bits_per_symbol = 4;
  PilotPattern pilots;

  int data_symbols() const { return T - static_cast<int>(pilots.pilot_symbols.size()); }
  int data_re_count() const { return data_symbols() * F; }
  int codeword_bits() const { return data_re_count() * bits_per_symbol; }
  // Flat t*F+f indices of data resource elements, t-major ascending.
  std::vector<int32_t> data_re_flat() const;
  void validate() const;
};

struct ResourceGrid {
  int T = 0, F = 0;
  std::vector<std::complex<double>> cells;  // [t][f]

  ResourceGrid() = default;
  ResourceGrid(int t, int f) : T(t), F(f), cells(static_cast<size_t>(t) * f) {}
  std::complex<double>& at(int t, int f) { return cells[static_cast<size_t>(t) * F + f]; }
  std::complex<double> at(int t, int f) const { return cells[static_cast<size_t>(t) * F + f]; }
};

// Received grids, one per antenna.
struct RxGrids {
  int num_rx = 0, T = 0, F = 0;
  std::vector<std::complex<double>> cells;  // [a][t][f]

  RxGrids() = default;
  RxGrids(int a, int t, int f)
      : num_rx(a), T(t), F(f), cells(static_cast<size_t>(a) * t * f) {}
  std::complex<double>& at(int a, int t, int f) {
    return cells[(static_cast<size_t>(a) * T + t) * F + f];
  }
  std::complex<double> at(int a, int t, int f) const {
    return cells[(static_cast<size_t>(a) * T + t) * F + f];
  }
};

// Places data symbols on the data REs (t-major) and pilots on pilot REs.
ResourceGrid assemble_grid(const GridSpec& spec,
                           const std::vector<std::complex<double>>& data_symbols);
// Reads data REs back in the same order.
std::vector<std::complex<double>> extract_data(const GridSpec& spec,
                                               const ResourceGrid& grid);

}  // namespace loren
