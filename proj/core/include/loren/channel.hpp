#pragma once

#include <complex>
#include <vector>

#include "loren/grid.hpp"
#include "loren/rng.hpp"

namespace loren {

struct PdpTap {
  int delay_samples = 0;
  double power_db = 0.0;
};

enum class DopplerModel { BlockConstant, PerSymbolAr1 };

struct ChannelConfig {
  int num_rx = 2;
  std::vector<PdpTap> pdp = default_pdp();
  DopplerModel doppler = DopplerModel::BlockConstant;
  double ar1_rho = 0.995;

  // Six taps at delays {0,1,2,4,8,16} with exponentially decaying power.
  static std::vector<PdpTap> default_pdp();
  void validate() const;
};

// Frequency response per antenna, symbol and subcarrier.
struct ChannelRealization {
  int num_rx = 0, T = 0, F = 0;
  std::vector<std::complex<double>> h;  // [a][t][f]

  ChannelRealization() = default;
  ChannelRealization(int a, int t, int f)
      : num_rx(a), T(t), F(f), h(static_cast<size_t>(a) * t * f) {}
  std::complex<double>& at(int a, int t, int f) {
    return h[(static_cast<size_t>(a) * T + t) * F + f];
  }
  std::complex<double> at(int a, int t, int f) const {
    return h[(static_cast<size_t>(a) * T + t) * F + f];
  }
};

// Draws per-antenna tap gains g_l ~ CN(0, p_l) (powers normalized to sum 1)
// and evaluates H[a,t,f] = sum_l g_l(t) exp(-j 2 pi f d_l / F). Under
// BlockConstant the gains are fixed for the whole grid; under PerSymbolAr1
// they evolve per symbol with coefficient ar1_rho.
ChannelRealization sample_channel(const ChannelConfig& cfg, int T, int F, Rng& rng);

RxGrids apply_channel(const ResourceGrid& tx, const ChannelRealization& h);

// Adds CN(0, n0) noise per resource element. n0 == 0 leaves the grid
// untouched and draws nothing from the stream.
void add_awgn(RxGrids& rx, double n0, Rng& rng);

// Noise variance for a target Eb/N0 given unit symbol energy:
// n0 = 1 / (code_rate * bits_per_symbol * data_re_fraction * 10^(ebno_db/10)).
double ebno_to_n0(double ebno_db, double code_rate, int bits_per_symbol,
                  double data_re_fraction);

}  // namespace loren
