#pragma once

#include <complex>
#include <vector>

#include "loren/channel.hpp"
#include "loren/grid.hpp"
#include "loren/qam.hpp"
#include "loren/tensor.hpp"

namespace loren {

struct CsiEstimate {
  enum class Source { Perfect, LsInterpolated };
  Source source = Source::Perfect;
  int num_rx = 0, T = 0, F = 0;
  std::vector<std::complex<double>> h;  // [a][t][f]

  std::complex<double>& at(int a, int t, int f) {
    return h[(static_cast<size_t>(a) * T + t) * F + f];
  }
  std::complex<double> at(int a, int t, int f) const {
    return h[(static_cast<size_t>(a) * T + t) * F + f];
  }
};

CsiEstimate perfect_csi(const ChannelRealization& chan);

// Least-squares pilot estimates (y / p at every pilot RE) interpolated
// linearly in time per subcarrier, held constant outside the pilot span.
CsiEstimate ls_estimate(const RxGrids& rx, const GridSpec& spec);

struct MrcResult {
  Tensor llrs;           // [T, F, bits_per_symbol], zero on pilot symbols
  int zero_csi_res = 0;  // REs where every antenna estimate was zero
};

// Maximum-ratio combining: z = sum conj(h_a) y_a with gain g = sum |h_a|^2
// behaves as a single branch with channel g and noise variance g * n0.
MrcResult mrc_demap(const RxGrids& rx, const CsiEstimate& csi, const GridSpec& spec,
                    const Qam16& qam, double n0);

}  // namespace loren
