#include "loren/baseline.hpp"

#include <cmath>

#include "loren/errors.hpp"

namespace loren {

CsiEstimate perfect_csi(const ChannelRealization& chan) {
  CsiEstimate est;
  est.source = CsiEstimate::Source::Perfect;
  est.num_rx = chan.num_rx;
  est.T = chan.T;
  est.F = chan.F;
  est.h = chan.h;
  return est;
}

CsiEstimate ls_estimate(const RxGrids& rx, const GridSpec& spec) {
  if (rx.T != spec.T || rx.F != spec.F)
    throw ShapeError("ls_estimate: grid dimensions mismatch");
  const auto& pilots = spec.pilots;
  if (pilots.pilot_symbols.empty()) throw ShapeError("ls_estimate: no pilot symbols");

  CsiEstimate est;
  est.source = CsiEstimate::Source::LsInterpolated;
  est.num_rx = rx.num_rx;
  est.T = rx.T;
  est.F = rx.F;
  est.h.assign(static_cast<size_t>(rx.num_rx) * rx.T * rx.F, 0.0);

  const int P = static_cast<int>(pilots.pilot_symbols.size());
  std::vector<std::complex<double>> at_pilots(static_cast<size_t>(P));
  for (int a = 0; a < rx.num_rx; ++a) {
    for (int f = 0; f < rx.F; ++f) {
      for (int i = 0; i < P; ++i) {
        const int tp = pilots.pilot_symbols[static_cast<size_t>(i)];
        const auto p = pilots.values[static_cast<size_t>(i) * rx.F + f];
        at_pilots[static_cast<size_t>(i)] = rx.at(a, tp, f) / p;
      }
      // Linear interpolation across time, nearest pilot beyond the span.
      for (int t = 0; t < rx.T; ++t) {
        std::complex<double> v;
        if (t <= pilots.pilot_symbols.front()) {
          v = at_pilots.front();
        } else if (t >= pilots.pilot_symbols.back()) {
          v = at_pilots.back();
        } else {
          int i = 0;
          while (pilots.pilot_symbols[static_cast<size_t>(i) + 1] < t) ++i;
          const int t0 = pilots.pilot_symbols[static_cast<size_t>(i)];
          const int t1 = pilots.pilot_symbols[static_cast<size_t>(i) + 1];
          const double w = static_cast<double>(t - t0) / static_cast<double>(t1 - t0);
          v = (1.0 - w) * at_pilots[static_cast<size_t>(i)] +
              w * at_pilots[static_cast<size_t>(i) + 1];
        }
        est.at(a, t, f) = v;
      }
    }
  }
  return est;
}

MrcResult mrc_demap(const RxGrids& rx, const CsiEstimate& csi, const GridSpec& spec,
                    const Qam16& qam, double n0) {
  if (rx.T != spec.T || rx.F != spec.F)
    throw ShapeError("mrc_demap: grid dimensions mismatch");
  if (csi.num_rx != rx.num_rx || csi.T != rx.T || csi.F != rx.F)
    throw ShapeError("mrc_demap: CSI dimensions mismatch");
  if (!(n0 > 0.0)) throw ShapeError("mrc_demap: n0 must be positive");

  MrcResult res;
  res.llrs = Tensor({spec.T, spec.F, spec.bits_per_symbol});
  for (int t = 0; t < spec.T; ++t) {
    if (spec.pilots.is_pilot_symbol(t)) continue;
    for (int f = 0; f < spec.F; ++f) {
      std::complex<double> z = 0.0;
      double g = 0.0;
      for (int a = 0; a < rx.num_rx; ++a) {
        const auto h = csi.at(a, t, f);
        z += std::conj(h) * rx.at(a, t, f);
        g += std::norm(h);
      }
      if (g == 0.0) {
        // No channel knowledge at all: LLRs stay zero (erasure).
        ++res.zero_csi_res;
        continue;
      }
      const auto llr = qam.demap_llr(z, g, g * n0);
      for (int b = 0; b < spec.bits_per_symbol; ++b) res.llrs.at(t, f, b) = llr[static_cast<size_t>(b)];
    }
  }
  return res;
}

}  // namespace loren
