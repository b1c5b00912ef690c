#include "loren/channel.hpp"

#include <cmath>

#include "loren/errors.hpp"

namespace loren {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

std::vector<PdpTap> ChannelConfig::default_pdp() {
  // Tap powers decay as e^(-l/2) in the tap index l.
  const double step_db = -10.0 * std::log10(std::exp(0.5));
  return {
      {0, 0.0},            {1, 1.0 * step_db}, {2, 2.0 * step_db},
      {4, 3.0 * step_db},  {8, 4.0 * step_db}, {16, 5.0 * step_db},
  };
}

void ChannelConfig::validate() const {
  if (num_rx <= 0) throw ConfigError("channel: num_rx must be positive");
  if (pdp.empty()) throw ConfigError("channel: power delay profile is empty");
  for (const auto& tap : pdp)
    if (tap.delay_samples < 0) throw ConfigError("channel: negative tap delay");
  if (doppler == DopplerModel::PerSymbolAr1 && !(ar1_rho >= 0.0 && ar1_rho <= 1.0))
    throw ConfigError("channel: ar1_rho must lie in [0, 1]");
}

ChannelRealization sample_channel(const ChannelConfig& cfg, int T, int F, Rng& rng) {
  cfg.validate();
  if (T <= 0 || F <= 0) throw ShapeError("sample_channel: T and F must be positive");

  const size_t L = cfg.pdp.size();
  std::vector<double> power(L);
  double total = 0.0;
  for (size_t l = 0; l < L; ++l) {
    power[l] = std::pow(10.0, cfg.pdp[l].power_db / 10.0);
    total += power[l];
  }
  for (auto& p : power) p /= total;

  ChannelRealization out(cfg.num_rx, T, F);
  // Twiddle per (tap, subcarrier): exp(-j 2 pi f d_l / F).
  std::vector<std::complex<double>> twiddle(L * static_cast<size_t>(F));
  for (size_t l = 0; l < L; ++l) {
    const double base = -kTwoPi * cfg.pdp[l].delay_samples / static_cast<double>(F);
    for (int f = 0; f < F; ++f)
      twiddle[l * static_cast<size_t>(F) + f] = std::polar(1.0, base * f);
  }

  std::vector<std::complex<double>> gains(L);
  for (int a = 0; a < cfg.num_rx; ++a) {
    for (size_t l = 0; l < L; ++l) gains[l] = rng.cnormal(power[l]);
    if (cfg.doppler == DopplerModel::BlockConstant) {
      for (int f = 0; f < F; ++f) {
        std::complex<double> acc = 0.0;
        for (size_t l = 0; l < L; ++l) acc += gains[l] * twiddle[l * static_cast<size_t>(F) + f];
        for (int t = 0; t < T; ++t) out.at(a, t, f) = acc;
      }
    } else {
      const double rho = cfg.ar1_rho;
      const double innov = std::sqrt(std::max(0.0, 1.0 - rho * rho));
      for (int t = 0; t < T; ++t) {
        if (t > 0) {
          for (size_t l = 0; l < L; ++l)
            gains[l] = rho * gains[l] + innov * rng.cnormal(power[l]);
        }
        for (int f = 0; f < F; ++f) {
          std::complex<double> acc = 0.0;
          for (size_t l = 0; l < L; ++l)
            acc += gains[l] * twiddle[l * static_cast<size_t>(F) + f];
          out.at(a, t, f) = acc;
        }
      }
    }
  }
  return out;
}

RxGrids apply_channel(const ResourceGrid& tx, const ChannelRealization& h) {
  if (tx.T != h.T || tx.F != h.F) throw ShapeError("apply_channel: grid dimensions mismatch");
  RxGrids rx(h.num_rx, h.T, h.F);
  for (int a = 0; a < h.num_rx; ++a)
    for (int t = 0; t < h.T; ++t)
      for (int f = 0; f < h.F; ++f) rx.at(a, t, f) = h.at(a, t, f) * tx.at(t, f);
  return rx;
}

void add_awgn(RxGrids& rx, double n0, Rng& rng) {
  if (n0 < 0.0) throw ShapeError("add_awgn: negative noise variance");
  if (n0 == 0.0) return;
  for (auto& c : rx.cells) c += rng.cnormal(n0);
}

double ebno_to_n0(double ebno_db, double code_rate, int bits_per_symbol,
                  double data_re_fraction) {
  if (!(code_rate > 0.0 && code_rate < 1.0))
    throw ConfigError("ebno_to_n0: code rate must lie in (0, 1)");
  if (bits_per_symbol <= 0) throw ConfigError("ebno_to_n0: bits_per_symbol must be positive");
  if (!(data_re_fraction > 0.0 && data_re_fraction <= 1.0))
    throw ConfigError("ebno_to_n0: data_re_fraction must lie in (0, 1]");
  const double ebno = std::pow(10.0, ebno_db / 10.0);
  return 1.0 / (code_rate * bits_per_symbol * data_re_fraction * ebno);
}

}  // namespace loren
