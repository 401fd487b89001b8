#pragma once

// Test-only reference computations, kept independent of the library paths
// they check.

#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

/// Adaptive Simpson quadrature.
inline double simpson(const std::function<double(double)>& f, double a, double b, double fa, double fm, double fb,
                      double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
         simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a, double b, double tol = 1e-12) {
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  return simpson(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 60);
}

/// JONSWAP density written out independently of the library.
inline double jonswap(double w, double alpha, double Hs, double Tp, double gamma) {
  if (w <= 0.0) return 0.0;
  const double wp = 2.0 * M_PI / Tp;
  const double tau = w < wp ? 0.09 : 0.07;
  return alpha * Hs * Hs * std::pow(w, -5.0) / std::pow(wp, -4.0) * std::exp(-1.25 * std::pow(w / wp, -4.0)) *
         std::pow(gamma, std::exp(-(w - wp) * (w - wp) / (2.0 * tau * tau * wp * wp)));
}

/// Straight-line scalar LSTM cell, gate by gate:
///   i = s(W_ii x + b_ii + W_hi h + b_hi)   f = s(W_if x + b_if + W_hf h + b_hf)
///   g = tanh(W_ig x + b_ig + W_hg h + b_hg) o = s(W_io x + b_io + W_ho h + b_ho)
///   c' = f c + i g                         h' = o tanh(c')
/// Weights are indexed [gate][unit][k] with gate order i, f, g, o.
struct ScalarLstm {
  int r = 0, H = 0;
  std::vector<std::vector<std::vector<double>>> Wi, Wh;  // [4][H][r], [4][H][H]
  std::vector<std::vector<double>> bi, bh;               // [4][H]

  void step(const std::vector<double>& x, std::vector<double>& h, std::vector<double>& c) const {
    auto sig = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
    std::vector<double> gate_i(H), gate_f(H), gate_g(H), gate_o(H);
    for (int j = 0; j < H; ++j) {
      double zi = bi[0][j] + bh[0][j], zf = bi[1][j] + bh[1][j], zg = bi[2][j] + bh[2][j],
             zo = bi[3][j] + bh[3][j];
      for (int k = 0; k < r; ++k) {
        zi += Wi[0][j][k] * x[k];
        zf += Wi[1][j][k] * x[k];
        zg += Wi[2][j][k] * x[k];
        zo += Wi[3][j][k] * x[k];
      }
      for (int k = 0; k < H; ++k) {
        zi += Wh[0][j][k] * h[k];
        zf += Wh[1][j][k] * h[k];
        zg += Wh[2][j][k] * h[k];
        zo += Wh[3][j][k] * h[k];
      }
      gate_i[j] = sig(zi);
      gate_f[j] = sig(zf);
      gate_g[j] = std::tanh(zg);
      gate_o[j] = sig(zo);
    }
    for (int j = 0; j < H; ++j) {
      c[j] = gate_f[j] * c[j] + gate_i[j] * gate_g[j];
      h[j] = gate_o[j] * std::tanh(c[j]);
    }
  }
};

/// Enumerates valid window anchors directly from the index constraints:
/// motion t_{p-n}..t_{p-1}, wave t_{p+w-n}..t_{p+w-1}, target t_p..t_{p+m-1}
/// all inside [0, L).
inline std::vector<std::size_t> enumerate_anchors(std::size_t L, std::size_t n, std::size_t m, std::size_t w) {
  std::vector<std::size_t> out;
  for (long p = 0; p < static_cast<long>(L) + 5; ++p) {
    const long lo_motion = p - static_cast<long>(n), hi_motion = p - 1;
    const long lo_wave = p + static_cast<long>(w) - static_cast<long>(n), hi_wave = p + static_cast<long>(w) - 1;
    const long lo_y = p, hi_y = p + static_cast<long>(m) - 1;
    const long L_ = static_cast<long>(L);
    if (lo_motion >= 0 && hi_motion < L_ && lo_wave >= 0 && hi_wave < L_ && lo_y >= 0 && hi_y < L_)
      out.push_back(static_cast<std::size_t>(p));
  }
  return out;
}

}  // namespace oracle
