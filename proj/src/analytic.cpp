#include "timebin/analytic.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace timebin {

namespace {

constexpr double kFwhmToSigma = 2.3548200450309493;

double gauss_cdf(double x, double mu, double sigma) {
  return 0.5 * std::erfc(-(x - mu) / (sigma * std::sqrt(2.0)));
}

// One separable Gaussian term of the intensity |sum_k A_k u_k|^2:
// mass * N(center_s, sigma_s) * N(center_i, sigma_i).
struct IntensityTerm {
  double mass;
  double center_s, sigma_s;
  double center_i, sigma_i;
};

// Product of two normalized Gaussian amplitude envelopes along one axis,
// reduced to scale * N(center, sigma).
struct AxisProduct {
  double scale, center, sigma;
};

AxisProduct axis_product(double a, double p, double b, double q) {
  double s2 = p * p * q * q / (p * p + q * q);
  double w = std::sqrt(2.0 * s2);
  double m = (a * q * q + b * p * p) / (p * p + q * q);
  double damp = (a - b) * (a - b) / (4.0 * (p * p + q * q));
  double norm = std::pow(2.0 * kPi * p * p, -0.25) * std::pow(2.0 * kPi * q * q, -0.25);
  double scale = norm * std::exp(-damp) * std::sqrt(2.0 * kPi) * w;
  return {scale, m, w};
}

// Expands a LobeSet into separable intensity terms: the diagonal |A_k|^2
// Gaussians plus coherent cross terms for components closer than 4 sigma.
std::vector<IntensityTerm> intensity_terms(const LobeSet& set) {
  std::vector<IntensityTerm> terms;
  const auto& lobes = set.lobes;
  for (std::size_t j = 0; j < lobes.size(); ++j) {
    const Lobe& l = lobes[j];
    terms.push_back({std::norm(l.amplitude), l.t_signal_center_ps, l.width_sigma_ps,
                     l.t_idler_center_ps, l.width_sigma_ps});
  }
  for (std::size_t j = 0; j < lobes.size(); ++j) {
    for (std::size_t k = j + 1; k < lobes.size(); ++k) {
      const Lobe &a = lobes[j], &b = lobes[k];
      double ds = a.t_signal_center_ps - b.t_signal_center_ps;
      double di = a.t_idler_center_ps - b.t_idler_center_ps;
      double sep = std::sqrt(ds * ds + di * di);
      double sref = 4.0 * std::max(a.width_sigma_ps, b.width_sigma_ps);
      if (sep >= sref) continue;
      AxisProduct xs = axis_product(a.t_signal_center_ps, a.width_sigma_ps,
                                    b.t_signal_center_ps, b.width_sigma_ps);
      AxisProduct xi = axis_product(a.t_idler_center_ps, a.width_sigma_ps,
                                    b.t_idler_center_ps, b.width_sigma_ps);
      double mass =
          2.0 * std::real(a.amplitude * std::conj(b.amplitude)) * xs.scale * xi.scale;
      terms.push_back({mass, xs.center, xs.sigma, xi.center, xi.sigma});
    }
  }
  return terms;
}

// Bin-integrated masses of N(mu, sigma) over a whole axis.
std::vector<double> bin_gaussian(const GridSpec& axis, double mu, double sigma) {
  std::vector<double> out(axis.n_bins, 0.0);
  double prev = gauss_cdf(axis.min_ps, mu, sigma);
  for (int i = 0; i < axis.n_bins; ++i) {
    double next = gauss_cdf(axis.min_ps + (i + 1) * axis.bin_ps, mu, sigma);
    out[i] = next - prev;
    prev = next;
  }
  return out;
}

}  // namespace

GridSpec GridSpec::cover(const LobeSet& lobes, double margin_sigmas, double bin_ps) {
  if (lobes.lobes.empty()) throw std::domain_error("GridSpec::cover: empty lobe set");
  double lo = 1e300, hi = -1e300;
  for (const Lobe& l : lobes.lobes) {
    double m = margin_sigmas * l.width_sigma_ps;
    lo = std::min({lo, l.t_signal_center_ps - m, l.t_idler_center_ps - m});
    hi = std::max({hi, l.t_signal_center_ps + m, l.t_idler_center_ps + m});
  }
  GridSpec g;
  g.bin_ps = bin_ps;
  g.min_ps = lo;
  g.n_bins = static_cast<int>(std::ceil((hi - lo) / bin_ps));
  return g;
}

GridSpec GridSpec::cover_delay(const LobeSet& lobes, double margin_sigmas, double bin_ps) {
  if (lobes.lobes.empty()) throw std::domain_error("GridSpec::cover_delay: empty lobe set");
  double lo = 1e300, hi = -1e300;
  for (const Lobe& l : lobes.lobes) {
    double d = l.t_idler_center_ps - l.t_signal_center_ps;
    double m = margin_sigmas * l.width_sigma_ps * std::sqrt(2.0);
    lo = std::min(lo, d - m);
    hi = std::max(hi, d + m);
  }
  GridSpec g;
  g.bin_ps = bin_ps;
  g.min_ps = lo;
  g.n_bins = static_cast<int>(std::ceil((hi - lo) / bin_ps));
  return g;
}

double Jti::total() const {
  double t = 0.0;
  for (double v : intensity) t += v;
  return t;
}

double DelayHistogram::total() const {
  double t = 0.0;
  for (double v : mass) t += v;
  return t;
}

double DelayHistogram::mass_near(double center_ps, double half_width_ps) const {
  double t = 0.0;
  for (int i = 0; i < axis.n_bins; ++i)
    if (std::abs(axis.center(i) - center_ps) <= half_width_ps) t += mass[i];
  return t;
}

Jti rasterize_jti(const LobeSet& lobes, const GridSpec& grid) {
  if (grid.n_bins <= 0 || !(grid.bin_ps > 0.0))
    throw std::domain_error("rasterize_jti: invalid grid");
  std::ostringstream truncated;
  for (const Lobe& l : lobes.lobes) {
    double m = 4.0 * l.width_sigma_ps;
    for (double c : {l.t_signal_center_ps, l.t_idler_center_ps}) {
      if (c - m < grid.min_ps || c + m > grid.max_ps()) {
        truncated << " (" << l.t_signal_center_ps << "," << l.t_idler_center_ps << ")";
        break;
      }
    }
  }
  if (!truncated.str().empty())
    throw std::domain_error("rasterize_jti: grid does not cover lobes +-4 sigma at centers" +
                            truncated.str());

  Jti jti;
  jti.axis = grid;
  jti.intensity.assign(static_cast<std::size_t>(grid.n_bins) * grid.n_bins, 0.0);
  for (const IntensityTerm& t : intensity_terms(lobes)) {
    std::vector<double> bs = bin_gaussian(grid, t.center_s, t.sigma_s);
    std::vector<double> bi = bin_gaussian(grid, t.center_i, t.sigma_i);
    for (int i = 0; i < grid.n_bins; ++i) {
      if (bs[i] == 0.0) continue;
      double w = t.mass * bs[i];
      for (int j = 0; j < grid.n_bins; ++j) jti.intensity[i * grid.n_bins + j] += w * bi[j];
    }
  }
  return jti;
}

DelayHistogram project_delay(const LobeSet& lobes, const GridSpec& delay_grid) {
  if (delay_grid.n_bins <= 0 || !(delay_grid.bin_ps > 0.0))
    throw std::domain_error("project_delay: invalid grid");
  DelayHistogram h;
  h.axis = delay_grid;
  h.mass.assign(delay_grid.n_bins, 0.0);
  for (const IntensityTerm& t : intensity_terms(lobes)) {
    // Difference of independent Gaussians.
    double mu = t.center_i - t.center_s;
    double sigma = std::sqrt(t.sigma_s * t.sigma_s + t.sigma_i * t.sigma_i);
    std::vector<double> bins = bin_gaussian(delay_grid, mu, sigma);
    for (int i = 0; i < delay_grid.n_bins; ++i) h.mass[i] += t.mass * bins[i];
  }
  return h;
}

DelayHistogram project_delay(const Jti& jti) {
  const GridSpec& g = jti.axis;
  GridSpec dg;
  dg.bin_ps = g.bin_ps;
  dg.min_ps = g.min_ps - g.max_ps();
  dg.n_bins = 2 * g.n_bins;
  DelayHistogram h;
  h.axis = dg;
  h.mass.assign(dg.n_bins, 0.0);
  // A uniform square cell projects onto the delay axis as a triangle of base
  // 2*bin around the center difference; spread each cell accordingly.
  auto triangle_cdf = [](double x) {  // support [-1, 1], peak at 0
    x = std::clamp(x, -1.0, 1.0);
    return x < 0.0 ? 0.5 * (1.0 + x) * (1.0 + x) : 1.0 - 0.5 * (1.0 - x) * (1.0 - x);
  };
  for (int i = 0; i < g.n_bins; ++i) {
    for (int j = 0; j < g.n_bins; ++j) {
      double m = jti.at(i, j);
      if (m == 0.0) continue;
      double dc = g.center(j) - g.center(i);
      int b0 = static_cast<int>(std::floor((dc - g.bin_ps - dg.min_ps) / dg.bin_ps));
      int b1 = static_cast<int>(std::floor((dc + g.bin_ps - dg.min_ps) / dg.bin_ps));
      double prev = 0.0;
      for (int b = std::max(b0, 0); b <= std::min(b1, dg.n_bins - 1); ++b) {
        double edge = dg.min_ps + (b + 1) * dg.bin_ps;
        double f = triangle_cdf((edge - dc) / g.bin_ps);
        h.mass[b] += m * (f - prev);
        prev = f;
      }
    }
  }
  return h;
}

namespace {

std::vector<double> smear_1d(const std::vector<double>& in, const GridSpec& axis,
                             double sigma_ps) {
  if (sigma_ps <= 0.0) return in;
  int half = static_cast<int>(std::ceil(6.0 * sigma_ps / axis.bin_ps)) + 1;
  std::vector<double> kernel(2 * half + 1);
  double sum = 0.0;
  for (int k = -half; k <= half; ++k) {
    double lo = (k - 0.5) * axis.bin_ps;
    double hi = (k + 0.5) * axis.bin_ps;
    kernel[k + half] = gauss_cdf(hi, 0.0, sigma_ps) - gauss_cdf(lo, 0.0, sigma_ps);
    sum += kernel[k + half];
  }
  for (double& k : kernel) k /= sum;  // discrete kernel carries unit mass
  std::vector<double> out(in.size(), 0.0);
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (in[i] == 0.0) continue;
    for (int k = -half; k <= half; ++k) {
      long long j = static_cast<long long>(i) + k;
      if (j >= 0 && j < static_cast<long long>(in.size()))
        out[j] += in[i] * kernel[k + half];
    }
  }
  return out;
}

}  // namespace

DelayHistogram smear(const DelayHistogram& hist, double jitter_fwhm_ps) {
  if (jitter_fwhm_ps < 0.0) throw std::domain_error("smear: negative jitter");
  DelayHistogram out = hist;
  // Two independent detectors feed the delay axis.
  out.mass = smear_1d(hist.mass, hist.axis, std::sqrt(2.0) * jitter_fwhm_ps / kFwhmToSigma);
  return out;
}

Jti smear(const Jti& jti, double jitter_fwhm_ps) {
  if (jitter_fwhm_ps < 0.0) throw std::domain_error("smear: negative jitter");
  double sigma = jitter_fwhm_ps / kFwhmToSigma;
  if (sigma <= 0.0) return jti;
  Jti out = jti;
  int n = jti.axis.n_bins;
  // Separable: rows (signal axis) then columns (idler axis).
  std::vector<double> line(n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) line[i] = jti.at(i, j);
    std::vector<double> s = smear_1d(line, jti.axis, sigma);
    for (int i = 0; i < n; ++i) out.at(i, j) = s[i];
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) line[j] = out.at(i, j);
    std::vector<double> s = smear_1d(line, jti.axis, sigma);
    for (int j = 0; j < n; ++j) out.at(i, j) = s[j];
  }
  return out;
}

namespace {

double aggregate_mass(const LobeSet& set, VisibilityMode mode, double t_s_ps) {
  switch (mode) {
    case VisibilityMode::passive_full:
    case VisibilityMode::active:
      return set.total_probability();
    case VisibilityMode::passive_central_peak: {
      LobeSet sub;
      sub.port = set.port;
      for (const Lobe& l : set.lobes)
        if (std::abs(l.t_idler_center_ps - l.t_signal_center_ps) < 0.5 * t_s_ps)
          sub.lobes.push_back(l);
      return sub.total_probability();
    }
    case VisibilityMode::passive_central_lobe: {
      LobeSet sub;
      sub.port = set.port;
      for (const Lobe& l : set.lobes)
        if (std::abs(l.t_signal_center_ps - t_s_ps) < 0.5 * t_s_ps &&
            std::abs(l.t_idler_center_ps - t_s_ps) < 0.5 * t_s_ps)
          sub.lobes.push_back(l);
      return sub.total_probability();
    }
  }
  return 0.0;
}

}  // namespace

double fringe_visibility(VisibilityMode mode, const DeviceParams& params,
                         std::optional<double> car) {
  params.validate();
  DeviceMode dev_mode =
      mode == VisibilityMode::active ? DeviceMode::active : DeviceMode::passive;
  TimeBinState state = TimeBinState::bell(0.0);
  // Every aggregate is a single harmonic in the fringe argument, so four
  // quadrature samples recover offset and amplitude exactly.
  double c[4];
  for (int k = 0; k < 4; ++k) {
    double fringe = k * kPi / 2.0;
    PhaseSettings ph;
    ph.phi_s = ph.phi_i = fringe / 2.0;  // shared topology: arg = 2 phi
    ph.phi_p = 0.0;
    auto result = propagate(state, params, dev_mode, ph, Topology::shared);
    c[k] = aggregate_mass(result.port(0, 0), mode, params.t_s_ps);
  }
  double offset = 0.25 * (c[0] + c[1] + c[2] + c[3]);
  double amp = 0.5 * std::hypot(c[0] - c[2], c[1] - c[3]);
  if (offset <= 0.0) throw std::domain_error("fringe_visibility: empty aggregate");
  double v = amp / offset;
  if (car) {
    if (!(*car > 0.0)) throw std::domain_error("fringe_visibility: CAR must be > 0");
    v *= *car / (*car + 2.0);
  }
  return v;
}

double schmidt_number(const LobeSet& lobes, const GridSpec& grid) {
  if (lobes.lobes.empty()) throw std::domain_error("schmidt_number: empty lobe set");
  int n = grid.n_bins;
  Eigen::MatrixXcd amp = Eigen::MatrixXcd::Zero(n, n);
  double root_h = std::sqrt(grid.bin_ps);
  for (const Lobe& l : lobes.lobes) {
    double norm = std::pow(2.0 * kPi * l.width_sigma_ps * l.width_sigma_ps, -0.25);
    Eigen::VectorXcd us(n), ui(n);
    for (int i = 0; i < n; ++i) {
      double x = grid.center(i);
      double gs = x - l.t_signal_center_ps;
      double gi = x - l.t_idler_center_ps;
      double s4 = 4.0 * l.width_sigma_ps * l.width_sigma_ps;
      us(i) = norm * std::exp(-gs * gs / s4) * root_h;
      ui(i) = norm * std::exp(-gi * gi / s4) * root_h;
    }
    amp += l.amplitude * us * ui.transpose();
  }
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(amp);
  double total = 0.0;
  for (int i = 0; i < svd.singularValues().size(); ++i) {
    double s = svd.singularValues()(i);
    total += s * s;
  }
  if (total < 1e-30) throw std::domain_error("schmidt_number: degenerate amplitude");
  double sum_sq = 0.0;
  for (int i = 0; i < svd.singularValues().size(); ++i) {
    double p = svd.singularValues()(i) * svd.singularValues()(i) / total;
    sum_sq += p * p;
  }
  return 1.0 / sum_sq;
}

double schmidt_number(const LobeSet& lobes) {
  if (lobes.lobes.empty()) throw std::domain_error("schmidt_number: empty lobe set");
  double sigma = lobes.lobes.front().width_sigma_ps;
  return schmidt_number(lobes, GridSpec::cover(lobes, 6.0, sigma / 2.0));
}

}  // namespace timebin
