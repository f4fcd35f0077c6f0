#pragma once

#include <optional>
#include <vector>

#include "timebin/device.hpp"

namespace timebin {

/// Uniform 1D bin axis, [min_ps, min_ps + n*bin_ps).
struct GridSpec {
  double min_ps = 0.0;
  double bin_ps = 1.0;
  int n_bins = 0;

  double max_ps() const { return min_ps + bin_ps * n_bins; }
  double center(int i) const { return min_ps + (i + 0.5) * bin_ps; }

  /// Axis covering every lobe center +- margin_sigmas widths on both axes.
  static GridSpec cover(const LobeSet& lobes, double margin_sigmas, double bin_ps);
  /// Same, for the delay axis t_i - t_s.
  static GridSpec cover_delay(const LobeSet& lobes, double margin_sigmas, double bin_ps);
};

/// Joint temporal intensity on a square grid. Values are bin-integrated
/// probability mass (multiply by pair rates for expected counts).
struct Jti {
  GridSpec axis;  // applied to both t_signal and t_idler
  std::vector<double> intensity;  // row-major, [i_signal * n + i_idler]

  double& at(int i_s, int i_i) { return intensity[i_s * axis.n_bins + i_i]; }
  double at(int i_s, int i_i) const { return intensity[i_s * axis.n_bins + i_i]; }
  double total() const;
};

/// Arrival-time-difference histogram (t_i - t_s), bin-integrated mass.
struct DelayHistogram {
  GridSpec axis;
  std::vector<double> mass;

  double total() const;
  /// Mass within |delay - center| <= half_width (bins by center).
  double mass_near(double center_ps, double half_width_ps) const;
};

/// Rasterizes the coherent lobe sum onto the grid. Cross terms between
/// components closer than 4 sigma are included coherently; farther pairs are
/// negligible by construction. Throws std::domain_error naming any lobe not
/// covered by grid +- 4 sigma.
Jti rasterize_jti(const LobeSet& lobes, const GridSpec& grid);

/// Anti-diagonal projection, computed exactly from the lobes.
DelayHistogram project_delay(const LobeSet& lobes, const GridSpec& delay_grid);

/// Same projection from an already-rasterized JTI; each cell's mass is
/// spread over the delay bins it covers. Mass-conserving.
DelayHistogram project_delay(const Jti& jti);

/// Detector-jitter convolution. The delay axis combines two independent
/// detectors, so the kernel FWHM is sqrt(2) * jitter_fwhm; JTI axes take
/// jitter_fwhm each. Mass-preserving while content stays clear of the axis
/// edges.
DelayHistogram smear(const DelayHistogram& hist, double jitter_fwhm_ps);
Jti smear(const Jti& jti, double jitter_fwhm_ps);

/// Which coincidence aggregate the visibility is computed over.
/// passive_central_peak is the central delay-histogram peak (three diagonal
/// lobes, 50% max); passive_central_lobe is the interfering (T,T) lobe alone
/// (the post-selected projective case, 100%); passive_full sums the whole
/// pattern (25% max).
enum class VisibilityMode { passive_full, passive_central_peak, passive_central_lobe, active };

/// Analytic fringe visibility (max-min)/(max+min) of the selected aggregate
/// on output port pair (0,0), swept over the fringe argument. When car is
/// given the result is multiplied by the accidental ceiling CAR/(CAR+2).
double fringe_visibility(VisibilityMode mode, const DeviceParams& params,
                         std::optional<double> car = std::nullopt);

/// Schmidt number K = 1/sum(lambda^2) from the SVD of the discretized joint
/// amplitude. Grid-converged to ~1e-4 at bin <= sigma/2.
double schmidt_number(const LobeSet& lobes, const GridSpec& grid);

/// Schmidt number on a default grid covering the lobes at bin sigma/2.
double schmidt_number(const LobeSet& lobes);

}  // namespace timebin
