#include "tsvmorph/synthetic_generator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "tsvmorph/error.hpp"

namespace tsvmorph {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kNoiseWaves = 20;
constexpr double kMinWavelength = 4.0;
constexpr double kMaxWavelength = 16.0;
constexpr double kRingGapMax = 0.10;  // largest missing fraction of the ring
constexpr double kGranularRmsRatioMin = 0.6;
constexpr double kFloorFraction = 0.03;

double center_of(const GenParams& p) { return p.frame / 2.0; }

// Pixel (x, y) samples the continuous point (x + 0.5, y + 0.5).
double radius_at(const GenParams& p, int x, int y) {
  const double c = center_of(p);
  return std::hypot(x + 0.5 - c, y + 0.5 - c);
}

double angle_at(const GenParams& p, int x, int y) {
  const double c = center_of(p);
  const double a = std::atan2(y + 0.5 - c, x + 0.5 - c);
  return a < 0 ? a + kTwoPi : a;
}

double unit(std::mt19937_64& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

// Sum of random-phase plane waves, rescaled to unit RMS over the via disk.
HeightGrid band_limited_noise(const GenParams& p, std::mt19937_64& rng) {
  struct Wave { double kx, ky, phase; };
  std::vector<Wave> waves;
  for (int i = 0; i < kNoiseWaves; ++i) {
    const double wavelength = kMinWavelength + (kMaxWavelength - kMinWavelength) * unit(rng);
    const double dir = kTwoPi * unit(rng);
    const double k = kTwoPi / wavelength;
    waves.push_back({k * std::cos(dir), k * std::sin(dir), kTwoPi * unit(rng)});
  }
  HeightGrid g(p.frame, p.frame);
  double sum = 0, sum_sq = 0;
  long n = 0;
  for (int y = 0; y < p.frame; ++y)
    for (int x = 0; x < p.frame; ++x) {
      double v = 0;
      for (const Wave& w : waves) v += std::sin(w.kx * x + w.ky * y + w.phase);
      g(y, x) = static_cast<float>(v);
      if (radius_at(p, x, y) <= p.via_radius) {
        sum += v;
        sum_sq += v * v;
        ++n;
      }
    }
  const double mean = sum / n;
  const double rms = std::sqrt(std::max(sum_sq / n - mean * mean, 1e-12));
  g = (g.array() - static_cast<float>(mean)) / static_cast<float>(rms);
  return g;
}

double rim_to_interior_rms(const HeightGrid& g, const GenParams& p) {
  const double rim = rim_radius(p);
  double rs = 0, rq = 0, is = 0, iq = 0;
  long rn = 0, in = 0;
  for (int y = 0; y < p.frame; ++y)
    for (int x = 0; x < p.frame; ++x) {
      const double r = radius_at(p, x, y), v = g(y, x);
      if (std::abs(r - rim) <= p.ring_sigma) { rs += v; rq += v * v; ++rn; }
      if (r <= p.via_radius / 2) { is += v; iq += v * v; ++in; }
    }
  const double rm = rs / rn, im = is / in;
  const double rim_rms = std::sqrt(std::max(0.0, rq / rn - rm * rm));
  const double in_rms = std::sqrt(std::max(1e-12, iq / in - im * im));
  return rim_rms / in_rms;
}

double angular_distance(double a, double b) {
  const double d = std::fmod(std::abs(a - b), kTwoPi);
  return std::min(d, kTwoPi - d);
}

std::vector<double> bulge_angles(int k, std::mt19937_64& rng) {
  const double min_sep = kTwoPi / (2.0 * k);
  std::vector<double> angles;
  for (int attempt = 0; attempt < 10000 && static_cast<int>(angles.size()) < k; ++attempt) {
    const double a = kTwoPi * unit(rng);
    const bool clear = std::all_of(angles.begin(), angles.end(),
                                   [&](double b) { return angular_distance(a, b) >= min_sep; });
    if (clear) angles.push_back(a);
  }
  // Evenly spaced fallback; unreachable in practice since k <= 12.
  if (static_cast<int>(angles.size()) < k) {
    const double base = kTwoPi * unit(rng);
    angles.clear();
    for (int i = 0; i < k; ++i) angles.push_back(std::fmod(base + kTwoPi * i / k, kTwoPi));
  }
  return angles;
}

}  // namespace

double face_level(MorphologyLabel label, const GenParams& p) {
  switch (label) {
    case MorphologyLabel::Granular: return kPlateauFraction * p.amplitude + 2.0 * p.noise_amplitude;
    case MorphologyLabel::EdgeRing: return kPlateauFraction * p.amplitude;
    case MorphologyLabel::EdgeBulge: return kBulgeFaceFraction * p.amplitude;
  }
  return 0.0;
}

double iou(const Box& a, const Box& b) {
  const Box inter{std::max(a.x0, b.x0), std::max(a.y0, b.y0), std::min(a.x1, b.x1),
                  std::min(a.y1, b.y1)};
  const long i = inter.width() > 0 && inter.height() > 0 ? inter.area() : 0;
  const long u = a.area() + b.area() - i;
  return u > 0 ? static_cast<double>(i) / u : 0.0;
}

void GenParams::validate() const {
  auto fail = [](const std::string& what) { throw Error(Errc::InvalidParams, what); };
  if (frame < 8) fail("frame must be at least 8");
  if (!(via_radius > 2.0) || !(via_radius < frame / 2.0)) fail("via_radius must lie in (2, frame/2)");
  if (!(ring_sigma > 0.0)) fail("ring_sigma must be positive");
  if (bump_count_min < 1 || bump_count_max > 12 || bump_count_min > bump_count_max)
    fail("bump_count_range must be a non-empty subset of [1, 12]");
  if (!(amplitude > 0.0) || !std::isfinite(amplitude)) fail("amplitude must be positive");
  if (!(noise_amplitude >= 0.0) || !std::isfinite(noise_amplitude))
    fail("noise_amplitude must be non-negative");
  if (!std::isfinite(background_level)) fail("background_level must be finite");
  if (!(pitch_um > 0.0f)) fail("pitch must be positive");
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over the combined value
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

HeightMap generate_via(MorphologyLabel label, const GenParams& p) {
  p.validate();
  std::mt19937_64 rng(derive_seed(p.seed, static_cast<std::uint64_t>(index_of(label))));

  const double face = face_level(label, p);
  const double rim = rim_radius(p);
  HeightGrid relief = HeightGrid::Zero(p.frame, p.frame);

  switch (label) {
    case MorphologyLabel::Granular: {
      // Redraw until the periphery and the interior undulate comparably.
      HeightGrid noise = band_limited_noise(p, rng);
      for (int attempt = 0; attempt < 64; ++attempt) {
        const double ratio = rim_to_interior_rms(noise, p);
        if (ratio >= kGranularRmsRatioMin && ratio <= 1.0 / kGranularRmsRatioMin) break;
        noise = band_limited_noise(p, rng);
      }
      relief = noise * static_cast<float>(p.noise_amplitude);
      break;
    }
    case MorphologyLabel::EdgeRing: {
      const HeightGrid noise = band_limited_noise(p, rng);
      // One missing arc of up to kRingGapMax of the circumference, soft-edged.
      const double gap_width = kTwoPi * kRingGapMax * unit(rng);
      const double gap_center = kTwoPi * unit(rng);
      for (int y = 0; y < p.frame; ++y)
        for (int x = 0; x < p.frame; ++x) {
          const double d = radius_at(p, x, y) - rim;
          double ridge = p.amplitude * std::exp(-d * d / (2 * p.ring_sigma * p.ring_sigma));
          const double off = angular_distance(angle_at(p, x, y), gap_center);
          if (off < gap_width / 2) ridge *= 0.0;
          relief(y, x) = static_cast<float>(ridge + kEdgeClassNoiseFraction * p.amplitude * noise(y, x));
        }
      break;
    }
    case MorphologyLabel::EdgeBulge: {
      const HeightGrid noise = band_limited_noise(p, rng);
      const int k = std::uniform_int_distribution<int>(p.bump_count_min, p.bump_count_max)(rng);
      const double c = center_of(p);
      const double bump_sigma = 2.0 * p.ring_sigma;
      std::vector<std::pair<double, double>> centers;
      for (double a : bulge_angles(k, rng))
        centers.emplace_back(c + rim * std::cos(a), c + rim * std::sin(a));
      for (int y = 0; y < p.frame; ++y)
        for (int x = 0; x < p.frame; ++x) {
          double v = kEdgeClassNoiseFraction * p.amplitude * noise(y, x);
          for (auto [bx, by] : centers) {
            const double dx = x + 0.5 - bx, dy = y + 0.5 - by;
            v += p.amplitude * std::exp(-(dx * dx + dy * dy) / (2 * bump_sigma * bump_sigma));
          }
          relief(y, x) = static_cast<float>(v);
        }
      break;
    }
  }

  const double lo = p.background_level;
  const double hi = p.background_level + 4.0 * p.amplitude;
  HeightGrid h(p.frame, p.frame);
  for (int y = 0; y < p.frame; ++y)
    for (int x = 0; x < p.frame; ++x) {
      if (radius_at(p, x, y) > p.via_radius) {
        h(y, x) = static_cast<float>(lo);
        continue;
      }
      // Inside the disk the face never sinks to the background level.
      const double v = lo + face + relief(y, x);
      h(y, x) = static_cast<float>(std::clamp(v, lo + kFloorFraction * p.amplitude, hi));
    }
  return HeightMap(std::move(h), p.pitch_um);
}

Box via_box_in_frame(const GenParams& p) {
  Box b{p.frame, p.frame, 0, 0};
  for (int y = 0; y < p.frame; ++y)
    for (int x = 0; x < p.frame; ++x)
      if (radius_at(p, x, y) <= p.via_radius) {
        b.x0 = std::min(b.x0, x);
        b.y0 = std::min(b.y0, y);
        b.x1 = std::max(b.x1, x + 1);
        b.y1 = std::max(b.y1, y + 1);
      }
  return b;
}

Mosaic generate_mosaic(std::uint32_t rows, std::uint32_t cols,
                       std::span<const MorphologyLabel> labels, const GenParams& p, int gap) {
  p.validate();
  if (rows == 0 || cols == 0) throw Error(Errc::InvalidParams, "rows and cols must be >= 1");
  if (labels.size() != static_cast<std::size_t>(rows) * cols)
    throw Error(Errc::LabelCountMismatch, std::to_string(labels.size()) + " labels for a " +
                                              std::to_string(rows) + "x" + std::to_string(cols) +
                                              " mosaic");
  if (gap < 2) throw Error(Errc::InvalidParams, "gap must be >= 2");

  const Box disk = via_box_in_frame(p);
  const int w = disk.width(), h = disk.height();
  const int width = static_cast<int>(cols) * w + (static_cast<int>(cols) + 1) * gap;
  const int height = static_cast<int>(rows) * h + (static_cast<int>(rows) + 1) * gap;

  HeightGrid grid = HeightGrid::Constant(height, width, static_cast<float>(p.background_level));
  std::vector<MosaicBox> boxes;
  for (std::uint32_t r = 0; r < rows; ++r)
    for (std::uint32_t c = 0; c < cols; ++c) {
      const std::size_t i = r * cols + c;
      GenParams vp = p;
      vp.seed = derive_seed(p.seed, 1000 + i);
      const HeightMap via = generate_via(labels[i], vp);
      const int x0 = gap + static_cast<int>(c) * (w + gap);
      const int y0 = gap + static_cast<int>(r) * (h + gap);
      grid.block(y0, x0, h, w) = via.samples().block(disk.y0, disk.x0, h, w);
      boxes.push_back({static_cast<int>(r), static_cast<int>(c), Box{x0, y0, x0 + w, y0 + h},
                       labels[i]});
    }
  return Mosaic{HeightMap(std::move(grid), p.pitch_um), std::move(boxes)};
}

ViaStats via_stats(const HeightMap& frame, const GenParams& p) {
  const HeightGrid& s = frame.samples();
  const double rim = rim_radius(p);
  constexpr int kAngleBins = 360;
  std::vector<double> peak(kAngleBins, -1e300);

  double rim_sum = 0, rim_sq = 0, in_sum = 0, in_sq = 0;
  long rim_n = 0, in_n = 0;
  for (int y = 0; y < static_cast<int>(s.rows()); ++y)
    for (int x = 0; x < static_cast<int>(s.cols()); ++x) {
      const double v = s(y, x) - p.background_level;
      const double r = radius_at(p, x, y);
      if (std::abs(r - rim) <= p.ring_sigma) {
        rim_sum += v;
        rim_sq += v * v;
        ++rim_n;
        const int bin = std::min(kAngleBins - 1, static_cast<int>(angle_at(p, x, y) / kTwoPi * kAngleBins));
        peak[bin] = std::max(peak[bin], v);
      }
      if (r <= p.via_radius / 2) {
        in_sum += v;
        in_sq += v * v;
        ++in_n;
      }
    }
  ViaStats st;
  st.rim_mean = rim_sum / rim_n;
  st.interior_mean = in_sum / in_n;
  st.rim_rms = std::sqrt(std::max(0.0, rim_sq / rim_n - st.rim_mean * st.rim_mean));
  st.interior_rms = std::sqrt(std::max(0.0, in_sq / in_n - st.interior_mean * st.interior_mean));
  const double cut = st.interior_mean + p.amplitude / 2;
  int covered = 0, seen = 0;
  for (double v : peak) {
    if (v <= -1e299) continue;
    ++seen;
    if (v > cut) ++covered;
  }
  st.rim_coverage = seen ? static_cast<double>(covered) / seen : 0.0;
  return st;
}

MorphologyLabel classify_by_stats(const ViaStats& s, const GenParams& p) {
  if (s.interior_rms > 0.25 * p.amplitude) return MorphologyLabel::Granular;
  if (s.rim_coverage >= 0.7) return MorphologyLabel::EdgeRing;
  return MorphologyLabel::EdgeBulge;
}

}  // namespace tsvmorph
