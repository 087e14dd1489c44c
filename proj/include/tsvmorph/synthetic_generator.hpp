#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tsvmorph/labels.hpp"
#include "tsvmorph/surface_profile.hpp"

namespace tsvmorph {

/// Half-open pixel rectangle [x0, x1) x [y0, y1).
struct Box {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  long area() const { return static_cast<long>(std::max(0, width())) * std::max(0, height()); }
  bool contains(double x, double y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
  friend bool operator==(const Box&, const Box&) = default;
};

double iou(const Box& a, const Box& b);

/// Procedural via parameters. Lengths are in pixels, heights in nanometers.
struct GenParams {
  int frame = 54;
  double via_radius = 14.0;
  double ring_sigma = 1.5;
  int bump_count_min = 2;
  int bump_count_max = 5;
  double amplitude = 100.0;
  double noise_amplitude = 40.0;
  double background_level = 0.0;
  float pitch_um = kDefaultPitchUm;
  std::uint64_t seed = 1;

  /// Throws Error(InvalidParams) naming the violated constraint.
  void validate() const;
};

/// Face level of a ring via above the background, as a fraction of amplitude.
inline constexpr double kPlateauFraction = 0.3;
/// Bulge vias sit higher so their rim stays visible between bumps.
inline constexpr double kBulgeFaceFraction = 0.7;
/// Interior undulation RMS of the two edge classes, as a fraction of amplitude.
inline constexpr double kEdgeClassNoiseFraction = 0.1;

/// Mean height of the via face above the background for a class. Granular
/// faces are lifted by twice the undulation RMS so troughs rarely clip.
double face_level(MorphologyLabel label, const GenParams& p);

/// Radius of the rim circle that carries rings and bulges.
inline double rim_radius(const GenParams& p) { return p.via_radius - 2.0; }

/// Single via centered in a frame x frame height map.
HeightMap generate_via(MorphologyLabel label, const GenParams& p);

/// Tight bounding box of the via disk inside a generated frame.
Box via_box_in_frame(const GenParams& p);

struct MosaicBox {
  int row = 0, col = 0;
  Box box;
  MorphologyLabel label = MorphologyLabel::Granular;
};

struct Mosaic {
  HeightMap heightmap;
  std::vector<MosaicBox> boxes;  // row-major
};

/// Vias laid out row-major on a regular grid; neighbouring via disks are
/// separated by `gap` pixels of flat background, with the same border.
/// Via i is generated with a seed derived from (p.seed, i).
Mosaic generate_mosaic(std::uint32_t rows, std::uint32_t cols,
                       std::span<const MorphologyLabel> labels, const GenParams& p, int gap);

/// Seed mixing used for per-item sub-streams.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

// Statistics on a generated frame, relative to the background level.
struct ViaStats {
  double rim_mean = 0;        // annulus rim_radius +- ring_sigma
  double interior_mean = 0;   // disk of radius via_radius / 2
  double rim_rms = 0;         // about the annulus mean
  double interior_rms = 0;    // about the interior mean
  double rim_coverage = 0;    // fraction of rim angles whose peak height exceeds amplitude / 2
};

ViaStats via_stats(const HeightMap& frame, const GenParams& p);

/// Class predicted from ViaStats alone (rim coverage and contrast).
MorphologyLabel classify_by_stats(const ViaStats& s, const GenParams& p);

}  // namespace tsvmorph
