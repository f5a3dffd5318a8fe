#pragma once

// Temporal locator: Gaussian smoothing of per-segment probabilities, strict
// thresholding, grouping into events, and grid-search calibration of
// (sigma_g, tau) on frame-level F1.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "headhunt/headbank.hpp"

namespace headhunt {

inline constexpr double kDefaultSigmaG = 1.5;
inline constexpr double kDefaultTau = 0.65;

struct GaussianKernel {
  double sigma = kDefaultSigmaG;
  int radius = 0;               // ceil(4 sigma)
  std::vector<double> weights;  // 2 * radius + 1 taps, sum 1

  static GaussianKernel make(double sigma);
  double at(int offset) const { return weights[static_cast<std::size_t>(offset + radius)]; }
};

// Convolution with truncate-and-renormalize edges: taps falling outside the
// sequence are dropped and the rest rescaled to sum to one.
std::vector<double> smooth(std::span<const double> p, const GaussianKernel& kernel);

struct SegmentEvent {
  int start = 0;  // closed-open segment range
  int end = 0;
  friend bool operator==(const SegmentEvent&, const SegmentEvent&) = default;
};

struct Binarized {
  std::vector<std::uint8_t> y_hat;
  std::vector<SegmentEvent> events;
};

// y_hat[t] = p_smoothed[t] > tau; events are maximal runs of ones.
Binarized binarize(std::span<const double> p_smoothed, double tau);
std::vector<SegmentEvent> group_events(std::span<const std::uint8_t> y_hat);

std::vector<Interval> event_frame_spans(std::span<const SegmentEvent> events, int segment_frames);

// Every frame inherits its segment's value.
std::vector<std::uint8_t> expand_to_frames(std::span<const std::uint8_t> y_hat, int segment_frames);
std::vector<double> expand_to_frames(std::span<const double> values, int segment_frames);
std::vector<std::uint8_t> interval_mask(std::span<const Interval> intervals, std::int64_t n_frames);

struct FrameSequence {
  std::vector<std::uint8_t> predicted;
  std::vector<Interval> truth;
};

struct F1Result {
  double f1 = 0.0;
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  // No positive frame in either prediction or truth; f1 is reported as 1.
  bool degenerate = false;
};

// Micro-averaged over all frames of all videos.
F1Result frame_f1(std::span<const FrameSequence> videos);

struct LocatorGrid {
  std::vector<double> sigmas;
  std::vector<double> taus;

  // sigma in 0.5:0.25:3.0, tau in 0.05:0.05:0.95
  static LocatorGrid default_grid();
};

// Inclusive range "start:step:stop"; values are start + i * step.
std::vector<double> parse_range(const std::string& spec);
std::vector<double> make_range(double start, double step, double stop);

struct ValidationVideo {
  std::string video_id;
  std::vector<double> p;  // raw per-segment probabilities
  int segment_frames = kDefaultSegmentFrames;
  std::vector<Interval> ground_truth;
};

struct LocatorConfig {
  double sigma_g = kDefaultSigmaG;
  double tau = kDefaultTau;
  LocatorGrid grid;
  std::vector<std::vector<double>> f1_surface;  // [sigma][tau]
  double best_f1 = 0.0;
  std::string validation_split;
  std::string averaging = "micro";

  void validate() const;
};

// Exhaustive search; ties go to the smaller sigma, then the smaller tau.
LocatorConfig calibrate(std::span<const ValidationVideo> videos, const LocatorGrid& grid,
                        const std::string& split_id = "validation", int workers = 1);

struct AnomalyCurve {
  std::string video_id;
  int segment_frames = kDefaultSegmentFrames;
  std::vector<double> p;
  std::vector<double> p_smoothed;
  std::vector<std::uint8_t> y_hat;
  std::vector<SegmentEvent> events;
  std::vector<Interval> frame_spans;
};

AnomalyCurve locate(const std::string& video_id, std::vector<double> p, const LocatorConfig& config,
                    int segment_frames);

}  // namespace headhunt
