#include "headhunt/locator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "headhunt/error.hpp"
#include "headhunt/parallel.hpp"

namespace headhunt {

GaussianKernel GaussianKernel::make(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ValidationError("sigma_g must be positive");
  GaussianKernel k;
  k.sigma = sigma;
  k.radius = static_cast<int>(std::ceil(4.0 * sigma));
  k.weights.assign(static_cast<std::size_t>(2 * k.radius + 1), 0.0);
  const double inv = 1.0 / (2.0 * sigma * sigma);
  // Taps are filled pairwise so weights[-j] == weights[j] bit for bit; the
  // tails are summed first.
  k.weights[static_cast<std::size_t>(k.radius)] = 1.0;
  double total = 0.0;
  for (int j = k.radius; j >= 1; --j) {
    const double w = std::exp(-static_cast<double>(j) * static_cast<double>(j) * inv);
    k.weights[static_cast<std::size_t>(k.radius + j)] = w;
    k.weights[static_cast<std::size_t>(k.radius - j)] = w;
    total += 2.0 * w;
  }
  total += 1.0;
  for (auto& w : k.weights) w /= total;
  return k;
}

std::vector<double> smooth(std::span<const double> p, const GaussianKernel& kernel) {
  if (p.empty()) throw ValidationError("cannot smooth an empty sequence");
  const auto n = static_cast<int>(p.size());
  std::vector<double> out(p.size());
  for (int t = 0; t < n; ++t) {
    const int lo = std::max(0, t - kernel.radius);
    const int hi = std::min(n - 1, t + kernel.radius);
    double acc = 0.0;
    double mass = 0.0;
    for (int j = lo; j <= hi; ++j) {
      const double w = kernel.at(t - j);
      acc += w * p[static_cast<std::size_t>(j)];
      mass += w;
    }
    double v = acc / mass;
    // A convex combination stays inside the input range; clamp rounding.
    const auto [mn, mx] = std::minmax_element(p.begin() + lo, p.begin() + hi + 1);
    out[static_cast<std::size_t>(t)] = std::clamp(v, *mn, *mx);
  }
  return out;
}

std::vector<SegmentEvent> group_events(std::span<const std::uint8_t> y_hat) {
  std::vector<SegmentEvent> events;
  const auto n = static_cast<int>(y_hat.size());
  for (int t = 0; t < n;) {
    if (!y_hat[static_cast<std::size_t>(t)]) {
      ++t;
      continue;
    }
    int end = t;
    while (end < n && y_hat[static_cast<std::size_t>(end)]) ++end;
    events.push_back({t, end});
    t = end;
  }
  return events;
}

Binarized binarize(std::span<const double> p_smoothed, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw ValidationError("tau must lie strictly between 0 and 1");
  Binarized out;
  out.y_hat.reserve(p_smoothed.size());
  for (double v : p_smoothed) out.y_hat.push_back(v > tau ? 1 : 0);
  out.events = group_events(out.y_hat);
  return out;
}

std::vector<Interval> event_frame_spans(std::span<const SegmentEvent> events, int segment_frames) {
  std::vector<Interval> spans;
  spans.reserve(events.size());
  for (const auto& e : events) {
    spans.push_back({static_cast<std::int64_t>(e.start) * segment_frames,
                     static_cast<std::int64_t>(e.end) * segment_frames});
  }
  return spans;
}

std::vector<std::uint8_t> expand_to_frames(std::span<const std::uint8_t> y_hat, int segment_frames) {
  std::vector<std::uint8_t> frames;
  frames.reserve(y_hat.size() * static_cast<std::size_t>(segment_frames));
  for (auto v : y_hat) frames.insert(frames.end(), static_cast<std::size_t>(segment_frames), v);
  return frames;
}

std::vector<double> expand_to_frames(std::span<const double> values, int segment_frames) {
  std::vector<double> frames;
  frames.reserve(values.size() * static_cast<std::size_t>(segment_frames));
  for (auto v : values) frames.insert(frames.end(), static_cast<std::size_t>(segment_frames), v);
  return frames;
}

std::vector<std::uint8_t> interval_mask(std::span<const Interval> intervals, std::int64_t n_frames) {
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(n_frames), 0);
  for (const auto& iv : intervals) {
    const auto lo = std::clamp<std::int64_t>(iv.start, 0, n_frames);
    const auto hi = std::clamp<std::int64_t>(iv.end, 0, n_frames);
    for (auto f = lo; f < hi; ++f) mask[static_cast<std::size_t>(f)] = 1;
  }
  return mask;
}

F1Result frame_f1(std::span<const FrameSequence> videos) {
  F1Result r;
  for (const auto& v : videos) {
    const auto n = static_cast<std::int64_t>(v.predicted.size());
    const auto truth = interval_mask(v.truth, n);
    for (std::int64_t f = 0; f < n; ++f) {
      const bool pred = v.predicted[static_cast<std::size_t>(f)] != 0;
      const bool gt = truth[static_cast<std::size_t>(f)] != 0;
      r.tp += pred && gt;
      r.fp += pred && !gt;
      r.fn += !pred && gt;
    }
  }
  if (r.tp == 0 && r.fp == 0 && r.fn == 0) {
    r.degenerate = true;
    r.f1 = 1.0;
    return r;
  }
  r.f1 = 2.0 * static_cast<double>(r.tp) /
         static_cast<double>(2 * r.tp + r.fp + r.fn);
  return r;
}

std::vector<double> make_range(double start, double step, double stop) {
  if (!(step > 0.0) || !std::isfinite(start) || !std::isfinite(stop) || stop < start) {
    throw ValidationError("range needs a positive step and start <= stop");
  }
  const auto count = static_cast<long>(std::floor((stop - start) / step + 1e-9)) + 1;
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(count));
  for (long i = 0; i < count; ++i) values.push_back(start + static_cast<double>(i) * step);
  return values;
}

std::vector<double> parse_range(const std::string& spec) {
  std::vector<double> parts;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ':')) {
    try {
      std::size_t used = 0;
      parts.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ValidationError("malformed range '" + spec + "'; expected start:step:stop");
    }
  }
  if (parts.size() == 1) return parts;
  if (parts.size() != 3) throw ValidationError("malformed range '" + spec + "'; expected start:step:stop");
  return make_range(parts[0], parts[1], parts[2]);
}

LocatorGrid LocatorGrid::default_grid() {
  return {make_range(0.5, 0.25, 3.0), make_range(0.05, 0.05, 0.95)};
}

void LocatorConfig::validate() const {
  GaussianKernel::make(sigma_g);
  if (!(tau > 0.0 && tau < 1.0)) throw ValidationError("tau must lie strictly between 0 and 1");
}

LocatorConfig calibrate(std::span<const ValidationVideo> videos, const LocatorGrid& grid,
                        const std::string& split_id, int workers) {
  if (videos.empty()) throw ValidationError("validation split is empty");
  if (grid.sigmas.empty() || grid.taus.empty()) throw ValidationError("calibration grid is empty");
  for (double tau : grid.taus) {
    if (!(tau > 0.0 && tau < 1.0)) throw ValidationError("grid tau values must lie in (0, 1)");
  }
  for (const auto& v : videos) {
    if (v.p.empty()) throw ValidationError("video " + v.video_id + " has no segments");
  }

  const std::size_t ns = grid.sigmas.size();
  const std::size_t nt = grid.taus.size();
  std::vector<std::vector<double>> surface(ns, std::vector<double>(nt, 0.0));
  parallel_for(ns, workers, [&](std::size_t i) {
    const auto kernel = GaussianKernel::make(grid.sigmas[i]);
    std::vector<std::vector<double>> smoothed;
    smoothed.reserve(videos.size());
    for (const auto& v : videos) smoothed.push_back(smooth(v.p, kernel));
    for (std::size_t j = 0; j < nt; ++j) {
      std::vector<FrameSequence> frames;
      frames.reserve(videos.size());
      for (std::size_t vi = 0; vi < videos.size(); ++vi) {
        const auto bin = binarize(smoothed[vi], grid.taus[j]);
        frames.push_back({expand_to_frames(std::span<const std::uint8_t>(bin.y_hat),
                                           videos[vi].segment_frames),
                          videos[vi].ground_truth});
      }
      surface[i][j] = frame_f1(frames).f1;
    }
  });

  LocatorConfig cfg;
  cfg.grid = grid;
  cfg.validation_split = split_id;
  std::size_t bi = 0, bj = 0;
  for (std::size_t i = 0; i < ns; ++i) {
    for (std::size_t j = 0; j < nt; ++j) {
      const bool better = surface[i][j] > surface[bi][bj];
      const bool tie_smaller = surface[i][j] == surface[bi][bj] &&
                               (grid.sigmas[i] < grid.sigmas[bi] ||
                                (grid.sigmas[i] == grid.sigmas[bi] && grid.taus[j] < grid.taus[bj]));
      if (better || tie_smaller) {
        bi = i;
        bj = j;
      }
    }
  }
  cfg.sigma_g = grid.sigmas[bi];
  cfg.tau = grid.taus[bj];
  cfg.best_f1 = surface[bi][bj];
  cfg.f1_surface = std::move(surface);
  return cfg;
}

AnomalyCurve locate(const std::string& video_id, std::vector<double> p, const LocatorConfig& config,
                    int segment_frames) {
  config.validate();
  if (segment_frames < 1) throw ValidationError("segment_frames must be positive");
  AnomalyCurve c;
  c.video_id = video_id;
  c.segment_frames = segment_frames;
  c.p = std::move(p);
  c.p_smoothed = smooth(c.p, GaussianKernel::make(config.sigma_g));
  auto bin = binarize(c.p_smoothed, config.tau);
  c.y_hat = std::move(bin.y_hat);
  c.events = std::move(bin.events);
  c.frame_spans = event_frame_spans(c.events, segment_frames);
  return c;
}

}  // namespace headhunt
