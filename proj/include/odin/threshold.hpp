#pragma once

// Elbow thresholds on the quantile curve of an influence measure.
//
// The sorted scores form a convex, increasing curve: flat for the bulk of
// the sample, rising sharply in the upper tail. Kneedle normalises both axes
// to [0, 1] and looks at the difference curve d = x - y, which measures how
// far the curve sags below the chord. Its maximum is the elbow; the elbow is
// accepted if d falls by at least sensitivity * (mean x spacing) somewhere
// before it. Scores strictly above the elbow value are flagged.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "odin/error.hpp"
#include "odin/influence.hpp"

namespace odin {

inline constexpr double kDefaultSensitivity = 1.0;
inline constexpr double kFallbackQuantile = 0.99;
inline constexpr std::size_t kMinCurvePoints = 10;

struct QuantileCurve {
  std::vector<double> p;      // k / N, k = 1..N
  std::vector<double> value;  // k-th order statistic

  std::size_t size() const { return p.size(); }
};

struct ThresholdResult {
  double threshold = 0.0;
  double knee_quantile = 0.0;   // level at which the interpolated curve equals threshold
  std::size_t knee_index = 0;   // 0-based order statistic at the elbow (or fallback point)
  bool fallback_used = false;
  QuantileCurve curve;
};

inline QuantileCurve quantile_curve(const std::vector<double>& scores) {
  require(scores.size() >= kMinCurvePoints, Errc::too_few_scores,
          "quantile curve needs at least " + std::to_string(kMinCurvePoints) + " scores, got " +
              std::to_string(scores.size()));
  for (double s : scores) require(std::isfinite(s), Errc::non_finite, "non-finite score");
  QuantileCurve c;
  c.value = scores;
  std::sort(c.value.begin(), c.value.end());
  const double n = static_cast<double>(scores.size());
  c.p.resize(scores.size());
  for (std::size_t k = 0; k < scores.size(); ++k) c.p[k] = static_cast<double>(k + 1) / n;
  return c;
}

namespace detail {

inline ThresholdResult percentile_fallback(QuantileCurve curve) {
  const std::size_t n = curve.size();
  auto k = static_cast<std::size_t>(std::ceil(kFallbackQuantile * static_cast<double>(n)));
  k = std::clamp<std::size_t>(k, 1, n);
  ThresholdResult r;
  r.fallback_used = true;
  r.knee_index = k - 1;
  r.threshold = curve.value[k - 1];
  r.knee_quantile = curve.p[k - 1];
  r.curve = std::move(curve);
  return r;
}

}  // namespace detail

inline ThresholdResult kneedle(QuantileCurve curve, double sensitivity = kDefaultSensitivity) {
  const std::size_t n = curve.size();
  require(n >= kMinCurvePoints && curve.value.size() == n, Errc::too_few_scores,
          "kneedle needs at least " + std::to_string(kMinCurvePoints) + " curve points");
  require(sensitivity >= 0.0 && std::isfinite(sensitivity), Errc::invalid_config, "sensitivity must be >= 0");
  for (std::size_t k = 1; k < n; ++k)
    require(curve.value[k] >= curve.value[k - 1] && curve.p[k] > curve.p[k - 1], Errc::invalid_argument,
            "quantile curve must be non-decreasing");

  const double x0 = curve.p.front(), xr = curve.p.back() - x0;
  const double y0 = curve.value.front(), yr = curve.value.back() - y0;
  if (!(yr > 0.0)) return detail::percentile_fallback(std::move(curve));

  std::vector<double> diff(n);
  for (std::size_t k = 0; k < n; ++k) diff[k] = (curve.p[k] - x0) / xr - (curve.value[k] - y0) / yr;

  // elbow: largest sag, ties resolved towards the upper end
  std::size_t knee = n - 2;
  for (std::size_t k = n - 2; k-- > 1;)
    if (diff[k] > diff[knee]) knee = k;

  const double mean_dx = 1.0 / static_cast<double>(n - 1);
  const double cutoff = diff[knee] - sensitivity * mean_dx;
  bool confirmed = false;
  for (std::size_t k = knee; k-- > 0;)
    if (diff[k] < cutoff) {
      confirmed = true;
      break;
    }
  if (!confirmed || !(diff[knee] > 0.0)) return detail::percentile_fallback(std::move(curve));

  // cut halfway between the elbow and the next order statistic; the set of
  // scores above it is exactly the set strictly above the elbow value
  ThresholdResult r;
  r.knee_index = knee;
  r.threshold = 0.5 * (curve.value[knee] + curve.value[knee + 1]);
  r.knee_quantile = 0.5 * (curve.p[knee] + curve.p[knee + 1]);
  r.curve = std::move(curve);
  return r;
}

inline ThresholdResult kneedle_threshold(const std::vector<double>& scores, double sensitivity = kDefaultSensitivity) {
  return kneedle(quantile_curve(scores), sensitivity);
}

struct OutlierFlags {
  ThresholdResult im1;
  ThresholdResult im2;
  std::vector<bool> flag;
  std::vector<bool> exceeded_im1;
  std::vector<bool> exceeded_im2;

  std::size_t count() const { return static_cast<std::size_t>(std::count(flag.begin(), flag.end(), true)); }
};

/// Flags subjects whose score exceeds a threshold.
inline std::vector<bool> exceeds(const std::vector<double>& scores, double threshold) {
  std::vector<bool> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = scores[i] > threshold;
  return out;
}

/// Independent elbow thresholds on IM1 and IM2; a subject is an outlier if
/// either measure exceeds its threshold.
inline OutlierFlags flag(const InfluenceScores& scores, double sensitivity = kDefaultSensitivity) {
  require(scores.im1.size() == scores.im2.size(), Errc::dimension_mismatch, "IM1 and IM2 differ in length");
  OutlierFlags f;
  f.im1 = kneedle_threshold(scores.im1, sensitivity);
  f.im2 = kneedle_threshold(scores.im2, sensitivity);
  f.exceeded_im1 = exceeds(scores.im1, f.im1.threshold);
  f.exceeded_im2 = exceeds(scores.im2, f.im2.threshold);
  f.flag.resize(scores.size());
  for (std::size_t i = 0; i < f.flag.size(); ++i) f.flag[i] = f.exceeded_im1[i] || f.exceeded_im2[i];
  return f;
}

// ---- output files ----

inline nlohmann::json threshold_to_json(const ThresholdResult& t) {
  return {{"threshold", t.threshold}, {"knee_quantile", t.knee_quantile}, {"fallback_used", t.fallback_used}};
}

inline nlohmann::json thresholds_to_json(const OutlierFlags& f) {
  return {{"im1", threshold_to_json(f.im1)}, {"im2", threshold_to_json(f.im2)}};
}

inline void write_flags_csv(const std::vector<std::string>& ids, const OutlierFlags& f, std::ostream& out) {
  require(ids.size() == f.flag.size(), Errc::dimension_mismatch, "flags and subject ids differ in length");
  out << "subject_id,flag,exceeded_im1,exceeded_im2\n";
  for (std::size_t i = 0; i < ids.size(); ++i)
    out << ids[i] << ',' << int(f.flag[i]) << ',' << int(f.exceeded_im1[i]) << ',' << int(f.exceeded_im2[i]) << '\n';
}

inline void write_curve_csv(const QuantileCurve& c, std::ostream& out) {
  out << "p,value\n";
  char buf[80];
  for (std::size_t k = 0; k < c.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", c.p[k], c.value[k]);
    out << buf;
  }
}

}  // namespace odin
