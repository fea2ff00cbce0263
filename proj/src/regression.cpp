#include "snrprobe/regression.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "snrprobe/error.hpp"

namespace snrprobe {

RegressionSummary ols_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::LengthMismatch, "x and y differ in length");
  if (x.size() < 3) throw Error(ErrorCode::TooFewRows, "a line fit needs at least 3 points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0.0) throw Error(ErrorCode::ConstantPredictor, "x is constant");

  RegressionSummary s;
  s.n = x.size();
  s.slope = sxy / sxx;
  s.intercept = my - s.slope * mx;
  if (syy == 0.0) {
    s.degenerate = true;
    s.r_squared = 0.0;
    return s;
  }
  double ss_res = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (s.intercept + s.slope * x[i]);
    ss_res += r * r;
  }
  s.r_squared = std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
  return s;
}

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

double spearman_rho(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::LengthMismatch, "x and y differ in length");
  if (x.size() < 2) throw Error(ErrorCode::TooFewRows, "rank correlation needs at least 2 points");
  const std::vector<double> rx = average_ranks(x), ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mean = (n + 1.0) / 2.0;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    const double a = rx[i] - mean, b = ry[i] - mean;
    sxy += a * b;
    sxx += a * a;
    syy += b * b;
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorCode::AllTied, "all values tied");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

namespace {

RegressionSummary fit_series(const CkaSeries& s, const std::vector<int>& grid) {
  std::map<int, double> by_snr;
  for (std::size_t i = 0; i < s.snr_db.size(); ++i) by_snr[s.snr_db[i]] = s.cka[i];
  std::vector<double> x, y;
  for (int snr : grid) {
    auto it = by_snr.find(snr);
    if (it == by_snr.end()) {
      throw Error(ErrorCode::IncompleteGrid, "layer " + s.layer_id + " has no CKA at " + std::to_string(snr) + " dB");
    }
    x.push_back(snr);
    y.push_back(it->second);
  }
  RegressionSummary r = ols_fit(x, y);
  r.layer_id = s.layer_id;
  return r;
}

}  // namespace

void mark_local_slope_maxima(std::vector<LayerTrend>& trends) {
  for (std::size_t i = 0; i < trends.size(); ++i) {
    bool is_max = true;
    if (i > 0 && trends[i - 1].block == trends[i].block) is_max &= trends[i].fit.slope > trends[i - 1].fit.slope;
    if (i + 1 < trends.size() && trends[i + 1].block == trends[i].block) {
      is_max &= trends[i].fit.slope > trends[i + 1].fit.slope;
    }
    trends[i].is_local_slope_max = is_max;
  }
}

std::vector<LayerTrend> profile_layers(const std::vector<LayerInfo>& layers, const std::vector<CkaSeries>& averaged,
                                       const std::vector<std::vector<CkaSeries>>& per_noise,
                                       const std::vector<int>& snr_grid, FitMode mode) {
  std::map<std::string, const CkaSeries*> avg_by_layer;
  for (const CkaSeries& s : averaged) avg_by_layer[s.layer_id] = &s;
  std::map<std::string, std::vector<const CkaSeries*>> noise_by_layer;
  for (const auto& group : per_noise) {
    for (const CkaSeries& s : group) noise_by_layer[s.layer_id].push_back(&s);
  }

  std::vector<LayerTrend> out;
  for (const LayerInfo& l : layers) {
    LayerTrend t;
    t.block = l.block;
    t.depth_index = l.depth;
    t.is_skip_input = l.skip_input;
    t.is_skip_output = l.skip_output;
    if (mode == FitMode::AveragedValues) {
      auto it = avg_by_layer.find(l.id);
      if (it == avg_by_layer.end()) throw Error(ErrorCode::IncompleteGrid, "no CKA values for layer " + l.id);
      t.fit = fit_series(*it->second, snr_grid);
    } else {
      auto it = noise_by_layer.find(l.id);
      if (it == noise_by_layer.end()) throw Error(ErrorCode::IncompleteGrid, "no per-noise CKA values for layer " + l.id);
      RegressionSummary acc;
      acc.layer_id = l.id;
      for (const CkaSeries* s : it->second) {
        const RegressionSummary r = fit_series(*s, snr_grid);
        acc.slope += r.slope;
        acc.intercept += r.intercept;
        acc.r_squared += r.r_squared;
        acc.n = r.n;
        acc.degenerate = acc.degenerate || r.degenerate;
      }
      const double k = static_cast<double>(it->second.size());
      acc.slope /= k;
      acc.intercept /= k;
      acc.r_squared /= k;
      t.fit = acc;
    }
    out.push_back(std::move(t));
  }
  mark_local_slope_maxima(out);
  return out;
}

std::vector<CkaSeries> series_from_points(const std::vector<LayerInfo>& layers, const std::vector<CKAPoint>& points) {
  std::vector<CkaSeries> out;
  for (const LayerInfo& l : layers) {
    CkaSeries s;
    s.layer_id = l.id;
    for (const CKAPoint& p : points) {
      if (p.layer_id == l.id) {
        s.snr_db.push_back(p.snr_db);
        s.cka.push_back(p.cka);
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace snrprobe
