// Copyright 2026 The uhdiqa Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "uhdiqa/metrics.hpp"

#include <Eigen/Dense>
#include <boost/math/distributions/fisher_f.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>

#include "uhdiqa/error.hpp"

namespace uhdiqa {

namespace {

void CheckPaired(std::span<const double> a, std::span<const double> b, std::size_t min_n) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::kShape, "paired vectors differ in length");
  }
  if (a.size() < min_n) {
    throw Error(ErrorKind::kDegenerateInput,
                "need at least " + std::to_string(min_n) + " samples");
  }
}

// Number of pairs i < j with v[i] > v[j], by merge sort.
std::int64_t CountInversions(std::vector<double>& v, std::vector<double>& scratch,
                             std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::int64_t count = CountInversions(v, scratch, lo, mid) + CountInversions(v, scratch, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      count += static_cast<std::int64_t>(mid - i);
      scratch[k++] = v[j++];
    } else {
      scratch[k++] = v[i++];
    }
  }
  while (i < mid) scratch[k++] = v[i++];
  while (j < hi) scratch[k++] = v[j++];
  std::copy(scratch.begin() + static_cast<std::ptrdiff_t>(lo),
            scratch.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return count;
}

// Sum of t(t-1)/2 over runs of equal values in a sorted sequence.
template <typename Eq>
std::int64_t TiedPairs(std::size_t n, Eq&& equal) {
  std::int64_t ties = 0;
  std::size_t run = 1;
  for (std::size_t i = 1; i <= n; ++i) {
    if (i < n && equal(i - 1, i)) {
      ++run;
    } else {
      ties += static_cast<std::int64_t>(run) * static_cast<std::int64_t>(run - 1) / 2;
      run = 1;
    }
  }
  return ties;
}

double Median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double StdDev(std::span<const double> v) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

double SampleVariance(std::span<const double> v) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(v.size() - 1);
}

double Sigmoid(double u) {
  if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

double SumSquaredError(const LogisticParams& p, std::span<const double> x,
                       std::span<const double> y) {
  double sse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = logistic4(p, x[i]) - y[i];
    sse += r * r;
  }
  return sse;
}

}  // namespace

std::vector<double> mid_ranks(std::span<const double> v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && v[idx[j]] == v[idx[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j + 1);  // mean of i+1 .. j
    for (std::size_t k = i; k < j; ++k) ranks[idx[k]] = rank;
    i = j;
  }
  return ranks;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  CheckPaired(a, b, 2);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) {
    throw Error(ErrorKind::kUndefinedCorrelation, "correlation of a constant vector");
  }
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double srcc(std::span<const double> pred, std::span<const double> mos) {
  CheckPaired(pred, mos, 2);
  const auto rp = mid_ranks(pred);
  const auto rm = mid_ranks(mos);
  return pearson(rp, rm);
}

double krcc(std::span<const double> pred, std::span<const double> mos) {
  CheckPaired(pred, mos, 2);
  const std::size_t n = pred.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return pred[a] != pred[b] ? pred[a] < pred[b] : mos[a] < mos[b];
  });
  std::vector<double> xs(n), ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = pred[idx[i]];
    ys[i] = mos[idx[i]];
  }
  const std::int64_t x_ties = TiedPairs(n, [&](std::size_t a, std::size_t b) { return xs[a] == xs[b]; });
  const std::int64_t joint_ties = TiedPairs(
      n, [&](std::size_t a, std::size_t b) { return xs[a] == xs[b] && ys[a] == ys[b]; });

  std::vector<double> scratch(n);
  std::vector<double> sorted_y = ys;
  const std::int64_t discordant = CountInversions(sorted_y, scratch, 0, n);
  const std::int64_t y_ties =
      TiedPairs(n, [&](std::size_t a, std::size_t b) { return sorted_y[a] == sorted_y[b]; });

  const std::int64_t total = static_cast<std::int64_t>(n) * static_cast<std::int64_t>(n - 1) / 2;
  if (total == x_ties || total == y_ties) {
    throw Error(ErrorKind::kUndefinedCorrelation, "Kendall tau of an all-tied vector");
  }
  const double s = static_cast<double>(total - x_ties - y_ties + joint_ties - 2 * discordant);
  const double tau = s / std::sqrt(static_cast<double>(total - x_ties)) /
                     std::sqrt(static_cast<double>(total - y_ties));
  return std::clamp(tau, -1.0, 1.0);
}

double logistic4(const LogisticParams& p, double x) {
  return (p.beta1 - p.beta2) * Sigmoid((x - p.beta3) / p.beta4) + p.beta2;
}

std::vector<double> apply_logistic(const LogisticParams& p, std::span<const double> x) {
  std::vector<double> out(x.size());
  std::transform(x.begin(), x.end(), out.begin(), [&](double v) { return logistic4(p, v); });
  return out;
}

LogisticParams fit_logistic(std::span<const double> pred, std::span<const double> mos) {
  CheckPaired(pred, mos, 5);
  const double spread = StdDev(pred);
  if (spread == 0.0) {
    throw Error(ErrorKind::kDegenerateInput, "cannot fit a logistic to constant predictions");
  }
  const std::size_t n = pred.size();
  LogisticParams p;
  p.beta1 = *std::max_element(mos.begin(), mos.end());
  p.beta2 = *std::min_element(mos.begin(), mos.end());
  p.beta3 = Median({pred.begin(), pred.end()});
  p.beta4 = spread;
  p.sse = SumSquaredError(p, pred, mos);

  double lambda = 1e-3;
  Eigen::MatrixXd jac(static_cast<Eigen::Index>(n), 4);
  Eigen::VectorXd resid(static_cast<Eigen::Index>(n));
  for (p.iterations = 0; p.iterations < 1000 && !p.converged; ++p.iterations) {
    if (p.sse == 0.0) {
      p.converged = true;
      break;
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double u = (pred[i] - p.beta3) / p.beta4;
      const double s = Sigmoid(u);
      const double ds = (p.beta1 - p.beta2) * s * (1.0 - s);
      const auto r = static_cast<Eigen::Index>(i);
      jac(r, 0) = s;
      jac(r, 1) = 1.0 - s;
      jac(r, 2) = -ds / p.beta4;
      jac(r, 3) = -ds * u / p.beta4;
      resid(r) = logistic4(p, pred[i]) - mos[i];
    }
    const Eigen::Matrix4d jtj = jac.transpose() * jac;
    const Eigen::Vector4d grad = jac.transpose() * resid;
    Eigen::Vector4d diag = jtj.diagonal();
    const double floor = std::max(diag.maxCoeff(), 1.0) * 1e-12;
    for (int k = 0; k < 4; ++k) diag(k) = std::max(diag(k), floor);

    while (true) {
      Eigen::Matrix4d a = jtj;
      a.diagonal() += lambda * diag;
      const Eigen::Vector4d delta = a.ldlt().solve(-grad);
      LogisticParams trial = p;
      trial.beta1 += delta(0);
      trial.beta2 += delta(1);
      trial.beta3 += delta(2);
      trial.beta4 += delta(3);
      trial.sse = delta.allFinite() && trial.beta4 != 0.0
                      ? SumSquaredError(trial, pred, mos)
                      : std::numeric_limits<double>::infinity();
      if (std::isfinite(trial.sse) && trial.sse < p.sse) {
        const double rel = (p.sse - trial.sse) / p.sse;
        trial.iterations = p.iterations;
        p = trial;
        lambda = std::max(lambda / 10.0, 1e-12);
        if (rel < 1e-10) p.converged = true;
        break;
      }
      lambda *= 10.0;
      if (lambda > 1e16) {
        // No descent direction left: the current point is a local minimum.
        p.converged = true;
        break;
      }
    }
  }
  if (p.beta4 < 0.0) {
    std::swap(p.beta1, p.beta2);
    p.beta4 = -p.beta4;
  }
  return p;
}

MappedAgreement plcc_rmse_after_mapping(std::span<const double> pred,
                                        std::span<const double> mos) {
  MappedAgreement out;
  out.mapping = fit_logistic(pred, mos);
  const auto mapped = apply_logistic(out.mapping, pred);
  double ss = 0.0;
  for (std::size_t i = 0; i < mapped.size(); ++i) ss += (mapped[i] - mos[i]) * (mapped[i] - mos[i]);
  out.rmse = std::sqrt(ss / static_cast<double>(mapped.size()));
  out.plcc = pearson(mapped, mos);
  return out;
}

RegressionReport regression_report(std::span<const double> pred, std::span<const double> mos) {
  RegressionReport r;
  r.n = static_cast<int>(pred.size());
  r.srcc = srcc(pred, mos);
  r.krcc = krcc(pred, mos);
  const auto mapped = plcc_rmse_after_mapping(pred, mos);
  r.plcc = mapped.plcc;
  r.rmse = mapped.rmse;
  return r;
}

ClassificationReport classification_report(std::span<const Decision> decisions,
                                           std::span<const Decision> labels) {
  if (decisions.size() != labels.size()) {
    throw Error(ErrorKind::kShape, "decisions and labels differ in length");
  }
  if (decisions.empty()) throw Error(ErrorKind::kEmptyInput, "no decisions to score");
  ClassificationReport r;
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    const bool pred_pos = decisions[i] == Decision::kTrue4k;
    const bool label_pos = labels[i] == Decision::kTrue4k;
    if (pred_pos && label_pos) ++r.tp;
    if (pred_pos && !label_pos) ++r.fp;
    if (!pred_pos && !label_pos) ++r.tn;
    if (!pred_pos && label_pos) ++r.fn;
  }
  auto ratio = [](int num, int den, bool& undefined) {
    undefined = den == 0;
    return undefined ? 0.0 : static_cast<double>(num) / den;
  };
  r.p_t = ratio(r.tp, r.tp + r.fp, r.p_t_undefined);
  r.p_f = ratio(r.tn, r.tn + r.fn, r.p_f_undefined);
  r.r_t = ratio(r.tp, r.tp + r.fn, r.r_t_undefined);
  r.r_f = ratio(r.tn, r.tn + r.fp, r.r_f_undefined);
  r.accuracy = static_cast<double>(r.tp + r.tn) / static_cast<double>(decisions.size());
  return r;
}

std::string_view FTestVerdictName(FTestVerdict v) {
  switch (v) {
    case FTestVerdict::kABetter: return "a_better";
    case FTestVerdict::kBBetter: return "b_better";
    case FTestVerdict::kIndistinguishable: return "indistinguishable";
  }
  return "indistinguishable";
}

FTestResult residual_f_test(std::span<const double> residuals_a,
                            std::span<const double> residuals_b, double alpha) {
  if (residuals_a.size() < 2 || residuals_b.size() < 2) {
    throw Error(ErrorKind::kDegenerateTest, "each residual vector needs >= 2 entries");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw Error(ErrorKind::kValidation, "alpha must be in (0, 1)");
  }
  const double va = SampleVariance(residuals_a);
  const double vb = SampleVariance(residuals_b);
  if (va == 0.0 || vb == 0.0) {
    throw Error(ErrorKind::kDegenerateTest, "zero residual variance");
  }
  const boost::math::fisher_f dist(static_cast<double>(residuals_a.size() - 1),
                                   static_cast<double>(residuals_b.size() - 1));
  FTestResult r;
  r.ratio = va / vb;
  r.lower_quantile = boost::math::quantile(dist, alpha / 2.0);
  r.upper_quantile = boost::math::quantile(dist, 1.0 - alpha / 2.0);
  if (r.ratio < r.lower_quantile) {
    r.verdict = FTestVerdict::kABetter;
  } else if (r.ratio > r.upper_quantile) {
    r.verdict = FTestVerdict::kBBetter;
  }
  return r;
}

}  // namespace uhdiqa
