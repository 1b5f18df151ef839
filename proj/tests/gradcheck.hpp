#pragma once

// Central finite-difference checks against the analytic gradients that the
// layers accumulate into Param::grad.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "earlycorr/nn.hpp"
#include "earlycorr/rng.hpp"

namespace gradcheck {

using earlycorr::Rng;
using earlycorr::nn::Mat;
using earlycorr::nn::Param;
using earlycorr::nn::ParamList;

struct Report {
  double worst_rel = 0.0;
  std::string worst_where;
  int checked = 0;
  int skipped = 0;  // points where +-eps crosses a ReLU/max-pool kink
  double skipped_fraction() const {
    return checked + skipped == 0 ? 0.0 : static_cast<double>(skipped) / (checked + skipped);
  }
};

inline constexpr double kRelTol = 1e-3;

inline double rel_error(double a, double n) {
  const double scale = std::max(std::fabs(a), std::fabs(n));
  if (scale < 1e-7) return 0.0;
  return std::fabs(a - n) / scale;
}

/// A piecewise-linear boundary inside [x-eps, x+eps] shows up as a second
/// difference that is large against the slope. Smooth points give
/// |f+ - 2f0 + f-| ~ eps^2 |f''|, far below this bound, so a wrong analytic
/// gradient is never excused by this test.
inline bool crosses_kink(double fp, double f0, double fm, double eps, double slope) {
  return std::fabs(fp - 2.0 * f0 + fm) > kRelTol * eps * std::max(std::fabs(slope), 1e-7);
}

inline void record(Report& r, double a, double n, const std::string& where) {
  ++r.checked;
  double e = rel_error(a, n);
  if (e > r.worst_rel) {
    r.worst_rel = e;
    r.worst_where = where + " analytic=" + std::to_string(a) + " numeric=" + std::to_string(n);
  }
}

/// `probe` runs a forward pass and returns the scalar probe value;
/// `analytic` runs forward + backward so that every Param::grad holds the
/// probe gradient. Checks `per_param` random entries of each parameter plus
/// its largest-gradient entries.
inline Report check_params(const ParamList<double>& params, const std::function<double()>& probe,
                           const std::function<void()>& analytic, int per_param, Rng& rng,
                           double eps = 1e-4) {
  for (auto* p : params) p->zero_grad();
  analytic();
  std::vector<Mat<double>> grads;
  for (auto* p : params) grads.push_back(p->grad);

  Report report;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto* p = params[k];
    const Eigen::Index n = p->value.size();
    std::vector<Eigen::Index> idx;
    for (int i = 0; i < per_param; ++i) idx.push_back(static_cast<Eigen::Index>(rng.uniform_int(n)));
    std::vector<Eigen::Index> order(n);
    for (Eigen::Index i = 0; i < n; ++i) order[i] = i;
    const int top = std::min<Eigen::Index>(per_param, n);
    std::partial_sort(order.begin(), order.begin() + top, order.end(), [&](auto a, auto b) {
      return std::fabs(grads[k].data()[a]) > std::fabs(grads[k].data()[b]);
    });
    idx.insert(idx.end(), order.begin(), order.begin() + top);
    for (Eigen::Index i : idx) {
      double& v = p->value.data()[i];
      const double saved = v;
      const double f0 = probe();
      v = saved + eps;
      const double fp = probe();
      v = saved - eps;
      const double fm = probe();
      v = saved;
      const double numeric = (fp - fm) / (2 * eps);
      if (crosses_kink(fp, f0, fm, eps, numeric)) {
        ++report.skipped;
        continue;
      }
      record(report, grads[k].data()[i], numeric, p->name + "[" + std::to_string(i) + "]");
    }
  }
  return report;
}

/// Same check for a plain input matrix with a known analytic gradient.
inline Report check_input(Mat<double>& x, const Mat<double>& analytic_grad,
                          const std::function<double()>& probe, const std::string& name,
                          double eps = 1e-4) {
  Report report;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double& v = x.data()[i];
    const double saved = v;
    const double f0 = probe();
    v = saved + eps;
    const double fp = probe();
    v = saved - eps;
    const double fm = probe();
    v = saved;
    const double numeric = (fp - fm) / (2 * eps);
    if (crosses_kink(fp, f0, fm, eps, numeric)) {
      ++report.skipped;
      continue;
    }
    record(report, analytic_grad.data()[i], numeric, name + "[" + std::to_string(i) + "]");
  }
  return report;
}

/// Weighted-sum probe: sum(w .* y).
inline double probe_value(const Mat<double>& y, const Mat<double>& w) {
  return y.cwiseProduct(w).sum();
}

inline Mat<double> random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double lo = -1.0,
                                 double hi = 1.0) {
  Mat<double> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(lo, hi);
  return m;
}

}  // namespace gradcheck
