#include "qf/portfolio.hpp"

#include <algorithm>
#include <cmath>

#include "qf/csv.hpp"
#include "qf/error.hpp"
#include "qf/stats.hpp"

namespace qf {

void WeightSeries::validate(const UniverseTimeline* universe) const {
  if (rebalance_dates.size() != weights.size()) throw ValidationError("weight series: dates/weights size mismatch");
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (k > 0 && !(rebalance_dates[k - 1] < rebalance_dates[k]))
      throw ValidationError("weight series: rebalance dates must increase");
    double sum = 0.0;
    for (const auto& [id, w] : weights[k]) {
      if (!(w >= 0.0)) throw ValidationError("weight series: negative weight for " + id);
      if (universe && !universe->contains(id, rebalance_dates[k]))
        throw ValidationError("weight series: " + id + " outside universe on " + rebalance_dates[k].to_string());
      sum += w;
    }
    if (std::fabs(sum - 1.0) > 1e-9)
      throw ValidationError("weight series: weights on " + rebalance_dates[k].to_string() + " sum to " +
                            csv::format_double(sum));
  }
}

std::string export_weights_csv(const WeightSeries& w) {
  std::string out = "date,instrument,weight\n";
  for (std::size_t k = 0; k < w.weights.size(); ++k) {
    const std::string d = w.rebalance_dates[k].to_string();
    for (const auto& [id, v] : w.weights[k]) out += d + ',' + id + ',' + csv::format_double(v) + '\n';
  }
  return out;
}

WeightSeries top_k_weights(const SignalFrame& signal, const UniverseTimeline& universe, std::size_t k,
                           std::size_t rebalance_every) {
  if (k < 1 || rebalance_every < 1) throw ValidationError("top_k_weights: k and rebalance_every must be >= 1");
  WeightSeries out;
  std::vector<std::pair<double, const std::string*>> scored;
  for (std::size_t t = 0; t < signal.rows(); t += rebalance_every) {
    const Date d = signal.calendar()[t];
    scored.clear();
    for (std::size_t i = 0; i < signal.cols(); ++i) {
      const Cell& c = signal.at(t, i);
      const std::string& id = signal.instruments()[i];
      if (c && universe.contains(id, d)) scored.emplace_back(*c, &id);
    }
    if (scored.empty()) continue;
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : *a.second < *b.second;
    });
    const std::size_t kk = std::min(k, scored.size());
    std::map<std::string, double> w;
    for (std::size_t q = 0; q < kk; ++q) w[*scored[q].second] = 1.0 / static_cast<double>(kk);
    out.rebalance_dates.push_back(d);
    out.weights.push_back(std::move(w));
  }
  return out;
}

Eigen::VectorXd project_capped_simplex(const Eigen::VectorXd& v, double cap) {
  const Eigen::Index n = v.size();
  if (n == 0) throw ValidationError("projection of an empty vector");
  if (!(cap > 0.0) || cap * static_cast<double>(n) < 1.0 - 1e-12)
    throw ValidationError("capped simplex is empty (n * cap < 1)");
  // sum_i clip(v_i - theta, 0, cap) is piecewise linear and nonincreasing in
  // theta with breakpoints at v_i - cap and v_i.
  std::vector<double> bp;
  bp.reserve(2 * static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    bp.push_back(v[i] - cap);
    bp.push_back(v[i]);
  }
  std::sort(bp.begin(), bp.end());
  auto total = [&](double theta) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) s += std::clamp(v[i] - theta, 0.0, cap);
    return s;
  };
  // Largest breakpoint with total >= 1, then solve linearly on the segment above it.
  std::size_t lo = 0, hi = bp.size() - 1;
  if (total(bp[0]) < 1.0) {
    // Only possible when n * cap == 1 up to rounding: every weight at the cap.
    return Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  }
  while (lo < hi) {
    const std::size_t mid = (lo + hi + 1) / 2;
    if (total(bp[mid]) >= 1.0) lo = mid;
    else hi = mid - 1;
  }
  const double t0 = bp[lo];
  double theta = t0;
  if (lo + 1 < bp.size()) {
    const double t1 = bp[lo + 1];
    const double s0 = total(t0), s1 = total(t1);
    if (s0 != s1) theta = t0 + (s0 - 1.0) * (t1 - t0) / (s0 - s1);
  }
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) w[i] = std::clamp(v[i] - theta, 0.0, cap);
  // Put the residual rounding error on a coordinate strictly inside its bounds.
  const double resid = 1.0 - w.sum();
  for (Eigen::Index i = 0; i < n && resid != 0.0; ++i)
    if (w[i] + resid > 0.0 && w[i] + resid < cap) {
      w[i] += resid;
      break;
    }
  return w;
}

bool is_psd(const Eigen::MatrixXd& m, double tol) {
  if (m.rows() != m.cols()) return false;
  if (!m.isApprox(m.transpose(), 1e-12) && (m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12) return false;
  if (m.rows() == 0) return true;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(m);
  const double scale = std::max(1.0, m.diagonal().cwiseAbs().maxCoeff());
  const Eigen::VectorXd d = ldlt.vectorD();
  for (Eigen::Index i = 0; i < d.size(); ++i)
    if (d[i] < -tol * scale) return false;
  return true;
}

void MVProblem::validate() const {
  const Eigen::Index n = mu.size();
  if (n == 0) throw ValidationError("mean_variance: empty problem");
  if (sigma.rows() != n || sigma.cols() != n) throw ValidationError("mean_variance: sigma dimension mismatch");
  if (!(gamma > 0.0)) throw ValidationError("mean_variance: gamma must be > 0");
  if (!(w_max > 0.0 && w_max <= 1.0)) throw ValidationError("mean_variance: w_max must be in (0, 1]");
  if (static_cast<double>(n) * w_max < 1.0) throw ValidationError("mean_variance: infeasible caps (n * w_max < 1)");
  if (!is_psd(sigma)) throw ValidationError("mean_variance: sigma is not symmetric PSD");
}

MVSolution mean_variance(const MVProblem& p) {
  p.validate();
  const Eigen::Index n = p.mu.size();
  auto objective = [&](const Eigen::VectorXd& w) { return w.dot(p.mu) - 0.5 * p.gamma * w.dot(p.sigma * w); };
  auto gradient = [&](const Eigen::VectorXd& w) -> Eigen::VectorXd { return p.mu - p.gamma * (p.sigma * w); };
  // Lipschitz constant of the gradient: gamma * lambda_max(Sigma).
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(p.sigma, Eigen::EigenvaluesOnly);
  const double lmax = std::max(es.eigenvalues().maxCoeff(), 0.0);
  const double step = 1.0 / std::max(p.gamma * lmax, 1e-12);
  auto pg_norm = [&](const Eigen::VectorXd& w) {
    return ((project_capped_simplex(w + step * gradient(w), p.w_max) - w) / step).norm();
  };

  Eigen::VectorXd w = project_capped_simplex(Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n)), p.w_max);
  Eigen::VectorXd y = w;
  double t = 1.0;
  double f_prev = objective(w);
  MVSolution out;
  constexpr std::size_t kMaxIter = 10000;
  for (std::size_t it = 0; it < kMaxIter; ++it) {
    out.iterations = it;
    if (pg_norm(w) < 1e-8) break;
    Eigen::VectorXd w_next = project_capped_simplex(y + step * gradient(y), p.w_max);
    const double f_next = objective(w_next);
    if (f_next < f_prev) {
      // Restart momentum when the ascent stalls.
      t = 1.0;
      y = w;
      w_next = project_capped_simplex(w + step * gradient(w), p.w_max);
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = w_next + ((t - 1.0) / t_next) * (w_next - w);
    w = w_next;
    t = t_next;
    f_prev = objective(w);
    out.iterations = it + 1;
  }
  out.weights = w;
  out.objective = objective(w);
  out.kkt_residual = pg_norm(w);
  return out;
}

Eigen::MatrixXd trailing_covariance(const Panel& returns, std::size_t t, const std::vector<std::size_t>& columns,
                                    std::size_t window, double ridge) {
  const std::size_t n = columns.size();
  const std::size_t first = t + 1 >= window ? t + 1 - window : 0;
  const std::size_t len = t + 1 - first;
  Eigen::MatrixXd x(static_cast<Eigen::Index>(len), static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < len; ++r)
    for (std::size_t c = 0; c < n; ++c) {
      const Cell& v = returns.at(first + r, columns[c]);
      x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v ? *v : 0.0;
    }
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  if (len >= 2) {
    Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
    cov = (centered.transpose() * centered) / static_cast<double>(len - 1);
  }
  cov = 0.5 * (cov + cov.transpose());
  cov.diagonal().array() += ridge;
  return cov;
}

WeightSeries mean_variance_weights(const SignalFrame& signal, const BarPanel& bars,
                                   const UniverseTimeline& universe, const MVConfig& cfg) {
  require_same_axes(signal, bars.close, "mean_variance_weights");
  if (cfg.rebalance_every < 1) throw ValidationError("mean_variance_weights: rebalance_every must be >= 1");
  const Panel rets = trailing_returns(bars);
  WeightSeries out;
  for (std::size_t t = 0; t < signal.rows(); t += cfg.rebalance_every) {
    const Date d = signal.calendar()[t];
    std::vector<std::size_t> cols;
    std::vector<double> scores;
    for (std::size_t i = 0; i < signal.cols(); ++i)
      if (const Cell& c = signal.at(t, i); c && universe.contains(signal.instruments()[i], d)) {
        cols.push_back(i);
        scores.push_back(*c);
      }
    if (cols.empty()) continue;
    const double cap = std::max(cfg.w_max, 1.0 / static_cast<double>(cols.size()));
    MVProblem p;
    p.mu = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cols.size()));
    const double sd = stats::population_std(scores);
    const double m = stats::mean(scores);
    if (sd > 0.0)
      for (std::size_t k = 0; k < cols.size(); ++k)
        p.mu[static_cast<Eigen::Index>(k)] = cfg.mu_scale * (scores[k] - m) / sd;
    p.sigma = trailing_covariance(rets, t, cols, cfg.cov_window, cfg.ridge);
    p.gamma = cfg.gamma;
    p.w_max = cap;
    const MVSolution sol = mean_variance(p);
    std::map<std::string, double> w;
    for (std::size_t k = 0; k < cols.size(); ++k)
      if (sol.weights[static_cast<Eigen::Index>(k)] > 0.0) w[signal.instruments()[cols[k]]] = sol.weights[static_cast<Eigen::Index>(k)];
    out.rebalance_dates.push_back(d);
    out.weights.push_back(std::move(w));
  }
  return out;
}

}  // namespace qf
