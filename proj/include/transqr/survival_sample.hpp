#pragma once

#include <transqr/common.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace transqr {

/// Right-censored observations (X_i, delta_i, Z_i) with the distinct
/// uncensored grid X_(1) < ... < X_(m) on [0, tau].
///
/// Risk sets use Y_i(t) = 1(X_i >= t): a censored time tied with an event
/// time is still at risk there. Tied uncensored times collapse into one
/// grid point with multiplicity.
template <typename Scalar>
class SurvivalSample {
 public:
  using Index = Eigen::Index;
  using VectorType = Vector<Scalar>;
  using MatrixType = Matrix<Scalar>;

  SurvivalSample(VectorType time, std::vector<int> status, MatrixType covariates,
                 std::optional<Scalar> tau = std::nullopt,
                 Scalar covariate_bound = std::numeric_limits<Scalar>::infinity())
      : time_(std::move(time)), status_(std::move(status)), covariates_(std::move(covariates)) {
    validate(covariate_bound);
    order_.resize(static_cast<std::size_t>(size()));
    std::iota(order_.begin(), order_.end(), Index{0});
    std::stable_sort(order_.begin(), order_.end(),
                     [this](Index a, Index b) { return time_(a) < time_(b); });
    rows_.reserve(order_.size());
    for (Index i = 0; i < size(); ++i) rows_.push_back(covariates_.row(i).transpose());

    tau_ = tau ? *tau : default_tau();
    if (!(tau_ > Scalar(0)) || tau_ > time_.maxCoeff()) {
      throw InputError("tau must lie in (0, max X]");
    }
    build_grid();
  }

  Index size() const { return time_.size(); }
  Index dim() const { return covariates_.cols(); }

  const VectorType& time() const { return time_; }
  Scalar time(Index i) const { return time_(i); }
  const std::vector<int>& status() const { return status_; }
  int status(Index i) const { return status_[static_cast<std::size_t>(i)]; }
  const MatrixType& covariates() const { return covariates_; }
  const VectorType& covariate(Index i) const { return rows_[static_cast<std::size_t>(i)]; }

  Scalar tau() const { return tau_; }

  /// Distinct uncensored times in (0, tau].
  const VectorType& event_times() const { return event_times_; }
  Index event_count() const { return event_times_.size(); }
  /// Number of tied failures at each grid point.
  const std::vector<Index>& event_multiplicity() const { return multiplicity_; }

  /// Subjects in ascending time order; the risk set at grid point k is
  /// order()[risk_start(k)], ..., order()[n-1].
  const std::vector<Index>& order() const { return order_; }
  Index risk_start(Index k) const { return risk_start_[static_cast<std::size_t>(k)]; }
  Index risk_count(Index k) const { return size() - risk_start(k); }

  /// Subjects failing at grid point k.
  const std::vector<Index>& failures_at(Index k) const {
    return failures_[static_cast<std::size_t>(k)];
  }

  /// Grid index of the last event time <= t, or -1 before the first one.
  Index grid_index(Scalar t) const {
    const auto* begin = event_times_.data();
    const auto* end = begin + event_times_.size();
    return static_cast<Index>(std::upper_bound(begin, end, t) - begin) - 1;
  }

 private:
  void validate(Scalar covariate_bound) const {
    using std::abs;
    using std::isfinite;
    const auto n = time_.size();
    if (n == 0) throw InputError("empty sample");
    if (static_cast<Index>(status_.size()) != n || covariates_.rows() != n) {
      throw InputError("time, status and covariate rows must have equal length");
    }
    bool any_event = false;
    for (Index i = 0; i < n; ++i) {
      if (!isfinite(time_(i)) || time_(i) < Scalar(0)) {
        throw InputError("observation " + std::to_string(i) + ": time must be finite and >= 0");
      }
      const int d = status_[static_cast<std::size_t>(i)];
      if (d != 0 && d != 1) {
        throw InputError("observation " + std::to_string(i) + ": status must be 0 or 1");
      }
      any_event = any_event || d == 1;
    }
    if (!any_event) throw InputError("sample has no uncensored observation");
    if (!covariates_.allFinite()) throw InputError("non-finite covariate value");
    if (covariates_.size() > 0 && covariates_.cwiseAbs().maxCoeff() > covariate_bound) {
      throw InputError("covariate exceeds the configured bound");
    }
  }

  // Largest uncensored time whose risk set holds at least two subjects.
  Scalar default_tau() const {
    Scalar best = -1;
    Scalar last_event = -1;
    const auto n = size();
    for (Index r = 0; r < n; ++r) {
      const Index i = order_[static_cast<std::size_t>(r)];
      if (status_[static_cast<std::size_t>(i)] != 1) continue;
      last_event = time_(i);
      // risk count = n - (first position with time >= t)
      Index first = r;
      while (first > 0 && time_(order_[static_cast<std::size_t>(first - 1)]) >= time_(i)) --first;
      if (n - first >= 2) best = time_(i);
    }
    return best > Scalar(0) ? best : last_event;
  }

  void build_grid() {
    std::vector<Scalar> times;
    const auto n = size();
    for (Index r = 0; r < n; ++r) {
      const Index i = order_[static_cast<std::size_t>(r)];
      const Scalar t = time_(i);
      if (status_[static_cast<std::size_t>(i)] != 1 || t > tau_) continue;
      if (times.empty() || t > times.back()) {
        times.push_back(t);
        multiplicity_.push_back(0);
        failures_.emplace_back();
        Index first = r;
        while (first > 0 && time_(order_[static_cast<std::size_t>(first - 1)]) >= t) --first;
        risk_start_.push_back(first);
      }
      ++multiplicity_.back();
      failures_.back().push_back(i);
    }
    event_times_ = Eigen::Map<const VectorType>(times.data(), static_cast<Index>(times.size()));
  }

  VectorType time_;
  std::vector<int> status_;
  MatrixType covariates_;
  std::vector<VectorType> rows_;
  Scalar tau_{};
  std::vector<Index> order_;
  VectorType event_times_;
  std::vector<Index> multiplicity_;
  std::vector<Index> risk_start_;
  std::vector<std::vector<Index>> failures_;
};

}  // namespace transqr
