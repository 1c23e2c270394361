#pragma once

#include <algorithm>
#include <utility>
#include <vector>

namespace safehood {

/// Sorted union of disjoint closed time intervals.
class TimeWindows {
 public:
  TimeWindows() = default;
  TimeWindows(double lo, double hi) {
    if (hi >= lo) iv_.push_back({lo, hi});
  }

  static TimeWindows empty() { return TimeWindows(); }

  bool is_empty() const { return iv_.empty(); }
  const std::vector<std::pair<double, double>>& intervals() const { return iv_; }

  double total_length() const {
    double s = 0.0;
    for (const auto& [a, b] : iv_) s += b - a;
    return s;
  }
  double lo() const { return iv_.front().first; }
  double hi() const { return iv_.back().second; }

  bool contains(double t) const {
    for (const auto& [a, b] : iv_)
      if (t >= a && t <= b) return true;
    return false;
  }

  void add(double lo, double hi) {
    if (hi < lo) return;
    iv_.push_back({lo, hi});
    normalize();
  }

  /// Set difference; `other` is removed as a closed set.
  TimeWindows subtract(const TimeWindows& other) const {
    TimeWindows out = *this;
    for (const auto& [a, b] : other.iv_) {
      std::vector<std::pair<double, double>> next;
      for (const auto& seg : out.iv_) {
        if (b < seg.first || a > seg.second) {
          next.push_back(seg);
          continue;
        }
        if (a > seg.first) next.push_back({seg.first, a});
        if (b < seg.second) next.push_back({b, seg.second});
      }
      out.iv_ = std::move(next);
    }
    return out;
  }

  TimeWindows intersect(double lo, double hi) const {
    TimeWindows out;
    for (const auto& [a, b] : iv_) {
      const double l = std::max(a, lo), r = std::min(b, hi);
      if (r >= l) out.iv_.push_back({l, r});
    }
    return out;
  }

 private:
  void normalize() {
    std::sort(iv_.begin(), iv_.end());
    std::vector<std::pair<double, double>> merged;
    for (const auto& seg : iv_) {
      if (!merged.empty() && seg.first <= merged.back().second)
        merged.back().second = std::max(merged.back().second, seg.second);
      else
        merged.push_back(seg);
    }
    iv_ = std::move(merged);
  }

  std::vector<std::pair<double, double>> iv_;
};

}  // namespace safehood
