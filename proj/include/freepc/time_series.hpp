#pragma once

#include <string>
#include <utility>
#include <vector>

#include "numcore.hpp"

namespace freepc {

// N samples of an n_v-channel real signal, stored one sample per row.
class TimeSeries {
  public:
    TimeSeries() = default;

    explicit TimeSeries(RealMatrix samples, std::vector<std::string> names = {})
        : samples_(std::move(samples)), names_(std::move(names)) {
        require_finite(samples_, "TimeSeries");
        if (names_.empty()) {
            for (Eigen::Index c = 0; c < samples_.cols(); ++c) {
                names_.push_back("ch" + std::to_string(c));
            }
        }
        if (static_cast<Eigen::Index>(names_.size()) != samples_.cols()) {
            throw InvalidInput("TimeSeries: channel name count does not match column count");
        }
    }

    static TimeSeries scalar(const std::vector<double>& values, std::string name = "ch0") {
        RealMatrix m(static_cast<Eigen::Index>(values.size()), 1);
        for (std::size_t k = 0; k < values.size(); ++k) {
            m(static_cast<Eigen::Index>(k), 0) = values[k];
        }
        return TimeSeries(std::move(m), {std::move(name)});
    }

    static TimeSeries scalar(const RealVector& values, std::string name = "ch0") {
        return TimeSeries(RealMatrix(values), {std::move(name)});
    }

    std::size_t length() const { return static_cast<std::size_t>(samples_.rows()); }
    std::size_t channels() const { return static_cast<std::size_t>(samples_.cols()); }
    bool        empty() const { return samples_.rows() == 0; }

    const RealMatrix&               samples() const { return samples_; }
    const std::vector<std::string>& names() const { return names_; }

    double operator()(std::size_t k, std::size_t c) const {
        return samples_(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c));
    }

    RealVector sample(std::size_t k) const { return samples_.row(static_cast<Eigen::Index>(k)).transpose(); }

    // x_[first, first+count-1] stacked into one vector (time-major).
    RealVector stacked(std::size_t first, std::size_t count) const {
        if (first + count > length()) {
            throw InvalidInput("TimeSeries::stacked: window exceeds series length");
        }
        const auto n_v = samples_.cols();
        RealVector out(static_cast<Eigen::Index>(count) * n_v);
        for (std::size_t i = 0; i < count; ++i) {
            out.segment(static_cast<Eigen::Index>(i) * n_v, n_v) = sample(first + i);
        }
        return out;
    }

    TimeSeries slice(std::size_t first, std::size_t count) const {
        if (first + count > length()) {
            throw InvalidInput("TimeSeries::slice: window exceeds series length");
        }
        return TimeSeries(samples_.middleRows(static_cast<Eigen::Index>(first), static_cast<Eigen::Index>(count)),
                          names_);
    }

    bool operator==(const TimeSeries& other) const {
        return samples_.rows() == other.samples_.rows() && samples_.cols() == other.samples_.cols() &&
               samples_ == other.samples_;
    }

  private:
    RealMatrix               samples_;
    std::vector<std::string> names_;
};

// Unstack a time-major vector of `count` samples with n_v channels each.
inline TimeSeries unstack(const RealVector& v, std::size_t n_v) {
    if (n_v == 0 || v.size() % static_cast<Eigen::Index>(n_v) != 0) {
        throw InvalidInput("unstack: length not divisible by channel count");
    }
    const auto n = v.size() / static_cast<Eigen::Index>(n_v);
    RealMatrix m(n, static_cast<Eigen::Index>(n_v));
    for (Eigen::Index k = 0; k < n; ++k) {
        m.row(k) = v.segment(k * static_cast<Eigen::Index>(n_v), static_cast<Eigen::Index>(n_v)).transpose();
    }
    return TimeSeries(std::move(m));
}

}  // namespace freepc
