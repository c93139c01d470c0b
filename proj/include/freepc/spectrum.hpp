#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "numcore.hpp"

namespace freepc {

/**
 * Samples of an n_v-channel spectrum V(w) at M distinct frequencies in [0, pi).
 * Row m of `values` is V(w_m). Only one value vector per frequency is allowed,
 * i.e. a single input direction per excited frequency.
 */
class SpectrumSamples {
  public:
    SpectrumSamples() = default;

    SpectrumSamples(std::vector<double> frequencies, ComplexMatrix values)
        : frequencies_(std::move(frequencies)), values_(std::move(values)) {
        if (static_cast<Eigen::Index>(frequencies_.size()) != values_.rows()) {
            throw InvalidInput("SpectrumSamples: one value vector per frequency required");
        }
        require_finite(values_, "SpectrumSamples");
        for (std::size_t i = 0; i < frequencies_.size(); ++i) {
            const double w = frequencies_[i];
            if (!std::isfinite(w) || w < 0.0 || w >= std::numbers::pi) {
                throw InvalidInput("SpectrumSamples: frequency " + std::to_string(w) + " outside [0, pi)");
            }
            for (std::size_t j = 0; j < i; ++j) {
                if (frequencies_[j] == w) {
                    throw InvalidInput("SpectrumSamples: duplicate frequency " + std::to_string(w));
                }
            }
        }
    }

    std::size_t size() const { return frequencies_.size(); }
    std::size_t channels() const { return static_cast<std::size_t>(values_.cols()); }

    const std::vector<double>& frequencies() const { return frequencies_; }
    const ComplexMatrix&       values() const { return values_; }

    ComplexVector value(std::size_t m) const { return values_.row(static_cast<Eigen::Index>(m)).transpose(); }

  private:
    std::vector<double> frequencies_;
    ComplexMatrix       values_;
};

}  // namespace freepc
