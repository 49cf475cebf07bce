#pragma once

// The instance selector: a hard slot index, or a soft weight vector over the
// N prediction slots. Hard selectors are equivalent to their one-hot form.

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

namespace mipose {

class InstanceSelector {
public:
    static InstanceSelector hard(int index) {
        if (index < 0) throw std::invalid_argument("InstanceSelector: hard index must be >= 0");
        InstanceSelector s;
        s.hard_ = true;
        s.index_ = index;
        return s;
    }

    static InstanceSelector soft(std::vector<double> weights) {
        if (weights.empty())
            throw std::invalid_argument("InstanceSelector: soft weights must be non-empty");
        double sum = 0.0;
        for (double w : weights) {
            if (!(w >= -1e-9))
                throw std::invalid_argument("InstanceSelector: soft weights must be >= 0");
            sum += w;
        }
        if (std::abs(sum - 1.0) > 1e-6)
            throw std::invalid_argument("InstanceSelector: soft weights must sum to 1");
        InstanceSelector s;
        s.hard_ = false;
        s.soft_ = std::move(weights);
        return s;
    }

    bool is_hard() const { return hard_; }

    int hard_index() const {
        if (!hard_) throw std::logic_error("InstanceSelector: not a hard selector");
        return index_;
    }

    /// True when the selector is hard, or soft with exactly one unit entry.
    bool is_one_hot() const {
        if (hard_) return true;
        int ones = 0;
        for (double w : soft_)
            if (w != 0.0 && w != 1.0)
                return false;
            else if (w == 1.0)
                ++ones;
        return ones == 1;
    }

    int one_hot_index() const {
        if (hard_) return index_;
        for (std::size_t i = 0; i < soft_.size(); ++i)
            if (soft_[i] == 1.0) return static_cast<int>(i);
        throw std::logic_error("InstanceSelector: selector is not one-hot");
    }

    /// Weight vector of length n_slots; validates the selector against the
    /// slot count (hard index in range, soft vector of matching length).
    std::vector<double> weights(int n_slots) const {
        if (n_slots < 1) throw std::invalid_argument("InstanceSelector: n_slots must be >= 1");
        if (hard_) {
            if (index_ >= n_slots)
                throw std::invalid_argument("InstanceSelector: hard index " +
                                            std::to_string(index_) + " out of range for N=" +
                                            std::to_string(n_slots));
            std::vector<double> w(static_cast<std::size_t>(n_slots), 0.0);
            w[static_cast<std::size_t>(index_)] = 1.0;
            return w;
        }
        if (static_cast<int>(soft_.size()) != n_slots)
            throw std::invalid_argument("InstanceSelector: soft vector length " +
                                        std::to_string(soft_.size()) + " != N=" +
                                        std::to_string(n_slots));
        return soft_;
    }

    const std::vector<double>& soft_weights() const {
        if (hard_) throw std::logic_error("InstanceSelector: not a soft selector");
        return soft_;
    }

    /// Compact description for filenames and JSON ("0", "soft[0.50,0.50]").
    std::string describe() const {
        if (hard_) return std::to_string(index_);
        std::string s = "soft[";
        char buf[32];
        for (std::size_t i = 0; i < soft_.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.4f", soft_[i]);
            if (i) s += ',';
            s += buf;
        }
        return s + "]";
    }

private:
    bool hard_ = true;
    int index_ = 0;
    std::vector<double> soft_;
};

}  // namespace mipose
