#include "afbm/channel.hpp"

#include "afbm/transforms.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace afbm {

void ChannelConfig::validate() const {
    if (paths < 1) {
        throw ParameterError("channel: path count must be >= 1");
    }
    if (max_delay < 0 || max_doppler < 0.0 || guard_width < 0) {
        throw ParameterError("channel: max_delay, max_doppler and guard_width must be nonnegative");
    }
    if (noise_var < 0.0) {
        throw ParameterError("channel: noise_var must be nonnegative");
    }
    if (power_profile.size() != static_cast<std::size_t>(paths)) {
        throw ParameterError("channel: power_profile has " + std::to_string(power_profile.size()) +
                             " entries for " + std::to_string(paths) + " paths");
    }
    for (double p : power_profile) {
        if (!(p >= 0.0)) {
            throw ParameterError("channel: power_profile entries must be nonnegative");
        }
    }
    const double total = std::accumulate(power_profile.begin(), power_profile.end(), 0.0);
    if (std::abs(total - 1.0) > 1e-12) {
        throw ParameterError("channel: power_profile must sum to 1");
    }
}

std::vector<ChannelPath> sample_paths(const ChannelConfig& cfg, Rng& rng) {
    cfg.validate();
    std::uniform_int_distribution<Index> delay_dist(0, cfg.max_delay);
    std::uniform_real_distribution<double> doppler_dist(-cfg.max_doppler, cfg.max_doppler);
    std::vector<ChannelPath> out(static_cast<std::size_t>(cfg.paths));
    for (std::size_t r = 0; r < out.size(); ++r) {
        out[r].gain = complex_gaussian(rng, cfg.power_profile[r]);
        const Index d = delay_dist(rng);
        out[r].delay = r == 0 ? 0 : d;
        out[r].doppler = cfg.max_doppler > 0.0 ? doppler_dist(rng) : 0.0;
    }
    return out;
}

std::vector<ChannelPath> rescale_doppler(std::vector<ChannelPath> paths, Index frame_length, Index reference) {
    if (frame_length <= 0 || reference <= 0) throw std::invalid_argument("rescale_doppler: lengths must be positive");
    const double k = static_cast<double>(frame_length) / static_cast<double>(reference);
    for (auto& p : paths) p.doppler *= k;
    return paths;
}

bool guard_condition(Index P, Index max_delay, double max_doppler, Index guard_width) {
    const double lhs = 2.0 * (max_doppler + static_cast<double>(guard_width)) *
                           static_cast<double>(max_delay + 1) +
                       static_cast<double>(max_delay);
    return lhs <= static_cast<double>(P);
}

DoublyDispersiveChannel::DoublyDispersiveChannel(std::vector<ChannelPath> paths, Index frame_length,
                                                 double c1)
    : paths_(std::move(paths)), frame_length_(frame_length) {
    if (frame_length_ < 1) {
        throw ParameterError("channel: frame length must be >= 1");
    }
    weights_.reserve(paths_.size());
    for (const auto& p : paths_) {
        if (p.delay < 0 || p.delay >= frame_length_) {
            throw ParameterError("channel: path delay " + std::to_string(p.delay) +
                                 " not below frame length " + std::to_string(frame_length_));
        }
        ComplexVector w = ccp_phases(frame_length_, c1, p.delay).cwiseProduct(
            roots_of_unity_phases(frame_length_, p.doppler));
        weights_.push_back(p.gain * w);
    }
}

ComplexVector DoublyDispersiveChannel::apply(const ComplexVector& s) const {
    if (s.size() != frame_length_) {
        throw DimensionError("channel: input length " + std::to_string(s.size()) + " != " +
                             std::to_string(frame_length_));
    }
    const Index m = frame_length_;
    ComplexVector out = ComplexVector::Zero(m);
    for (std::size_t r = 0; r < paths_.size(); ++r) {
        const Index l = paths_[r].delay;
        const ComplexVector& w = weights_[r];
        for (Index n = 0; n < m; ++n) {
            const Index src = n >= l ? n - l : n - l + m;
            out[n] += w[n] * s[src];
        }
    }
    return out;
}

ComplexMatrix DoublyDispersiveChannel::apply(const ComplexMatrix& x) const {
    if (x.rows() != frame_length_) {
        throw DimensionError("channel: input rows " + std::to_string(x.rows()) + " != " +
                             std::to_string(frame_length_));
    }
    const Index m = frame_length_;
    ComplexMatrix out = ComplexMatrix::Zero(m, x.cols());
    for (std::size_t r = 0; r < paths_.size(); ++r) {
        const Index l = paths_[r].delay;
        const ComplexVector& w = weights_[r];
        // rows [l, m) come from [0, m-l); rows [0, l) wrap around from the tail
        out.bottomRows(m - l).noalias() += w.tail(m - l).asDiagonal() * x.topRows(m - l);
        if (l > 0) {
            out.topRows(l).noalias() += w.head(l).asDiagonal() * x.bottomRows(l);
        }
    }
    return out;
}

ComplexMatrix DoublyDispersiveChannel::dense() const {
    return apply(ComplexMatrix(ComplexMatrix::Identity(frame_length_, frame_length_)));
}

ComplexMatrix channel_matrix(std::span<const ChannelPath> paths, Index M, double c1) {
    ComplexMatrix h = ComplexMatrix::Zero(M, M);
    for (const auto& p : paths) {
        if (p.delay < 0 || p.delay >= M) {
            throw ParameterError("channel_matrix: delay " + std::to_string(p.delay) + " >= M=" +
                                 std::to_string(M));
        }
        const ComplexVector diag =
            ccp_phases(M, c1, p.delay).cwiseProduct(roots_of_unity_phases(M, p.doppler));
        h += p.gain * (diag.asDiagonal() * cyclic_shift(M, p.delay));
    }
    return h;
}

ComplexVector apply_channel(const ComplexVector& s, const ComplexMatrix& H, double noise_var, Rng& rng) {
    if (H.cols() != s.size()) {
        throw DimensionError("apply_channel: H has " + std::to_string(H.cols()) + " columns, frame has " +
                             std::to_string(s.size()) + " samples");
    }
    ComplexVector r = H * s;
    if (noise_var > 0.0) {
        r += complex_gaussian_vector(rng, r.size(), noise_var);
    }
    return r;
}

ComplexVector apply_channel(const ComplexVector& s, const DoublyDispersiveChannel& H, double noise_var,
                            Rng& rng) {
    ComplexVector r = H.apply(s);
    if (noise_var > 0.0) {
        r += complex_gaussian_vector(rng, r.size(), noise_var);
    }
    return r;
}

}  // namespace afbm
