#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "floqlab/common.hpp"

namespace floqlab {

// Streaming per-block sums for one statistic: `points` grid points times
// `channels` raw moment channels, kept separately for each jackknife block.
// Merging adds blockwise, so accumulation over disjoint sample sets in any
// partition reproduces the single-pass result bit-for-bit as long as each
// block's samples are processed in ascending order by one owner.
class BlockAccumulator {
  public:
    BlockAccumulator() = default;
    BlockAccumulator(std::string schema, int points, int channels, int blocks)
        : schema_(std::move(schema)),
          points_(points),
          channels_(channels),
          blocks_(blocks),
          sums_(static_cast<size_t>(points) * channels * blocks, 0.0),
          counts_(blocks, 0) {}

    const std::string& schema() const { return schema_; }
    int points() const { return points_; }
    int channels() const { return channels_; }
    int blocks() const { return blocks_; }

    void add(int block, int point, int channel, double v) {
        sums_[index(block, point, channel)] += v;
    }

    // call once per accumulated sample
    void count_sample(int block) { ++counts_[block]; }

    long samples() const {
        long m = 0;
        for (long c : counts_) m += c;
        return m;
    }

    long block_samples(int block) const { return counts_[block]; }

    double block_sum(int block, int point, int channel) const {
        return sums_[index(block, point, channel)];
    }

    double total(int point, int channel) const {
        double s = 0.0;
        for (int b = 0; b < blocks_; ++b) s += sums_[index(b, point, channel)];
        return s;
    }

    void merge(const BlockAccumulator& other) {
        if (schema_ != other.schema_ || points_ != other.points_ ||
            channels_ != other.channels_ || blocks_ != other.blocks_)
            throw InvalidArgument("BlockAccumulator::merge: schema mismatch");
        for (size_t i = 0; i < sums_.size(); ++i) sums_[i] += other.sums_[i];
        for (int b = 0; b < blocks_; ++b) counts_[b] += other.counts_[b];
    }

  private:
    size_t index(int block, int point, int channel) const {
        return (static_cast<size_t>(block) * points_ + point) * channels_ + channel;
    }

    std::string schema_;
    int points_ = 0, channels_ = 0, blocks_ = 0;
    std::vector<double> sums_;
    std::vector<long> counts_;
};

struct JackknifeValue {
    double value = 0.0;
    double error = 0.0;
};

// Block jackknife of an arbitrary functional of the channel sums at one
// grid point. `fn(channel_sums, n_samples)` must map totals to the
// statistic; leave-one-block-out totals give the error. Valid for the
// nonlinear statistics (variances, envelopes) as well as plain means.
inline JackknifeValue jackknife_point(
    const BlockAccumulator& acc, int point,
    const std::function<double(const std::vector<double>&, long)>& fn) {
    const int nb = acc.blocks();
    const int nc = acc.channels();
    std::vector<double> totals(nc, 0.0);
    for (int c = 0; c < nc; ++c) totals[c] = acc.total(point, c);
    const long m = acc.samples();

    JackknifeValue out;
    out.value = fn(totals, m);

    int used = 0;
    std::vector<double> loo(nc);
    std::vector<double> reps;
    reps.reserve(nb);
    for (int b = 0; b < nb; ++b) {
        const long mb = acc.block_samples(b);
        if (mb == 0) continue;
        if (mb == m) return out;  // single populated block: no resampling possible
        for (int c = 0; c < nc; ++c) loo[c] = totals[c] - acc.block_sum(b, point, c);
        reps.push_back(fn(loo, m - mb));
        ++used;
    }
    if (used < 2) return out;
    double mean = 0.0;
    for (double r : reps) mean += r;
    mean /= used;
    double ss = 0.0;
    for (double r : reps) ss += (r - mean) * (r - mean);
    out.error = std::sqrt(ss * (used - 1.0) / used);
    return out;
}

// mean of channel 0
inline JackknifeValue jackknife_mean(const BlockAccumulator& acc, int point, int channel = 0) {
    return jackknife_point(acc, point, [channel](const std::vector<double>& s, long m) {
        return m > 0 ? s[channel] / static_cast<double>(m) : 0.0;
    });
}

// Maps samples to jackknife blocks by contiguous index ranges; block
// boundaries depend only on (M, B), never on the worker layout.
inline int block_of_sample(long sample, long m_total, int blocks) {
    if (m_total <= 0) return 0;
    long b = sample * blocks / m_total;
    if (b >= blocks) b = blocks - 1;
    return static_cast<int>(b);
}

}  // namespace floqlab
