// Copyright 2026 The Metagame Eval Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Streaming summaries for bootstrap statistics.
//
// QuantileSketch is a deterministic multi-level compactor. Level h holds
// items of weight 2^h; a full level is sorted and every other item is
// promoted, the kept parity alternating per level. Each compaction at level
// h moves any rank by at most 2^h, so after n insertions with capacity k
// the rank error is at most (levels * n / k). With k = 16384 this stays
// below 0.1% of n while at most 16 levels exist, i.e. up to n of about
// 5e8. Below k items the sketch is exact.

#ifndef METAGAME_SKETCH_HPP
#define METAGAME_SKETCH_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "metagame/common.hpp"

namespace metagame {

/// Mean and variance by Welford's update, mergeable (Chan et al.).
class RunningStats {
  public:
   void add(double x)
   {
      ++n_;
      double d = x - mean_;
      mean_ += d / static_cast< double >(n_);
      m2_ += d * (x - mean_);
      min_ = std::min(min_, x);
      max_ = std::max(max_, x);
   }

   void merge(const RunningStats& o)
   {
      if(o.n_ == 0)
         return;
      if(n_ == 0) {
         *this = o;
         return;
      }
      double n = static_cast< double >(n_ + o.n_);
      double d = o.mean_ - mean_;
      mean_ += d * static_cast< double >(o.n_) / n;
      m2_ += o.m2_ + d * d * static_cast< double >(n_) * static_cast< double >(o.n_) / n;
      n_ += o.n_;
      min_ = std::min(min_, o.min_);
      max_ = std::max(max_, o.max_);
   }

   [[nodiscard]] uint64_t count() const { return n_; }
   [[nodiscard]] double mean() const { return mean_; }
   [[nodiscard]] double variance() const { return n_ > 1 ? m2_ / static_cast< double >(n_ - 1) : 0.0; }
   [[nodiscard]] double min() const { return min_; }
   [[nodiscard]] double max() const { return max_; }

  private:
   uint64_t n_ = 0;
   double mean_ = 0.0, m2_ = 0.0;
   double min_ = std::numeric_limits< double >::infinity();
   double max_ = -std::numeric_limits< double >::infinity();
};

class QuantileSketch {
  public:
   static constexpr size_t kDefaultCapacity = 16384;

   explicit QuantileSketch(size_t capacity = kDefaultCapacity) : capacity_(capacity + capacity % 2)
   {
      if(capacity_ < 2)
         throw Error("quantile sketch capacity must be >= 2");
   }

   void add(double x)
   {
      if(levels_.empty())
         levels_.emplace_back();
      levels_[0].push_back(x);
      ++n_;
      compress();
   }

   /// Level-wise union followed by compaction. Deterministic given the
   /// order of merges.
   void merge(const QuantileSketch& o)
   {
      if(o.capacity_ != capacity_)
         throw Error("cannot merge quantile sketches with different capacities");
      if(levels_.size() < o.levels_.size())
         levels_.resize(o.levels_.size());
      for(size_t h = 0; h < o.levels_.size(); ++h)
         levels_[h].insert(levels_[h].end(), o.levels_[h].begin(), o.levels_[h].end());
      if(compactions_.size() < o.compactions_.size())
         compactions_.resize(o.compactions_.size(), 0);
      for(size_t h = 0; h < o.compactions_.size(); ++h)
         compactions_[h] += o.compactions_[h];
      n_ += o.n_;
      compress();
   }

   [[nodiscard]] uint64_t count() const { return n_; }
   [[nodiscard]] bool exact() const { return levels_.size() <= 1; }

   /// Weighted items in ascending order.
   [[nodiscard]] std::vector< std::pair< double, uint64_t > > items() const
   {
      std::vector< std::pair< double, uint64_t > > out;
      for(size_t h = 0; h < levels_.size(); ++h)
         for(double x : levels_[h])
            out.emplace_back(x, uint64_t{1} << h);
      std::sort(out.begin(), out.end());
      return out;
   }

   /// Smallest stored value whose cumulative weight reaches q * n
   /// (the nearest-rank percentile when exact).
   [[nodiscard]] double quantile(double q) const
   {
      if(n_ == 0)
         throw Error("quantile of an empty sketch");
      auto it = items();
      uint64_t total = 0;
      for(const auto& e : it)
         total += e.second;
      double target = std::max(1.0, std::ceil(std::clamp(q, 0.0, 1.0) * static_cast< double >(total)));
      uint64_t acc = 0;
      for(const auto& [x, w] : it) {
         acc += w;
         if(static_cast< double >(acc) >= target)
            return x;
      }
      return it.back().first;
   }

   /// Upper bound on the absolute rank error of `quantile`.
   [[nodiscard]] double rank_error_bound() const
   {
      double err = 0.0;
      for(size_t h = 0; h < compactions_.size(); ++h)
         err += static_cast< double >(compactions_[h]) * static_cast< double >(uint64_t{1} << h);
      return err;
   }

  private:
   void compress()
   {
      for(size_t h = 0; h < levels_.size(); ++h) {
         while(levels_[h].size() >= capacity_) {
            auto& lv = levels_[h];
            std::sort(lv.begin(), lv.end());
            if(compactions_.size() <= h)
               compactions_.resize(h + 1, 0);
            size_t offset = compactions_[h] % 2;
            ++compactions_[h];
            std::vector< double > promoted;
            promoted.reserve(capacity_ / 2);
            for(size_t i = offset; i < capacity_; i += 2)
               promoted.push_back(lv[i]);
            lv.erase(lv.begin(), lv.begin() + static_cast< long >(capacity_));
            if(levels_.size() <= h + 1)
               levels_.emplace_back();
            auto& up = levels_[h + 1];
            up.insert(up.end(), promoted.begin(), promoted.end());
         }
      }
   }

   size_t capacity_;
   uint64_t n_ = 0;
   std::vector< std::vector< double > > levels_;
   std::vector< uint64_t > compactions_;
};

/// Equal-width histogram over [lo, hi] built from weighted items.
struct Histogram {
   std::vector< double > edges;  // bins + 1 entries
   std::vector< double > counts;

   static Histogram from_items(const std::vector< std::pair< double, uint64_t > >& items, size_t bins)
   {
      Histogram hist;
      if(items.empty() || bins == 0)
         return hist;
      double lo = items.front().first, hi = items.back().first;
      if(hi <= lo)
         hi = lo + 1e-12;
      hist.edges.resize(bins + 1);
      for(size_t i = 0; i <= bins; ++i)
         hist.edges[i] = lo + (hi - lo) * static_cast< double >(i) / static_cast< double >(bins);
      hist.counts.assign(bins, 0.0);
      for(const auto& [x, w] : items) {
         auto b = static_cast< size_t >((x - lo) / (hi - lo) * static_cast< double >(bins));
         hist.counts[std::min(b, bins - 1)] += static_cast< double >(w);
      }
      return hist;
   }
};

}  // namespace metagame

#endif  // METAGAME_SKETCH_HPP
