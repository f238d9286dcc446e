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

#ifndef METAGAME_COMMON_HPP
#define METAGAME_COMMON_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace metagame {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
  public:
   using std::runtime_error::runtime_error;
};

/// Malformed configuration or input file.
class ConfigError : public Error {
  public:
   using Error::Error;
};

/// Input data is incomplete (missing payoff entries, missing files).
class IncompleteError : public Error {
  public:
   using Error::Error;
};

/// Policy provider misbehaved (bad distribution, protocol violation, timeout).
class ProviderError : public Error {
  public:
   using Error::Error;
};

template < typename... Args >
std::string str_cat(Args&&... args)
{
   std::ostringstream oss;
   (oss << ... << std::forward< Args >(args));
   return oss.str();
}

// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr uint64_t mix64(uint64_t x)
{
   x += 0x9e3779b97f4a7c15ULL;
   x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
   x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
   return x ^ (x >> 31);
}

/// Explicit, splittable random stream. Every stochastic routine takes one of
/// these; there is no global randomness anywhere in the library.
class Rng {
  public:
   using result_type = uint64_t;

   explicit Rng(uint64_t seed = 0) : seed_(seed), engine_(mix64(seed)) {}

   static constexpr result_type min() { return std::mt19937_64::min(); }
   static constexpr result_type max() { return std::mt19937_64::max(); }
   result_type operator()() { return engine_(); }

   /// Child stream determined only by this stream's seed and `stream_id`,
   /// not by how many numbers have been drawn so far.
   [[nodiscard]] Rng split(uint64_t stream_id) const
   {
      return Rng(mix64(seed_ ^ mix64(stream_id + 0x5851f42d4c957f2dULL)));
   }

   [[nodiscard]] uint64_t seed() const { return seed_; }

   /// Uniform in the open interval (0, 1).
   double uniform_open()
   {
      double u;
      do {
         u = static_cast< double >(engine_() >> 11) * 0x1.0p-53;
      } while(u <= 0.0);
      return u;
   }

   double uniform() { return static_cast< double >(engine_() >> 11) * 0x1.0p-53; }

   size_t uniform_int(size_t n) { return std::uniform_int_distribution< size_t >(0, n - 1)(engine_); }

   bool bernoulli(double p)
   {
      if(p <= 0.0)
         return false;
      if(p >= 1.0)
         return true;
      return uniform() < p;
   }

   /// Sample an index from a (not necessarily normalized) weight vector.
   size_t categorical(std::span< const double > weights)
   {
      double total = std::accumulate(weights.begin(), weights.end(), 0.0);
      double x = uniform() * total;
      double acc = 0.0;
      size_t last_positive = 0;
      for(size_t i = 0; i < weights.size(); ++i) {
         if(weights[i] <= 0.0)
            continue;
         acc += weights[i];
         last_positive = i;
         if(x < acc)
            return i;
      }
      return last_positive;
   }

   std::mt19937_64& engine() { return engine_; }

  private:
   uint64_t seed_;
   std::mt19937_64 engine_;
};

/// Standard Gumbel(0) draw via inverse CDF.
inline double sample_gumbel(Rng& rng)
{
   return -std::log(-std::log(rng.uniform_open()));
}

/// 64-bit FNV-1a, stable across platforms; used for config/DB fingerprints.
inline uint64_t fnv1a(std::string_view data)
{
   uint64_t h = 0xcbf29ce484222325ULL;
   for(unsigned char c : data) {
      h ^= c;
      h *= 0x100000001b3ULL;
   }
   return h;
}

inline std::string hex64(uint64_t v)
{
   std::ostringstream oss;
   oss << std::hex;
   oss.width(16);
   oss.fill('0');
   oss << v;
   return oss.str();
}

/// Run `body(i)` for i in [0, n) over `workers` threads. Work is assigned by
/// index so results written by index are independent of the worker count.
inline void parallel_for(size_t n, size_t workers, const std::function< void(size_t) >& body)
{
   workers = std::max< size_t >(1, std::min(workers, n));
   if(workers == 1) {
      for(size_t i = 0; i < n; ++i)
         body(i);
      return;
   }
   std::vector< std::thread > pool;
   std::vector< std::exception_ptr > errors(workers);
   for(size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
         try {
            for(size_t i = w; i < n; i += workers)
               body(i);
         } catch(...) {
            errors[w] = std::current_exception();
         }
      });
   }
   for(auto& t : pool)
      t.join();
   for(auto& e : errors)
      if(e)
         std::rethrow_exception(e);
}

inline double entropy_nats(std::span< const double > p)
{
   double h = 0.0;
   for(double x : p)
      if(x > 0.0)
         h -= x * std::log(x);
   return h;
}

}  // namespace metagame

#endif  // METAGAME_COMMON_HPP
