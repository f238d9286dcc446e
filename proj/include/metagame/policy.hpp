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

#ifndef METAGAME_POLICY_HPP
#define METAGAME_POLICY_HPP

#include <array>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "metagame/common.hpp"
#include "metagame/game.hpp"

namespace metagame {

using nlohmann::json;

inline constexpr double kDistributionTolerance = 1e-9;

/// Checks that `probs` is a distribution over `n` actions. Throws a
/// ProviderError naming `key` otherwise.
inline void validate_distribution(std::span< const double > probs, size_t n, std::string_view key,
                                  std::string_view who)
{
   if(probs.size() != n)
      throw ProviderError(str_cat(who, ": expected ", n, " probabilities at infostate ", key, ", got ", probs.size()));
   double total = 0.0;
   for(double p : probs) {
      if(!std::isfinite(p) || p < 0.0)
         throw ProviderError(str_cat(who, ": invalid probability ", p, " at infostate ", key));
      total += p;
   }
   if(std::abs(total - 1.0) > kDistributionTolerance)
      throw ProviderError(str_cat(who, ": probabilities sum to ", total, " at infostate ", key));
}

/// Anything that maps an infostate to a distribution over its legal actions
/// (canonical order) and optionally to a value estimate for both players.
class PolicyProvider {
  public:
   virtual ~PolicyProvider() = default;

   [[nodiscard]] virtual std::string name() const = 0;

   [[nodiscard]] virtual std::vector< double > action_probs(const InfoState& s) const = 0;

   [[nodiscard]] virtual std::optional< std::array< double, 2 > > value(const InfoState&) const
   {
      return std::nullopt;
   }

   /// Index into legal_actions(s) of the action to play.
   virtual size_t sample_action(const InfoState& s, Rng& rng) const
   {
      auto probs = action_probs(s);
      return rng.categorical(probs);
   }

   /// The policy that plays a whole episode. Mixtures draw a component here,
   /// once per episode.
   [[nodiscard]] virtual const PolicyProvider& select_for_episode(Rng&) const { return *this; }
};

using PolicyPtr = std::shared_ptr< const PolicyProvider >;

inline std::vector< double > uniform_policy(const InfoState& s)
{
   size_t n = num_legal_actions(s);
   return std::vector< double >(n, 1.0 / static_cast< double >(n));
}

/// Never agrees; uniform over the offers maximizing its own value.
inline std::vector< double > tough_policy(const InfoState& s)
{
   int n = num_offers(s.pool);
   std::vector< double > probs(num_legal_actions(s), 0.0);
   int best = -1;
   std::vector< int > argmax;
   for(int i = 0; i < n; ++i) {
      int v = dot(s.own_valuation, offer_from_index(s.pool, i));
      if(v > best) {
         best = v;
         argmax.clear();
      }
      if(v == best)
         argmax.push_back(i);
   }
   for(int i : argmax)
      probs[i] = 1.0 / static_cast< double >(argmax.size());
   return probs;
}

/// Agrees whenever it can; otherwise uniform over all offers.
inline std::vector< double > soft_policy(const InfoState& s)
{
   size_t n = num_legal_actions(s);
   if(s.can_agree()) {
      std::vector< double > probs(n, 0.0);
      probs.back() = 1.0;
      return probs;
   }
   return std::vector< double >(n, 1.0 / static_cast< double >(n));
}

class FunctionPolicy : public PolicyProvider {
  public:
   using Fn = std::vector< double > (*)(const InfoState&);
   FunctionPolicy(std::string name, Fn fn) : name_(std::move(name)), fn_(fn) {}
   [[nodiscard]] std::string name() const override { return name_; }
   [[nodiscard]] std::vector< double > action_probs(const InfoState& s) const override { return fn_(s); }

  private:
   std::string name_;
   Fn fn_;
};

inline PolicyPtr make_uniform() { return std::make_shared< FunctionPolicy >("Uniform", &uniform_policy); }
inline PolicyPtr make_tough() { return std::make_shared< FunctionPolicy >("Tough", &tough_policy); }
inline PolicyPtr make_soft() { return std::make_shared< FunctionPolicy >("Soft", &soft_policy); }

/// Heuristic by name ("uniform", "tough", "soft", any case); nullptr if unknown.
inline PolicyPtr make_heuristic(std::string name)
{
   std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
   if(name == "uniform")
      return make_uniform();
   if(name == "tough")
      return make_tough();
   if(name == "soft")
      return make_soft();
   return nullptr;
}

/// Another provider under a different name.
class RenamedPolicy : public PolicyProvider {
  public:
   RenamedPolicy(std::string name, PolicyPtr inner) : name_(std::move(name)), inner_(std::move(inner)) {}
   [[nodiscard]] std::string name() const override { return name_; }
   [[nodiscard]] std::vector< double > action_probs(const InfoState& s) const override
   {
      return inner_->action_probs(s);
   }
   [[nodiscard]] std::optional< std::array< double, 2 > > value(const InfoState& s) const override
   {
      return inner_->value(s);
   }
   size_t sample_action(const InfoState& s, Rng& rng) const override { return inner_->sample_action(s, rng); }
   [[nodiscard]] const PolicyProvider& select_for_episode(Rng& rng) const override
   {
      return inner_->select_for_episode(rng);
   }

  private:
   std::string name_;
   PolicyPtr inner_;
};

/// Infostate-key lookup table with a uniform fallback for unseen keys, and
/// an optional value table (no estimate for unseen keys).
class TabularPolicy : public PolicyProvider {
  public:
   TabularPolicy() = default;
   TabularPolicy(std::string name, GameParams params) : name_(std::move(name)), params_(params) {}

   [[nodiscard]] std::string name() const override { return name_; }
   [[nodiscard]] const GameParams& params() const { return params_; }
   [[nodiscard]] const std::map< std::string, std::vector< double > >& table() const { return table_; }
   [[nodiscard]] size_t size() const { return table_.size(); }

   void set(const std::string& key, std::vector< double > probs)
   {
      validate_distribution(probs, probs.size(), key, "tabular policy");
      table_[key] = std::move(probs);
   }

   void set_value(const std::string& key, std::array< double, 2 > v) { values_[key] = v; }
   [[nodiscard]] const std::map< std::string, std::array< double, 2 > >& values() const { return values_; }

   [[nodiscard]] std::optional< std::array< double, 2 > > value(const InfoState& s) const override
   {
      auto it = values_.find(s.key());
      if(it == values_.end())
         return std::nullopt;
      return it->second;
   }

   [[nodiscard]] std::vector< double > action_probs(const InfoState& s) const override
   {
      auto it = table_.find(s.key());
      if(it == table_.end())
         return uniform_policy(s);
      if(it->second.size() != num_legal_actions(s))
         throw ProviderError(str_cat("tabular policy '", name_, "': entry for ", s.key(), " has ",
                                     it->second.size(), " probabilities, expected ", num_legal_actions(s)));
      return it->second;
   }

   [[nodiscard]] json to_json() const
   {
      json header{{"format", "tabular-policy-v1"},
                  {"name", name_},
                  {"game", {{"max_rounds", params_.max_rounds},
                            {"terminate_prob", params_.terminate_prob},
                            {"discount", params_.discount}}}};
      json table = json::object();
      for(const auto& [k, v] : table_)
         table[k] = v;
      json out{{"header", header}, {"table", table}};
      if(!values_.empty()) {
         json values = json::object();
         for(const auto& [k, v] : values_)
            values[k] = v;
         out["values"] = values;
      }
      return out;
   }

   static TabularPolicy from_json(const json& j)
   {
      TabularPolicy p;
      try {
         const auto& h = j.at("header");
         p.name_ = h.value("name", std::string("tabular"));
         const auto& g = h.at("game");
         p.params_ = GameParams{g.at("max_rounds").get< int >(), g.at("terminate_prob").get< double >(),
                                g.at("discount").get< double >()};
      } catch(const json::exception& e) {
         throw ConfigError(str_cat("tabular policy header: ", e.what()));
      }
      if(!j.contains("table") || !j.at("table").is_object())
         throw ConfigError("tabular policy: missing 'table' object");
      for(const auto& [k, v] : j.at("table").items()) {
         std::vector< double > probs;
         try {
            probs = v.get< std::vector< double > >();
         } catch(const json::exception& e) {
            throw ConfigError(str_cat("tabular policy key '", k, "': ", e.what()));
         }
         try {
            p.set(k, std::move(probs));
         } catch(const ProviderError& e) {
            throw ConfigError(str_cat("tabular policy key '", k, "': ", e.what()));
         }
      }
      if(j.contains("values")) {
         try {
            for(const auto& [k, v] : j.at("values").items())
               p.values_[k] = v.get< std::array< double, 2 > >();
         } catch(const json::exception& e) {
            throw ConfigError(str_cat("tabular policy values: ", e.what()));
         }
      }
      return p;
   }

  private:
   std::string name_ = "tabular";
   GameParams params_;
   std::map< std::string, std::vector< double > > table_;
   std::map< std::string, std::array< double, 2 > > values_;
};

inline void save_tabular(const TabularPolicy& p, const std::string& path)
{
   std::ofstream f(path);
   if(!f)
      throw ConfigError(str_cat("cannot write ", path));
   f << p.to_json().dump(1) << "\n";
}

inline TabularPolicy load_tabular(const std::string& path)
{
   std::ifstream f(path);
   if(!f)
      throw IncompleteError(str_cat("cannot read tabular policy ", path));
   json j;
   try {
      f >> j;
   } catch(const json::parse_error& e) {
      throw ConfigError(str_cat(path, ": ", e.what()));
   }
   return TabularPolicy::from_json(j);
}

/// Uniform mixture over components, drawn once per episode.
class MixturePolicy : public PolicyProvider {
  public:
   MixturePolicy(std::string name, std::vector< PolicyPtr > components)
       : name_(std::move(name)), components_(std::move(components))
   {
      if(components_.empty())
         throw ConfigError("mixture policy needs at least one component");
   }

   [[nodiscard]] std::string name() const override { return name_; }
   [[nodiscard]] const std::vector< PolicyPtr >& components() const { return components_; }

   [[nodiscard]] const PolicyProvider& select_for_episode(Rng& rng) const override
   {
      return components_[rng.uniform_int(components_.size())]->select_for_episode(rng);
   }

   /// Not a behavioural strategy on its own; only valid when all components
   /// agree at `s`. Play through select_for_episode instead.
   [[nodiscard]] std::vector< double > action_probs(const InfoState& s) const override
   {
      if(components_.size() == 1)
         return components_.front()->action_probs(s);
      throw ProviderError(str_cat("mixture '", name_, "' queried per move at ", s.key(),
                                  "; mixtures select a component per episode"));
   }

  private:
   std::string name_;
   std::vector< PolicyPtr > components_;
};

}  // namespace metagame

#endif  // METAGAME_POLICY_HPP
