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

// Information-set MCTS over the bargaining game.
//
// Two selection schemes share one tree and one simulation loop:
//  * gumbel: root actions compete under sequential halving on the score
//    g(a) + logit p(a) + G(q(a)); interior nodes pick the action that moves
//    the visit distribution closest to the improved policy
//    softmax(logit p + G(q)).
//  * vanilla: PUCT everywhere, with Dirichlet noise mixed into the root prior.
// Every simulation samples a world state from a belief over the opponent's
// valuation and descends nodes of both players keyed by infostate.

#ifndef METAGAME_SEARCH_HPP
#define METAGAME_SEARCH_HPP

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "metagame/belief.hpp"
#include "metagame/enumerate.hpp"
#include "metagame/game.hpp"
#include "metagame/policy.hpp"

namespace metagame {

using Value2 = std::array< double, 2 >;

enum class SearchMode { gumbel, vanilla };

struct SearchConfig {
   int num_sim = 200;
   int K = 16;
   double c1 = 50.0;
   double c2 = 0.1;
   double c_puct = 20.0;
   std::optional< double > dirichlet_alpha;  // unset: 1/|A|
   double epsilon_mix = 0.25;
   SearchMode mode = SearchMode::gumbel;
   bool trace = false;

   void validate() const
   {
      if(num_sim < 1)
         throw ConfigError("num_sim must be >= 1");
      if(mode == SearchMode::gumbel) {
         if(K < 2 || (K & (K - 1)) != 0)
            throw ConfigError(str_cat("K must be a power of two >= 2, got ", K));
         if(num_sim < K)
            throw ConfigError(str_cat("num_sim (", num_sim, ") must be >= K (", K, ")"));
         if(c1 <= 0.0 || c2 < 0.0)
            throw ConfigError("c1 must be > 0 and c2 >= 0");
      } else {
         if(c_puct < 0.0)
            throw ConfigError("c_puct must be >= 0");
         if(epsilon_mix < 0.0 || epsilon_mix > 1.0)
            throw ConfigError("epsilon_mix must lie in [0,1]");
         if(dirichlet_alpha && *dirichlet_alpha <= 0.0)
            throw ConfigError("dirichlet_alpha must be > 0");
      }
   }

   [[nodiscard]] nlohmann::json to_json() const
   {
      nlohmann::json j{{"num_sim", num_sim}, {"K", K},           {"c1", c1},
                       {"c2", c2},           {"c_puct", c_puct}, {"epsilon_mix", epsilon_mix},
                       {"mode", mode == SearchMode::gumbel ? "gumbel" : "vanilla"}};
      if(dirichlet_alpha)
         j["dirichlet_alpha"] = *dirichlet_alpha;
      else
         j["dirichlet_alpha"] = "1/|A|";
      return j;
   }

   static SearchConfig from_json(const nlohmann::json& j)
   {
      SearchConfig c;
      try {
         c.num_sim = j.value("num_sim", c.num_sim);
         c.K = j.value("K", c.K);
         c.c1 = j.value("c1", c.c1);
         c.c2 = j.value("c2", c.c2);
         c.c_puct = j.value("c_puct", c.c_puct);
         c.epsilon_mix = j.value("epsilon_mix", c.epsilon_mix);
         c.trace = j.value("trace", false);
         std::string mode = j.value("mode", std::string("gumbel"));
         if(mode == "gumbel")
            c.mode = SearchMode::gumbel;
         else if(mode == "vanilla")
            c.mode = SearchMode::vanilla;
         else
            throw ConfigError(str_cat("unknown search mode '", mode, "'"));
         if(j.contains("dirichlet_alpha") && j.at("dirichlet_alpha").is_number())
            c.dirichlet_alpha = j.at("dirichlet_alpha").get< double >();
      } catch(const nlohmann::json::exception& e) {
         throw ConfigError(str_cat("bad search config: ", e.what()));
      }
      c.validate();
      return c;
   }
};

// ---------------------------------------------------------------------------
// Leaf evaluation

/// Value of the world state `h` for both players, queried when the node of
/// `player` at h is first added to the tree.
using LeafEvaluator = std::function< Value2(const History& h, int player, Rng& rng) >;

/// Uses the provider's own value head on the acting player's infostate.
inline LeafEvaluator provider_value_evaluator(PolicyPtr provider)
{
   return [provider](const History& h, int player, Rng&) -> Value2 {
      auto v = provider->value(h.infostate(player));
      if(!v)
         throw ProviderError(str_cat(provider->name(), " has no value estimate"));
      return *v;
   };
}

/// Mean return of `n` playouts with `policy` in both seats.
inline LeafEvaluator rollout_evaluator(PolicyPtr policy, int n = 1)
{
   return [policy, n](const History& start, int, Rng& rng) -> Value2 {
      Value2 total{0.0, 0.0};
      for(int i = 0; i < n; ++i) {
         History h = start;
         while(!h.terminal()) {
            InfoState s = h.current_infostate();
            auto actions = legal_actions(s);
            h = apply_action(h, actions[policy->sample_action(s, rng)], rng);
         }
         auto r = returns(h).payoffs;
         total[0] += r[0];
         total[1] += r[1];
      }
      return {total[0] / n, total[1] / n};
   };
}

/// Exact expected return with `policy` in both seats (small games only).
inline LeafEvaluator exact_evaluator(PolicyPtr policy)
{
   return [policy](const History& h, int, Rng&) -> Value2 { return expected_payoffs_from(h, *policy, *policy); };
}

// ---------------------------------------------------------------------------
// Selection formulas

inline constexpr double kLogitFloor = 1e-12;

inline double logit(double p)
{
   return std::log(std::max(p, kLogitFloor));
}

/// Action-value estimate. Visited arms use their empirical mean; unvisited
/// arms mix the node's leaf value with the prior-weighted mean of the
/// visited arms.
inline double q_hat(std::span< const int > visits, std::span< const double > returns_sum,
                    std::span< const double > prior, double leaf_value, size_t a)
{
   if(visits[a] > 0)
      return returns_sum[a] / visits[a];
   double total_visits = 0.0, visited_prior = 0.0, weighted = 0.0;
   for(size_t b = 0; b < visits.size(); ++b) {
      if(visits[b] <= 0)
         continue;
      total_visits += visits[b];
      visited_prior += prior[b];
      weighted += returns_sum[b] / visits[b] * prior[b];
   }
   if(total_visits == 0.0)
      return leaf_value;
   double mix = visited_prior > 0.0 ? total_visits / visited_prior * weighted : 0.0;
   return (leaf_value + mix) / (1.0 + total_visits);
}

/// Monotone value transform G(q) = c2 (c1 + max visits) q.
inline double value_transform(double q, int max_visits, const SearchConfig& cfg)
{
   return cfg.c2 * (cfg.c1 + max_visits) * q;
}

inline double gumbel_score(double gumbel, double prior_prob, double q, int max_visits, const SearchConfig& cfg)
{
   return gumbel + logit(prior_prob) + value_transform(q, max_visits, cfg);
}

inline std::vector< double > softmax(std::span< const double > x)
{
   double m = *std::max_element(x.begin(), x.end());
   std::vector< double > out(x.size());
   double s = 0.0;
   for(size_t i = 0; i < x.size(); ++i)
      s += out[i] = std::exp(x[i] - m);
   for(auto& v : out)
      v /= s;
   return out;
}

/// Action whose extra visit brings visit frequencies closest (squared error)
/// to `improved`. Ties go to the lowest index.
inline size_t non_root_select(std::span< const double > improved, std::span< const int > visits)
{
   double total = 1.0;
   for(int c : visits)
      total += c;
   // Only the chosen arm's term changes, so compare the per-arm deltas.
   size_t best = 0;
   double best_delta = std::numeric_limits< double >::infinity();
   for(size_t a = 0; a < visits.size(); ++a) {
      double with = improved[a] - (visits[a] + 1) / total;
      double without = improved[a] - visits[a] / total;
      double delta = with * with - without * without;
      if(delta < best_delta) {
         best_delta = delta;
         best = a;
      }
   }
   return best;
}

/// Indices of the k largest `logits + Gumbel noise`, best first. Equivalent
/// in distribution to sampling k items without replacement from softmax.
inline std::vector< size_t > gumbel_top_k(std::span< const double > logits, size_t k, Rng& rng)
{
   std::vector< double > perturbed(logits.size());
   for(size_t i = 0; i < logits.size(); ++i)
      perturbed[i] = logits[i] + sample_gumbel(rng);
   std::vector< size_t > idx(logits.size());
   std::iota(idx.begin(), idx.end(), 0);
   std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return perturbed[a] > perturbed[b]; });
   idx.resize(std::min(k, idx.size()));
   return idx;
}

// ---------------------------------------------------------------------------
// Sequential halving

struct HalvingEpoch {
   size_t width;  // |Â| during the epoch
   int quota;     // visits per surviving action
};

/// Epoch plan for `num_actions` root actions: width starts at
/// m = min(K, num_actions) and halves (rounding up) each epoch over
/// ceil(log2 m) epochs; quota = floor(num_sim / (width * ceil(log2 m))),
/// at least 1. For m = K a power of two this is floor(num_sim / ((K/2^(e-1)) log2 K)).
inline std::vector< HalvingEpoch > halving_schedule(int num_sim, int K, size_t num_actions)
{
   size_t m = std::min< size_t >(static_cast< size_t >(K), num_actions);
   std::vector< HalvingEpoch > plan;
   if(m <= 1)
      return plan;
   int epochs = 0;
   while((size_t{1} << epochs) < m)
      ++epochs;
   size_t width = m;
   for(int e = 0; e < epochs; ++e) {
      int quota = std::max(1, static_cast< int >(num_sim / static_cast< long >(width * epochs)));
      plan.push_back({width, quota});
      width = (width + 1) / 2;
   }
   return plan;
}

inline int scheduled_simulations(const std::vector< HalvingEpoch >& plan)
{
   int total = 0;
   for(const auto& e : plan)
      total += static_cast< int >(e.width) * e.quota;
   return total;
}

/// Root bandit state. `next` hands out the action for the next simulation;
/// once every survivor has met the epoch quota, survivors are cut to the
/// top half by score. Budget left after the last epoch goes round-robin to
/// the survivors.
class SequentialHalving {
  public:
   using ScoreFn = std::function< double(size_t) >;

   SequentialHalving(int num_sim, int K, size_t num_actions)
       : plan_(halving_schedule(num_sim, K, num_actions)), K_(K), num_actions_(num_actions)
   {
   }

   /// Epoch 0: keep the top-m actions by `initial_score`; ties keep the lower index.
   void initialize(const ScoreFn& initial_score)
   {
      size_t m = std::min< size_t >(static_cast< size_t >(K_), num_actions_);
      survivors_ = rank(all_actions(), initial_score);
      survivors_.resize(m);
      epoch_visits_.assign(num_actions_, 0);
      epoch_ = 1;
   }

   size_t next(const ScoreFn& score)
   {
      while(epoch_ <= static_cast< int >(plan_.size()) && epoch_complete()) {
         size_t keep = (survivors_.size() + 1) / 2;
         survivors_ = rank(survivors_, score);
         survivors_.resize(keep);
         std::fill(epoch_visits_.begin(), epoch_visits_.end(), 0);
         ++epoch_;
      }
      if(epoch_ <= static_cast< int >(plan_.size())) {
         int quota = plan_[epoch_ - 1].quota;
         for(size_t a : survivors_)
            if(epoch_visits_[a] < quota)
               return a;
      }
      // Leftover budget: round-robin over survivors.
      size_t a = survivors_[leftover_cursor_ % survivors_.size()];
      ++leftover_cursor_;
      return a;
   }

   void record(size_t a) { ++epoch_visits_[a]; }

   /// Final recommendation: the best-scoring survivor.
   [[nodiscard]] size_t recommend(const ScoreFn& score) const { return rank(survivors_, score).front(); }

   [[nodiscard]] const std::vector< size_t >& survivors() const { return survivors_; }
   [[nodiscard]] int epoch() const { return epoch_; }
   [[nodiscard]] const std::vector< HalvingEpoch >& plan() const { return plan_; }

  private:
   [[nodiscard]] std::vector< size_t > all_actions() const
   {
      std::vector< size_t > v(num_actions_);
      std::iota(v.begin(), v.end(), 0);
      return v;
   }

   [[nodiscard]] bool epoch_complete() const
   {
      int quota = plan_[epoch_ - 1].quota;
      return std::all_of(survivors_.begin(), survivors_.end(), [&](size_t a) { return epoch_visits_[a] >= quota; });
   }

   static std::vector< size_t > rank(std::vector< size_t > actions, const ScoreFn& score)
   {
      std::vector< std::pair< double, size_t > > scored;
      for(size_t a : actions)
         scored.emplace_back(score(a), a);
      std::stable_sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) {
         return x.first > y.first || (x.first == y.first && x.second < y.second);
      });
      for(size_t i = 0; i < actions.size(); ++i)
         actions[i] = scored[i].second;
      return actions;
   }

   std::vector< HalvingEpoch > plan_;
   int K_;
   size_t num_actions_;
   std::vector< size_t > survivors_;
   std::vector< int > epoch_visits_;
   int epoch_ = 0;
   size_t leftover_cursor_ = 0;
};

// ---------------------------------------------------------------------------
// Tree

struct SearchNode {
   int player = 0;
   std::vector< Action > actions;
   std::vector< double > prior;
   std::vector< int > visits;
   std::vector< double > returns_sum;
   double leaf_value = 0.0;  // v at creation, for `player`
   int descents = 0;         // simulations that selected an action here

   [[nodiscard]] int max_visits() const { return visits.empty() ? 0 : *std::max_element(visits.begin(), visits.end()); }
   [[nodiscard]] int total_visits() const { return std::accumulate(visits.begin(), visits.end(), 0); }
   [[nodiscard]] double q(size_t a) const { return q_hat(visits, returns_sum, prior, leaf_value, a); }
};

struct SearchTree {
   std::unordered_map< std::string, SearchNode > nodes;

   SearchNode* find(const std::string& key)
   {
      auto it = nodes.find(key);
      return it == nodes.end() ? nullptr : &it->second;
   }
};

struct SearchResult {
   Action action;
   size_t action_index = 0;
   std::vector< double > visit_policy;  // normalized root visit counts
   SearchTree tree;
   std::string root_key;
   int simulations = 0;
   std::vector< nlohmann::json > trace;
};

namespace detail {

inline SearchNode make_node(const InfoState& s, const PolicyProvider& p)
{
   SearchNode n;
   n.player = s.player;
   n.actions = legal_actions(s);
   n.prior = p.action_probs(s);
   validate_distribution(n.prior, n.actions.size(), s.key(), p.name());
   n.visits.assign(n.actions.size(), 0);
   n.returns_sum.assign(n.actions.size(), 0.0);
   return n;
}

inline std::vector< double > improved_policy(const SearchNode& n, const SearchConfig& cfg)
{
   std::vector< double > x(n.actions.size());
   int mv = n.max_visits();
   for(size_t a = 0; a < x.size(); ++a)
      x[a] = logit(n.prior[a]) + value_transform(n.q(a), mv, cfg);
   return softmax(x);
}

inline size_t puct_select(const SearchNode& n, std::span< const double > prior, double c_puct)
{
   double total = n.total_visits();
   double sqrt_total = std::sqrt(total);
   size_t best = 0;
   double best_score = -std::numeric_limits< double >::infinity();
   for(size_t a = 0; a < n.actions.size(); ++a) {
      // Unvisited actions take the node's leaf value, as in the completed Q.
      double q = n.visits[a] > 0 ? n.returns_sum[a] / n.visits[a] : n.leaf_value;
      double score = q + c_puct * prior[a] * sqrt_total / (1.0 + n.visits[a]);
      if(score > best_score) {
         best_score = score;
         best = a;
      }
   }
   return best;
}

inline std::vector< double > sample_dirichlet(size_t n, double alpha, Rng& rng)
{
   std::gamma_distribution< double > gamma(alpha, 1.0);
   std::vector< double > d(n);
   double s = 0.0;
   for(auto& x : d)
      s += x = gamma(rng.engine());
   if(s <= 0.0) {
      std::fill(d.begin(), d.end(), 1.0 / static_cast< double >(n));
      return d;
   }
   for(auto& x : d)
      x /= s;
   return d;
}

}  // namespace detail

/// Runs num_sim simulations from `s` and returns the chosen root action.
inline SearchResult run_search(const InfoState& s, const PolicyProvider& p, const LeafEvaluator& v,
                               const SearchConfig& cfg, const Belief& belief, const GameParams& params, Rng& rng)
{
   cfg.validate();
   SearchResult result;
   result.root_key = s.key();
   SearchTree& tree = result.tree;

   // The root is expanded up front so every simulation passes through it.
   SearchNode& root = tree.nodes.emplace(s.key(), detail::make_node(s, p)).first->second;
   {
      History h0 = sample_world_state(s, belief, params, rng);
      root.leaf_value = v(h0, s.player, rng)[s.player];
   }
   const size_t n_root = root.actions.size();

   std::vector< double > gumbel(n_root, 0.0);
   std::optional< SequentialHalving > halving;
   std::vector< double > root_prior = root.prior;
   if(cfg.mode == SearchMode::gumbel) {
      for(auto& g : gumbel)
         g = sample_gumbel(rng);
      halving.emplace(cfg.num_sim, cfg.K, n_root);
      halving->initialize([&](size_t a) { return gumbel[a] + logit(root.prior[a]); });
   } else {
      double alpha = cfg.dirichlet_alpha.value_or(1.0 / static_cast< double >(n_root));
      auto noise = detail::sample_dirichlet(n_root, alpha, rng);
      for(size_t a = 0; a < n_root; ++a)
         root_prior[a] = (1.0 - cfg.epsilon_mix) * root.prior[a] + cfg.epsilon_mix * noise[a];
   }
   auto root_score = [&](size_t a) { return gumbel_score(gumbel[a], root.prior[a], root.q(a), root.max_visits(), cfg); };

   std::vector< std::pair< SearchNode*, size_t > > path;
   for(int sim = 0; sim < cfg.num_sim; ++sim) {
      History h = sample_world_state(s, belief, params, rng);
      path.clear();
      Value2 r{0.0, 0.0};
      while(true) {
         if(h.terminal()) {
            r = returns(h).payoffs;
            break;
         }
         int player = h.current_player();
         InfoState si = h.infostate(player);
         std::string key = si.key();
         SearchNode* node = tree.find(key);
         if(node == nullptr) {
            SearchNode fresh = detail::make_node(si, p);
            r = v(h, player, rng);
            fresh.leaf_value = r[player];
            tree.nodes.emplace(std::move(key), std::move(fresh));
            break;
         }
         size_t a;
         if(node == &root) {
            if(cfg.mode == SearchMode::gumbel) {
               a = halving->next(root_score);
               halving->record(a);
            } else {
               a = detail::puct_select(root, root_prior, cfg.c_puct);
            }
         } else if(cfg.mode == SearchMode::gumbel) {
            a = non_root_select(detail::improved_policy(*node, cfg), node->visits);
         } else {
            a = detail::puct_select(*node, node->prior, cfg.c_puct);
         }
         ++node->descents;
         path.emplace_back(node, a);
         h = apply_action(h, node->actions[a], rng);
      }
      for(auto [node, a] : path) {
         node->returns_sum[a] += r[node->player];
         node->visits[a] += 1;
      }
      if(cfg.trace) {
         nlohmann::json steps = nlohmann::json::array();
         for(auto [node, a] : path)
            steps.push_back({{"player", node->player + 1}, {"action", node->actions[a].to_string()}});
         result.trace.push_back({{"sim", sim}, {"path", steps}, {"return", r}});
      }
   }
   result.simulations = cfg.num_sim;

   int total = root.total_visits();
   result.visit_policy.assign(n_root, 0.0);
   for(size_t a = 0; a < n_root; ++a)
      result.visit_policy[a] = total > 0 ? static_cast< double >(root.visits[a]) / total : 0.0;

   if(cfg.mode == SearchMode::gumbel) {
      result.action_index = halving->recommend(root_score);
   } else {
      result.action_index = static_cast< size_t >(std::max_element(root.visits.begin(), root.visits.end()) -
                                                  root.visits.begin());
   }
   result.action = root.actions[result.action_index];
   return result;
}

inline SearchResult gumbel_search(const InfoState& s, const PolicyProvider& p, const LeafEvaluator& v,
                                  SearchConfig cfg, const Belief& belief, const GameParams& params, Rng& rng)
{
   cfg.mode = SearchMode::gumbel;
   return run_search(s, p, v, cfg, belief, params, rng);
}

inline SearchResult va_search(const InfoState& s, const PolicyProvider& p, const LeafEvaluator& v,
                              SearchConfig cfg, const Belief& belief, const GameParams& params, Rng& rng)
{
   cfg.mode = SearchMode::vanilla;
   return run_search(s, p, v, cfg, belief, params, rng);
}

/// Wraps a base policy with run-time search. Beliefs assume the opponent
/// plays the base policy.
class SearchPolicy : public PolicyProvider {
  public:
   SearchPolicy(std::string name, std::shared_ptr< const InstanceDB > db, GameParams params, PolicyPtr base,
                LeafEvaluator evaluator, SearchConfig cfg)
       : name_(std::move(name)),
         db_(std::move(db)),
         params_(params),
         base_(std::move(base)),
         evaluator_(std::move(evaluator)),
         cfg_(cfg)
   {
      cfg_.validate();
   }

   [[nodiscard]] std::string name() const override { return name_; }

   size_t sample_action(const InfoState& s, Rng& rng) const override
   {
      Belief b = posterior_with_fallback(s, *base_, *db_);
      return run_search(s, *base_, evaluator_, cfg_, b, params_, rng).action_index;
   }

   /// One-hot on the action a search seeded by the infostate key would pick.
   [[nodiscard]] std::vector< double > action_probs(const InfoState& s) const override
   {
      Rng rng(fnv1a(s.key()));
      std::vector< double > probs(num_legal_actions(s), 0.0);
      probs[sample_action(s, rng)] = 1.0;
      return probs;
   }

   [[nodiscard]] std::optional< Value2 > value(const InfoState& s) const override { return base_->value(s); }

  private:
   std::string name_;
   std::shared_ptr< const InstanceDB > db_;
   GameParams params_;
   PolicyPtr base_;
   LeafEvaluator evaluator_;
   SearchConfig cfg_;
};

}  // namespace metagame

#endif  // METAGAME_SEARCH_HPP
