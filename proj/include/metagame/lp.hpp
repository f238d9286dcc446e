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

// Dense two-phase primal simplex for small linear programs:
//   maximize c.x  subject to  a_i.x (<=|=|>=) b_i,  x >= 0.

#ifndef METAGAME_LP_HPP
#define METAGAME_LP_HPP

#include <cmath>
#include <limits>
#include <vector>

#include "metagame/common.hpp"

namespace metagame::lp {

enum class Sense { le, eq, ge };

enum class Status { optimal, infeasible, unbounded, iteration_limit };

struct Constraint {
   std::vector< double > coeffs;  // dense, one per variable
   Sense sense;
   double rhs;
};

struct Problem {
   size_t num_vars = 0;
   std::vector< double > objective;  // maximized
   std::vector< Constraint > rows;

   explicit Problem(size_t n = 0) : num_vars(n), objective(n, 0.0) {}

   void add(std::vector< double > coeffs, Sense sense, double rhs)
   {
      coeffs.resize(num_vars, 0.0);
      rows.push_back({std::move(coeffs), sense, rhs});
   }
};

struct Solution {
   Status status = Status::infeasible;
   std::vector< double > x;
   double objective = 0.0;
   double max_violation = 0.0;  // largest constraint residual at x
};

inline constexpr double kFeasibilityTol = 1e-9;

namespace detail {

class Tableau {
  public:
   Tableau(size_t rows, size_t cols) : rows_(rows), cols_(cols), data_((rows + 1) * (cols + 1), 0.0) {}

   double& at(size_t r, size_t c) { return data_[r * (cols_ + 1) + c]; }
   [[nodiscard]] double at(size_t r, size_t c) const { return data_[r * (cols_ + 1) + c]; }
   // Column `cols_` holds the right-hand side; row `rows_` the reduced costs.
   double& rhs(size_t r) { return at(r, cols_); }
   double& cost(size_t c) { return at(rows_, c); }

   void pivot(size_t pr, size_t pc)
   {
      double inv = 1.0 / at(pr, pc);
      for(size_t c = 0; c <= cols_; ++c)
         at(pr, c) *= inv;
      at(pr, pc) = 1.0;
      for(size_t r = 0; r <= rows_; ++r) {
         if(r == pr)
            continue;
         double f = at(r, pc);
         if(f == 0.0)
            continue;
         for(size_t c = 0; c <= cols_; ++c)
            at(r, c) -= f * at(pr, c);
         at(r, pc) = 0.0;
      }
   }

   [[nodiscard]] size_t rows() const { return rows_; }
   [[nodiscard]] size_t cols() const { return cols_; }

  private:
   size_t rows_, cols_;
   std::vector< double > data_;
};

// Minimizes the cost row over the columns allowed by `allowed`. Dantzig
// pricing, switching to Bland's rule after a run of degenerate pivots.
inline Status run_simplex(Tableau& t, std::vector< size_t >& basis, const std::vector< bool >& allowed)
{
   const double eps = 1e-11;
   int degenerate_run = 0;
   for(int iter = 0; iter < 50000; ++iter) {
      bool bland = degenerate_run > 50;
      size_t enter = t.cols();
      double best = -eps;
      for(size_t c = 0; c < t.cols(); ++c) {
         if(!allowed[c])
            continue;
         double rc = t.cost(c);
         if(rc < -eps && (bland ? enter == t.cols() : rc < best)) {
            best = rc;
            enter = c;
         }
      }
      if(enter == t.cols())
         return Status::optimal;
      size_t leave = t.rows();
      double best_ratio = std::numeric_limits< double >::infinity();
      for(size_t r = 0; r < t.rows(); ++r) {
         double a = t.at(r, enter);
         if(a > eps) {
            double ratio = t.rhs(r) / a;
            if(ratio < best_ratio - 1e-12 ||
               (std::abs(ratio - best_ratio) <= 1e-12 && leave < t.rows() && basis[r] < basis[leave])) {
               best_ratio = ratio;
               leave = r;
            }
         }
      }
      if(leave == t.rows())
         return Status::unbounded;
      degenerate_run = best_ratio <= 1e-12 ? degenerate_run + 1 : 0;
      t.pivot(leave, enter);
      basis[leave] = enter;
   }
   return Status::iteration_limit;
}

}  // namespace detail

inline Solution solve(const Problem& prob)
{
   const size_t n = prob.num_vars;
   const size_t m = prob.rows.size();
   // Column layout: structural | slack/surplus (one per inequality) | artificial (one per row).
   std::vector< size_t > slack_col(m, SIZE_MAX);
   size_t n_slack = 0;
   for(size_t i = 0; i < m; ++i)
      if(prob.rows[i].sense != Sense::eq)
         slack_col[i] = n + n_slack++;
   const size_t art0 = n + n_slack;
   const size_t cols = art0 + m;
   detail::Tableau t(m, cols);
   std::vector< size_t > basis(m);
   for(size_t i = 0; i < m; ++i) {
      const auto& row = prob.rows[i];
      double sign = row.rhs < 0 ? -1.0 : 1.0;
      for(size_t j = 0; j < n; ++j)
         t.at(i, j) = sign * row.coeffs[j];
      if(slack_col[i] != SIZE_MAX)
         t.at(i, slack_col[i]) = sign * (row.sense == Sense::le ? 1.0 : -1.0);
      t.at(i, art0 + i) = 1.0;
      t.rhs(i) = sign * row.rhs;
      basis[i] = art0 + i;
   }
   // Phase 1: minimize the sum of artificials.
   for(size_t i = 0; i < m; ++i)
      for(size_t c = 0; c <= cols; ++c)
         if(c < art0 || c == cols)
            t.at(m, c) -= t.at(i, c);
   std::vector< bool > allowed(cols, true);
   Solution sol;
   auto st = detail::run_simplex(t, basis, allowed);
   if(st == Status::iteration_limit) {
      sol.status = st;
      return sol;
   }
   if(-t.rhs(m) > kFeasibilityTol * std::max< double >(1.0, static_cast< double >(m))) {
      sol.status = Status::infeasible;
      return sol;
   }
   // Drive remaining artificials out of the basis.
   for(size_t i = 0; i < m; ++i) {
      if(basis[i] < art0)
         continue;
      for(size_t c = 0; c < art0; ++c) {
         if(std::abs(t.at(i, c)) > 1e-9) {
            t.pivot(i, c);
            basis[i] = c;
            break;
         }
      }
   }
   for(size_t c = art0; c < cols; ++c)
      allowed[c] = false;
   // Phase 2 cost row: minimize -objective.
   for(size_t c = 0; c <= cols; ++c)
      t.cost(c) = 0.0;
   for(size_t j = 0; j < n; ++j)
      t.cost(j) = -prob.objective[j];
   for(size_t i = 0; i < m; ++i) {
      size_t b = basis[i];
      double cb = b < n ? -prob.objective[b] : 0.0;
      if(cb == 0.0)
         continue;
      for(size_t c = 0; c <= cols; ++c)
         t.cost(c) -= cb * t.at(i, c);
   }
   st = detail::run_simplex(t, basis, allowed);
   if(st != Status::optimal) {
      sol.status = st;
      return sol;
   }
   sol.status = Status::optimal;
   sol.x.assign(n, 0.0);
   for(size_t i = 0; i < m; ++i)
      if(basis[i] < n)
         sol.x[basis[i]] = std::max(0.0, t.rhs(i));
   sol.objective = 0.0;
   for(size_t j = 0; j < n; ++j)
      sol.objective += prob.objective[j] * sol.x[j];
   for(const auto& row : prob.rows) {
      double lhs = 0.0;
      for(size_t j = 0; j < n; ++j)
         lhs += row.coeffs[j] * sol.x[j];
      double viol = 0.0;
      if(row.sense == Sense::le)
         viol = lhs - row.rhs;
      else if(row.sense == Sense::ge)
         viol = row.rhs - lhs;
      else
         viol = std::abs(lhs - row.rhs);
      sol.max_violation = std::max(sol.max_violation, viol);
   }
   return sol;
}

}  // namespace metagame::lp

#endif  // METAGAME_LP_HPP
