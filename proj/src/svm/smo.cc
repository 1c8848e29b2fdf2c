// Copyright 2026 The mtverify Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "mtv/error.h"
#include "mtv/svm.h"

namespace mtv::svm {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Floor for the curvature of a pair update (non-PD kernel matrices).
constexpr double kTau = 1e-12;

class SmoSolver {
 public:
  SmoSolver(std::span<const double> features, std::size_t dim,
            std::span<const double> y, const KernelSpec& kernel, double C)
      : m_(y.size()), y_(y.begin(), y.end()), C_(C), kernel_(m_ * m_),
        alpha_(m_, 0.0), grad_(m_, -1.0) {
    for (std::size_t i = 0; i < m_; ++i) {
      const auto xi = features.subspan(i * dim, dim);
      for (std::size_t j = i; j < m_; ++j) {
        const double k = kernel_eval(kernel, xi, features.subspan(j * dim, dim));
        kernel_[i * m_ + j] = k;
        kernel_[j * m_ + i] = k;
      }
    }
  }

  // Returns the number of pair updates performed.
  std::int64_t solve(double tolerance, std::int64_t max_iterations) {
    std::int64_t it = 0;
    while (true) {
      std::size_t i = 0;
      std::size_t j = 0;
      violation_ = select_pair(i, j);
      if (violation_ <= tolerance) return it;
      if (it >= max_iterations) {
        std::ostringstream msg;
        msg << "SMO did not converge in " << max_iterations
            << " iterations; final KKT violation " << violation_;
        throw TrainingError(msg.str());
      }
      update_pair(i, j);
      ++it;
    }
  }

  double violation() const { return violation_; }
  const std::vector<double>& alpha() const { return alpha_; }

  // b = -rho: mean of y_i G_i over free vectors, else the midpoint of the
  // feasible interval given by the bounded ones.
  double bias() const {
    double upper = kInf;
    double lower = -kInf;
    double free_sum = 0.0;
    std::size_t free_count = 0;
    for (std::size_t t = 0; t < m_; ++t) {
      const double yg = y_[t] * grad_[t];
      if (at_upper(t)) {
        if (y_[t] < 0) upper = std::min(upper, yg);
        else lower = std::max(lower, yg);
      } else if (at_lower(t)) {
        if (y_[t] > 0) upper = std::min(upper, yg);
        else lower = std::max(lower, yg);
      } else {
        ++free_count;
        free_sum += yg;
      }
    }
    const double rho = free_count > 0 ? free_sum / static_cast<double>(free_count)
                                      : (upper + lower) / 2.0;
    return -rho;
  }

 private:
  bool at_upper(std::size_t t) const { return alpha_[t] >= C_; }
  bool at_lower(std::size_t t) const { return alpha_[t] <= 0.0; }
  bool in_up(std::size_t t) const {
    return y_[t] > 0 ? !at_upper(t) : !at_lower(t);
  }
  bool in_low(std::size_t t) const {
    return y_[t] > 0 ? !at_lower(t) : !at_upper(t);
  }
  double q(std::size_t a, std::size_t b) const {
    return y_[a] * y_[b] * kernel_[a * m_ + b];
  }

  // Maximal violating pair; strict comparisons over ascending indices keep
  // the lowest index on ties.
  double select_pair(std::size_t& i, std::size_t& j) const {
    double g_max = -kInf;
    double g_min = kInf;
    for (std::size_t t = 0; t < m_; ++t) {
      const double v = -y_[t] * grad_[t];
      if (in_up(t) && v > g_max) {
        g_max = v;
        i = t;
      }
      if (in_low(t) && v < g_min) {
        g_min = v;
        j = t;
      }
    }
    return g_max - g_min;
  }

  void update_pair(std::size_t i, std::size_t j) {
    const double old_ai = alpha_[i];
    const double old_aj = alpha_[j];
    const double kii = kernel_[i * m_ + i];
    const double kjj = kernel_[j * m_ + j];
    const double kij = kernel_[i * m_ + j];
    double& ai = alpha_[i];
    double& aj = alpha_[j];

    if (y_[i] != y_[j]) {
      double quad = kii + kjj - 2.0 * kij;
      if (quad <= 0) quad = kTau;
      const double delta = (-grad_[i] - grad_[j]) / quad;
      const double diff = ai - aj;
      ai += delta;
      aj += delta;
      if (diff > 0) {
        if (aj < 0) {
          aj = 0;
          ai = diff;
        }
      } else if (ai < 0) {
        ai = 0;
        aj = -diff;
      }
      if (diff > 0) {
        if (ai > C_) {
          ai = C_;
          aj = C_ - diff;
        }
      } else if (aj > C_) {
        aj = C_;
        ai = C_ + diff;
      }
    } else {
      double quad = kii + kjj - 2.0 * kij;
      if (quad <= 0) quad = kTau;
      const double delta = (grad_[i] - grad_[j]) / quad;
      const double sum = ai + aj;
      ai -= delta;
      aj += delta;
      if (sum > C_) {
        if (ai > C_) {
          ai = C_;
          aj = sum - C_;
        }
      } else if (aj < 0) {
        aj = 0;
        ai = sum;
      }
      if (sum > C_) {
        if (aj > C_) {
          aj = C_;
          ai = sum - C_;
        }
      } else if (ai < 0) {
        ai = 0;
        aj = sum;
      }
    }

    const double di = ai - old_ai;
    const double dj = aj - old_aj;
    for (std::size_t t = 0; t < m_; ++t) {
      grad_[t] += q(t, i) * di + q(t, j) * dj;
    }
  }

  std::size_t m_;
  std::vector<double> y_;
  double C_;
  std::vector<double> kernel_;
  std::vector<double> alpha_;
  std::vector<double> grad_;
  double violation_ = kInf;
};

}  // namespace

std::size_t BinarySvm::support_vector_count() const {
  return static_cast<std::size_t>(
      std::count_if(alphas.begin(), alphas.end(), [](double a) { return a > 0.0; }));
}

BinarySvm train_binary(std::span<const double> features, std::size_t dim,
                       std::span<const double> targets, const KernelSpec& kernel,
                       const SvmTrainConfig& cfg) {
  kernel.validate();
  cfg.validate();
  if (dim == 0 || features.size() != targets.size() * dim) {
    throw ArgumentError("train_binary: feature matrix does not match targets");
  }
  bool has_pos = false;
  bool has_neg = false;
  for (double t : targets) {
    if (t == 1.0) has_pos = true;
    else if (t == -1.0) has_neg = true;
    else throw ArgumentError("train_binary: targets must be +1 or -1");
  }
  if (!has_pos || !has_neg) {
    throw ArgumentError("train_binary: both classes must be present");
  }

  SmoSolver solver(features, dim, targets, kernel, cfg.C);
  BinarySvm machine;
  machine.iterations = solver.solve(cfg.kkt_tolerance, cfg.max_iterations);
  machine.kernel = kernel;
  machine.dim = dim;
  machine.C = cfg.C;
  machine.points.assign(features.begin(), features.end());
  machine.targets.assign(targets.begin(), targets.end());
  machine.alphas = solver.alpha();
  machine.bias = solver.bias();
  machine.final_violation = solver.violation();
  return machine;
}

BinarySvm train_binary(const dataset::LabeledVectorSet& set, int positive,
                       const KernelSpec& kernel, const SvmTrainConfig& cfg) {
  const std::set<int> distinct(set.labels.begin(), set.labels.end());
  if (distinct.size() != 2 || !distinct.contains(positive)) {
    throw ArgumentError("train_binary: set must hold exactly two classes including " +
                        std::to_string(positive));
  }
  std::vector<double> targets;
  targets.reserve(set.size());
  for (int label : set.labels) targets.push_back(label == positive ? 1.0 : -1.0);
  return train_binary(set.features, set.cols, targets, kernel, cfg);
}

double decision_value(const BinarySvm& machine, std::span<const double> x) {
  if (x.size() != machine.dim) {
    throw ArgumentError("decision_value: expected dimension " +
                        std::to_string(machine.dim) + ", got " +
                        std::to_string(x.size()));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < machine.size(); ++i) {
    if (machine.alphas[i] == 0.0) continue;
    sum += machine.alphas[i] * machine.targets[i] *
           kernel_eval(machine.kernel, x, machine.point(i));
  }
  return sum + machine.bias;
}

double kkt_violation(const BinarySvm& machine) {
  const std::size_t m = machine.size();
  double g_max = -kInf;
  double g_min = kInf;
  for (std::size_t t = 0; t < m; ++t) {
    // G_t = y_t (D(x_t) - b) - 1
    double f = 0.0;
    for (std::size_t s = 0; s < m; ++s) {
      f += machine.alphas[s] * machine.targets[s] *
           kernel_eval(machine.kernel, machine.point(t), machine.point(s));
    }
    const double y = machine.targets[t];
    const double v = -y * (y * f - 1.0);
    const bool upper = machine.alphas[t] >= machine.C;
    const bool lower = machine.alphas[t] <= 0.0;
    const bool up = y > 0 ? !upper : !lower;
    const bool low = y > 0 ? !lower : !upper;
    if (up) g_max = std::max(g_max, v);
    if (low) g_min = std::min(g_min, v);
  }
  return g_max - g_min;
}

}  // namespace mtv::svm
