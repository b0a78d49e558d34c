#pragma once

#include <cmath>
#include <string>

#include "purify/gated_net.hpp"

namespace purify {

enum class LossKind { Square, Absolute, Logistic, ContrastiveLogistic };

std::string to_string(LossKind kind);
bool is_supervised(LossKind kind);

// log(1 + exp(t)) without overflow.
inline double softplus(double t) { return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t))); }
// 1 / (1 + exp(-t)) without overflow.
inline double sigmoid(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}
inline double sgn(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

double loss_supervised(LossKind kind, double f, double y);
// d loss / d f; Absolute uses sgn(f - y) with sgn(0) = 0.
double dloss_supervised(LossKind kind, double f, double y);

double loss_contrastive(double g, int y);
double dloss_contrastive(double g, int y);  // d loss / d g

double score_contrastive(const GatedNetwork& net, const Vec& z, const Vec& z_prime);
double score_contrastive(const GatedNetwork& net, const ContrastivePair& pair);

// Input gradients with the gate indicators held at their values at z.
// Supervised: dl/df * W diag(1{|W'z| >= b}) a.
Vec grad_z(LossKind kind, const GatedNetwork& net, const Vec& z, double y);
// Contrastive: gradient with respect to the first argument only,
// dl/dg * W diag(1{|W'z| >= b}) A represent(net, z').
Vec grad_z(const GatedNetwork& net, const ContrastivePair& pair);
Vec grad_z_contrastive(const GatedNetwork& net, const Vec& z, const Vec& z_prime, int y);

}  // namespace purify
