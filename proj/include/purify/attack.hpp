#pragma once

#include "purify/objectives.hpp"

namespace purify {

enum class Norm { L2, Linf };

struct AttackSpec {
  Norm norm = Norm::L2;
  double epsilon = 0.0;
};

void validate(const AttackSpec& spec);

// How the adversarial loss treats the gates at z + delta.
// Regated re-evaluates 1{|W'(z+delta)| >= b}; Frozen keeps the indicators of
// the clean input, which is the piecewise-linear model the attack was derived
// from.
enum class GateMode { Regated, Frozen };

struct AdvResult {
  double clean = 0.0;
  double adversarial = 0.0;
  int gate_flips = 0;
};

// L2: eps * g / ||g|| (zero when ||g|| <= 1e-12). Linf: eps * sgn(g).
Vec perturb_direction(const AttackSpec& spec, const Vec& grad);

Vec perturb(const AttackSpec& spec, LossKind kind, const GatedNetwork& net, const Vec& z, double y);
Vec perturb(const AttackSpec& spec, const GatedNetwork& net, const ContrastivePair& pair);

AdvResult adv_loss(const AttackSpec& spec, LossKind kind, const GatedNetwork& net, const Vec& z,
                   double y, GateMode mode = GateMode::Regated);
AdvResult adv_loss(const AttackSpec& spec, const GatedNetwork& net, const ContrastivePair& pair,
                   GateMode mode = GateMode::Regated);

// ||a' diag(1{|W'z| >= b}) W'||_2 and its l1 counterpart for FGSM.
double attack_effectiveness(const GatedNetwork& net, const Vec& z);
double attack_effectiveness(const GatedNetwork& net, const Sample& sample);
double attack_effectiveness_l1(const GatedNetwork& net, const Vec& z);

}  // namespace purify
