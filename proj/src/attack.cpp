#include "purify/attack.hpp"

#include "purify/errors.hpp"

namespace purify {

void validate(const AttackSpec& spec) {
  if (!(spec.epsilon >= 0.0) || !std::isfinite(spec.epsilon))
    throw PreconditionError("attack budget epsilon must be finite and non-negative");
}

Vec perturb_direction(const AttackSpec& spec, const Vec& grad) {
  validate(spec);
  if (spec.norm == Norm::L2) {
    const double n = grad.norm();
    if (n <= 1e-12 || spec.epsilon == 0.0) return Vec::Zero(grad.size());
    return (spec.epsilon / n) * grad;
  }
  Vec delta(grad.size());
  for (int i = 0; i < grad.size(); ++i) delta(i) = spec.epsilon * sgn(grad(i));
  return delta;
}

Vec perturb(const AttackSpec& spec, LossKind kind, const GatedNetwork& net, const Vec& z, double y) {
  return perturb_direction(spec, grad_z(kind, net, z, y));
}

Vec perturb(const AttackSpec& spec, const GatedNetwork& net, const ContrastivePair& pair) {
  return perturb_direction(spec, grad_z(net, pair));
}

namespace {

// Hidden vector at z_adv, gated either by itself or by the clean pattern.
Vec gated_at(const GatedNetwork& net, const Vec& pre_adv, const Vec& pre_clean, GateMode mode,
             int& flips) {
  flips = 0;
  Vec s(net.H());
  for (int h = 0; h < net.H(); ++h) {
    const bool clean_open = std::abs(pre_clean(h)) >= net.b()(h);
    const bool adv_open = std::abs(pre_adv(h)) >= net.b()(h);
    flips += clean_open != adv_open;
    const bool open = mode == GateMode::Regated ? adv_open : clean_open;
    s(h) = open ? pre_adv(h) : 0.0;
  }
  return s;
}

}  // namespace

AdvResult adv_loss(const AttackSpec& spec, LossKind kind, const GatedNetwork& net, const Vec& z,
                   double y, GateMode mode) {
  const Vec& a = net.scalar_head().a;
  AdvResult res;
  const Vec pre = net.preactivation(z);
  Vec s(net.H());
  for (int h = 0; h < net.H(); ++h) s(h) = activation(pre(h), net.b()(h));
  res.clean = loss_supervised(kind, a.dot(s), y);
  if (spec.epsilon == 0.0) {
    validate(spec);
    res.adversarial = res.clean;
    return res;
  }
  const Vec delta = perturb(spec, kind, net, z, y);
  const Vec pre_adv = net.preactivation(z + delta);
  const Vec sa = gated_at(net, pre_adv, pre, mode, res.gate_flips);
  res.adversarial = loss_supervised(kind, a.dot(sa), y);
  return res;
}

AdvResult adv_loss(const AttackSpec& spec, const GatedNetwork& net, const ContrastivePair& pair,
                   GateMode mode) {
  AdvResult res;
  const Vec rp = represent(net, pair.z_prime);
  const Vec pre = net.preactivation(pair.z);
  Vec s(net.H());
  for (int h = 0; h < net.H(); ++h) s(h) = activation(pre(h), net.b()(h));
  res.clean = loss_contrastive(net.head_transpose_times(s).dot(rp), pair.y);
  if (spec.epsilon == 0.0) {
    validate(spec);
    res.adversarial = res.clean;
    return res;
  }
  const Vec delta = perturb(spec, net, pair);
  const Vec pre_adv = net.preactivation(pair.z + delta);
  const Vec sa = gated_at(net, pre_adv, pre, mode, res.gate_flips);
  res.adversarial = loss_contrastive(net.head_transpose_times(sa).dot(rp), pair.y);
  return res;
}

double attack_effectiveness(const GatedNetwork& net, const Vec& z) {
  const Vec& a = net.scalar_head().a;
  const Vec pre = net.preactivation(z);
  Vec da(net.H());
  for (int h = 0; h < net.H(); ++h) da(h) = std::abs(pre(h)) >= net.b()(h) ? a(h) : 0.0;
  return net.weights_times(da).norm();
}

double attack_effectiveness(const GatedNetwork& net, const Sample& sample) {
  return attack_effectiveness(net, sample.z);
}

double attack_effectiveness_l1(const GatedNetwork& net, const Vec& z) {
  const Vec& a = net.scalar_head().a;
  const Vec pre = net.preactivation(z);
  Vec da(net.H());
  for (int h = 0; h < net.H(); ++h) da(h) = std::abs(pre(h)) >= net.b()(h) ? a(h) : 0.0;
  return net.weights_times(da).lpNorm<1>();
}

}  // namespace purify
