#include "purify/objectives.hpp"

#include "purify/errors.hpp"

namespace purify {

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::Square: return "square";
    case LossKind::Absolute: return "absolute";
    case LossKind::Logistic: return "logistic";
    case LossKind::ContrastiveLogistic: return "contrastive";
  }
  return "unknown";
}

bool is_supervised(LossKind kind) { return kind != LossKind::ContrastiveLogistic; }

namespace {

void check_label(double y) {
  if (y != 1.0 && y != -1.0) throw LabelError("logistic loss needs y in {-1, +1}");
}

}  // namespace

double loss_supervised(LossKind kind, double f, double y) {
  switch (kind) {
    case LossKind::Square: return (f - y) * (f - y);
    case LossKind::Absolute: return std::abs(f - y);
    case LossKind::Logistic: check_label(y); return softplus(-y * f);
    case LossKind::ContrastiveLogistic: break;
  }
  throw HeadMismatchError("contrastive loss is not a supervised loss");
}

double dloss_supervised(LossKind kind, double f, double y) {
  switch (kind) {
    case LossKind::Square: return 2.0 * (f - y);
    case LossKind::Absolute: return sgn(f - y);
    case LossKind::Logistic: check_label(y); return -y * sigmoid(-y * f);
    case LossKind::ContrastiveLogistic: break;
  }
  throw HeadMismatchError("contrastive loss is not a supervised loss");
}

double loss_contrastive(double g, int y) {
  if (y != 1 && y != -1) throw LabelError("contrastive label must be +1 or -1");
  return softplus(-y * g);
}

double dloss_contrastive(double g, int y) {
  if (y != 1 && y != -1) throw LabelError("contrastive label must be +1 or -1");
  return -y * sigmoid(-y * g);
}

double score_contrastive(const GatedNetwork& net, const Vec& z, const Vec& z_prime) {
  return represent(net, z).dot(represent(net, z_prime));
}

double score_contrastive(const GatedNetwork& net, const ContrastivePair& pair) {
  return score_contrastive(net, pair.z, pair.z_prime);
}

Vec grad_z(LossKind kind, const GatedNetwork& net, const Vec& z, double y) {
  if (!is_supervised(kind)) throw HeadMismatchError("use the pair overload for the contrastive loss");
  const Vec& a = net.scalar_head().a;
  const Vec pre = net.preactivation(z);
  Vec da(net.H());
  double f = 0.0;
  for (int h = 0; h < net.H(); ++h) {
    const bool open = std::abs(pre(h)) >= net.b()(h);
    da(h) = open ? a(h) : 0.0;
    if (open) f += a(h) * pre(h);
  }
  return dloss_supervised(kind, f, y) * net.weights_times(da);
}

Vec grad_z_contrastive(const GatedNetwork& net, const Vec& z, const Vec& z_prime, int y) {
  const Vec pre = net.preactivation(z);
  Vec s(net.H());
  for (int h = 0; h < net.H(); ++h) s(h) = activation(pre(h), net.b()(h));
  const Vec r = net.head_transpose_times(s);
  const Vec rp = represent(net, z_prime);
  const double dl = dloss_contrastive(r.dot(rp), y);
  Vec c = net.head_times(rp);
  for (int h = 0; h < net.H(); ++h)
    if (!(std::abs(pre(h)) >= net.b()(h))) c(h) = 0.0;
  return dl * net.weights_times(c);
}

Vec grad_z(const GatedNetwork& net, const ContrastivePair& pair) {
  return grad_z_contrastive(net, pair.z, pair.z_prime, pair.y);
}

}  // namespace purify
