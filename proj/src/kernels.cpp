#include "purify/kernels.hpp"

#include <limits>

#include <omp.h>

#include "purify/errors.hpp"

namespace purify {

void set_threads(int n) {
  if (n > 0) omp_set_num_threads(n);
}

int max_threads() { return omp_get_max_threads(); }

namespace {

int block_count(Eigen::Index n) { return static_cast<int>((n + kBlock - 1) / kBlock); }

const MatrixHead& factored_head(const GatedNetwork& net) {
  if (!net.is_factored()) throw PreconditionError("batched kernels need a factored network");
  const MatrixHead& mh = net.matrix_head();
  if (!mh.factored) throw PreconditionError("batched contrastive kernel needs the pseudo-inverse head");
  return mh;
}

void check_batch(const GatedNetwork& net, const Mat& Z) {
  if (!net.is_factored()) throw PreconditionError("batched kernels need a factored network");
  if (Z.rows() != net.d())
    throw DimensionError("batch has " + std::to_string(Z.rows()) + " rows, expected d=" +
                         std::to_string(net.d()));
}

// Attack direction in feature coordinates for the lowered gradients in G
// (columns). L2 needs no mixing matrix since M is unitary; Linf takes the
// sign in observation coordinates.
Mat lowered_direction(const AttackSpec& attack, const Mat& M, const Mat& G) {
  Mat Dir(G.rows(), G.cols());
  if (attack.norm == Norm::L2) {
    for (Eigen::Index j = 0; j < G.cols(); ++j) {
      const double n = G.col(j).norm();
      if (n <= 1e-12)
        Dir.col(j).setZero();
      else
        Dir.col(j) = (attack.epsilon / n) * G.col(j);
    }
    return Dir;
  }
  Mat Gz = M * G;
  Gz = Gz.unaryExpr([&](double v) { return attack.epsilon * sgn(v); });
  Dir.noalias() = M.transpose() * Gz;
  return Dir;
}

}  // namespace

ContrastiveCache prepare_contrastive(const GatedNetwork& net, const Mat& Z, const Mat& Zp, int y) {
  check_batch(net, Z);
  check_batch(net, Zp);
  if (Z.cols() != Zp.cols()) throw DimensionError("pair batches differ in size");
  if (y != 1 && y != -1) throw LabelError("contrastive label must be +1 or -1");
  const MatrixHead& mh = factored_head(net);
  const Mat& M = net.M();
  const SpMat& U = net.U();
  const Mat& Ginv = *mh.Ginv;
  const Vec& b = net.b();
  const auto n = Z.cols();
  ContrastiveCache cache;
  cache.y = y;
  cache.Zhat.resize(net.d(), n);
  cache.Q.resize(net.d(), n);
  const int nb = block_count(n);
#pragma omp parallel for schedule(static)
  for (int blk = 0; blk < nb; ++blk) {
    const Eigen::Index j0 = static_cast<Eigen::Index>(blk) * kBlock;
    const Eigen::Index w = std::min<Eigen::Index>(kBlock, n - j0);
    cache.Zhat.middleCols(j0, w).noalias() = M.transpose() * Z.middleCols(j0, w);
    Mat Zph = M.transpose() * Zp.middleCols(j0, w);
    Mat S = U.transpose() * Zph;
    for (Eigen::Index j = 0; j < w; ++j)
      for (Eigen::Index h = 0; h < S.rows(); ++h) S(h, j) = activation(S(h, j), b(h));
    Mat T = Ginv * Mat(U * S);
    cache.Q.middleCols(j0, w).noalias() = Ginv * T;
  }
  return cache;
}

BatchResult evaluate_contrastive(const GatedNetwork& net, const ContrastiveCache& cache,
                                 const AttackSpec& attack, GateMode mode) {
  validate(attack);
  const MatrixHead& mh = factored_head(net);
  const Mat& M = net.M();
  const SpMat& U = net.U();
  const Vec& b = net.b();
  const double tau2 = mh.tau * mh.tau;
  const int y = cache.y;
  const auto n = cache.Zhat.cols();
  const auto H = net.H();
  BatchResult res;
  res.clean.resize(n);
  res.adversarial.resize(n);
  res.gate_flips.assign(static_cast<std::size_t>(n), 0);
  const int nb = block_count(n);
#pragma omp parallel for schedule(static)
  for (int blk = 0; blk < nb; ++blk) {
    const Eigen::Index j0 = static_cast<Eigen::Index>(blk) * kBlock;
    const Eigen::Index w = std::min<Eigen::Index>(kBlock, n - j0);
    Mat Pre = U.transpose() * cache.Zhat.middleCols(j0, w);
    Mat C = U.transpose() * cache.Q.middleCols(j0, w);
    Mat DC(H, w);
    for (Eigen::Index j = 0; j < w; ++j) {
      double g = 0.0;
      for (Eigen::Index h = 0; h < H; ++h) g += activation(Pre(h, j), b(h)) * C(h, j);
      g *= tau2;
      res.clean(j0 + j) = softplus(-y * g);
      const double dl = -y * sigmoid(-y * g) * tau2;
      for (Eigen::Index h = 0; h < H; ++h) DC(h, j) = std::abs(Pre(h, j)) >= b(h) ? dl * C(h, j) : 0.0;
    }
    if (attack.epsilon == 0.0) {
      res.adversarial.segment(j0, w) = res.clean.segment(j0, w);
      continue;
    }
    const Mat Ghat = U * DC;
    const Mat Dir = lowered_direction(attack, M, Ghat);
    const Mat PD = U.transpose() * Dir;
    for (Eigen::Index j = 0; j < w; ++j) {
      double g = 0.0;
      int flips = 0;
      for (Eigen::Index h = 0; h < H; ++h) {
        const double pa = Pre(h, j) + PD(h, j);
        const bool clean_open = std::abs(Pre(h, j)) >= b(h);
        const bool adv_open = std::abs(pa) >= b(h);
        flips += clean_open != adv_open;
        if (mode == GateMode::Regated ? adv_open : clean_open) g += pa * C(h, j);
      }
      res.adversarial(j0 + j) = softplus(-y * tau2 * g);
      res.gate_flips[static_cast<std::size_t>(j0 + j)] = flips;
    }
  }
  return res;
}

BatchResult contrastive_batch(const GatedNetwork& net, const Mat& Z, const Mat& Zp, int y,
                              const AttackSpec& attack, GateMode mode) {
  return evaluate_contrastive(net, prepare_contrastive(net, Z, Zp, y), attack, mode);
}

BatchResult supervised_batch(const GatedNetwork& net, const Mat& Z, const Vec& y, LossKind kind,
                             const AttackSpec& attack, GateMode mode) {
  check_batch(net, Z);
  validate(attack);
  if (!is_supervised(kind)) throw HeadMismatchError("supervised_batch needs a supervised loss");
  if (y.size() != Z.cols()) throw DimensionError("response vector length differs from batch size");
  if (kind == LossKind::Logistic)
    for (Eigen::Index j = 0; j < y.size(); ++j)
      if (y(j) != 1.0 && y(j) != -1.0) throw LabelError("logistic loss needs y in {-1, +1}");
  const Vec& a = net.scalar_head().a;
  const Mat& M = net.M();
  const SpMat& U = net.U();
  const Vec& b = net.b();
  const auto n = Z.cols();
  const auto H = net.H();
  BatchResult res;
  res.clean.resize(n);
  res.adversarial.resize(n);
  res.gate_flips.assign(static_cast<std::size_t>(n), 0);
  const int nb = block_count(n);
#pragma omp parallel for schedule(static)
  for (int blk = 0; blk < nb; ++blk) {
    const Eigen::Index j0 = static_cast<Eigen::Index>(blk) * kBlock;
    const Eigen::Index w = std::min<Eigen::Index>(kBlock, n - j0);
    const Mat Zh = M.transpose() * Z.middleCols(j0, w);
    const Mat Pre = U.transpose() * Zh;
    Mat DA(H, w);
    for (Eigen::Index j = 0; j < w; ++j) {
      double f = 0.0;
      for (Eigen::Index h = 0; h < H; ++h) f += a(h) * activation(Pre(h, j), b(h));
      const double yj = y(j0 + j);
      res.clean(j0 + j) = loss_supervised(kind, f, yj);
      const double dl = dloss_supervised(kind, f, yj);
      for (Eigen::Index h = 0; h < H; ++h) DA(h, j) = std::abs(Pre(h, j)) >= b(h) ? dl * a(h) : 0.0;
    }
    if (attack.epsilon == 0.0) {
      res.adversarial.segment(j0, w) = res.clean.segment(j0, w);
      continue;
    }
    const Mat Ghat = U * DA;
    const Mat Dir = lowered_direction(attack, M, Ghat);
    const Mat PD = U.transpose() * Dir;
    for (Eigen::Index j = 0; j < w; ++j) {
      double f = 0.0;
      int flips = 0;
      for (Eigen::Index h = 0; h < H; ++h) {
        const double pa = Pre(h, j) + PD(h, j);
        const bool clean_open = std::abs(Pre(h, j)) >= b(h);
        const bool adv_open = std::abs(pa) >= b(h);
        flips += clean_open != adv_open;
        if (mode == GateMode::Regated ? adv_open : clean_open) f += a(h) * pa;
      }
      res.adversarial(j0 + j) = loss_supervised(kind, f, y(j0 + j));
      res.gate_flips[static_cast<std::size_t>(j0 + j)] = flips;
    }
  }
  return res;
}

Vec effectiveness_batch(const GatedNetwork& net, const Mat& Z) {
  check_batch(net, Z);
  const Vec& a = net.scalar_head().a;
  const Mat& M = net.M();
  const SpMat& U = net.U();
  const Vec& b = net.b();
  const auto n = Z.cols();
  const auto H = net.H();
  Vec out(n);
  const int nb = block_count(n);
#pragma omp parallel for schedule(static)
  for (int blk = 0; blk < nb; ++blk) {
    const Eigen::Index j0 = static_cast<Eigen::Index>(blk) * kBlock;
    const Eigen::Index w = std::min<Eigen::Index>(kBlock, n - j0);
    const Mat Zh = M.transpose() * Z.middleCols(j0, w);
    const Mat Pre = U.transpose() * Zh;
    Mat DA(H, w);
    for (Eigen::Index j = 0; j < w; ++j)
      for (Eigen::Index h = 0; h < H; ++h) DA(h, j) = std::abs(Pre(h, j)) >= b(h) ? a(h) : 0.0;
    const Mat V = M * Mat(U * DA);
    for (Eigen::Index j = 0; j < w; ++j) out(j0 + j) = V.col(j).norm();
  }
  return out;
}

Mat hidden_batch(const GatedNetwork& net, const Mat& Z) {
  check_batch(net, Z);
  const Mat& M = net.M();
  const SpMat& U = net.U();
  const Vec& b = net.b();
  const auto n = Z.cols();
  Mat Phi(n, net.H());
  const int nb = block_count(n);
#pragma omp parallel for schedule(static)
  for (int blk = 0; blk < nb; ++blk) {
    const Eigen::Index j0 = static_cast<Eigen::Index>(blk) * kBlock;
    const Eigen::Index w = std::min<Eigen::Index>(kBlock, n - j0);
    const Mat Zh = M.transpose() * Z.middleCols(j0, w);
    Mat Pre = U.transpose() * Zh;
    for (Eigen::Index j = 0; j < w; ++j)
      for (Eigen::Index h = 0; h < Pre.rows(); ++h) Pre(h, j) = activation(Pre(h, j), b(h));
    Phi.middleRows(j0, w) = Pre.transpose();
  }
  return Phi;
}

GammaBatch gamma_batch(const SpMat& U, const Mat& Ginv, const Mat& X, GammaConvention conv) {
  const auto d = U.rows();
  const auto H = U.cols();
  if (Ginv.rows() != d || Ginv.cols() != d) throw DimensionError("G^{-1} must be d x d");
  if (X.rows() != d) throw DimensionError("feature batch has wrong dimension");
  const Eigen::SparseMatrix<double, Eigen::RowMajor> Ur = U;
  const Vec ginv1 = Ginv.rowwise().sum();
  Vec colsum(H);
  for (Eigen::Index h = 0; h < H; ++h) {
    double s = 0.0;
    for (SpMat::InnerIterator it(U, h); it; ++it) s += it.value();
    colsum(h) = s;
  }
  const auto n = X.cols();
  GammaBatch out;
  out.gamma1.resize(n);
  out.gamma2.resize(n);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const int nb = block_count(n);
#pragma omp parallel
  {
    std::vector<char> flagged(static_cast<std::size_t>(H), 0), active(static_cast<std::size_t>(d), 0);
    std::vector<int> rowpos(static_cast<std::size_t>(d), -1);
    std::vector<Eigen::Index> F, act, rows;
    Vec wX(d), wC(d);
    Mat R, Brows;
#pragma omp for schedule(static)
    for (int blk = 0; blk < nb; ++blk) {
      const Eigen::Index j0 = static_cast<Eigen::Index>(blk) * kBlock;
      const Eigen::Index w = std::min<Eigen::Index>(kBlock, n - j0);
      for (Eigen::Index col = j0; col < j0 + w; ++col) {
        act.clear();
        for (Eigen::Index i = 0; i < d; ++i)
          if (X(i, col) != 0.0) act.push_back(i);
        const auto na = static_cast<double>(act.size());
        const auto nc = static_cast<double>(d) - na;
        if (act.empty() || nc == 0) {
          out.gamma1(col) = nan;
          out.gamma2(col) = nan;
          continue;
        }
        F.clear();
        for (auto i : act) {
          active[i] = 1;
          for (decltype(Ur)::InnerIterator it(Ur, i); it; ++it)
            if (it.value() != 0.0 && !flagged[it.col()]) {
              flagged[it.col()] = 1;
              F.push_back(it.col());
            }
        }
        if (conv == GammaConvention::Signed) {
          wX.setZero();
          for (auto j : act) wX += Ginv.col(j);
          wC = ginv1 - wX;
          double s1 = 0.0, s2 = 0.0;
          for (auto h : F) {
            double uI = colsum(h), a1 = 0.0, a2 = 0.0;
            for (SpMat::InnerIterator it(U, h); it; ++it) {
              if (active[it.row()]) uI -= it.value();
              a1 += it.value() * wX(it.row());
              a2 += it.value() * wC(it.row());
            }
            s1 += uI * a1;
            s2 += uI * a2;
          }
          out.gamma1(col) = s1 / (nc * na);
          out.gamma2(col) = s2 / (nc * nc);
        } else {
          // Rows of B = U_F (U_F' G^{-1}) that are not identically zero.
          R.resize(static_cast<Eigen::Index>(F.size()), d);
          rows.clear();
          for (std::size_t f = 0; f < F.size(); ++f) {
            R.row(static_cast<Eigen::Index>(f)).setZero();
            for (SpMat::InnerIterator it(U, F[f]); it; ++it) {
              R.row(static_cast<Eigen::Index>(f)) += it.value() * Ginv.col(it.row()).transpose();
              if (rowpos[it.row()] < 0) {
                rowpos[it.row()] = static_cast<int>(rows.size());
                rows.push_back(it.row());
              }
            }
          }
          Brows.setZero(static_cast<Eigen::Index>(rows.size()), d);
          for (std::size_t f = 0; f < F.size(); ++f)
            for (SpMat::InnerIterator it(U, F[f]); it; ++it)
              Brows.row(rowpos[it.row()]) += it.value() * R.row(static_cast<Eigen::Index>(f));
          double s1 = 0.0, s2 = 0.0;
          for (std::size_t r = 0; r < rows.size(); ++r) {
            const auto i = rows[r];
            if (active[i]) continue;
            for (Eigen::Index j = 0; j < d; ++j) {
              const double v = std::abs(Brows(static_cast<Eigen::Index>(r), j));
              if (active[j])
                s1 += v;
              else if (j != i)
                s2 += v;
            }
          }
          for (auto i : rows) rowpos[i] = -1;
          out.gamma1(col) = s1 / (nc * na);
          out.gamma2(col) = nc > 1 ? s2 / (nc * (nc - 1)) : nan;
        }
        for (auto h : F) flagged[h] = 0;
        for (auto i : act) active[i] = 0;
      }
    }
  }
  return out;
}

}  // namespace purify
