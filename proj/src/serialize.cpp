#include <cstdint>
#include <cstring>
#include <fstream>

#include "purify/errors.hpp"
#include "purify/gated_net.hpp"

// Layout (little-endian host order):
//   "PURIFYNT" u32 version
//   i64 d, i64 H
//   W row-major (d*H doubles), b (H doubles)
//   u8 head kind: 0 none, 1 scalar (a), 2 explicit matrix (A row-major H*d),
//                 3 pseudo-inverse (tau; rebuilt on load)
//   u8 has_M, then M row-major (d*d doubles)
//   u8 has_U, then i64 nnz and nnz records (i32 row, i32 col, f64 value)

namespace purify {

namespace {

constexpr char kMagic[8] = {'P', 'U', 'R', 'I', 'F', 'Y', 'N', 'T'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw FormatError("network file truncated");
  return v;
}

void put_rowmajor(std::ofstream& out, const Mat& A) {
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> R = A;
  out.write(reinterpret_cast<const char*>(R.data()), static_cast<std::streamsize>(R.size() * sizeof(double)));
}

Mat get_rowmajor(std::ifstream& in, std::int64_t rows, std::int64_t cols) {
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> R(rows, cols);
  in.read(reinterpret_cast<char*>(R.data()), static_cast<std::streamsize>(R.size() * sizeof(double)));
  if (!in) throw FormatError("network file truncated");
  return R;
}

}  // namespace

void save_network(const GatedNetwork& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  out.write(kMagic, sizeof(kMagic));
  put(out, kVersion);
  put(out, static_cast<std::int64_t>(net.d()));
  put(out, static_cast<std::int64_t>(net.H()));
  put_rowmajor(out, net.weights());
  out.write(reinterpret_cast<const char*>(net.b().data()),
            static_cast<std::streamsize>(net.H() * sizeof(double)));
  if (net.has_scalar_head()) {
    put(out, std::uint8_t{1});
    const Vec& a = net.scalar_head().a;
    out.write(reinterpret_cast<const char*>(a.data()), static_cast<std::streamsize>(a.size() * sizeof(double)));
  } else if (net.has_matrix_head()) {
    const MatrixHead& mh = net.matrix_head();
    if (mh.factored) {
      put(out, std::uint8_t{3});
      put(out, mh.tau);
    } else {
      put(out, std::uint8_t{2});
      put_rowmajor(out, mh.A);
    }
  } else {
    put(out, std::uint8_t{0});
  }
  put(out, static_cast<std::uint8_t>(net.has_mixing()));
  if (net.has_mixing()) put_rowmajor(out, net.M());
  put(out, static_cast<std::uint8_t>(net.has_U()));
  if (net.has_U()) {
    const SpMat& U = net.U();
    put(out, static_cast<std::int64_t>(U.nonZeros()));
    for (int h = 0; h < U.outerSize(); ++h)
      for (SpMat::InnerIterator it(U, h); it; ++it) {
        put(out, static_cast<std::int32_t>(it.row()));
        put(out, static_cast<std::int32_t>(it.col()));
        put(out, it.value());
      }
  }
  if (!out) throw FormatError("write to " + path + " failed");
}

GatedNetwork load_network(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw FormatError("bad magic in " + path);
  const auto version = get<std::uint32_t>(in);
  if (version != kVersion) throw FormatError("unsupported network file version " + std::to_string(version));
  const auto d = get<std::int64_t>(in);
  const auto H = get<std::int64_t>(in);
  if (d < 1 || H < 1 || d > (1 << 20) || H > (1 << 24)) throw FormatError("implausible dimensions");
  Mat W = get_rowmajor(in, d, H);
  Vec b(H);
  in.read(reinterpret_cast<char*>(b.data()), static_cast<std::streamsize>(H * sizeof(double)));
  if (!in) throw FormatError("network file truncated");

  Head head;
  double tau = 0.0;
  const auto kind = get<std::uint8_t>(in);
  if (kind == 1) {
    Vec a(H);
    in.read(reinterpret_cast<char*>(a.data()), static_cast<std::streamsize>(H * sizeof(double)));
    if (!in) throw FormatError("network file truncated");
    head = ScalarHead{std::move(a)};
  } else if (kind == 2) {
    MatrixHead mh;
    mh.A = get_rowmajor(in, H, d);
    head = std::move(mh);
  } else if (kind == 3) {
    tau = get<double>(in);
  } else if (kind != 0) {
    throw FormatError("unknown head kind " + std::to_string(kind));
  }

  std::shared_ptr<const Mat> M;
  if (get<std::uint8_t>(in)) M = std::make_shared<const Mat>(get_rowmajor(in, d, d));
  std::optional<SpMat> U;
  if (get<std::uint8_t>(in)) {
    const auto nnz = get<std::int64_t>(in);
    if (nnz < 0 || nnz > d * H) throw FormatError("implausible nonzero count");
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(nnz));
    for (std::int64_t e = 0; e < nnz; ++e) {
      const auto r = get<std::int32_t>(in);
      const auto c = get<std::int32_t>(in);
      const auto v = get<double>(in);
      if (r < 0 || r >= d || c < 0 || c >= H) throw FormatError("U entry out of range");
      trip.emplace_back(r, c, v);
    }
    U.emplace(d, H);
    U->setFromTriplets(trip.begin(), trip.end());
  }

  GatedNetwork net;
  if (M && U) {
    net = GatedNetwork::factored(M, std::move(*U), std::move(b), std::move(head));
  } else {
    net = GatedNetwork::dense(std::move(W), std::move(b), std::move(head));
    if (M) net = net.attach_mixing(M);
  }
  if (kind == 3) net = pseudo_head(net, tau);
  return net;
}

}  // namespace purify
