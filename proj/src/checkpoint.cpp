#include <zlib.h>

#include <cstring>

#include "sebf/engine.hpp"

// Checkpoint blob layout: "SEBC" magic, u32 format version, u64 payload
// length, payload, u32 CRC32 of the payload. Doubles are stored as raw
// little-endian bit patterns so a round trip is bit-exact. The rng streams
// need no storage of their own: they are keyed on (seed, k, l, t), all of
// which the blob carries.

namespace sebf::engine {

namespace {

constexpr char kMagic[4] = {'S', 'E', 'B', 'C'};
constexpr std::uint32_t kFormatVersion = 1;

class Writer {
 public:
  explicit Writer(std::vector<std::uint8_t>& out) : out_(out) {}
  void u32(std::uint32_t v) { raw(&v, sizeof(v)); }
  void u64(std::uint64_t v) { raw(&v, sizeof(v)); }
  void i32(std::int32_t v) { raw(&v, sizeof(v)); }
  void f64(double v) { raw(&v, sizeof(v)); }
  void vec(const Eigen::VectorXd& v) {
    i32(static_cast<std::int32_t>(v.size()));
    raw(v.data(), sizeof(double) * static_cast<std::size_t>(v.size()));
  }
  template <typename Mat>
  void mat(const Mat& m) {
    i32(static_cast<std::int32_t>(m.rows()));
    i32(static_cast<std::int32_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (Eigen::Index r = 0; r < m.rows(); ++r) f64(m(r, c));
  }

 private:
  void raw(const void* p, std::size_t len) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + len);
  }
  std::vector<std::uint8_t>& out_;
};

class Reader {
 public:
  Reader(const std::uint8_t* p, std::size_t len) : p_(p), end_(p + len) {}
  std::uint32_t u32() { return get<std::uint32_t>(); }
  std::uint64_t u64() { return get<std::uint64_t>(); }
  std::int32_t i32() { return get<std::int32_t>(); }
  double f64() { return get<double>(); }
  Eigen::VectorXd vec() {
    const int n = i32();
    check(sizeof(double) * static_cast<std::size_t>(n));
    Eigen::VectorXd v(n);
    std::memcpy(v.data(), p_, sizeof(double) * static_cast<std::size_t>(n));
    p_ += sizeof(double) * static_cast<std::size_t>(n);
    return v;
  }
  template <typename Mat>
  Mat mat() {
    const int r = i32(), c = i32();
    Mat m(r, c);
    for (int j = 0; j < c; ++j)
      for (int i = 0; i < r; ++i) m(i, j) = f64();
    return m;
  }
  bool exhausted() const { return p_ == end_; }

 private:
  template <typename T>
  T get() {
    check(sizeof(T));
    T v;
    std::memcpy(&v, p_, sizeof(T));
    p_ += sizeof(T);
    return v;
  }
  void check(std::size_t len) const {
    if (p_ + len > end_)
      throw DataError("checkpoint: truncated payload");
  }
  const std::uint8_t* p_;
  const std::uint8_t* end_;
};

std::uint64_t config_fingerprint(const spatial::SiteSet& sites,
                                 const EngineConfig& cfg) {
  // FNV-1a over the quantities that must match between save and restore.
  std::uint64_t h = 1469598103934665603ULL;
  const auto mix = [&h](const void* p, std::size_t len) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  const auto mix_d = [&](double v) { mix(&v, sizeof(v)); };
  for (int i = 0; i < sites.size(); ++i)
    for (int d = 0; d < sites.dim(); ++d) mix_d(sites.coordinates()(i, d));
  for (double phi : cfg.grid.fine) mix_d(phi);
  for (int c : cfg.grid.coarse) mix(&c, sizeof(c));
  for (int lk : cfg.grid.chain_counts) mix(&lk, sizeof(lk));
  mix(&cfg.grid.reference, sizeof(cfg.grid.reference));
  mix_d(cfg.prior.a0);
  mix_d(cfg.prior.s0);
  mix_d(cfg.prior.q0);
  mix_d(cfg.prior.c0);
  mix_d(cfg.prior.r0);
  for (int j = 0; j < cfg.prior.b0.size(); ++j) mix_d(cfg.prior.b0(j));
  mix_d(cfg.nugget);
  mix(&cfg.n_particles, sizeof(cfg.n_particles));
  mix(&cfg.gibbs_iters, sizeof(cfg.gibbs_iters));
  mix(&cfg.seed, sizeof(cfg.seed));
  const int mode = static_cast<int>(cfg.proposal_mode);
  mix(&mode, sizeof(mode));
  return h;
}

}  // namespace
}  // namespace sebf::engine

namespace sebf::stats {
// Serialization needs the raw accumulators (compensations included).
struct SuffStatsCodec {
  template <typename W>
  static void write(W& w, const TemporalSuffStats& s) {
    w.i32(s.t_);
    w.f64(s.phi_);
    w.mat(s.g0_g0_);
    w.vec_small(s.g0_x0_);
    w.f64(s.x0_x0_);
    for (const auto* km : {&s.gg_cur_, &s.gg_cross_, &s.gg_prev_}) {
      w.mat(km->value);
      w.mat(km->comp);
    }
    for (const auto* kv :
         {&s.gx_cur_, &s.gx_cur_prev_, &s.gx_prev_cur_, &s.gx_prev_prev_}) {
      w.vec_small(kv->value);
      w.vec_small(kv->comp);
    }
    for (const auto* kd : {&s.xx_cur_, &s.xx_cross_, &s.xx_prev_}) {
      w.f64(kd->value);
      w.f64(kd->comp);
    }
  }
  template <typename R>
  static TemporalSuffStats read(R& r) {
    TemporalSuffStats s;
    s.t_ = r.i32();
    s.phi_ = r.f64();
    s.g0_g0_ = r.mat_small();
    s.g0_x0_ = r.vec_small();
    s.x0_x0_ = r.f64();
    for (auto* km : {&s.gg_cur_, &s.gg_cross_, &s.gg_prev_}) {
      km->value = r.mat_small();
      km->comp = r.mat_small();
    }
    for (auto* kv :
         {&s.gx_cur_, &s.gx_cur_prev_, &s.gx_prev_cur_, &s.gx_prev_prev_}) {
      kv->value = r.vec_small();
      kv->comp = r.vec_small();
    }
    for (auto* kd : {&s.xx_cur_, &s.xx_cross_, &s.xx_prev_}) {
      kd->value = r.f64();
      kd->comp = r.f64();
    }
    return s;
  }
};
}  // namespace sebf::stats

namespace sebf::engine {
namespace {

// Thin adapters so the codec can write SmallVec/SmallMat through the
// generic Writer/Reader above.
struct StatsWriter {
  Writer& w;
  void i32(std::int32_t v) { w.i32(v); }
  void f64(double v) { w.f64(v); }
  void mat(const stats::SmallMat& m) { w.mat(m); }
  void vec_small(const stats::SmallVec& v) {
    w.i32(static_cast<std::int32_t>(v.size()));
    for (int i = 0; i < v.size(); ++i) w.f64(v(i));
  }
};

struct StatsReader {
  Reader& r;
  std::int32_t i32() { return r.i32(); }
  double f64() { return r.f64(); }
  stats::SmallMat mat_small() { return r.mat<stats::SmallMat>(); }
  stats::SmallVec vec_small() {
    const int n = i32();
    stats::SmallVec v(n);
    for (int i = 0; i < n; ++i) v(i) = f64();
    return v;
  }
};

}  // namespace

std::vector<std::uint8_t> Engine::checkpoint() const {
  std::vector<std::uint8_t> payload;
  Writer w(payload);
  w.u64(config_fingerprint(sites_, cfg_));
  w.u64(cfg_.seed);
  w.i32(t_);
  w.i32(static_cast<std::int32_t>(chains_.size()));
  for (const auto& c : chains_) {
    w.i32(c.k);
    w.i32(c.l);
    w.i32(c.phi_idx);
    w.vec(c.x);
    w.f64(c.theta.alpha);
    StatsWriter sw{w};
    sw.vec_small(c.theta.beta);
    w.f64(c.theta.sigma2);
    w.f64(c.last_ess);
    w.f64(c.last_mean_delta2);
    w.f64(c.last_max_delta2);
    w.i32(static_cast<std::int32_t>(c.z.size()));
    for (const auto& z : c.z) stats::SuffStatsCodec::write(sw, z);
  }

  std::vector<std::uint8_t> blob;
  Writer head(blob);
  blob.insert(blob.end(), kMagic, kMagic + 4);
  head.u32(kFormatVersion);
  head.u64(payload.size());
  blob.insert(blob.end(), payload.begin(), payload.end());
  head.u32(static_cast<std::uint32_t>(
      crc32(0L, payload.data(), static_cast<uInt>(payload.size()))));
  return blob;
}

void Engine::restore(const std::vector<std::uint8_t>& blob) {
  if (blob.size() < 4 + 4 + 8 + 4 || std::memcmp(blob.data(), kMagic, 4) != 0)
    throw DataError("checkpoint: not a checkpoint file");
  Reader head(blob.data() + 4, blob.size() - 4);
  const std::uint32_t version = head.u32();
  if (version != kFormatVersion)
    throw DataError("checkpoint: format version " + std::to_string(version) +
                    " is not supported (expected " +
                    std::to_string(kFormatVersion) + ")");
  const std::uint64_t payload_len = head.u64();
  if (blob.size() != 4 + 4 + 8 + payload_len + 4)
    throw DataError("checkpoint: truncated or oversized blob");
  const std::uint8_t* payload = blob.data() + 16;
  const std::uint32_t want_crc = static_cast<std::uint32_t>(
      crc32(0L, payload, static_cast<uInt>(payload_len)));
  std::uint32_t got_crc;
  std::memcpy(&got_crc, blob.data() + 16 + payload_len, 4);
  if (want_crc != got_crc)
    throw DataError("checkpoint: checksum mismatch (corrupt blob)");

  Reader r(payload, payload_len);
  if (r.u64() != config_fingerprint(sites_, cfg_))
    throw ConfigError(
        "checkpoint: saved run used a different configuration or site set");
  if (r.u64() != cfg_.seed)
    throw ConfigError("checkpoint: saved run used a different seed");

  // Parse into a fresh population first so a malformed blob cannot leave a
  // half-restored engine behind.
  const int t_saved = r.i32();
  const int nch = r.i32();
  if (nch != cfg_.grid.total_chains())
    throw DataError("checkpoint: chain population does not match the grid");
  std::vector<ChainState> fresh(static_cast<std::size_t>(nch));
  for (int i = 0; i < nch; ++i) {
    ChainState& c = fresh[static_cast<std::size_t>(i)];
    c.k = r.i32();
    c.l = r.i32();
    c.phi_idx = r.i32();
    c.x = r.vec();
    c.theta.alpha = r.f64();
    StatsReader sr{r};
    c.theta.beta = sr.vec_small();
    c.theta.sigma2 = r.f64();
    c.last_ess = r.f64();
    c.last_mean_delta2 = r.f64();
    c.last_max_delta2 = r.f64();
    const int nz = r.i32();
    c.z.reserve(static_cast<std::size_t>(nz));
    for (int j = 0; j < nz; ++j)
      c.z.push_back(stats::SuffStatsCodec::read(sr));
  }
  if (!r.exhausted()) throw DataError("checkpoint: trailing bytes in payload");
  chains_ = std::move(fresh);
  t_ = t_saved;
}

}  // namespace sebf::engine
