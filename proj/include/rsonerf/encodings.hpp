#pragma once

// Input encodings: classic sin/cos frequency lifting for the fully connected
// field, and the multiresolution hash grid that lets a tiny MLP stand in for
// it. Both are differentiable tape ops; the hash grid additionally scatters
// gradients into its level tables.

#include "rsonerf/tensor.hpp"

#include <array>
#include <cstdint>

namespace rsonerf::enc {

// ---------------------------------------------------------------------------
// Frequency encoding

struct FrequencyEncodingConfig {
  int num_frequencies = 10;
  bool include_input = true;

  Index output_dim(Index input_dim) const {
    return input_dim * (2 * num_frequencies + (include_input ? 1 : 0));
  }
};

// Layout per input component c: [x_c (if included across the leading block)]
// then sin(2^k pi x_c), cos(2^k pi x_c) for k = 0..num_frequencies-1.
// The raw block, when present, occupies the first input_dim columns.
template <typename S>
MatX<S> freq_encode_mat(const MatX<S>& x, const FrequencyEncodingConfig& cfg) {
  const Index rows = x.rows(), dim = x.cols();
  MatX<S> out(rows, cfg.output_dim(dim));
  Index col = 0;
  if (cfg.include_input) {
    out.leftCols(dim) = x;
    col = dim;
  }
  for (Index d = 0; d < dim; ++d) {
    for (int k = 0; k < cfg.num_frequencies; ++k) {
      const S f = static_cast<S>(std::ldexp(EIGEN_PI, k));  // 2^k * pi
      out.col(col++) = (x.col(d) * f).array().sin();
      out.col(col++) = (x.col(d) * f).array().cos();
    }
  }
  return out;
}

template <typename S>
ad::Tensor<S> freq_encode(ad::Tape<S>& tape, const ad::Tensor<S>& x,
                          const FrequencyEncodingConfig& cfg) {
  require(x.rank() == 2, "freq_encode expects [rows x dim] input");
  const ad::NodeId ix = tape.ensure(x);
  const Index rows = x.rows(), dim = x.cols();
  ad::Tensor<S> out = ad::Tensor<S>::from_mat(
      freq_encode_mat<S>(tape.value(ix).mat(), cfg));
  out.node = tape.record(
      out, {ix}, [ix, rows, dim, cfg](ad::Tape<S>& t, const ArrX<S>& up) {
        if (!t.requires_grad(ix)) return;
        const auto dY = ad::detail::as_mat<S>(up, rows, cfg.output_dim(dim));
        const auto X = t.value(ix).mat();
        MatX<S> dX = MatX<S>::Zero(rows, dim);
        Index col = 0;
        if (cfg.include_input) {
          dX = dY.leftCols(dim);
          col = dim;
        }
        for (Index d = 0; d < dim; ++d) {
          for (int k = 0; k < cfg.num_frequencies; ++k) {
            const S f = static_cast<S>(std::ldexp(EIGEN_PI, k));
            dX.col(d).array() +=
                f * ((X.col(d) * f).array().cos() * dY.col(col).array() -
                     (X.col(d) * f).array().sin() * dY.col(col + 1).array());
            col += 2;
          }
        }
        t.accumulate_mat(ix, dX);
      });
  return out;
}

// ---------------------------------------------------------------------------
// Multiresolution hash grid

struct HashGridConfig {
  int levels = 16;
  std::uint32_t table_size = 1u << 19;  // max entries per level, power of two
  int features_per_level = 2;
  int base_resolution = 16;
  double per_level_scale = 1.2599210498948732;  // finest level 512 over the cube

  void validate() const {
    require(levels >= 1, "HashGridConfig: levels must be >= 1");
    require(table_size >= 1 && (table_size & (table_size - 1)) == 0,
            "HashGridConfig: table_size must be a power of two");
    require(features_per_level >= 1, "HashGridConfig: features_per_level must be >= 1");
    require(base_resolution >= 1, "HashGridConfig: base_resolution must be >= 1");
    require(per_level_scale > 1.0, "HashGridConfig: per_level_scale must exceed 1");
  }

  int resolution(int level) const {
    return static_cast<int>(base_resolution * std::pow(per_level_scale, level));
  }

  // Dense storage when every vertex of the level fits in the table.
  bool dense_at(int level) const {
    const std::uint64_t verts = vertex_count(level);
    return verts <= table_size;
  }

  std::uint64_t vertex_count(int level) const {
    const std::uint64_t n = static_cast<std::uint64_t>(resolution(level)) + 1;
    return n * n * n;
  }

  Index rows_at(int level) const {
    return static_cast<Index>(std::min<std::uint64_t>(table_size, vertex_count(level)));
  }

  Index output_dim() const { return Index(levels) * features_per_level; }

  // scale such that resolution(levels-1) == finest over the unit cube
  static double scale_for_finest(int levels, int base_resolution, int finest) {
    if (levels <= 1) return 2.0;
    return std::pow(double(finest) / base_resolution, 1.0 / (levels - 1));
  }
};

// Spatial-hash primes; identity on the x component keeps dense-ish patterns
// well spread at small tables.
inline constexpr std::uint32_t kHashPrimes[3] = {1u, 2654435761u, 805459861u};

inline std::uint32_t grid_index(const HashGridConfig& cfg, int level,
                                const std::array<int, 3>& corner) {
  const int n = cfg.resolution(level);
  for (int d = 0; d < 3; ++d)
    require(corner[d] >= 0 && corner[d] <= n,
            cat("grid_index: corner component ", corner[d], " outside [0, ", n, "]"));
  if (cfg.dense_at(level)) {
    const std::uint32_t stride = static_cast<std::uint32_t>(n) + 1;
    return (static_cast<std::uint32_t>(corner[0]) * stride +
            static_cast<std::uint32_t>(corner[1])) *
               stride +
           static_cast<std::uint32_t>(corner[2]);
  }
  std::uint32_t h = 0;
  for (int d = 0; d < 3; ++d)
    h ^= static_cast<std::uint32_t>(corner[d]) * kHashPrimes[d];
  return h & (cfg.table_size - 1);
}

// Learnable per-level entry tables.
template <typename S>
struct HashGridTable {
  HashGridConfig cfg;
  std::vector<ad::Tensor<S>> levels;

  static HashGridTable init(const HashGridConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    HashGridTable table;
    table.cfg = cfg;
    Rng rng(seed);
    for (int l = 0; l < cfg.levels; ++l) {
      const Index rows = cfg.rows_at(l);
      ArrX<S> values(rows * cfg.features_per_level);
      for (Index i = 0; i < values.size(); ++i)
        values[i] = static_cast<S>(rng.uniform(-1e-4, 1e-4));
      table.levels.push_back(
          ad::Tensor<S>({rows, cfg.features_per_level}, std::move(values)));
    }
    return table;
  }

  Index parameter_count() const {
    Index n = 0;
    for (const auto& l : levels) n += l.size();
    return n;
  }
};

namespace detail {

// Per-level constants hoisted out of the gather loops; resolution() costs a
// pow() and must not run per corner.
struct LevelSpec {
  int n = 1;
  bool dense = true;
  std::uint32_t stride = 2;  // n + 1
  std::uint32_t mask = 0;    // table_size - 1
};

inline std::vector<LevelSpec> level_specs(const HashGridConfig& cfg) {
  std::vector<LevelSpec> specs(cfg.levels);
  for (int l = 0; l < cfg.levels; ++l) {
    specs[l].n = cfg.resolution(l);
    specs[l].dense = cfg.dense_at(l);
    specs[l].stride = static_cast<std::uint32_t>(specs[l].n) + 1;
    specs[l].mask = cfg.table_size - 1;
  }
  return specs;
}

// same arithmetic as grid_index, minus revalidation
inline std::uint32_t corner_index(const LevelSpec& spec, int x, int y, int z) {
  if (spec.dense)
    return (static_cast<std::uint32_t>(x) * spec.stride + static_cast<std::uint32_t>(y)) *
               spec.stride +
           static_cast<std::uint32_t>(z);
  return (static_cast<std::uint32_t>(x) * kHashPrimes[0] ^
          static_cast<std::uint32_t>(y) * kHashPrimes[1] ^
          static_cast<std::uint32_t>(z) * kHashPrimes[2]) &
         spec.mask;
}

// Cell lookup at one level: base cell, interpolation fractions.
template <typename S>
inline void locate(const S* xyz, int n, int* cell, S* frac) {
  for (int d = 0; d < 3; ++d) {
    S scaled = xyz[d] * static_cast<S>(n);
    int c = static_cast<int>(scaled);
    if (c > n - 1) c = n - 1;
    if (c < 0) c = 0;
    cell[d] = c;
    frac[d] = scaled - static_cast<S>(c);
  }
}

template <typename S>
inline void corner_weights(const S* frac, S* w) {
  const S fx = frac[0], fy = frac[1], fz = frac[2];
  const S gx = S(1) - fx, gy = S(1) - fy, gz = S(1) - fz;
  w[0] = gx * gy * gz;
  w[1] = gx * gy * fz;
  w[2] = gx * fy * gz;
  w[3] = gx * fy * fz;
  w[4] = fx * gy * gz;
  w[5] = fx * gy * fz;
  w[6] = fx * fy * gz;
  w[7] = fx * fy * fz;
}

}  // namespace detail

// Trilinear interpolation weights and table rows for one position at one
// level. Exposed for verification; hash_encode runs the same arithmetic.
template <typename S>
void cell_lookup(const HashGridConfig& cfg, int level, const Vec3<S>& x,
                 std::array<std::uint32_t, 8>& indices, std::array<S, 8>& weights) {
  detail::LevelSpec spec;
  spec.n = cfg.resolution(level);
  spec.dense = cfg.dense_at(level);
  spec.stride = static_cast<std::uint32_t>(spec.n) + 1;
  spec.mask = cfg.table_size - 1;
  int cell[3];
  S frac[3];
  detail::locate(x.data(), spec.n, cell, frac);
  detail::corner_weights(frac, weights.data());
  for (int c = 0; c < 8; ++c)
    indices[c] = detail::corner_index(spec, cell[0] + ((c >> 2) & 1),
                                      cell[1] + ((c >> 1) & 1), cell[2] + (c & 1));
}

// positions: [P x 3] in [0,1]^3 (callers clamp). Output [P x levels*F].
// Backward scatters into the level tables and, when the position input is
// itself differentiable (deformation fields), into the positions.
template <typename S>
ad::Tensor<S> hash_encode(ad::Tape<S>& tape, const ad::Tensor<S>& positions,
                          const std::vector<ad::Tensor<S>>& bound_levels,
                          const HashGridConfig& cfg) {
  require(positions.rank() == 2 && positions.cols() == 3,
          "hash_encode expects [P x 3] positions");
  require(static_cast<int>(bound_levels.size()) == cfg.levels,
          cat("hash_encode: ", bound_levels.size(), " tables for ", cfg.levels,
              " levels"));
  const ad::NodeId ip = tape.ensure(positions);
  const Index P = positions.rows();
  const int L = cfg.levels, F = cfg.features_per_level;

  std::vector<ad::NodeId> parents = {ip};
  bool needs_grad = tape.requires_grad(ip);
  for (const auto& t : bound_levels) {
    require(t.node != ad::kNoNode, "hash_encode: level tables must be bound on the tape");
    parents.push_back(t.node);
    needs_grad = needs_grad || tape.requires_grad(t.node);
  }

  // per (sample, level): 8 table rows and 8 trilinear weights
  struct Cache {
    std::vector<std::uint32_t> idx;
    std::vector<S> w;
  };
  auto cache = std::make_shared<Cache>();
  if (needs_grad) {
    cache->idx.resize(static_cast<std::size_t>(P) * L * 8);
    cache->w.resize(static_cast<std::size_t>(P) * L * 8);
  }

  const auto specs = detail::level_specs(cfg);
  std::vector<const S*> level_entries(L);
  for (int l = 0; l < L; ++l) level_entries[l] = tape.value(parents[1 + l]).values.data();

  const S* pos_data = tape.value(ip).values.data();
  MatX<S> out(P, Index(L) * F);
  std::uint32_t idx[8];
  S w[8];
  int cell[3];
  S frac[3];
  for (Index p = 0; p < P; ++p) {
    const S* x = pos_data + p * 3;
    S* out_row = out.data() + p * Index(L) * F;
    for (int l = 0; l < L; ++l) {
      const auto& spec = specs[l];
      detail::locate(x, spec.n, cell, frac);
      detail::corner_weights(frac, w);
      for (int c = 0; c < 8; ++c)
        idx[c] = detail::corner_index(spec, cell[0] + ((c >> 2) & 1),
                                      cell[1] + ((c >> 1) & 1), cell[2] + (c & 1));
      const S* entries = level_entries[l];
      for (int f = 0; f < F; ++f) {
        S acc = S(0);
        for (int c = 0; c < 8; ++c) acc += w[c] * entries[idx[c] * F + f];
        out_row[Index(l) * F + f] = acc;
      }
      if (needs_grad) {
        const std::size_t base = (static_cast<std::size_t>(p) * L + l) * 8;
        for (int c = 0; c < 8; ++c) {
          cache->idx[base + c] = idx[c];
          cache->w[base + c] = w[c];
        }
      }
    }
  }

  ad::Tensor<S> result = ad::Tensor<S>::from_mat(out);
  result.node = tape.record(
      result, parents,
      [parents, cache, P, L, F, cfg](ad::Tape<S>& t, const ArrX<S>& up) {
        const auto dY = ad::detail::as_mat<S>(up, P, Index(L) * F);
        const ad::NodeId ip = parents[0];

        for (int l = 0; l < L; ++l) {
          const ad::NodeId it = parents[1 + l];
          if (!t.requires_grad(it)) continue;
          ArrX<S> dTable = ArrX<S>::Zero(t.value(it).size());
          for (Index p = 0; p < P; ++p) {
            const std::size_t base = (static_cast<std::size_t>(p) * L + l) * 8;
            for (int c = 0; c < 8; ++c) {
              const S wc = cache->w[base + c];
              const Index row = cache->idx[base + c];
              for (int f = 0; f < F; ++f)
                dTable[row * F + f] += wc * dY(p, Index(l) * F + f);
            }
          }
          t.accumulate(it, dTable);
        }

        if (t.requires_grad(ip)) {
          const auto specs = detail::level_specs(cfg);
          const S* pos_data = t.value(ip).values.data();
          MatX<S> dX = MatX<S>::Zero(P, 3);
          for (Index p = 0; p < P; ++p) {
            for (int l = 0; l < L; ++l) {
              const int n = specs[l].n;
              int cell[3];
              S frac[3];
              detail::locate(pos_data + p * 3, n, cell, frac);
              const S* entries = t.value(parents[1 + l]).values.data();
              const std::size_t base = (static_cast<std::size_t>(p) * L + l) * 8;
              for (int c = 0; c < 8; ++c) {
                // d w_c / d frac_d, then chain by the level resolution
                const int bx = (c >> 2) & 1, by = (c >> 1) & 1, bz = c & 1;
                const S fx = bx ? frac[0] : S(1) - frac[0];
                const S fy = by ? frac[1] : S(1) - frac[1];
                const S fz = bz ? frac[2] : S(1) - frac[2];
                const S sx = bx ? S(1) : S(-1);
                const S sy = by ? S(1) : S(-1);
                const S sz = bz ? S(1) : S(-1);
                const Index row = cache->idx[base + c];
                S dot = S(0);
                for (int f = 0; f < F; ++f)
                  dot += entries[row * F + f] * dY(p, Index(l) * F + f);
                dX(p, 0) += dot * sx * fy * fz * static_cast<S>(n);
                dX(p, 1) += dot * fx * sy * fz * static_cast<S>(n);
                dX(p, 2) += dot * fx * fy * sz * static_cast<S>(n);
              }
            }
          }
          t.accumulate_mat(ip, dX);
        }
      });
  return result;
}

}  // namespace rsonerf::enc
