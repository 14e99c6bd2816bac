#pragma once

// The three field architectures behind one query contract:
//   vanilla  - frequency encoding into a deep fully connected trunk
//              (8 x 256 with a skip re-injection at layer 5), softplus density
//   instant  - multiresolution hash encoding into a tiny MLP (64, 80, 64),
//              clamped-exp density
//   dnerf    - displacement network psi(position, time) ahead of a canonical
//              field; the time-zero branch bypasses psi entirely
// Density never sees the view direction, so it is direction-invariant by
// construction. Color heads end in a sigmoid, density heads in softplus/exp,
// which pins sigma >= 0 and rgb in [0,1].

#include "rsonerf/encodings.hpp"
#include "rsonerf/field_interface.hpp"

#include <json.hpp>

#include <bit>
#include <fstream>
#include <map>

namespace rsonerf::fields {

struct VanillaConfig {
  int trunk_depth = 8;
  int trunk_width = 256;
  int color_width = 128;
  int skip_layer = 4;  // 0-based: input of this trunk layer re-reads the encoding
  int pos_frequencies = 10;
  int dir_frequencies = 4;
};

struct InstantConfig {
  int hidden0 = 64, hidden1 = 80, hidden2 = 64;
  int dir_frequencies = 4;
  int hash_levels = 16;
  int hash_log2_table_size = 19;
  int hash_features_per_level = 2;
  int hash_base_resolution = 16;
  int hash_finest_resolution = 512;

  enc::HashGridConfig grid() const {
    enc::HashGridConfig g;
    g.levels = hash_levels;
    g.table_size = 1u << hash_log2_table_size;
    g.features_per_level = hash_features_per_level;
    g.base_resolution = hash_base_resolution;
    g.per_level_scale = enc::HashGridConfig::scale_for_finest(
        hash_levels, hash_base_resolution, hash_finest_resolution);
    g.validate();
    return g;
  }
};

struct DeformConfig {
  int depth = 4;
  int width = 128;
  int pos_frequencies = 10;
  int time_frequencies = 4;
  std::string canonical = "instant";
};

struct FieldConfig {
  std::string kind = "instant";  // vanilla | instant | dnerf
  VanillaConfig vanilla;
  InstantConfig instant;
  DeformConfig deform;

  void validate() const {
    require(kind == "vanilla" || kind == "instant" || kind == "dnerf",
            cat("unknown field kind '", kind, "' (expected vanilla|instant|dnerf)"));
    require(deform.canonical == "vanilla" || deform.canonical == "instant",
            "dnerf canonical field must be vanilla or instant");
    require(vanilla.trunk_depth >= 2, "vanilla trunk needs at least 2 layers");
    require(vanilla.skip_layer > 0 && vanilla.skip_layer < vanilla.trunk_depth,
            "vanilla skip layer must fall inside the trunk");
  }
};

void to_json(nlohmann::json& j, const FieldConfig& c);
void from_json(const nlohmann::json& j, FieldConfig& c);

// ---------------------------------------------------------------------------
// Dense layer stack helpers

namespace detail {

template <typename S>
std::vector<ad::Tensor<S>> init_mlp(const std::vector<Index>& dims, Rng& rng) {
  std::vector<ad::Tensor<S>> params;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const Index fan_in = dims[l], fan_out = dims[l + 1];
    const double limit = std::sqrt(6.0 / double(fan_in));
    ArrX<S> w(fan_in * fan_out);
    for (Index i = 0; i < w.size(); ++i)
      w[i] = static_cast<S>(rng.uniform(-limit, limit));
    params.push_back(ad::Tensor<S>({fan_in, fan_out}, std::move(w)));
    params.push_back(ad::Tensor<S>::zeros({fan_out}));
  }
  return params;
}

inline Index mlp_param_count(const std::vector<Index>& dims) {
  Index n = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) n += dims[l] * dims[l + 1] + dims[l + 1];
  return n;
}

// One linear layer from a bound parameter list laid out as [W0, b0, W1, b1...].
template <typename S>
ad::Tensor<S> linear(ad::Tape<S>& tape, const std::vector<ad::Tensor<S>>& bound,
                     std::size_t layer_base, const ad::Tensor<S>& x) {
  return ad::add_bias(tape, ad::matmul(tape, x, bound[layer_base]),
                      bound[layer_base + 1]);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Vanilla field

template <typename S>
class VanillaField final : public RadianceField<S> {
 public:
  VanillaField(const FieldConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    const auto& v = cfg_.vanilla;
    pos_enc_ = enc::FrequencyEncodingConfig{v.pos_frequencies, true};
    dir_enc_ = enc::FrequencyEncodingConfig{v.dir_frequencies, true};
    const Index enc_pos = pos_enc_.output_dim(3);
    const Index enc_dir = dir_enc_.output_dim(3);

    Rng rng(seed);
    for (int l = 0; l < v.trunk_depth; ++l) {
      Index in = (l == 0) ? enc_pos : Index(v.trunk_width);
      if (l == v.skip_layer) in = v.trunk_width + enc_pos;
      auto layer = detail::init_mlp<S>({in, Index(v.trunk_width)}, rng);
      params_.insert(params_.end(), std::make_move_iterator(layer.begin()),
                     std::make_move_iterator(layer.end()));
    }
    auto density = detail::init_mlp<S>({Index(v.trunk_width), 1}, rng);
    auto color_hidden =
        detail::init_mlp<S>({Index(v.trunk_width) + enc_dir, Index(v.color_width)}, rng);
    auto color_out = detail::init_mlp<S>({Index(v.color_width), 3}, rng);
    for (auto* group : {&density, &color_hidden, &color_out})
      params_.insert(params_.end(), std::make_move_iterator(group->begin()),
                     std::make_move_iterator(group->end()));
  }

  std::string kind() const override { return "vanilla"; }

  TapeBinding<S> bind(ad::Tape<S>& tape, bool trainable) const override {
    auto bound = std::make_shared<std::vector<ad::Tensor<S>>>();
    for (const auto& p : params_)
      bound->push_back(trainable ? tape.parameter(p) : tape.constant(p));
    TapeBinding<S> binding;
    binding.params = *bound;
    const auto cfg = cfg_.vanilla;
    const auto pos_enc = pos_enc_;
    const auto dir_enc = dir_enc_;
    binding.query = [bound, cfg, pos_enc, dir_enc](
                        ad::Tape<S>& t, const ad::Tensor<S>& positions,
                        const MatX<S>& dirs, const VecX<S>* times) -> FieldSamples<S> {
      require(times == nullptr, "vanilla field: time input is not accepted");
      const auto& b = *bound;
      auto enc_pos = enc::freq_encode(t, positions, pos_enc);
      ad::Tensor<S> h = ad::relu(t, detail::linear(t, b, 0, enc_pos));
      for (int l = 1; l < cfg.trunk_depth; ++l) {
        ad::Tensor<S> input = (l == cfg.skip_layer) ? ad::concat_cols(t, h, enc_pos) : h;
        h = ad::relu(t, detail::linear(t, b, 2 * std::size_t(l), input));
      }
      const std::size_t head = 2 * std::size_t(cfg.trunk_depth);
      FieldSamples<S> out;
      out.sigma = ad::softplus(t, detail::linear(t, b, head, h));
      auto enc_dir = t.constant(ad::Tensor<S>::from_mat(freq_encode_mat<S>(dirs, dir_enc)));
      auto color_in = ad::concat_cols(t, h, enc_dir);
      auto hc = ad::relu(t, detail::linear(t, b, head + 2, color_in));
      out.rgb = ad::sigmoid(t, detail::linear(t, b, head + 4, hc));
      return out;
    };
    return binding;
  }

  std::vector<ad::Tensor<S>*> parameters() override {
    std::vector<ad::Tensor<S>*> out;
    for (auto& p : params_) out.push_back(&p);
    return out;
  }
  std::vector<const ad::Tensor<S>*> parameters() const override {
    std::vector<const ad::Tensor<S>*> out;
    for (const auto& p : params_) out.push_back(&p);
    return out;
  }

  Index mlp_parameter_count() const {
    Index n = 0;
    for (const auto& p : params_) n += p.size();
    return n;
  }

  // multiply-add pairs counted as 2 flops, activations as 1 per element
  double forward_flops_per_query() const {
    const auto& v = cfg_.vanilla;
    const double enc_pos = pos_enc_.output_dim(3);
    const double enc_dir = dir_enc_.output_dim(3);
    double flops = 8.0 * (pos_enc_.num_frequencies + dir_enc_.num_frequencies) * 3;
    double in = enc_pos;
    for (int l = 0; l < v.trunk_depth; ++l) {
      if (l == v.skip_layer) in += enc_pos;
      flops += 2.0 * in * v.trunk_width + 2.0 * v.trunk_width;
      in = v.trunk_width;
    }
    flops += 2.0 * v.trunk_width * 1 + 2;  // density head
    flops += 2.0 * (v.trunk_width + enc_dir) * v.color_width + 2.0 * v.color_width;
    flops += 2.0 * v.color_width * 3 + 6;
    return flops;
  }

  const FieldConfig& config() const { return cfg_; }

 private:
  FieldConfig cfg_;
  enc::FrequencyEncodingConfig pos_enc_, dir_enc_;
  std::vector<ad::Tensor<S>> params_;
};

// ---------------------------------------------------------------------------
// Instant field

template <typename S>
class InstantField final : public RadianceField<S> {
 public:
  InstantField(const FieldConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    const auto& ic = cfg_.instant;
    grid_ = ic.grid();
    dir_enc_ = enc::FrequencyEncodingConfig{ic.dir_frequencies, true};
    table_ = enc::HashGridTable<S>::init(grid_, Rng::derive(seed, 0x7461626c65ull));

    Rng rng(seed);
    const Index enc_dim = grid_.output_dim();
    const Index enc_dir = dir_enc_.output_dim(3);
    auto l1 = detail::init_mlp<S>({enc_dim, Index(ic.hidden0)}, rng);
    auto density = detail::init_mlp<S>({Index(ic.hidden0), 1}, rng);
    auto l2 = detail::init_mlp<S>({Index(ic.hidden0), Index(ic.hidden1)}, rng);
    auto l3 = detail::init_mlp<S>({Index(ic.hidden1), Index(ic.hidden2)}, rng);
    auto color = detail::init_mlp<S>({Index(ic.hidden2) + enc_dir, 3}, rng);
    for (auto* group : {&l1, &density, &l2, &l3, &color})
      mlp_.insert(mlp_.end(), std::make_move_iterator(group->begin()),
                  std::make_move_iterator(group->end()));
  }

  std::string kind() const override { return "instant"; }

  TapeBinding<S> bind(ad::Tape<S>& tape, bool trainable) const override {
    auto bound = std::make_shared<std::vector<ad::Tensor<S>>>();
    for (const auto* p : parameters())
      bound->push_back(trainable ? tape.parameter(*p) : tape.constant(*p));
    TapeBinding<S> binding;
    binding.params = *bound;
    const auto grid = grid_;
    const auto dir_enc = dir_enc_;
    const std::size_t levels = table_.levels.size();
    binding.query = [bound, grid, dir_enc, levels](
                        ad::Tape<S>& t, const ad::Tensor<S>& positions,
                        const MatX<S>& dirs, const VecX<S>* times) -> FieldSamples<S> {
      require(times == nullptr, "instant field: time input is not accepted");
      const auto& b = *bound;
      std::vector<ad::Tensor<S>> tables(b.begin(), b.begin() + levels);
      auto features = enc::hash_encode(t, positions, tables, grid);
      const std::size_t m = levels;  // MLP params follow the tables
      auto h1 = ad::relu(t, detail::linear(t, b, m, features));
      FieldSamples<S> out;
      out.sigma = ad::exp_clamped(t, detail::linear(t, b, m + 2, h1));
      auto h2 = ad::relu(t, detail::linear(t, b, m + 4, h1));
      auto h3 = ad::relu(t, detail::linear(t, b, m + 6, h2));
      auto enc_dir = t.constant(ad::Tensor<S>::from_mat(freq_encode_mat<S>(dirs, dir_enc)));
      auto color_in = ad::concat_cols(t, h3, enc_dir);
      out.rgb = ad::sigmoid(t, detail::linear(t, b, m + 8, color_in));
      return out;
    };
    return binding;
  }

  std::vector<ad::Tensor<S>*> parameters() override {
    std::vector<ad::Tensor<S>*> out;
    for (auto& l : table_.levels) out.push_back(&l);
    for (auto& p : mlp_) out.push_back(&p);
    return out;
  }
  std::vector<const ad::Tensor<S>*> parameters() const override {
    std::vector<const ad::Tensor<S>*> out;
    for (const auto& l : table_.levels) out.push_back(&l);
    for (const auto& p : mlp_) out.push_back(&p);
    return out;
  }

  Index mlp_parameter_count() const {
    Index n = 0;
    for (const auto& p : mlp_) n += p.size();
    return n;
  }

  double forward_flops_per_query() const {
    const auto& ic = cfg_.instant;
    const double f = grid_.features_per_level;
    double flops = grid_.levels * (8.0 * (5.0 + 2.0 * f) + 24.0);  // encode
    flops += 8.0 * dir_enc_.num_frequencies * 3;
    const double enc_dim = grid_.output_dim();
    const double enc_dir = dir_enc_.output_dim(3);
    flops += 2.0 * enc_dim * ic.hidden0 + 2.0 * ic.hidden0;
    flops += 2.0 * ic.hidden0 * 1 + 2;
    flops += 2.0 * ic.hidden0 * ic.hidden1 + 2.0 * ic.hidden1;
    flops += 2.0 * ic.hidden1 * ic.hidden2 + 2.0 * ic.hidden2;
    flops += 2.0 * (ic.hidden2 + enc_dir) * 3 + 6;
    return flops;
  }

  const FieldConfig& config() const { return cfg_; }
  const enc::HashGridConfig& grid_config() const { return grid_; }

 private:
  FieldConfig cfg_;
  enc::HashGridConfig grid_;
  enc::FrequencyEncodingConfig dir_enc_;
  enc::HashGridTable<S> table_;
  std::vector<ad::Tensor<S>> mlp_;
};

template <typename S>
std::unique_ptr<RadianceField<S>> make_field(const FieldConfig& cfg, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Deformation field: canonical field queried at position + psi(position, time)

template <typename S>
class DeformationField final : public RadianceField<S> {
 public:
  DeformationField(const FieldConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    FieldConfig canonical_cfg = cfg_;
    canonical_cfg.kind = cfg_.deform.canonical;
    canonical_ = make_field<S>(canonical_cfg, seed);  // same seed: t=0 equivalence

    pos_enc_ = enc::FrequencyEncodingConfig{cfg_.deform.pos_frequencies, true};
    time_enc_ = enc::FrequencyEncodingConfig{cfg_.deform.time_frequencies, true};
    const Index in_dim = pos_enc_.output_dim(3) + time_enc_.output_dim(1);
    std::vector<Index> dims = {in_dim};
    for (int l = 0; l < cfg_.deform.depth; ++l) dims.push_back(cfg_.deform.width);
    dims.push_back(3);
    Rng rng(Rng::derive(seed, 0x646566ull));
    psi_ = detail::init_mlp<S>(dims, rng);
  }

  std::string kind() const override { return "dnerf"; }
  bool wants_time() const override { return true; }

  TapeBinding<S> bind(ad::Tape<S>& tape, bool trainable) const override {
    auto canonical_binding =
        std::make_shared<TapeBinding<S>>(canonical_->bind(tape, trainable));
    auto psi_bound = std::make_shared<std::vector<ad::Tensor<S>>>();
    for (const auto& p : psi_)
      psi_bound->push_back(trainable ? tape.parameter(p) : tape.constant(p));

    TapeBinding<S> binding;
    binding.params = canonical_binding->params;
    binding.params.insert(binding.params.end(), psi_bound->begin(), psi_bound->end());
    const auto pos_enc = pos_enc_;
    const auto time_enc = time_enc_;
    const int depth = cfg_.deform.depth;
    binding.query = [canonical_binding, psi_bound, pos_enc, time_enc, depth](
                        ad::Tape<S>& t, const ad::Tensor<S>& positions,
                        const MatX<S>& dirs, const VecX<S>* times) -> FieldSamples<S> {
      require(times != nullptr, "dnerf field: time input required");
      require(times->size() == positions.rows(),
              cat("dnerf: ", times->size(), " times for ", positions.rows(), " samples"));
      const ad::NodeId ip = t.ensure(positions);
      ad::Tensor<S> pos = t.value(ip);

      // displacement on every sample, then zeroed where t == 0 so the
      // canonical field is queried verbatim there
      auto enc_p = enc::freq_encode(t, pos, pos_enc);
      MatX<S> tcol(times->size(), 1);
      tcol.col(0) = *times;
      auto enc_t = t.constant(ad::Tensor<S>::from_mat(freq_encode_mat<S>(tcol, time_enc)));
      auto h = ad::concat_cols(t, enc_p, enc_t);
      const auto& pb = *psi_bound;
      for (int l = 0; l < depth; ++l)
        h = ad::relu(t, detail::linear(t, pb, 2 * std::size_t(l), h));
      auto delta = detail::linear(t, pb, 2 * std::size_t(depth), h);
      VecX<S> mask(times->size());
      for (Index i = 0; i < times->size(); ++i)
        mask[i] = ((*times)[i] == S(0)) ? S(0) : S(1);
      auto masked = ad::row_scale(t, delta, mask);
      auto warped = ad::clamp01(t, ad::add(t, pos, masked));
      return canonical_binding->query(t, warped, dirs, nullptr);
    };
    return binding;
  }

  std::vector<ad::Tensor<S>*> parameters() override {
    auto out = canonical_->parameters();
    for (auto& p : psi_) out.push_back(&p);
    return out;
  }
  std::vector<const ad::Tensor<S>*> parameters() const override {
    auto out = std::as_const(*canonical_).parameters();
    for (const auto& p : psi_) out.push_back(&p);
    return out;
  }

  const RadianceField<S>& canonical() const { return *canonical_; }

  double forward_flops_per_query() const {
    double flops = 8.0 * (pos_enc_.num_frequencies * 3 + time_enc_.num_frequencies);
    Index in = pos_enc_.output_dim(3) + time_enc_.output_dim(1);
    for (int l = 0; l < cfg_.deform.depth; ++l) {
      flops += 2.0 * in * cfg_.deform.width + 2.0 * cfg_.deform.width;
      in = cfg_.deform.width;
    }
    flops += 2.0 * in * 3 + 6;
    if (auto* instant = dynamic_cast<const InstantField<S>*>(canonical_.get()))
      flops += instant->forward_flops_per_query();
    else if (auto* vanilla = dynamic_cast<const VanillaField<S>*>(canonical_.get()))
      flops += vanilla->forward_flops_per_query();
    return flops;
  }

 private:
  FieldConfig cfg_;
  std::unique_ptr<RadianceField<S>> canonical_;
  enc::FrequencyEncodingConfig pos_enc_, time_enc_;
  std::vector<ad::Tensor<S>> psi_;
};

// ---------------------------------------------------------------------------

template <typename S>
std::unique_ptr<RadianceField<S>> make_field(const FieldConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (cfg.kind == "vanilla") return std::make_unique<VanillaField<S>>(cfg, seed);
  if (cfg.kind == "instant") return std::make_unique<InstantField<S>>(cfg, seed);
  return std::make_unique<DeformationField<S>>(cfg, seed);
}

// ---------------------------------------------------------------------------
// Checkpoints: plain-text header, then the raw little-endian scalar blob in
// parameters() order.

struct CheckpointMeta {
  FieldConfig config;
  std::string scalar;  // float32 | float64
  std::uint64_t seed = 0;
  std::int64_t step = 0;
  std::map<std::string, std::string> extra;  // e.g. train_config, loss, seconds
};

template <typename S>
constexpr const char* scalar_name() {
  if constexpr (std::is_same_v<S, float>) return "float32";
  else return "float64";
}

template <typename S>
void save_checkpoint(const std::string& path, const RadianceField<S>& field,
                     CheckpointMeta meta) {
  static_assert(std::endian::native == std::endian::little,
                "checkpoint blobs are little-endian");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw AbortError("save_checkpoint: cannot open " + path);
  meta.scalar = scalar_name<S>();
  nlohmann::json cfg_json = meta.config;
  Index count = 0;
  for (const auto* p : field.parameters()) count += p->size();
  out << "RSONERF_CHECKPOINT 1\n";
  out << "kind " << meta.config.kind << "\n";
  out << "scalar " << meta.scalar << "\n";
  out << "seed " << meta.seed << "\n";
  out << "step " << meta.step << "\n";
  out << "config " << cfg_json.dump() << "\n";
  for (const auto& [k, v] : meta.extra) out << "extra." << k << " " << v << "\n";
  out << "param_count " << count << "\n";
  out << "blob\n";
  for (const auto* p : field.parameters())
    out.write(reinterpret_cast<const char*>(p->values.data()),
              static_cast<std::streamsize>(p->size() * sizeof(S)));
  if (!out) throw AbortError("save_checkpoint: short write to " + path);
}

template <typename S>
std::pair<std::unique_ptr<RadianceField<S>>, CheckpointMeta> load_checkpoint(
    const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ContractError("load_checkpoint: cannot open " + path);
  std::string line;
  std::getline(in, line);
  if (line != "RSONERF_CHECKPOINT 1")
    throw AbortError("load_checkpoint: bad magic in " + path);

  CheckpointMeta meta;
  Index declared = -1;
  while (std::getline(in, line)) {
    if (line == "blob") break;
    const auto space = line.find(' ');
    if (space == std::string::npos) throw AbortError("load_checkpoint: malformed header line");
    const std::string key = line.substr(0, space);
    const std::string value = line.substr(space + 1);
    if (key == "kind") {
      // redundant with config, kept for greppability
    } else if (key == "scalar") {
      meta.scalar = value;
    } else if (key == "seed") {
      meta.seed = std::stoull(value);
    } else if (key == "step") {
      meta.step = std::stoll(value);
    } else if (key == "config") {
      meta.config = nlohmann::json::parse(value).get<FieldConfig>();
    } else if (key.rfind("extra.", 0) == 0) {
      meta.extra[key.substr(6)] = value;
    } else if (key == "param_count") {
      declared = std::stoll(value);
    }
  }
  if (meta.scalar != scalar_name<S>())
    throw AbortError(cat("load_checkpoint: file holds ", meta.scalar,
                         " parameters but this run uses ", scalar_name<S>()));
  auto field = make_field<S>(meta.config, meta.seed);
  Index total = 0;
  for (auto* p : field->parameters()) {
    in.read(reinterpret_cast<char*>(p->values.data()),
            static_cast<std::streamsize>(p->size() * sizeof(S)));
    if (!in) throw AbortError("load_checkpoint: truncated blob in " + path);
    total += p->size();
  }
  if (declared >= 0 && declared != total)
    throw AbortError(cat("load_checkpoint: header declares ", declared,
                         " scalars, field holds ", total));
  return {std::move(field), std::move(meta)};
}

// ---------------------------------------------------------------------------
// JSON (de)serialization of configs

inline void to_json(nlohmann::json& j, const FieldConfig& c) {
  j = nlohmann::json{
      {"kind", c.kind},
      {"vanilla",
       {{"trunk_depth", c.vanilla.trunk_depth},
        {"trunk_width", c.vanilla.trunk_width},
        {"color_width", c.vanilla.color_width},
        {"skip_layer", c.vanilla.skip_layer},
        {"pos_frequencies", c.vanilla.pos_frequencies},
        {"dir_frequencies", c.vanilla.dir_frequencies}}},
      {"instant",
       {{"hidden", {c.instant.hidden0, c.instant.hidden1, c.instant.hidden2}},
        {"dir_frequencies", c.instant.dir_frequencies},
        {"hash_levels", c.instant.hash_levels},
        {"hash_log2_table_size", c.instant.hash_log2_table_size},
        {"hash_features_per_level", c.instant.hash_features_per_level},
        {"hash_base_resolution", c.instant.hash_base_resolution},
        {"hash_finest_resolution", c.instant.hash_finest_resolution}}},
      {"deform",
       {{"depth", c.deform.depth},
        {"width", c.deform.width},
        {"pos_frequencies", c.deform.pos_frequencies},
        {"time_frequencies", c.deform.time_frequencies},
        {"canonical", c.deform.canonical}}}};
}

inline void from_json(const nlohmann::json& j, FieldConfig& c) {
  c = FieldConfig{};
  if (j.contains("kind")) j.at("kind").get_to(c.kind);
  if (j.contains("vanilla")) {
    const auto& v = j.at("vanilla");
    if (v.contains("trunk_depth")) v.at("trunk_depth").get_to(c.vanilla.trunk_depth);
    if (v.contains("trunk_width")) v.at("trunk_width").get_to(c.vanilla.trunk_width);
    if (v.contains("color_width")) v.at("color_width").get_to(c.vanilla.color_width);
    if (v.contains("skip_layer")) v.at("skip_layer").get_to(c.vanilla.skip_layer);
    if (v.contains("pos_frequencies"))
      v.at("pos_frequencies").get_to(c.vanilla.pos_frequencies);
    if (v.contains("dir_frequencies"))
      v.at("dir_frequencies").get_to(c.vanilla.dir_frequencies);
  }
  if (j.contains("instant")) {
    const auto& v = j.at("instant");
    if (v.contains("hidden")) {
      const auto h = v.at("hidden");
      require(h.is_array() && h.size() == 3, "instant.hidden must hold 3 widths");
      c.instant.hidden0 = h[0];
      c.instant.hidden1 = h[1];
      c.instant.hidden2 = h[2];
    }
    if (v.contains("dir_frequencies"))
      v.at("dir_frequencies").get_to(c.instant.dir_frequencies);
    if (v.contains("hash_levels")) v.at("hash_levels").get_to(c.instant.hash_levels);
    if (v.contains("hash_log2_table_size"))
      v.at("hash_log2_table_size").get_to(c.instant.hash_log2_table_size);
    if (v.contains("hash_features_per_level"))
      v.at("hash_features_per_level").get_to(c.instant.hash_features_per_level);
    if (v.contains("hash_base_resolution"))
      v.at("hash_base_resolution").get_to(c.instant.hash_base_resolution);
    if (v.contains("hash_finest_resolution"))
      v.at("hash_finest_resolution").get_to(c.instant.hash_finest_resolution);
  }
  if (j.contains("deform")) {
    const auto& v = j.at("deform");
    if (v.contains("depth")) v.at("depth").get_to(c.deform.depth);
    if (v.contains("width")) v.at("width").get_to(c.deform.width);
    if (v.contains("pos_frequencies"))
      v.at("pos_frequencies").get_to(c.deform.pos_frequencies);
    if (v.contains("time_frequencies"))
      v.at("time_frequencies").get_to(c.deform.time_frequencies);
    if (v.contains("canonical")) v.at("canonical").get_to(c.deform.canonical);
  }
}

}  // namespace rsonerf::fields
