#pragma once

// The query contract every radiance field satisfies: batched positions
// (+ directions, + optional per-sample times) in, density and color nodes
// out. Fields bind their parameters onto a caller-supplied tape, so the same
// object can be rendered read-only from many workers while a trainer binds
// it as trainable elsewhere.

#include "rsonerf/tensor.hpp"

#include <functional>
#include <memory>
#include <string>

namespace rsonerf::fields {

// sigma: [P x 1], nonnegative; rgb: [P x 3] in [0,1]. Both live on the tape.
template <typename S>
struct FieldSamples {
  ad::Tensor<S> sigma;
  ad::Tensor<S> rgb;
};

template <typename S>
using QueryFn = std::function<FieldSamples<S>(
    ad::Tape<S>&, const ad::Tensor<S>& positions, const MatX<S>& directions,
    const VecX<S>* times)>;

// A field's parameters materialized on one tape.
template <typename S>
struct TapeBinding {
  std::vector<ad::Tensor<S>> params;  // node ids set; order matches parameters()
  QueryFn<S> query;
};

template <typename S>
class RadianceField {
 public:
  virtual ~RadianceField() = default;

  virtual std::string kind() const = 0;
  virtual bool wants_time() const { return false; }

  // Registers parameters on `tape` (as trainable leaves or constants) and
  // returns the query closure for that tape. Bind once per tape.
  virtual TapeBinding<S> bind(ad::Tape<S>& tape, bool trainable) const = 0;

  // Master parameter storage, in binding order.
  virtual std::vector<ad::Tensor<S>*> parameters() = 0;
  virtual std::vector<const ad::Tensor<S>*> parameters() const = 0;

  Index parameter_count() const {
    Index n = 0;
    for (const auto* p : parameters()) n += p->size();
    return n;
  }
};

// Adapter turning a plain sampling function into a field; used by the
// analytic test scenes and by closed-form renderer checks.
template <typename S>
class CallableField final : public RadianceField<S> {
 public:
  // fn fills sigma [P] and rgb [P x 3] from positions [P x 3]
  using SampleFn =
      std::function<void(const MatX<S>& positions, VecX<S>& sigma, MatX<S>& rgb)>;

  CallableField(std::string kind, SampleFn fn)
      : kind_(std::move(kind)), fn_(std::move(fn)) {}

  std::string kind() const override { return kind_; }

  TapeBinding<S> bind(ad::Tape<S>& tape, bool) const override {
    TapeBinding<S> binding;
    SampleFn fn = fn_;
    binding.query = [fn](ad::Tape<S>& t, const ad::Tensor<S>& positions,
                         const MatX<S>&, const VecX<S>*) -> FieldSamples<S> {
      const Index p = positions.rows();
      VecX<S> sigma(p);
      MatX<S> rgb(p, 3);
      fn(positions.mat(), sigma, rgb);
      FieldSamples<S> out;
      out.sigma = t.constant(ad::Tensor<S>({p, 1}, sigma.array()));
      out.rgb = t.constant(ad::Tensor<S>::from_mat(rgb));
      return out;
    };
    return binding;
  }

  std::vector<ad::Tensor<S>*> parameters() override { return {}; }
  std::vector<const ad::Tensor<S>*> parameters() const override { return {}; }

 private:
  std::string kind_;
  SampleFn fn_;
};

}  // namespace rsonerf::fields
