#pragma once

#include "mmgpvae/dataset.hpp"
#include "mmgpvae/model.hpp"

#include <span>
#include <vector>

namespace mmgpvae {

struct ElboTerms {
  double behavior = 0.0;
  double neural = 0.0;
  double prior = 0.0;
  double entropy = 0.0;
  double total() const { return behavior + neural + prior + entropy; }

  ElboTerms& operator+=(const ElboTerms& o) {
    behavior += o.behavior;
    neural += o.neural;
    prior += o.prior;
    entropy += o.entropy;
    return *this;
  }
};

struct TrialRef {
  const Matrix* y_a = nullptr;
  const Matrix* y_b = nullptr;
};

/// Reparameterization draws: noise[trial][sample] is P x F (P x T for the
/// time-domain modes). Only the behavior likelihood (and the Gaussian neural
/// variant) consumes samples; the GP prior, entropy, and Poisson terms are
/// closed-form in the variational parameters.
using NoiseBatch = std::vector<std::vector<Matrix>>;

/// Objective of one batch, summed over trials. When `grads` is given, the
/// full reverse pass runs and gradients are accumulated into it (a zeros_like
/// mirror of the model). `per_trial`, when given, receives each trial's terms.
ElboTerms elbo_batch(const Model& model, std::span<const TrialRef> trials,
                     const NoiseBatch& noise, Model* grads = nullptr,
                     std::vector<ElboTerms>* per_trial = nullptr);

std::vector<TrialRef> make_trial_refs(const Dataset& data, std::span<const Index> ids);

}  // namespace mmgpvae
