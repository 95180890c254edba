#pragma once

#include <vector>

#include "mbnn/bayes_linear.hpp"
#include "mbnn/linear_op.hpp"
#include "mbnn/netspec.hpp"
#include "mbnn/train.hpp"

namespace mbnn {

/// Net realizing one factorization of the regularized inverse of H,
/// initialized at its closed-form values (all parameters trainable).
/// Dense H gives affine layers (A: one, BHt / HtC: two); convolution H gives
/// conv layers with full-size kernels.
Net build_analytic_net(const LinearOp& H, double lambda, bayes::InverseForm form);

/// f = g - core(g), with core(g) exposed as the secondary output.
/// Throws StructureError unless core preserves size.
Net build_residual_net(const Net& core);

/// transform -> trainable diagonal mask -> adjoint transform on rows x cols
/// images. mask_init has one gain per coefficient (rows x cols entries); for
/// the FFT the gain applies to the real and imaginary parts alike and the
/// adjoint keeps the real part, so outputs stay real.
Net build_transform_net(TransformKind kind, std::size_t rows, std::size_t cols, std::size_t levels, Tensor mask_init);

/// Sequential chain: encoders in list order, then decoders in reverse list
/// order (the decoder list is indexed like the encoders it mirrors).
/// Parameters are renamed "enc<i>/..." and "dec<j>/...". A size mismatch at
/// any junction throws StructureError naming the stage.
Net build_encoder_decoder(const std::vector<Net>& encoders, const std::vector<Net>& decoders);

/// Sequential composition of nets with parameter prefixes "<prefix><i>/".
Net chain(const std::vector<Net>& stages, const std::string& prefix = "s");

/// Paired samples stored column-wise: inputs [in x N], targets [out x N].
struct Dataset {
    Tensor inputs, targets;
    std::size_t size() const { return inputs.rank() == 2 ? inputs.cols() : 0; }
    /// Columns listed in `idx`.
    Dataset subset(std::span<const std::size_t> idx) const;
};

/// Mean over all entries of (net(g) - f)^2.
double mse(const NetSpec& spec, const ParamSet& params, const Dataset& data);

/// Objective for plain supervised MSE training of one net.
Objective mse_objective(const NetSpec& spec, const Dataset& data);

struct NetTrainResult {
    ParamSet params;
    std::vector<double> history;
    std::size_t best_step = 0;
};

/// Supervised MSE training; see optimize() for the history and best-so-far contract.
NetTrainResult train(const NetSpec& spec, const ParamSet& params, const Dataset& data, const TrainConfig& cfg);

}  // namespace mbnn
