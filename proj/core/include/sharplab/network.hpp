#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sharplab/matrix.hpp"
#include "sharplab/rng.hpp"

namespace sharplab {

enum class Activation { relu, identity };

struct Layer {
    Matrix weight;                 // out_dim x in_dim
    std::optional<Vector> bias;    // out_dim, default absent
    Activation activation = Activation::relu;
};

/// Feed-forward ReLU classifier with an explicit penultimate split: all
/// layers but the last form the feature extractor phi, the final
/// identity-activated layer is the classifier w (k x m). Immutable value
/// after construction.
class MlpNetwork {
public:
    MlpNetwork() = default;
    explicit MlpNetwork(std::vector<Layer> layers);

    /// Random He-initialized network for the given layer widths, e.g.
    /// {2, 16, 16, 3} builds 2->16->16->3 with ReLU hidden layers.
    static MlpNetwork random(const std::vector<std::size_t>& dims, SeededRng rng,
                             bool with_bias = false);

    const std::vector<Layer>& layers() const { return layers_; }
    std::vector<Layer>& layers() { return layers_; }

    std::size_t input_dim() const;
    std::size_t num_classes() const;   // k
    std::size_t feature_dim() const;   // m, the penultimate width
    const Matrix& classifier() const;  // w, the final layer weight

    /// phi(x): activations just before the classifier layer.
    Vector features(const Vector& x) const;

private:
    std::vector<Layer> layers_;
};

struct ForwardCache {
    std::vector<Vector> pre_activations;   // a^l per layer
    std::vector<Vector> post_activations;  // x^l per layer
    Vector phi;                            // features at the penultimate split
    Vector logits;                         // z
    Vector yhat;                           // softmax(z)
};

/// Softmax with max-subtraction.
Vector softmax(const Vector& logits);

/// Full forward pass. Throws on non-finite activations, naming the layer.
ForwardCache forward(const MlpNetwork& net, const Vector& x);

/// argmax of logits, ties broken toward the lowest class index.
std::size_t predict(const MlpNetwork& net, const Vector& x);
std::size_t argmax_lowest_tie(const Vector& v);

struct SampleBatch {
    Matrix inputs;                    // n x d
    std::vector<std::size_t> labels;  // n, in [0, k)

    std::size_t size() const { return labels.size(); }
    Vector input(std::size_t i) const;
};

enum class TrainLoss { cross_entropy };

struct Gradients {
    std::vector<Matrix> weight;  // per layer
    std::vector<Vector> bias;    // per layer (empty vector when layer has none)

    double frobenius_norm() const;
};

double cross_entropy(const Vector& yhat, std::size_t label);

/// Mean loss and per-layer gradients over the batch. The classifier-layer
/// gradient equals the closed form (yhat - e_y) phi^T averaged over samples.
std::pair<double, Gradients> loss_and_grad(const MlpNetwork& net, const SampleBatch& batch,
                                           TrainLoss loss = TrainLoss::cross_entropy);

/// Per-sample input-space gradient of the cross-entropy loss.
Vector input_gradient(const MlpNetwork& net, const Vector& x, std::size_t label);

struct TrainConfig {
    std::size_t epochs = 200;
    std::size_t batch_size = 32;
    double learning_rate = 0.1;
    double weight_decay = 0.0;
    std::uint64_t seed = 0;
    TrainLoss loss = TrainLoss::cross_entropy;
};

struct TrainResult {
    MlpNetwork net;
    std::vector<double> loss_curve;  // mean loss per epoch
};

/// Plain SGD, shuffling driven by the config seed; deterministic.
/// Aborts (throws) with the epoch index if the loss turns non-finite.
TrainResult train_sgd(const MlpNetwork& net, const SampleBatch& data, const TrainConfig& config);

/// Copy with classifier weights (and bias, if any) multiplied by s > 0;
/// phi untouched. Predictions are invariant for every s > 0.
MlpNetwork scale_penultimate(const MlpNetwork& net, double s);

double accuracy(const MlpNetwork& net, const SampleBatch& batch);

}  // namespace sharplab
