#include "sharplab/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace sharplab {

MlpNetwork::MlpNetwork(std::vector<Layer> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) throw std::invalid_argument("MlpNetwork: no layers");
    for (std::size_t l = 1; l < layers_.size(); ++l) {
        if (layers_[l].weight.cols() != layers_[l - 1].weight.rows()) {
            std::ostringstream os;
            os << "MlpNetwork: layer " << l << " expects input dim " << layers_[l].weight.cols()
               << " but previous layer outputs " << layers_[l - 1].weight.rows();
            throw std::invalid_argument(os.str());
        }
    }
    if (layers_.back().activation != Activation::identity)
        throw std::invalid_argument("MlpNetwork: classifier layer must be identity-activated");
    for (const auto& layer : layers_) {
        if (layer.bias && layer.bias->size() != layer.weight.rows())
            throw std::invalid_argument("MlpNetwork: bias length mismatch");
    }
}

MlpNetwork MlpNetwork::random(const std::vector<std::size_t>& dims, SeededRng rng,
                              bool with_bias) {
    if (dims.size() < 2) throw std::invalid_argument("MlpNetwork::random: need >= 2 dims");
    std::vector<Layer> layers;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        Layer layer;
        layer.weight = Matrix(dims[l + 1], dims[l]);
        const double scale = std::sqrt(2.0 / static_cast<double>(dims[l]));
        for (auto& v : layer.weight.data()) v = scale * rng.normal();
        if (with_bias) layer.bias = Vector(dims[l + 1], 0.0);
        layer.activation = (l + 2 == dims.size()) ? Activation::identity : Activation::relu;
        layers.push_back(std::move(layer));
    }
    return MlpNetwork(std::move(layers));
}

std::size_t MlpNetwork::input_dim() const { return layers_.front().weight.cols(); }
std::size_t MlpNetwork::num_classes() const { return layers_.back().weight.rows(); }
std::size_t MlpNetwork::feature_dim() const { return layers_.back().weight.cols(); }
const Matrix& MlpNetwork::classifier() const { return layers_.back().weight; }

Vector MlpNetwork::features(const Vector& x) const {
    Vector cur = x;
    for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
        const Layer& layer = layers_[l];
        Vector a = layer.weight * cur;
        if (layer.bias)
            for (std::size_t i = 0; i < a.size(); ++i) a[i] += (*layer.bias)[i];
        if (layer.activation == Activation::relu)
            for (auto& v : a) v = v > 0.0 ? v : 0.0;
        cur = std::move(a);
    }
    return cur;
}

Vector softmax(const Vector& logits) {
    const double zmax = *std::max_element(logits.begin(), logits.end());
    Vector out(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - zmax);
        sum += out[i];
    }
    for (auto& v : out) v /= sum;
    return out;
}

ForwardCache forward(const MlpNetwork& net, const Vector& x) {
    if (x.size() != net.input_dim())
        throw std::invalid_argument("forward: input dimension mismatch");
    ForwardCache cache;
    Vector cur = x;
    const auto& layers = net.layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const Layer& layer = layers[l];
        Vector a = layer.weight * cur;
        if (layer.bias)
            for (std::size_t i = 0; i < a.size(); ++i) a[i] += (*layer.bias)[i];
        for (double v : a)
            if (!std::isfinite(v)) {
                std::ostringstream os;
                os << "forward: non-finite activation at layer " << l;
                throw std::runtime_error(os.str());
            }
        cache.pre_activations.push_back(a);
        if (layer.activation == Activation::relu)
            for (auto& v : a) v = v > 0.0 ? v : 0.0;
        cache.post_activations.push_back(a);
        if (l + 1 == layers.size()) {
            cache.logits = cache.pre_activations.back();
        }
        cur = std::move(a);
    }
    cache.phi = layers.size() > 1 ? cache.post_activations[layers.size() - 2] : x;
    cache.yhat = softmax(cache.logits);
    return cache;
}

std::size_t argmax_lowest_tie(const Vector& v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

std::size_t predict(const MlpNetwork& net, const Vector& x) {
    return argmax_lowest_tie(forward(net, x).logits);
}

Vector SampleBatch::input(std::size_t i) const {
    Vector v(inputs.cols());
    for (std::size_t j = 0; j < inputs.cols(); ++j) v[j] = inputs(i, j);
    return v;
}

double Gradients::frobenius_norm() const {
    double s = 0.0;
    for (const auto& m : weight)
        for (double v : m.data()) s += v * v;
    for (const auto& b : bias)
        for (double v : b) s += v * v;
    return std::sqrt(s);
}

double cross_entropy(const Vector& yhat, std::size_t label) {
    return -std::log(std::max(yhat[label], 1e-300));
}

namespace {

// Per-sample backprop, accumulating into grads. Returns the sample loss.
double backprop_sample(const MlpNetwork& net, const Vector& x, std::size_t label,
                       Gradients& grads) {
    const ForwardCache cache = forward(net, x);
    const auto& layers = net.layers();
    const std::size_t nl = layers.size();

    // delta at the logits: yhat - e_y
    Vector delta = cache.yhat;
    delta[label] -= 1.0;

    for (std::size_t l = nl; l-- > 0;) {
        const Vector& below = l == 0 ? x : cache.post_activations[l - 1];
        for (std::size_t i = 0; i < delta.size(); ++i) {
            for (std::size_t j = 0; j < below.size(); ++j)
                grads.weight[l](i, j) += delta[i] * below[j];
            if (layers[l].bias) grads.bias[l][i] += delta[i];
        }
        if (l == 0) break;
        // delta for the layer below: W^T delta, masked by its ReLU
        Vector next(layers[l].weight.cols(), 0.0);
        for (std::size_t i = 0; i < delta.size(); ++i)
            for (std::size_t j = 0; j < next.size(); ++j)
                next[j] += layers[l].weight(i, j) * delta[i];
        if (layers[l - 1].activation == Activation::relu) {
            const Vector& pre = cache.pre_activations[l - 1];
            for (std::size_t j = 0; j < next.size(); ++j)
                if (pre[j] <= 0.0) next[j] = 0.0;
        }
        delta = std::move(next);
    }
    return cross_entropy(cache.yhat, label);
}

}  // namespace

std::pair<double, Gradients> loss_and_grad(const MlpNetwork& net, const SampleBatch& batch,
                                           TrainLoss loss) {
    if (loss != TrainLoss::cross_entropy)
        throw std::invalid_argument("loss_and_grad: unknown loss kind");
    if (batch.size() == 0) throw std::invalid_argument("loss_and_grad: empty batch");
    Gradients grads;
    for (const auto& layer : net.layers()) {
        grads.weight.emplace_back(layer.weight.rows(), layer.weight.cols());
        grads.bias.emplace_back(layer.bias ? Vector(layer.weight.rows(), 0.0) : Vector{});
    }
    double total = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i)
        total += backprop_sample(net, batch.input(i), batch.labels[i], grads);
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (auto& m : grads.weight)
        for (auto& v : m.data()) v *= inv;
    for (auto& b : grads.bias)
        for (auto& v : b) v *= inv;
    return {total * inv, std::move(grads)};
}

Vector input_gradient(const MlpNetwork& net, const Vector& x, std::size_t label) {
    const ForwardCache cache = forward(net, x);
    const auto& layers = net.layers();
    Vector delta = cache.yhat;
    delta[label] -= 1.0;
    for (std::size_t l = layers.size(); l-- > 0;) {
        Vector next(layers[l].weight.cols(), 0.0);
        for (std::size_t i = 0; i < delta.size(); ++i)
            for (std::size_t j = 0; j < next.size(); ++j)
                next[j] += layers[l].weight(i, j) * delta[i];
        if (l > 0 && layers[l - 1].activation == Activation::relu) {
            const Vector& pre = cache.pre_activations[l - 1];
            for (std::size_t j = 0; j < next.size(); ++j)
                if (pre[j] <= 0.0) next[j] = 0.0;
        }
        delta = std::move(next);
    }
    return delta;
}

TrainResult train_sgd(const MlpNetwork& net, const SampleBatch& data, const TrainConfig& config) {
    if (config.batch_size == 0 || config.learning_rate <= 0.0)
        throw std::invalid_argument("train_sgd: hyperparameters must be positive");
    TrainResult result;
    result.net = net;
    SeededRng rng(config.seed, 0x7261696eULL);

    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            SampleBatch mini;
            mini.inputs = Matrix(end - start, data.inputs.cols());
            for (std::size_t i = start; i < end; ++i) {
                const std::size_t src = order[i];
                for (std::size_t j = 0; j < data.inputs.cols(); ++j)
                    mini.inputs(i - start, j) = data.inputs(src, j);
                mini.labels.push_back(data.labels[src]);
            }
            double loss = 0.0;
            Gradients grads;
            try {
                std::tie(loss, grads) = loss_and_grad(result.net, mini, config.loss);
            } catch (const std::runtime_error&) {
                // a non-finite forward pass mid-training is divergence
                loss = std::numeric_limits<double>::quiet_NaN();
            }
            bool finite = std::isfinite(loss);
            for (const auto& layer : result.net.layers()) finite &= layer.weight.all_finite();
            if (!finite) {
                std::ostringstream os;
                os << "train_sgd: loss diverged at epoch " << epoch;
                throw std::runtime_error(os.str());
            }
            epoch_loss += loss;
            ++batches;
            auto& layers = result.net.layers();
            for (std::size_t l = 0; l < layers.size(); ++l) {
                auto& w = layers[l].weight;
                for (std::size_t i = 0; i < w.size(); ++i)
                    w.data()[i] -= config.learning_rate *
                                   (grads.weight[l].data()[i] + config.weight_decay * w.data()[i]);
                if (layers[l].bias)
                    for (std::size_t i = 0; i < layers[l].bias->size(); ++i)
                        (*layers[l].bias)[i] -= config.learning_rate * grads.bias[l][i];
            }
        }
        result.loss_curve.push_back(batches ? epoch_loss / static_cast<double>(batches) : 0.0);
    }
    return result;
}

MlpNetwork scale_penultimate(const MlpNetwork& net, double s) {
    if (!(s > 0.0)) throw std::invalid_argument("scale_penultimate: s must be positive");
    MlpNetwork out = net;
    auto& clf = out.layers().back();
    for (auto& v : clf.weight.data()) v *= s;
    if (clf.bias)
        for (auto& v : *clf.bias) v *= s;
    return out;
}

double accuracy(const MlpNetwork& net, const SampleBatch& batch) {
    if (batch.size() == 0) return 0.0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < batch.size(); ++i)
        if (predict(net, batch.input(i)) == batch.labels[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(batch.size());
}

}  // namespace sharplab
