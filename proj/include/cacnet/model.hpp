#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "cacnet/layers.hpp"

// The classifier: N conv blocks (3x3 same-pad conv, ReLU, 2x2 max pool),
// flatten, dropout, one hidden dense layer with ReLU, linear head, softmax.
// Default configuration is the six-class network on 1x128x128 slices.

namespace cacnet {

struct ModelConfig {
    std::size_t in_channels = 1;
    std::size_t input_h = 128;
    std::size_t input_w = 128;
    std::vector<std::size_t> conv_filters = {32, 64, 128, 256, 512};
    std::size_t dense_units = 512;
    std::size_t num_classes = 6;
    double dropout_rate = 0.30;

    void validate() const {
        if (in_channels == 0 || input_h == 0 || input_w == 0) throw ConfigError("input dimensions must be >= 1");
        if (conv_filters.empty()) throw ConfigError("at least one conv block required");
        for (std::size_t f : conv_filters)
            if (f == 0) throw ConfigError("conv filter counts must be >= 1");
        if (dense_units == 0) throw ConfigError("dense_units must be >= 1");
        if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
        if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw ConfigError("dropout_rate must be in [0,1)");
        std::size_t h = input_h, w = input_w;
        for (std::size_t i = 0; i < conv_filters.size(); ++i) {
            h /= 2;
            w /= 2;
            if (h == 0 || w == 0) {
                throw ConfigError("input " + std::to_string(input_h) + "x" + std::to_string(input_w) +
                                  " too small for " + std::to_string(conv_filters.size()) + " pooling stages");
            }
        }
    }
};

template <typename T>
struct ParamGroup {
    std::string name;
    Tensor<T>* value;
    Tensor<T>* grad;
};

template <typename T>
class Model {
public:
    Model(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)), dropout_(cfg_.dropout_rate) {
        cfg_.validate();
        std::size_t ch = cfg_.in_channels, h = cfg_.input_h, w = cfg_.input_w;
        for (std::size_t f : cfg_.conv_filters) {
            ConvGeometry g;
            g.channels = ch;
            g.height = h;
            g.width = w;
            g.kernel_h = g.kernel_w = 3;
            g.stride_h = g.stride_w = 1;
            g.pad_h = g.pad_w = 1;
            convs_.emplace_back(g, f);
            conv_relus_.emplace_back();
            pools_.emplace_back();
            ch = f;
            h /= 2;
            w /= 2;
        }
        last_ch_ = ch;
        last_h_ = h;
        last_w_ = w;
        flat_dim_ = ch * h * w;
        dense1_ = Dense<T>(cfg_.dense_units, flat_dim_);
        dense2_ = Dense<T>(cfg_.num_classes, cfg_.dense_units);
        init_params(seed);
    }

    // Returns class probabilities. Train mode consumes rng for the dropout
    // mask and fills the caches backward() relies on.
    Tensor<T> forward(const Tensor<T>& x, Mode mode, Rng& rng) {
        if (x.rank() != 3 || x.extent(0) != cfg_.in_channels || x.extent(1) != cfg_.input_h ||
            x.extent(2) != cfg_.input_w) {
            throw DimensionError("model input " + x.shape_string() + " does not match configured " +
                                 std::to_string(cfg_.in_channels) + "x" + std::to_string(cfg_.input_h) + "x" +
                                 std::to_string(cfg_.input_w));
        }
        Tensor<T> a = x;
        for (std::size_t i = 0; i < convs_.size(); ++i) {
            a = pools_[i].forward(conv_relus_[i].forward(convs_[i].forward(a)));
        }
        a = dropout_.forward(a.reshaped({flat_dim_}), mode, rng);
        a = relu_d_.forward(dense1_.forward(a));
        logits_ = dense2_.forward(a);
        check_finite(logits_, "logits");
        train_cache_ready_ = (mode == Mode::Train);
        return softmax(logits_);
    }

    // dlogits is dL/dlogits for the sample last passed through forward() in
    // Train mode. Accumulates parameter gradients; returns dL/dinput.
    Tensor<T> backward(const Tensor<T>& dlogits) {
        if (!train_cache_ready_) throw StateError("backward() requires a preceding train-mode forward()");
        Tensor<T> g = relu_d_.backward(dense2_.backward(dlogits));
        g = dropout_.backward(dense1_.backward(g), Mode::Train);
        g = g.reshaped({last_ch_, last_h_, last_w_});
        for (std::size_t i = convs_.size(); i-- > 0;) {
            g = convs_[i].backward(conv_relus_[i].backward(pools_[i].backward(g)));
        }
        return g;
    }

    const Tensor<T>& logits() const { return logits_; }

    std::vector<ParamGroup<T>> param_groups() {
        std::vector<ParamGroup<T>> groups;
        for (std::size_t i = 0; i < convs_.size(); ++i) {
            groups.push_back({"conv" + std::to_string(i + 1) + ".w", &convs_[i].w, &convs_[i].dw});
            groups.push_back({"conv" + std::to_string(i + 1) + ".b", &convs_[i].b, &convs_[i].db});
        }
        groups.push_back({"dense1.w", &dense1_.w, &dense1_.dw});
        groups.push_back({"dense1.b", &dense1_.b, &dense1_.db});
        groups.push_back({"dense2.w", &dense2_.w, &dense2_.dw});
        groups.push_back({"dense2.b", &dense2_.b, &dense2_.db});
        return groups;
    }

    void zero_grad() {
        for (auto& g : param_groups()) std::fill(g.grad->data(), g.grad->data() + g.grad->size(), T{});
    }

    std::size_t param_count() {
        std::size_t n = 0;
        for (auto& g : param_groups()) n += g.value->size();
        return n;
    }

    const ModelConfig& config() const { return cfg_; }
    std::size_t flat_dim() const { return flat_dim_; }

private:
    // He-normal for every layer feeding a ReLU; the linear head uses
    // std = sqrt(1/fan_in). Biases start at zero. Draw order is the
    // param_groups() order, which makes init reproducible from the seed.
    void init_params(std::uint64_t seed) {
        Rng rng = make_rng(seed);
        auto fill_normal = [&rng](Tensor<T>& t, double stddev) {
            std::normal_distribution<double> dist(0.0, stddev);
            for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(dist(rng));
        };
        for (auto& conv : convs_) fill_normal(conv.w, std::sqrt(2.0 / static_cast<double>(conv.geom.col_rows())));
        fill_normal(dense1_.w, std::sqrt(2.0 / static_cast<double>(dense1_.w.extent(1))));
        fill_normal(dense2_.w, std::sqrt(1.0 / static_cast<double>(dense2_.w.extent(1))));
    }

    ModelConfig cfg_;
    std::vector<Conv2D<T>> convs_;
    std::vector<ReLU<T>> conv_relus_;
    std::vector<MaxPool2x2<T>> pools_;
    Dropout<T> dropout_;
    Dense<T> dense1_{1, 1};
    ReLU<T> relu_d_;
    Dense<T> dense2_{1, 1};
    Tensor<T> logits_{{1}};
    std::size_t flat_dim_ = 0;
    std::size_t last_ch_ = 0, last_h_ = 0, last_w_ = 0;
    bool train_cache_ready_ = false;
};

using ModelF = Model<float>;

}  // namespace cacnet
