#include "densitometer/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "densitometer/checkpoint.hpp"

namespace densitometer {

EvalResult evaluate(Network& net, const Dataset& data, int eval_batch) {
    const int n = data.size();
    if (n == 0) {
        throw std::invalid_argument("evaluate: dataset is empty");
    }
    double loss_sum = 0.0;
    std::int64_t correct = 0;
    std::vector<int> indices(static_cast<std::size_t>(eval_batch));
    for (int start = 0; start < n; start += eval_batch) {
        const int count = std::min(eval_batch, n - start);
        indices.resize(static_cast<std::size_t>(count));
        std::iota(indices.begin(), indices.end(), start);
        const Tensor batch = data.gather(indices);
        auto [logits, cache] = forward(net, batch, Mode::eval);
        std::vector<int> labels(data.labels.begin() + start, data.labels.begin() + start + count);
        loss_sum += cross_entropy_loss(logits, labels).first * count;
        const auto preds = argmax_rows(logits);
        for (int i = 0; i < count; ++i) {
            if (preds[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(i)]) {
                ++correct;
            }
        }
    }
    return {static_cast<double>(correct) / n, loss_sum / n};
}

std::pair<Network, TrainHistory> train(Network net, const Dataset& train_set, const Dataset& val_set,
                                       OptimizerState optimizer, const StoppingRule& rule,
                                       const TrainOptions& options, const CheckpointMeta* meta) {
    const int n = train_set.size();
    if (n == 0 || val_set.size() == 0) {
        throw std::invalid_argument("train: empty dataset");
    }
    if (options.batch_size < 1) {
        throw std::invalid_argument("train: batch_size must be >= 1");
    }
    const bool val_min = rule.kind == StoppingRule::Kind::fixed_epochs_then_val_min;
    if (val_min && rule.epoch_budget < 1) {
        throw std::invalid_argument("train: val-min rule needs a positive epoch budget");
    }

    namespace fs = std::filesystem;
    const bool persist = !options.checkpoint_dir.empty();
    if (persist) {
        fs::create_directories(options.checkpoint_dir);
    }
    const auto checkpoint_path = [&](int epoch) {
        return (fs::path(options.checkpoint_dir) / ("epoch_" + std::to_string(epoch) + ".json")).string();
    };

    TrainHistory history;
    Network best_net = net;
    double best_val_loss = std::numeric_limits<double>::infinity();
    int best_epoch = 0;

    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);

    const int max_epochs = val_min ? rule.epoch_budget : rule.guard_epochs;
    for (int epoch = 1; epoch <= max_epochs; ++epoch) {
        // reproducible batch order independent of the init seed
        RngStream shuffle("epoch-shuffle", options.data_seed, static_cast<std::uint64_t>(epoch));
        std::iota(order.begin(), order.end(), 0);
        for (int i = n - 1; i > 0; --i) {
            const auto j = static_cast<int>(shuffle.next_below(static_cast<std::uint64_t>(i) + 1));
            std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
        }

        double loss_sum = 0.0;
        for (int start = 0; start < n; start += options.batch_size) {
            const int count = std::min(options.batch_size, n - start);
            const std::span<const int> idx(order.data() + start, static_cast<std::size_t>(count));
            const Tensor batch = train_set.gather(idx);
            std::vector<int> labels(static_cast<std::size_t>(count));
            for (int i = 0; i < count; ++i) {
                labels[static_cast<std::size_t>(i)] = train_set.labels[static_cast<std::size_t>(idx[i])];
            }
            auto [logits, cache] = forward(net, batch, Mode::train);
            auto [loss, dlogits] = cross_entropy_loss(logits, labels);
            if (!std::isfinite(loss)) {
                throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch));
            }
            loss_sum += loss * count;
            const Gradients grads = backward(net, cache, dlogits);
            optimizer_step(optimizer, net, grads);
        }
        const double train_loss = loss_sum / n;
        const EvalResult val = evaluate(net, val_set, options.eval_batch);

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = train_loss;
        rec.val_loss = val.mean_loss;
        rec.val_accuracy = val.accuracy;
        // per-epoch files exist for retrospective val-min selection; under the
        // loss target rule only the stopping epoch is worth keeping
        const bool stopping = !val_min && train_loss <= rule.target;
        if (persist && (val_min || stopping)) {
            CheckpointMeta m = meta ? *meta : CheckpointMeta{};
            m.epoch = epoch;
            m.train_loss = train_loss;
            m.val_loss = val.mean_loss;
            m.val_accuracy = val.accuracy;
            rec.checkpoint_path = checkpoint_path(epoch);
            save_checkpoint(rec.checkpoint_path, net, m);
        }
        history.epochs.push_back(rec);

        if (val.mean_loss < best_val_loss) {
            best_val_loss = val.mean_loss;
            best_epoch = epoch;
            if (val_min) {
                best_net = net;
            }
        }

        if (!val_min && train_loss <= rule.target) {
            history.selected_epoch = epoch;
            break;
        }
        if (!val_min && epoch == max_epochs) {
            throw std::runtime_error("train: loss target " + std::to_string(rule.target) +
                                     " not reached within " + std::to_string(rule.guard_epochs) +
                                     " epochs (last train loss " + std::to_string(train_loss) + ")");
        }
    }

    if (val_min) {
        history.selected_epoch = best_epoch;
        net = std::move(best_net);
    }

    if (persist) {
        // keep only the selected epoch and the final epoch
        const int last = history.epochs.back().epoch;
        for (auto& rec : history.epochs) {
            if (rec.epoch != history.selected_epoch && rec.epoch != last) {
                std::error_code ec;
                fs::remove(rec.checkpoint_path, ec);
                rec.checkpoint_path.clear();
            }
        }
    }

    return {std::move(net), std::move(history)};
}

Recipe default_recipe(Family family, OptimizerKind optimizer, const std::string& dataset_name) {
    if (family == Family::MLP && optimizer == OptimizerKind::SGD && dataset_name == "MNIST") {
        return {1e-3, StoppingRule::loss_target(0.2)};
    }
    if (family == Family::Conv2 && optimizer == OptimizerKind::Adam && dataset_name == "CIFAR10") {
        return {2e-4, StoppingRule::val_min(100)};
    }
    if (family == Family::Conv2 && optimizer == OptimizerKind::Adagrad && dataset_name == "CIFAR10") {
        return {1e-1, StoppingRule::val_min(25)};
    }
    if (family == Family::ResNetLite && optimizer == OptimizerKind::SGD && dataset_name == "CIFAR10") {
        return {1e-2, StoppingRule::val_min(90)};
    }
    throw std::invalid_argument(std::string("default_recipe: unsupported combination ") +
                                family_name(family) + "+" + optimizer_name(optimizer) + "+" +
                                dataset_name);
}

}  // namespace densitometer
