#include "hetformer/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "hetformer/random.hpp"

namespace hetformer {

using tensor::Tensor;

void TrainConfig::validate() const {
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw TrainError(TrainErrc::InvalidConfig, "train: lr must be >= 0");
    if (epochs == 0) throw TrainError(TrainErrc::InvalidConfig, "train: epochs must be positive");
    if (batch == 0) throw TrainError(TrainErrc::InvalidConfig, "train: batch must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw TrainError(TrainErrc::InvalidConfig, "train: momentum in [0, 1)");
    if (!(test_fraction >= 0.0 && test_fraction < 1.0)) {
        throw TrainError(TrainErrc::InvalidConfig, "train: test_fraction in [0, 1)");
    }
}

namespace {

// Splits `total` into per-class counts proportional to `weights` using the
// largest-remainder rule, capped by `available`.
std::array<std::size_t, 2> allocate(std::size_t total, const std::array<std::size_t, 2>& weights,
                                    const std::array<std::size_t, 2>& available) {
    const double sum = static_cast<double>(weights[0] + weights[1]);
    std::array<std::size_t, 2> out{};
    std::array<double, 2> frac{};
    std::size_t given = 0;
    for (int c = 0; c < 2; ++c) {
        const double quota = sum > 0 ? static_cast<double>(total) * static_cast<double>(weights[c]) / sum : 0.0;
        out[c] = static_cast<std::size_t>(std::floor(quota));
        frac[c] = quota - std::floor(quota);
        given += out[c];
    }
    const int first = frac[0] >= frac[1] ? 0 : 1;
    for (int k = 0; given < total && k < 2; ++k) {
        const int c = k == 0 ? first : 1 - first;
        ++out[c];
        ++given;
    }
    for (int c = 0; c < 2; ++c) {
        if (out[c] > available[c]) {
            out[1 - c] += out[c] - available[c];
            out[c] = available[c];
        }
    }
    return out;
}

}  // namespace

Split split_news(const std::vector<std::pair<NodeId, NewsLabel>>& labeled, double test_fraction, std::uint64_t seed) {
    if (labeled.size() < 10) {
        throw TrainError(TrainErrc::TooFewSamples,
                         "need at least 10 labeled news, found " + std::to_string(labeled.size()), labeled.size());
    }
    std::array<std::vector<NodeId>, 2> by_class;
    for (const auto& [id, label] : labeled) by_class[static_cast<std::size_t>(label)].push_back(id);
    std::mt19937_64 rng(splitmix64(seed ^ 0x5eed5eed5eedULL));
    std::array<std::size_t, 2> counts{};
    for (int c = 0; c < 2; ++c) {
        std::sort(by_class[c].begin(), by_class[c].end());
        shuffle(by_class[c], rng);
        counts[c] = by_class[c].size();
    }
    const std::size_t n = labeled.size();
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
    const auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(n - n_test) / 5.0));
    const auto test_c = allocate(n_test, counts, counts);
    const std::array<std::size_t, 2> left{counts[0] - test_c[0], counts[1] - test_c[1]};
    const auto val_c = allocate(n_val, counts, left);

    Split s;
    for (int c = 0; c < 2; ++c) {
        const auto& ids = by_class[c];
        s.test.insert(s.test.end(), ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(test_c[c]));
        s.val.insert(s.val.end(), ids.begin() + static_cast<std::ptrdiff_t>(test_c[c]),
                     ids.begin() + static_cast<std::ptrdiff_t>(test_c[c] + val_c[c]));
        s.train.insert(s.train.end(), ids.begin() + static_cast<std::ptrdiff_t>(test_c[c] + val_c[c]), ids.end());
    }
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.val.begin(), s.val.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

Split split_news(const HetGraph& g, double test_fraction, std::uint64_t seed) {
    std::vector<std::pair<NodeId, NewsLabel>> labeled;
    for (NodeId id : g.news_ids()) {
        if (auto l = g.label_of(id)) labeled.emplace_back(id, *l);
    }
    return split_news(labeled, test_fraction, seed);
}

double f1_score(double precision, double recall) {
    const double denom = precision + recall;
    return denom > 0.0 ? 2.0 * precision * recall / denom : 0.0;
}

NewsLabel decide(double prob_real) { return prob_real >= 0.5 ? NewsLabel::Real : NewsLabel::Fake; }

MetricsReport compute_metrics(std::span<const NewsLabel> truth, std::span<const NewsLabel> predicted) {
    if (truth.size() != predicted.size()) throw TrainError(TrainErrc::InvalidConfig, "metrics: length mismatch");
    MetricsReport m;
    m.total = truth.size();
    for (std::size_t i = 0; i < truth.size(); ++i) {
        ++m.confusion[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];
    }
    auto per_class = [&](std::size_t c) {
        ClassMetrics cm;
        const std::size_t tp = m.confusion[c][c];
        const std::size_t predicted_c = m.confusion[0][c] + m.confusion[1][c];
        cm.support = m.confusion[c][0] + m.confusion[c][1];
        cm.precision = predicted_c ? static_cast<double>(tp) / static_cast<double>(predicted_c) : 0.0;
        cm.recall = cm.support ? static_cast<double>(tp) / static_cast<double>(cm.support) : 0.0;
        cm.f1 = f1_score(cm.precision, cm.recall);
        return cm;
    };
    m.fake = per_class(0);
    m.real = per_class(1);
    m.accuracy = m.total ? static_cast<double>(m.confusion[0][0] + m.confusion[1][1]) / static_cast<double>(m.total) : 0.0;
    return m;
}

template <typename Real>
std::vector<double> predict_probs(const HetFormerModel<Real>& model, std::span<const NodeId> news, std::size_t batch) {
    tensor::NoGradGuard guard;
    std::mt19937_64 unused(0);
    std::vector<double> out;
    out.reserve(news.size());
    for (std::size_t start = 0; start < news.size(); start += batch) {
        const auto chunk = news.subspan(start, std::min(batch, news.size() - start));
        const auto probs = model.predict(chunk, false, unused);
        for (Real p : probs.data()) out.push_back(static_cast<double>(p));
    }
    return out;
}

template <typename Real>
MetricsReport evaluate(const HetFormerModel<Real>& model, const HetGraph& g, std::span<const NodeId> news,
                       std::size_t batch) {
    std::vector<NewsLabel> truth;
    for (NodeId id : news) {
        auto l = g.label_of(id);
        if (!l) throw TrainError(TrainErrc::MissingLabel, "news " + std::to_string(id) + " has no label", id);
        truth.push_back(*l);
    }
    const auto probs = predict_probs(model, news, batch);
    std::vector<NewsLabel> pred;
    for (double p : probs) pred.push_back(decide(p));
    return compute_metrics(truth, pred);
}

template <typename Real>
TrainRun train(HetFormerModel<Real>& model, const HetGraph& g, const Split& split, const TrainConfig& cfg,
               const std::function<void(const EpochLog&)>& on_epoch) {
    cfg.validate();
    if (split.train.empty()) throw TrainError(TrainErrc::TooFewSamples, "empty training split");
    std::vector<NodeId> order = split.train;
    std::array<double, 2> class_w{1.0, 1.0};
    std::array<std::size_t, 2> class_n{};
    for (NodeId id : order) {
        auto l = g.label_of(id);
        if (!l) throw TrainError(TrainErrc::MissingLabel, "news " + std::to_string(id) + " has no label", id);
        ++class_n[static_cast<std::size_t>(*l)];
    }
    if (cfg.class_weight) {
        for (int c = 0; c < 2; ++c) {
            class_w[c] = class_n[c] ? static_cast<double>(order.size()) / (2.0 * static_cast<double>(class_n[c])) : 0.0;
        }
    }

    auto& params = model.params();
    const auto tensors = params.tensors();
    std::vector<std::vector<Real>> velocity(tensors.size());
    for (std::size_t i = 0; i < tensors.size(); ++i) velocity[i].assign(tensors[i].size(), Real(0));
    std::mt19937_64 rng(splitmix64(cfg.seed));
    const Real lr = static_cast<Real>(cfg.lr);
    const Real mu = static_cast<Real>(cfg.momentum);

    TrainRun run;
    double best = -1.0;
    for (std::uint32_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        shuffle(order, rng);
        double loss_sum = 0.0;
        for (std::size_t b = 0; b < order.size(); b += cfg.batch) {
            const std::span<const NodeId> ids(order.data() + b, std::min<std::size_t>(cfg.batch, order.size() - b));
            std::vector<Real> targets, weights;
            for (NodeId id : ids) {
                const auto label = static_cast<std::size_t>(*g.label_of(id));
                targets.push_back(static_cast<Real>(label));
                weights.push_back(static_cast<Real>(class_w[label]));
            }
            params.zero_grad();
            const auto probs = model.predict(ids, true, rng);
            const auto loss = tensor::bce_loss(probs, std::span<const Real>(targets), Real(1e-7),
                                               cfg.class_weight ? std::span<const Real>(weights) : std::span<const Real>());
            tensor::backward(loss);
            loss_sum += static_cast<double>(loss.item()) * static_cast<double>(ids.size());
            for (std::size_t i = 0; i < tensors.size(); ++i) {
                auto t = tensors[i];
                if (!t.has_grad()) continue;
                auto value = t.data();
                auto grad = t.grad();
                auto& vel = velocity[i];
                for (std::size_t k = 0; k < value.size(); ++k) {
                    vel[k] = mu * vel[k] + grad[k];
                    value[k] -= lr * vel[k];
                }
            }
        }
        const auto val = evaluate(model, g, split.val, cfg.batch);
        EpochLog entry;
        entry.epoch = epoch;
        entry.train_loss = loss_sum / static_cast<double>(order.size());
        entry.val_acc = val.accuracy;
        entry.val_f1_fake = val.fake.f1;
        entry.val_f1_real = val.real.f1;
        entry.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        run.log.push_back(entry);
        if (on_epoch) on_epoch(entry);
        if (val.accuracy > best) {
            best = val.accuracy;
            run.best_epoch = epoch;
            run.best_val_acc = val.accuracy;
            run.best = snapshot(params);
        } else if (epoch - run.best_epoch >= cfg.patience) {
            break;
        }
    }
    params.zero_grad();
    restore(params, run.best);
    run.val = evaluate(model, g, split.val, cfg.batch);
    run.test = evaluate(model, g, split.test, cfg.batch);
    return run;
}

template std::vector<double> predict_probs(const HetFormerModel<float>&, std::span<const NodeId>, std::size_t);
template std::vector<double> predict_probs(const HetFormerModel<double>&, std::span<const NodeId>, std::size_t);
template MetricsReport evaluate(const HetFormerModel<float>&, const HetGraph&, std::span<const NodeId>, std::size_t);
template MetricsReport evaluate(const HetFormerModel<double>&, const HetGraph&, std::span<const NodeId>, std::size_t);
template TrainRun train(HetFormerModel<float>&, const HetGraph&, const Split&, const TrainConfig&,
                        const std::function<void(const EpochLog&)>&);
template TrainRun train(HetFormerModel<double>&, const HetGraph&, const Split&, const TrainConfig&,
                        const std::function<void(const EpochLog&)>&);

}  // namespace hetformer
