#pragma once
/// @file training.hpp
/// @brief Self-adversarial negative-sampling loss, sparse Adam and the epoch loop.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kge/data.hpp"
#include "kge/eval.hpp"
#include "kge/models.hpp"
#include "kge/parallel.hpp"
#include "kge/tensor.hpp"

namespace kge {

struct TrainConfig {
    double lr = 0.001;
    std::size_t batch_size = 500;
    std::size_t negatives = 50;
    std::size_t epochs = 500;
    double adv_temperature = 1.0;
    std::uint64_t seed = 1;
    std::size_t patience = 10;
    std::size_t eval_every = 5;
    std::size_t threads = 1;
};

/// Values outside the grids the reference hyper-parameters were searched over.
inline std::vector<std::string> grid_warnings(const TrainConfig& tc, const ModelConfig& mc) {
    std::vector<std::string> out;
    auto in = [](double v, std::initializer_list<double> grid) {
        return std::any_of(grid.begin(), grid.end(), [&](double g) { return std::abs(v - g) < 1e-12; });
    };
    if (!in(tc.lr, {0.0005, 0.001, 0.005})) out.push_back("lr " + std::to_string(tc.lr) + " is outside {0.0005, 0.001, 0.005}");
    if (!in(static_cast<double>(tc.batch_size), {100, 200, 500}))
        out.push_back("batch " + std::to_string(tc.batch_size) + " is outside {100, 200, 500}");
    if (!in(static_cast<double>(tc.negatives), {50, 200, 500}))
        out.push_back("negatives " + std::to_string(tc.negatives) + " is outside {50, 200, 500}");
    if (mc.kind == ModelKind::Rot2L && !in(mc.gamma, {0.1, 0.3, 0.5, 1.0}))
        out.push_back("gamma " + std::to_string(mc.gamma) + " is outside {0.1, 0.3, 0.5, 1.0}");
    return out;
}

// ---------------------------------------------------------------------------
// loss

struct LossResult {
    double loss = 0.0;
    double d_positive = 0.0;
    std::vector<double> d_negatives;
    std::vector<double> weights;
};

/// log sigmoid(x) = -softplus(-x)
inline double log_sigmoid(double x) { return -geometry::softplus(-x); }

/// -log s(F+) - sum_i p_i log s(-F_i) with p = softmax(F / temperature). The
/// weights are treated as constants in the gradient.
inline LossResult nss_loss(double positive, std::span<const double> negatives, double adv_temperature = 1.0) {
    if (negatives.empty()) throw InputError("loss needs at least one negative score");
    LossResult r;
    const std::size_t k = negatives.size();
    r.weights.resize(k);
    r.d_negatives.resize(k);
    double mx = -std::numeric_limits<double>::infinity();
    for (double f : negatives) mx = std::max(mx, f / adv_temperature);
    double z = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        r.weights[i] = std::exp(negatives[i] / adv_temperature - mx);
        z += r.weights[i];
    }
    r.loss = -log_sigmoid(positive);
    r.d_positive = -geometry::sigmoid(-positive);
    for (std::size_t i = 0; i < k; ++i) {
        // log s(-f) and s(f) from one exponential, e = exp(-|f|)
        const double f = negatives[i];
        const double e = std::exp(-std::abs(f));
        const double log_sig_neg = -(std::max(f, 0.0) + std::log1p(e));
        const double sig = f >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
        r.weights[i] /= z;
        r.loss -= r.weights[i] * log_sig_neg;
        r.d_negatives[i] = r.weights[i] * sig;
    }
    return r;
}

// ---------------------------------------------------------------------------
// optimizer

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam with first/second moments per parameter. Only rows that received
/// gradient are updated; bias correction uses the global step count.
class Adam {
public:
    Adam() = default;
    explicit Adam(const ParamSet& params, AdamConfig cfg = {}) : cfg_(cfg) {
        for (const auto& t : params) {
            m_.emplace_back(t.size(), 0.0);
            v_.emplace_back(t.size(), 0.0);
        }
    }

    std::uint64_t steps() const { return step_; }
    const std::vector<std::vector<double>>& first_moments() const { return m_; }
    const std::vector<std::vector<double>>& second_moments() const { return v_; }

    /// Applies one update. Returns false (and leaves everything untouched)
    /// when the gradient contains a non-finite value.
    bool step(ParamSet& params, const GradSet& grads, double lr) {
        if (!grads.all_finite()) return false;
        ++step_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
        const double step_size = lr / bc1, inv_bc2 = 1.0 / bc2;
        for (std::size_t t = 0; t < params.count(); ++t) {
            Tensor& p = params[t];
            auto& m = m_[t];
            auto& v = v_[t];
            for (std::size_t r : grads.touched_rows(t)) {
                const auto g = grads.row(t, r);
                for (std::size_t j = 0; j < p.cols; ++j) {
                    const std::size_t i = r * p.cols + j;
                    m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[j];
                    v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[j] * g[j];
                    p.data[i] -= step_size * m[i] / (std::sqrt(v[i] * inv_bc2) + cfg_.eps);
                }
            }
        }
        return true;
    }

private:
    AdamConfig cfg_;
    std::vector<std::vector<double>> m_, v_;
    std::uint64_t step_ = 0;
};

/// One Adam step followed by ball maintenance for RotH entity rows.
inline bool adam_step(Model& model, const GradSet& grads, Adam& opt, double lr) {
    if (!opt.step(model.params(), grads, lr)) return false;
    model.project_entities(grads.touched_rows(slot::kEntity));
    return true;
}

// ---------------------------------------------------------------------------
// per-sample forward / backward

/// Loss of one positive triple and its negatives; gradients (scaled by
/// `grad_scale`) are accumulated into `grads`.
inline double sample_loss_and_grad(const Model& model, const Triple& pos, std::span<const Triple> negs,
                                   double adv_temperature, double grad_scale, QueryState& qs, QueryState& qs_neg,
                                   std::vector<double>& neg_scores, GradSet& grads) {
    model.query(pos.head, pos.relation, qs);
    const double pos_score = model.score(qs, pos.tail);
    neg_scores.resize(negs.size());
    for (std::size_t i = 0; i < negs.size(); ++i) {
        const Triple& n = negs[i];
        if (n.head == pos.head) {
            neg_scores[i] = model.score(qs, n.tail);
        } else {
            model.query(n.head, n.relation, qs_neg);
            neg_scores[i] = model.score(qs_neg, n.tail);
        }
    }
    const LossResult lr = nss_loss(pos_score, neg_scores, adv_temperature);

    qs.reset_grad();
    model.score_backward(qs, pos.tail, lr.d_positive * grad_scale, grads);
    for (std::size_t i = 0; i < negs.size(); ++i) {
        const Triple& n = negs[i];
        const double g = lr.d_negatives[i] * grad_scale;
        if (n.head == pos.head) {
            model.score_backward(qs, n.tail, g, grads);
        } else {
            model.query(n.head, n.relation, qs_neg);
            qs_neg.reset_grad();
            model.score_backward(qs_neg, n.tail, g, grads);
            model.query_backward(qs_neg, grads);
        }
    }
    model.query_backward(qs, grads);
    return lr.loss;
}

// ---------------------------------------------------------------------------
// training loop

struct EpochRecord {
    std::size_t epoch = 0;
    double seconds = 0.0;
    double loss = 0.0;
    std::optional<double> val_mrr;
    std::optional<double> val_hits10;
    std::size_t skipped_batches = 0;
};

struct TrainLog {
    std::vector<EpochRecord> epochs;
    std::optional<std::size_t> best_epoch;
    double best_val_mrr = 0.0;
};

inline nlohmann::json to_json(const EpochRecord& r) {
    nlohmann::json j{{"epoch", r.epoch}, {"seconds", r.seconds}, {"loss", r.loss}};
    j["val_mrr"] = r.val_mrr ? nlohmann::json(*r.val_mrr) : nlohmann::json(nullptr);
    j["val_hits10"] = r.val_hits10 ? nlohmann::json(*r.val_hits10) : nlohmann::json(nullptr);
    if (r.skipped_batches) j["skipped_batches"] = r.skipped_batches;
    return j;
}

/// Newline-delimited JSON, one record per epoch.
inline void write_train_log(const TrainLog& log, std::ostream& out) {
    for (const auto& r : log.epochs) out << to_json(r).dump() << '\n';
}

struct TrainResult {
    Model model;
    TrainLog log;
};

/// Epoch-at-a-time training state. Validation runs every `eval_every` epochs
/// when the validation split is non-empty; training stops after `patience`
/// validations without improvement on MRR.
class Trainer {
public:
    Trainer(Model model, const Dataset& ds, const TrainConfig& cfg)
        : ds_(ds), cfg_(cfg), model_(std::move(model)), rng_(cfg.seed), opt_(model_.params()),
          threads_(std::max<std::size_t>(1, cfg.threads)), worker_loss_(threads_), order_(ds.store.train.size()) {
        if (cfg.batch_size == 0) throw InputError("batch size must be at least 1");
        if (cfg.negatives == 0) throw InputError("negative sample count must be at least 1");
        if (!(cfg.adv_temperature > 0.0)) throw InputError("adversarial temperature must be positive");
        for (std::size_t w = 0; w < threads_; ++w) grads_.emplace_back(model_.params());
        std::iota(order_.begin(), order_.end(), 0);
    }

    bool done() const { return stopped_ || log_.epochs.size() >= cfg_.epochs || ds_.store.train.empty(); }
    const Model& model() const { return model_; }
    const TrainLog& log() const { return log_; }

    /// One pass over the training triples, then validation when due.
    const EpochRecord& run_epoch(std::ostream* progress = nullptr) {
        const std::size_t epoch = log_.epochs.size() + 1;
        const auto t0 = std::chrono::steady_clock::now();
        std::shuffle(order_.begin(), order_.end(), rng_);
        const bool tails_only = ds_.dict.reciprocal;
        const std::size_t k = cfg_.negatives;
        double loss_sum = 0.0;
        std::size_t skipped = 0, counted = 0;

        for (std::size_t b = 0; b < order_.size(); b += cfg_.batch_size) {
            const std::size_t n = std::min(cfg_.batch_size, order_.size() - b);
            batch_pos_.resize(n);
            batch_neg_.clear();
            batch_neg_.reserve(n * k);
            for (std::size_t i = 0; i < n; ++i) {
                batch_pos_[i] = ds_.store.train[order_[b + i]];
                auto negs = negative_sample(batch_pos_[i], k, ds_.dict.n_entities(), tails_only, rng_);
                batch_neg_.insert(batch_neg_.end(), negs.begin(), negs.end());
            }

            const double scale = 1.0 / static_cast<double>(n);
            parallel_chunks(n, threads_, [&](std::size_t w, std::size_t begin, std::size_t end) {
                QueryState qs(model_.dim()), qs_neg(model_.dim());
                std::vector<double> neg_scores;
                double sum = 0.0;
                for (std::size_t i = begin; i < end; ++i)
                    sum += sample_loss_and_grad(model_, batch_pos_[i], std::span(batch_neg_).subspan(i * k, k),
                                                cfg_.adv_temperature, scale, qs, qs_neg, neg_scores, grads_[w]);
                worker_loss_[w] = sum;
            });
            double batch_loss = 0.0;
            for (std::size_t w = 0; w < threads_; ++w) {
                batch_loss += worker_loss_[w];
                worker_loss_[w] = 0.0;
                if (w > 0) {
                    grads_[0].merge(grads_[w]);
                    grads_[w].clear();
                }
            }

            if (std::isfinite(batch_loss) && adam_step(model_, grads_[0], opt_, cfg_.lr)) {
                loss_sum += batch_loss;
                counted += n;
            } else {
                ++skipped;
                if (progress) *progress << "warning: non-finite gradient, batch skipped\n";
            }
            grads_[0].clear();
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        // Mean over the batches that were applied; NaN when every batch was skipped.
        rec.loss = counted ? loss_sum / static_cast<double>(counted) : std::numeric_limits<double>::quiet_NaN();
        rec.skipped_batches = skipped;

        if (cfg_.eval_every > 0 && !ds_.store.valid.empty() && epoch % cfg_.eval_every == 0) {
            const auto rep = evaluate(model_, ds_, {Split::Valid, true, threads_});
            rec.val_mrr = rep.mrr;
            rec.val_hits10 = rep.hits.at(10);
            if (!best_ || rep.mrr > log_.best_val_mrr) {
                best_ = model_.params();
                log_.best_val_mrr = rep.mrr;
                log_.best_epoch = epoch;
                stale_ = 0;
            } else if (++stale_ >= cfg_.patience) {
                stopped_ = true;
            }
        }
        if (progress) *progress << to_json(rec).dump() << '\n';
        log_.epochs.push_back(rec);
        return log_.epochs.back();
    }

    /// The best model on validation MRR (the last one when validation never ran).
    TrainResult finish() && {
        if (best_) model_.params() = std::move(*best_);
        return {std::move(model_), std::move(log_)};
    }

private:
    const Dataset& ds_;
    TrainConfig cfg_;
    Model model_;
    std::mt19937_64 rng_;
    Adam opt_;
    std::size_t threads_;
    std::vector<GradSet> grads_;
    std::vector<double> worker_loss_;
    std::vector<std::size_t> order_;
    std::vector<Triple> batch_pos_, batch_neg_;
    TrainLog log_;
    std::optional<ParamSet> best_;
    std::size_t stale_ = 0;
    bool stopped_ = false;
};

/// Trains `model` on ds.store.train and returns the best model on validation.
inline TrainResult train(Model model, const Dataset& ds, const TrainConfig& cfg, std::ostream* progress = nullptr) {
    Trainer trainer(std::move(model), ds, cfg);
    while (!trainer.done()) trainer.run_epoch(progress);
    return std::move(trainer).finish();
}

// ---------------------------------------------------------------------------
// timing benchmark

struct BenchRow {
    ModelKind kind = ModelKind::RotE;
    std::vector<double> epoch_seconds;
    double median_seconds = 0.0;
    double ratio_to_roth = 0.0;  // 0 when RotH was not measured
};

inline double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Median per-epoch wall-clock over `cfg.epochs` epochs (at least 5) for each
/// kind under an identical configuration. Validation is disabled.
inline std::vector<BenchRow> benchmark_epoch_time(std::span<const ModelKind> kinds, const Dataset& ds,
                                                  const ModelConfig& base, TrainConfig cfg,
                                                  std::ostream* progress = nullptr) {
    cfg.epochs = std::max<std::size_t>(cfg.epochs, 5);
    cfg.eval_every = 0;
    // Epochs are interleaved across kinds so that drifting machine load hits
    // every kind alike.
    std::vector<Trainer> trainers;
    std::vector<BenchRow> rows;
    for (ModelKind kind : kinds) {
        ModelConfig mc = base;
        mc.kind = kind;
        mc.n_entities = ds.dict.n_entities();
        mc.n_relations = ds.dict.n_relations();
        trainers.emplace_back(Model(mc, cfg.seed), ds, cfg);
        rows.push_back(BenchRow{kind, {}, 0.0, 0.0});
    }
    for (std::size_t e = 0; e < cfg.epochs; ++e)
        for (std::size_t i = 0; i < trainers.size(); ++i)
            if (!trainers[i].done()) rows[i].epoch_seconds.push_back(trainers[i].run_epoch().seconds);
    for (auto& row : rows) {
        row.median_seconds = median(row.epoch_seconds);
        if (progress)
            *progress << to_string(row.kind) << ": median " << row.median_seconds << " s/epoch over "
                      << row.epoch_seconds.size() << " epochs\n";
    }
    const auto roth = std::find_if(rows.begin(), rows.end(), [](const BenchRow& r) { return r.kind == ModelKind::RotH; });
    if (roth != rows.end() && roth->median_seconds > 0.0)
        for (auto& r : rows) r.ratio_to_roth = r.median_seconds / roth->median_seconds;
    return rows;
}

}  // namespace kge
