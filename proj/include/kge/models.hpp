#pragma once
/// @file models.hpp
/// @brief RotE, RotH, RotL and Rot2L scoring functions over a common model type.
///
/// Every model scores a triple as F(h, r, t) = D(Q(h, r), t) + b_h + b_t. The
/// transform Q is computed once per (head, relation) query and cached in a
/// QueryState, so scoring many candidate tails costs one distance evaluation
/// each. Backward passes are hand-written vector-Jacobian products that
/// accumulate into a GradSet.

#include <cctype>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kge/error.hpp"
#include "kge/geometry.hpp"
#include "kge/tensor.hpp"

namespace kge {

using EntityId = std::int32_t;
using RelationId = std::int32_t;
using geometry::CSpan;
using geometry::Span;
using geometry::Vec;

enum class ModelKind { RotE, RotH, RotL, Rot2L };

/// How the flexible-addition scaling is parameterised.
enum class AlphaMode {
    SharedVector,       ///< one d-dimensional vector per use site, shared by all relations
    PerRelationScalar,  ///< one scalar per relation per use site
};

/// Non-linearity applied to the residual norm by RotL / Rot2L.
enum class DistanceKind {
    Phi,          ///< x e^x
    SquaredNorm,  ///< x^2 (ablation)
};

inline std::string_view to_string(ModelKind k) {
    switch (k) {
        case ModelKind::RotE: return "rote";
        case ModelKind::RotH: return "roth";
        case ModelKind::RotL: return "rotl";
        case ModelKind::Rot2L: return "rot2l";
    }
    return "?";
}

/// Case-insensitive, so "RotH" and "roth" are the same kind.
inline ModelKind parse_model_kind(std::string_view name) {
    std::string s(name);
    for (char& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (s == "rote") return ModelKind::RotE;
    if (s == "roth") return ModelKind::RotH;
    if (s == "rotl") return ModelKind::RotL;
    if (s == "rot2l") return ModelKind::Rot2L;
    throw InputError("invalid model kind '" + std::string(name) + "' (expected rote, roth, rotl or rot2l)");
}

inline std::string_view to_string(AlphaMode m) {
    return m == AlphaMode::SharedVector ? "shared-vector" : "per-relation-scalar";
}

inline AlphaMode parse_alpha_mode(std::string_view s) {
    if (s == "shared-vector") return AlphaMode::SharedVector;
    if (s == "per-relation-scalar") return AlphaMode::PerRelationScalar;
    throw InputError("invalid alpha mode '" + std::string(s) + "'");
}

inline std::string_view to_string(DistanceKind k) { return k == DistanceKind::Phi ? "phi" : "squared"; }

inline DistanceKind parse_distance_kind(std::string_view s) {
    if (s == "phi") return DistanceKind::Phi;
    if (s == "squared") return DistanceKind::SquaredNorm;
    throw InputError("invalid distance '" + std::string(s) + "' (expected phi or squared)");
}

struct ModelConfig {
    ModelKind kind = ModelKind::Rot2L;
    std::size_t dim = 32;
    std::size_t n_entities = 0;
    std::size_t n_relations = 0;
    double gamma = 0.5;
    AlphaMode alpha_mode = AlphaMode::SharedVector;
    DistanceKind distance = DistanceKind::Phi;
    double init_scale = 1e-3;
};

/// Tensor slots. Entity embeddings and biases are common to every kind; the
/// relation slots are reused with kind-specific meaning.
namespace slot {
inline constexpr std::size_t kEntity = 0;
inline constexpr std::size_t kBias = 1;
// RotE / RotL / RotH
inline constexpr std::size_t kRotation = 2;
inline constexpr std::size_t kTranslation = 3;
// RotH
inline constexpr std::size_t kTranslationOut = 4;
inline constexpr std::size_t kCurvature = 5;
// RotL
inline constexpr std::size_t kAlphaQuery = 4;
inline constexpr std::size_t kAlphaDistanceL = 5;
// Rot2L
inline constexpr std::size_t kOuterM = 2;
inline constexpr std::size_t kInnerM = 3;
inline constexpr std::size_t kOuterF = 4;
inline constexpr std::size_t kInnerF = 5;
inline constexpr std::size_t kOuterAlpha = 6;
inline constexpr std::size_t kInnerAlpha = 7;
inline constexpr std::size_t kAlphaDistance2L = 8;
}  // namespace slot

/// Translation vector and interleaved rotation pairs for one Rot2L layer.
struct LayerParams {
    Vec translation;
    Vec rotation;
};

/// Builds a Rot2L layer from a relation row and the layer's shared vector:
/// translation = (m_1, f_1, ..., m_{d/2}, f_{d/2}), rotation blocks
/// G(m_{d/2+i}, f_{d/2+i}) stored as interleaved pairs.
inline void rot2l_build_layer_params(CSpan m_row, CSpan f, Span translation, Span rotation) {
    const std::size_t half = m_row.size() / 2;
    for (std::size_t i = 0; i < half; ++i) {
        translation[2 * i] = m_row[i];
        translation[2 * i + 1] = f[i];
        rotation[2 * i] = m_row[half + i];
        rotation[2 * i + 1] = f[half + i];
    }
}

inline LayerParams rot2l_build_layer_params(CSpan m_row, CSpan f) {
    if (m_row.size() % 2 != 0 || f.size() != m_row.size())
        throw InputError("layer parameters need matching even dimensions");
    LayerParams p{Vec(m_row.size()), Vec(m_row.size())};
    rot2l_build_layer_params(m_row, f, p.translation, p.rotation);
    return p;
}

/// Scatters gradients of the constructed layer back to the relation row and f.
inline void rot2l_layer_params_backward(CSpan g_translation, CSpan g_rotation, Span g_m_row, Span g_f) {
    const std::size_t half = g_m_row.size() / 2;
    for (std::size_t i = 0; i < half; ++i) {
        g_m_row[i] += g_translation[2 * i];
        g_f[i] += g_translation[2 * i + 1];
        g_m_row[half + i] += g_rotation[2 * i];
        g_f[half + i] += g_rotation[2 * i + 1];
    }
}

/// tanh(q) + gamma h, element-wise.
inline void rot2l_mid(CSpan h, CSpan q, double gamma, Span out) {
    for (std::size_t i = 0; i < h.size(); ++i) out[i] = std::tanh(q[i]) + gamma * h[i];
}

inline Vec rot2l_mid(CSpan h, CSpan q, double gamma) {
    Vec out(h.size());
    rot2l_mid(h, q, gamma, out);
    return out;
}

/// -phi(|(-q) (+)_alpha t|) + b_h + b_t
inline double rotl_distance(CSpan q, CSpan t, CSpan alpha, double b_h, double b_t,
                            DistanceKind kind = DistanceKind::Phi) {
    Vec neg(q.size());
    for (std::size_t i = 0; i < q.size(); ++i) neg[i] = -q[i];
    const Vec m = geometry::flexible_add(neg, t, alpha);
    const double n = geometry::norm(m);
    return -(kind == DistanceKind::Phi ? geometry::phi(n) : n * n) + b_h + b_t;
}

/// Intermediates of one (head, relation) transform, reused by every candidate
/// tail and by the backward pass. Owns all scratch so it can live per thread.
struct QueryState {
    EntityId head = 0;
    RelationId relation = 0;
    double curvature = 1.0;
    Vec q, neg_q;
    Vec v1, v2, v3, v4, v5, v6;
    Vec rot_inner, rot_outer;
    // per-candidate scratch
    Vec m, gm, gneg;
    // backward accumulators
    Vec gq;
    double gc = 0.0;

    explicit QueryState(std::size_t d = 0) { resize(d); }

    void resize(std::size_t d) {
        for (Vec* v : {&q, &neg_q, &v1, &v2, &v3, &v4, &v5, &v6, &rot_inner, &rot_outer, &m, &gm, &gneg, &gq}) v->assign(d, 0.0);
    }

    void reset_grad() {
        std::fill(gq.begin(), gq.end(), 0.0);
        gc = 0.0;
    }
};

class Model {
public:
    Model() = default;

    Model(const ModelConfig& config, std::uint64_t seed) : config_(config) {
        if (config.dim == 0 || config.dim % 2 != 0) throw InputError("dimension must be even");
        if (config.n_entities == 0 || config.n_relations == 0)
            throw InputError("model needs at least one entity and one relation");
        init(seed);
    }

    /// Wraps existing parameters (e.g. from a checkpoint).
    Model(const ModelConfig& config, ParamSet params) : config_(config), params_(std::move(params)) {
        validate_layout();
        project_entities();
    }

    const ModelConfig& config() const { return config_; }
    ModelKind kind() const { return config_.kind; }
    std::size_t dim() const { return config_.dim; }
    std::size_t n_entities() const { return config_.n_entities; }
    std::size_t n_relations() const { return config_.n_relations; }
    const ParamSet& params() const { return params_; }
    ParamSet& params() { return params_; }

    /// Trainable parameters excluding entity embeddings and biases.
    std::size_t relation_parameter_count() const {
        std::size_t n = 0;
        for (std::size_t i = slot::kRotation; i < params_.count(); ++i) n += params_[i].size();
        return n;
    }

    CSpan entity(EntityId e) const { return params_[slot::kEntity].row(static_cast<std::size_t>(e)); }
    double bias(EntityId e) const { return params_[slot::kBias].data[static_cast<std::size_t>(e)]; }

    double curvature(RelationId r) const {
        return geometry::softplus(params_[slot::kCurvature].data[static_cast<std::size_t>(r)]);
    }

    void check_entity(EntityId e) const {
        if (e < 0 || static_cast<std::size_t>(e) >= config_.n_entities)
            throw InputError("entity id " + std::to_string(e) + " out of range");
    }
    void check_relation(RelationId r) const {
        if (r < 0 || static_cast<std::size_t>(r) >= config_.n_relations)
            throw InputError("relation id " + std::to_string(r) + " out of range");
    }

    // ------------------------------------------------------------------
    // forward

    /// Computes Q(h, r) into `qs`.
    void query(EntityId h, RelationId r, QueryState& qs) const {
        if (qs.q.size() != config_.dim) qs.resize(config_.dim);
        qs.head = h;
        qs.relation = r;
        switch (config_.kind) {
            case ModelKind::RotE: query_rote(qs); break;
            case ModelKind::RotH: query_roth(qs); break;
            case ModelKind::RotL: query_rotl(qs); break;
            case ModelKind::Rot2L: query_rot2l(qs); break;
        }
        for (std::size_t i = 0; i < config_.dim; ++i) qs.neg_q[i] = -qs.q[i];
    }

    /// D(Q(h, r), t) without biases. `qs` must hold the query; its candidate
    /// scratch is overwritten.
    double distance_term(QueryState& qs, EntityId t) const {
        const CSpan tv = entity(t);
        switch (config_.kind) {
            case ModelKind::RotE: {
                double s = 0.0;
                for (std::size_t i = 0; i < tv.size(); ++i) {
                    const double diff = qs.q[i] - tv[i];
                    s += diff * diff;
                }
                return -s;
            }
            case ModelKind::RotH: {
                geometry::mobius_add(qs.neg_q, tv, qs.curvature, qs.m);
                const double d = geometry::hyperbolic_distance_from_norm(geometry::norm(qs.m), qs.curvature).value;
                return -d * d;
            }
            case ModelKind::RotL:
            case ModelKind::Rot2L: {
                const double n = geometry::flexible_add_norm(qs.neg_q, tv, alpha_distance(qs.relation));
                return -(config_.distance == DistanceKind::Phi ? geometry::phi(n) : n * n);
            }
        }
        return 0.0;
    }

    double score(QueryState& qs, EntityId t) const { return distance_term(qs, t) + bias(qs.head) + bias(t); }

    double score(EntityId h, RelationId r, EntityId t) const {
        check_entity(h);
        check_relation(r);
        check_entity(t);
        QueryState qs(config_.dim);
        query(h, r, qs);
        return score(qs, t);
    }

    /// Scores of (h, r, c) for each candidate tail c.
    std::vector<double> score_batch(EntityId h, RelationId r, std::span<const EntityId> candidates) const {
        check_entity(h);
        check_relation(r);
        for (EntityId c : candidates) check_entity(c);
        std::vector<double> out(candidates.size());
        if (candidates.empty()) return out;
        QueryState qs(config_.dim);
        query(h, r, qs);
        for (std::size_t i = 0; i < candidates.size(); ++i) out[i] = score(qs, candidates[i]);
        return out;
    }

    /// Scores of (c, r, t) for each candidate head c.
    std::vector<double> score_heads(RelationId r, EntityId t, std::span<const EntityId> candidates) const {
        check_relation(r);
        check_entity(t);
        for (EntityId c : candidates) check_entity(c);
        std::vector<double> out(candidates.size());
        QueryState qs(config_.dim);
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            query(candidates[i], r, qs);
            out[i] = score(qs, t);
        }
        return out;
    }

    /// Scores of (h, r, e) for every entity e, written to `out`.
    void score_all_tails(EntityId h, RelationId r, QueryState& qs, Span out) const {
        query(h, r, qs);
        for (std::size_t e = 0; e < config_.n_entities; ++e) out[e] = score(qs, static_cast<EntityId>(e));
    }

    /// Scores of (e, r, t) for every entity e, written to `out`.
    void score_all_heads(RelationId r, EntityId t, QueryState& qs, Span out) const {
        for (std::size_t e = 0; e < config_.n_entities; ++e) {
            query(static_cast<EntityId>(e), r, qs);
            out[e] = score(qs, t);
        }
    }

    /// Q(h, r) as a value.
    Vec transform(EntityId h, RelationId r) const {
        check_entity(h);
        check_relation(r);
        QueryState qs(config_.dim);
        query(h, r, qs);
        return qs.q;
    }

    // ------------------------------------------------------------------
    // backward

    /// Accumulates dF/d(params) * g_score for the candidate tail `t` into
    /// `grads`, and dF/dQ * g_score into qs.gq (plus qs.gc for RotH). Bias
    /// gradients are included. Call query_backward once after all candidates.
    void score_backward(QueryState& qs, EntityId t, double g_score, GradSet& grads) const {
        grads.row(slot::kBias, static_cast<std::size_t>(qs.head))[0] += g_score;
        grads.row(slot::kBias, static_cast<std::size_t>(t))[0] += g_score;
        const CSpan tv = entity(t);
        Span gt = grads.row(slot::kEntity, static_cast<std::size_t>(t));
        const std::size_t d = config_.dim;
        switch (config_.kind) {
            case ModelKind::RotE: {
                for (std::size_t i = 0; i < d; ++i) {
                    const double diff = qs.q[i] - tv[i];
                    qs.gq[i] -= 2.0 * g_score * diff;
                    gt[i] += 2.0 * g_score * diff;
                }
                return;
            }
            case ModelKind::RotH: {
                const double c = qs.curvature;
                geometry::mobius_add(qs.neg_q, tv, c, qs.m);
                const double n = geometry::norm(qs.m);
                const auto dist = geometry::hyperbolic_distance_from_norm(n, c);
                const double g_dist = -2.0 * dist.value * g_score;
                qs.gc += g_dist * dist.d_c;
                const double g_norm = g_dist * dist.d_norm;
                if (n > 0.0) {
                    const double k = g_norm / n;
                    for (std::size_t i = 0; i < d; ++i) qs.gm[i] = k * qs.m[i];
                } else
                    std::fill(qs.gm.begin(), qs.gm.end(), 0.0);
                std::fill(qs.gneg.begin(), qs.gneg.end(), 0.0);
                qs.gc += geometry::mobius_add_backward(qs.neg_q, tv, c, qs.gm, qs.gneg, gt);
                for (std::size_t i = 0; i < d; ++i) qs.gq[i] -= qs.gneg[i];
                return;
            }
            case ModelKind::RotL:
            case ModelKind::Rot2L: {
                const CSpan alpha = alpha_distance(qs.relation);
                geometry::flexible_add(qs.neg_q, tv, alpha, qs.m);
                if (config_.distance == DistanceKind::Phi) {
                    const double n = geometry::norm(qs.m);
                    const double g_norm = -geometry::phi_derivative(n) * g_score;
                    if (n > 0.0) {
                        const double k = g_norm / n;
                        for (std::size_t i = 0; i < d; ++i) qs.gm[i] = k * qs.m[i];
                    } else
                        std::fill(qs.gm.begin(), qs.gm.end(), 0.0);
                } else {
                    for (std::size_t i = 0; i < d; ++i) qs.gm[i] = -2.0 * g_score * qs.m[i];
                }
                std::fill(qs.gneg.begin(), qs.gneg.end(), 0.0);
                geometry::flexible_add_backward(qs.neg_q, tv, alpha, qs.gm, qs.gneg, gt,
                                                grads.row(alpha_distance_slot(), alpha_row(qs.relation)));
                for (std::size_t i = 0; i < d; ++i) qs.gq[i] -= qs.gneg[i];
                return;
            }
        }
    }

    /// Propagates qs.gq (and qs.gc) through the transform into `grads`.
    void query_backward(QueryState& qs, GradSet& grads) const {
        switch (config_.kind) {
            case ModelKind::RotE: query_backward_rote(qs, grads); break;
            case ModelKind::RotH: query_backward_roth(qs, grads); break;
            case ModelKind::RotL: query_backward_rotl(qs, grads); break;
            case ModelKind::Rot2L: query_backward_rot2l(qs, grads); break;
        }
    }

    /// Keeps RotH entity rows inside the smallest ball over all relation
    /// curvatures. Only `rows` are checked unless the largest curvature grew
    /// since the last full pass, in which case every row is.
    void project_entities(std::span<const std::size_t> rows = {}) {
        if (config_.kind != ModelKind::RotH) return;
        double c_max = 0.0;
        for (double raw : params_[slot::kCurvature].data) c_max = std::max(c_max, geometry::softplus(raw));
        Tensor& ent = params_[slot::kEntity];
        if (c_max > projected_curvature_) {
            for (std::size_t e = 0; e < ent.rows; ++e) geometry::project_to_ball_inplace(ent.row(e), c_max);
            projected_curvature_ = c_max;
        } else {
            for (std::size_t e : rows) geometry::project_to_ball_inplace(ent.row(e), projected_curvature_);
        }
    }

    std::size_t alpha_row(RelationId r) const {
        return config_.alpha_mode == AlphaMode::SharedVector ? 0 : static_cast<std::size_t>(r);
    }

private:
    ModelConfig config_;
    ParamSet params_;
    double projected_curvature_ = 0.0;

    std::size_t alpha_distance_slot() const {
        return config_.kind == ModelKind::RotL ? slot::kAlphaDistanceL : slot::kAlphaDistance2L;
    }

    CSpan alpha_distance(RelationId r) const { return params_[alpha_distance_slot()].row(alpha_row(r)); }

    void init(std::uint64_t seed) {
        const std::size_t d = config_.dim, ne = config_.n_entities, nr = config_.n_relations;
        const std::size_t alpha_rows = config_.alpha_mode == AlphaMode::SharedVector ? 1 : nr;
        const std::size_t alpha_cols = config_.alpha_mode == AlphaMode::SharedVector ? d : 1;
        params_ = ParamSet{};
        params_.add(Tensor("entity", ne, d));
        params_.add(Tensor("entity_bias", ne, 1));
        switch (config_.kind) {
            case ModelKind::RotE:
                params_.add(Tensor("rotation", nr, d));
                params_.add(Tensor("translation", nr, d));
                break;
            case ModelKind::RotH:
                params_.add(Tensor("rotation", nr, d));
                params_.add(Tensor("translation_in", nr, d));
                params_.add(Tensor("translation_out", nr, d));
                params_.add(Tensor("curvature", nr, 1, geometry::softplus_inverse(1.0)));
                break;
            case ModelKind::RotL:
                params_.add(Tensor("rotation", nr, d));
                params_.add(Tensor("translation", nr, d));
                params_.add(Tensor("alpha_query", alpha_rows, alpha_cols, 1.0));
                params_.add(Tensor("alpha_distance", alpha_rows, alpha_cols, 1.0));
                break;
            case ModelKind::Rot2L:
                params_.add(Tensor("outer_relation", nr, d));
                params_.add(Tensor("inner_relation", nr, d));
                params_.add(Tensor("outer_shared", 1, d));
                params_.add(Tensor("inner_shared", 1, d));
                params_.add(Tensor("outer_alpha", alpha_rows, alpha_cols, 1.0));
                params_.add(Tensor("inner_alpha", alpha_rows, alpha_cols, 1.0));
                params_.add(Tensor("alpha_distance", alpha_rows, alpha_cols, 1.0));
                break;
        }
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> normal(0.0, config_.init_scale);
        for (Tensor& t : params_) {
            const bool random = !(t.name == "entity_bias" || t.name == "curvature" || t.name.find("alpha") != std::string::npos);
            if (random)
                for (double& v : t.data) v = normal(rng);
        }
        project_entities();
    }

    void validate_layout() const {
        const std::size_t expected = [&] {
            switch (config_.kind) {
                case ModelKind::RotE: return 4u;
                case ModelKind::RotH: return 6u;
                case ModelKind::RotL: return 6u;
                case ModelKind::Rot2L: return 9u;
            }
            return 0u;
        }();
        if (params_.count() != expected) throw DataError("parameter set does not match the model kind");
        if (params_[slot::kEntity].rows != config_.n_entities || params_[slot::kEntity].cols != config_.dim)
            throw DataError("entity table does not match the model configuration");
    }

    // --- RotE ---------------------------------------------------------

    void query_rote(QueryState& qs) const {
        const auto r = static_cast<std::size_t>(qs.relation);
        geometry::givens_rotate(params_[slot::kRotation].row(r), entity(qs.head), qs.v1);
        const CSpan tr = params_[slot::kTranslation].row(r);
        for (std::size_t i = 0; i < config_.dim; ++i) qs.q[i] = qs.v1[i] + tr[i];
    }

    void query_backward_rote(QueryState& qs, GradSet& grads) const {
        const auto r = static_cast<std::size_t>(qs.relation);
        Span gtr = grads.row(slot::kTranslation, r);
        for (std::size_t i = 0; i < config_.dim; ++i) gtr[i] += qs.gq[i];
        geometry::givens_rotate_backward(params_[slot::kRotation].row(r), entity(qs.head), qs.gq,
                                         grads.row(slot::kEntity, static_cast<std::size_t>(qs.head)),
                                         grads.row(slot::kRotation, r));
    }

    // --- RotH ---------------------------------------------------------
    // v1 = exp(r_in), v2 = exp(r_out), v3 = h (+) v1, v4 = log(v3),
    // v5 = Rot v4, v6 = exp(v5), q = v6 (+) v2

    void query_roth(QueryState& qs) const {
        const auto r = static_cast<std::size_t>(qs.relation);
        const double c = curvature(qs.relation);
        qs.curvature = c;
        geometry::exp_map0(params_[slot::kTranslation].row(r), c, qs.v1);
        geometry::exp_map0(params_[slot::kTranslationOut].row(r), c, qs.v2);
        geometry::mobius_add(entity(qs.head), qs.v1, c, qs.v3);
        geometry::log_map0(qs.v3, c, qs.v4);
        geometry::givens_rotate(params_[slot::kRotation].row(r), qs.v4, qs.v5);
        geometry::exp_map0(qs.v5, c, qs.v6);
        geometry::mobius_add(qs.v6, qs.v2, c, qs.q);
    }

    void query_backward_roth(QueryState& qs, GradSet& grads) const {
        const auto r = static_cast<std::size_t>(qs.relation);
        const std::size_t d = config_.dim;
        const double c = qs.curvature;
        Vec g_b(d, 0.0), g_rout(d, 0.0), g_rr(d, 0.0), g_l(d, 0.0), g_a(d, 0.0), g_rin(d, 0.0);
        Vec scratch(qs.gq);
        double gc = qs.gc;
        gc += geometry::mobius_add_backward(qs.v6, qs.v2, c, scratch, g_b, g_rout);
        gc += geometry::exp_map0_backward(qs.v5, c, g_b, g_rr);
        geometry::givens_rotate_backward(params_[slot::kRotation].row(r), qs.v4, g_rr, g_l,
                                         grads.row(slot::kRotation, r));
        gc += geometry::log_map0_backward(qs.v3, c, g_l, g_a);
        gc += geometry::mobius_add_backward(entity(qs.head), qs.v1, c, g_a,
                                            grads.row(slot::kEntity, static_cast<std::size_t>(qs.head)), g_rin);
        gc += geometry::exp_map0_backward(params_[slot::kTranslation].row(r), c, g_rin,
                                          grads.row(slot::kTranslation, r));
        gc += geometry::exp_map0_backward(params_[slot::kTranslationOut].row(r), c, g_rout,
                                          grads.row(slot::kTranslationOut, r));
        const double raw = params_[slot::kCurvature].data[r];
        grads.row(slot::kCurvature, r)[0] += gc * geometry::sigmoid(raw);
    }

    // --- RotL ---------------------------------------------------------
    // v1 = Rot h, q = v1 (+)_alpha r'

    void query_rotl(QueryState& qs) const {
        const auto r = static_cast<std::size_t>(qs.relation);
        geometry::givens_rotate(params_[slot::kRotation].row(r), entity(qs.head), qs.v1);
        geometry::flexible_add(qs.v1, params_[slot::kTranslation].row(r),
                               params_[slot::kAlphaQuery].row(alpha_row(qs.relation)), qs.q);
    }

    void query_backward_rotl(QueryState& qs, GradSet& grads) const {
        const auto r = static_cast<std::size_t>(qs.relation);
        Vec g_rot(config_.dim, 0.0);
        geometry::flexible_add_backward(qs.v1, params_[slot::kTranslation].row(r),
                                        params_[slot::kAlphaQuery].row(alpha_row(qs.relation)), qs.gq, g_rot,
                                        grads.row(slot::kTranslation, r),
                                        grads.row(slot::kAlphaQuery, alpha_row(qs.relation)));
        geometry::givens_rotate_backward(params_[slot::kRotation].row(r), entity(qs.head), g_rot,
                                         grads.row(slot::kEntity, static_cast<std::size_t>(qs.head)),
                                         grads.row(slot::kRotation, r));
    }

    // --- Rot2L --------------------------------------------------------
    // inner: v1 = translation, m = rotation pairs, v2 = Rot h, v3 = v2 (+) v1
    // mid:   v4 = tanh(v3) + gamma h
    // outer: v5 = translation, v6 = Rot v4, q = v6 (+) v5

    void rot2l_layer(std::size_t m_slot, std::size_t f_slot, std::size_t alpha_slot, RelationId r, CSpan x,
                     Span translation, Span rotation, Span rotated, Span out) const {
        rot2l_build_layer_params(params_[m_slot].row(static_cast<std::size_t>(r)), params_[f_slot].row(0),
                                 translation, rotation);
        geometry::givens_rotate(rotation, x, rotated);
        geometry::flexible_add(rotated, translation, params_[alpha_slot].row(alpha_row(r)), out);
    }

    void rot2l_layer_backward(std::size_t m_slot, std::size_t f_slot, std::size_t alpha_slot, RelationId r,
                              CSpan x, CSpan translation, CSpan rotation, CSpan rotated, CSpan g_out, Span g_x,
                              GradSet& grads) const {
        const std::size_t d = config_.dim;
        Vec g_rotated(d, 0.0), g_translation(d, 0.0), g_rotation(d, 0.0);
        geometry::flexible_add_backward(rotated, translation, params_[alpha_slot].row(alpha_row(r)), g_out,
                                        g_rotated, g_translation, grads.row(alpha_slot, alpha_row(r)));
        geometry::givens_rotate_backward(rotation, x, g_rotated, g_x, g_rotation);
        rot2l_layer_params_backward(g_translation, g_rotation, grads.row(m_slot, static_cast<std::size_t>(r)),
                                    grads.row(f_slot, 0));
    }

    void query_rot2l(QueryState& qs) const {
        const CSpan h = entity(qs.head);
        rot2l_layer(slot::kInnerM, slot::kInnerF, slot::kInnerAlpha, qs.relation, h, qs.v1, qs.rot_inner, qs.v2, qs.v3);
        rot2l_mid(h, qs.v3, config_.gamma, qs.v4);
        rot2l_layer(slot::kOuterM, slot::kOuterF, slot::kOuterAlpha, qs.relation, qs.v4, qs.v5, qs.rot_outer,
                    qs.v6, qs.q);
    }

    void query_backward_rot2l(QueryState& qs, GradSet& grads) const {
        const std::size_t d = config_.dim;
        const CSpan h = entity(qs.head);
        Vec g_mid(d, 0.0), g_inner(d, 0.0);
        rot2l_layer_backward(slot::kOuterM, slot::kOuterF, slot::kOuterAlpha, qs.relation, qs.v4, qs.v5, qs.rot_outer,
                             qs.v6, qs.gq, g_mid, grads);
        Span gh = grads.row(slot::kEntity, static_cast<std::size_t>(qs.head));
        for (std::size_t i = 0; i < d; ++i) {
            const double th = std::tanh(qs.v3[i]);
            g_inner[i] = g_mid[i] * (1.0 - th * th);
            gh[i] += config_.gamma * g_mid[i];
        }
        rot2l_layer_backward(slot::kInnerM, slot::kInnerF, slot::kInnerAlpha, qs.relation, h, qs.v1, qs.rot_inner,
                             qs.v2, g_inner, gh, grads);
    }
};

// ---------------------------------------------------------------------------
// named per-model entry points

namespace detail {
inline void require_kind(const Model& m, ModelKind k) {
    if (m.kind() != k) throw InputError("model is " + std::string(to_string(m.kind())) + ", expected " +
                                        std::string(to_string(k)));
}
}  // namespace detail

inline double rote_score(const Model& m, EntityId h, RelationId r, EntityId t) {
    detail::require_kind(m, ModelKind::RotE);
    return m.score(h, r, t);
}

inline Vec roth_transform(const Model& m, EntityId h, RelationId r) {
    detail::require_kind(m, ModelKind::RotH);
    return m.transform(h, r);
}

inline double roth_score(const Model& m, EntityId h, RelationId r, EntityId t) {
    detail::require_kind(m, ModelKind::RotH);
    return m.score(h, r, t);
}

inline Vec rotl_transform(const Model& m, EntityId h, RelationId r) {
    detail::require_kind(m, ModelKind::RotL);
    return m.transform(h, r);
}

inline Vec rot2l_transform(const Model& m, EntityId h, RelationId r) {
    detail::require_kind(m, ModelKind::Rot2L);
    return m.transform(h, r);
}

inline double rot2l_score(const Model& m, EntityId h, RelationId r, EntityId t) {
    detail::require_kind(m, ModelKind::Rot2L);
    return m.score(h, r, t);
}

}  // namespace kge
