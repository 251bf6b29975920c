#include "fadi/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "fadi/error.hpp"
#include "fadi/random.hpp"
#include "text_util.hpp"

namespace fadi {

namespace {

constexpr std::uint64_t kBaseStream = 0xba5e;
constexpr std::uint64_t kAssociateStream = 0xa550c;
constexpr std::uint64_t kDiscriminateStream = 0xd15c;
constexpr std::uint64_t kAssociationOnlyStream = 0xa0f7;
constexpr std::uint64_t kTfaStream = 0x7fa;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

Matrix gather_columns(const LabeledSet& set, const std::vector<std::size_t>& rows) {
    Matrix q(set.dim(), rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) q.set_col(k, set.features.row(rows[k]));
    return q;
}

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
    for (std::size_t k = v.size(); k > 1; --k) std::swap(v[k - 1], v[uniform_index(rng, k)]);
}

using StepFn = std::function<double(const std::vector<std::size_t>& rows, std::vector<Matrix>& grads)>;

// Epoch-shuffled minibatch SGD. Batches never straddle an epoch boundary.
std::vector<double> run_sgd(std::size_t n, const SgdConfig& cfg, Rng& rng,
                            const std::vector<Matrix*>& params, const StepFn& step) {
    std::vector<double> trace;
    if (cfg.iterations == 0) return trace;
    if (n == 0) throw DataError("training set is empty");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    shuffle(order, rng);
    const std::size_t bs = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), n);
    std::size_t cursor = 0;
    SgdState state;
    trace.reserve(static_cast<std::size_t>(cfg.iterations));
    for (int it = 0; it < cfg.iterations; ++it) {
        if (cursor + bs > n) {
            shuffle(order, rng);
            cursor = 0;
        }
        const std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(cursor),
                                            order.begin() + static_cast<std::ptrdiff_t>(cursor + bs));
        cursor += bs;
        std::vector<Matrix> grads;
        const double loss = step(rows, grads);
        if (!std::isfinite(loss)) throw NumericError("non-finite loss at iteration " + std::to_string(it));
        for (const auto& g : grads) {
            if (!g.all_finite()) throw NumericError("non-finite gradient at iteration " + std::to_string(it));
        }
        trace.push_back(loss);
        sgd_step(params, grads, state, cfg);
    }
    return trace;
}

// Mean cross-entropy over columns; fills dlogits with (p - onehot) / n.
double cross_entropy_mean(const Matrix& probs, const std::vector<std::size_t>& targets, Matrix& dlogits) {
    const std::size_t n = targets.size();
    dlogits = Matrix(probs.rows(), n);
    double total = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
        const auto col = probs.col(s);
        const LossGrad ce = cross_entropy(col, targets[s]);
        total += ce.loss;
        for (std::size_t c = 0; c < col.size(); ++c) dlogits(c, s) = ce.grad[c] / static_cast<double>(n);
    }
    return total / static_cast<double>(n);
}

void audit_frozen(std::uint64_t before, const Matrix& m, const char* what) {
    if (checksum(m) != before) throw std::logic_error(std::string("frozen tensor changed: ") + what);
}

Matrix copy_rows(const Matrix& src, const std::vector<std::size_t>& rows) {
    Matrix out(rows.size(), src.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto row = src.row(rows[r]);
        std::copy(row.begin(), row.end(), out.row(r).begin());
    }
    return out;
}

double mean_row_norm(const Matrix& w) {
    double s = 0.0;
    for (std::size_t r = 0; r < w.rows(); ++r) s += norm(w.row(r));
    return w.rows() ? s / static_cast<double>(w.rows()) : 1.0;
}

void randomize_rows(Matrix& w, std::size_t begin, std::size_t end, double target_norm, Rng& rng) {
    for (std::size_t r = begin; r < end; ++r) {
        auto row = w.row(r);
        double n = 0.0;
        do {
            for (double& v : row) v = standard_normal(rng);
            n = norm(row);
        } while (n == 0.0);
        for (double& v : row) v *= target_norm / n;
    }
}

std::size_t pretrained_row(const PretrainedHead& p, const LabelPartition& part, std::string_view label) {
    const std::size_t joint = part.index_of(label);
    for (std::size_t r = 0; r < p.outputs.size(); ++r) {
        if (p.outputs[r] == joint) return r;
    }
    throw DataError("pretrained head has no row for '" + std::string(label) + "'");
}

void require_pretrained(const PretrainedHead& p, const Episode& episode) {
    const std::size_t nb = episode.partition.base_ids.size();
    if (p.cls.num_classes() != nb + 1 || p.outputs.size() != nb + 1) {
        throw DataError("pretrained classifier has " + std::to_string(p.cls.num_classes()) + " rows, expected " +
                        std::to_string(nb + 1));
    }
    if (p.g.in_dim() != static_cast<std::size_t>(episode.config.dim)) {
        throw DataError("pretrained FC2 input width " + std::to_string(p.g.in_dim()) + " does not match dim " +
                        std::to_string(episode.config.dim));
    }
    if (p.cls.in_dim() != p.g.out_dim()) throw DataError("pretrained classifier width does not match FC2");
}

void require_map_covers(const AssociationMap& map, const LabelPartition& part) {
    for (const auto& n : part.novel_ids) {
        if (!map.has_novel(n)) throw DataError("association map has no entry for novel class '" + n + "'");
    }
}

// Rows for a joint-order classifier initialised from the pretrained head:
// base rows, then novel rows copied from their associated base rows, then background.
Matrix joint_rows_from_pretrained(const PretrainedHead& p, const AssociationMap& map, const LabelPartition& part) {
    std::vector<std::size_t> rows;
    for (const auto& b : part.base_ids) rows.push_back(pretrained_row(p, part, b));
    for (const auto& n : part.novel_ids) rows.push_back(pretrained_row(p, part, map.base_for(n)));
    rows.push_back(pretrained_row(p, part, part.background_id));
    return copy_rows(p.cls.weight, rows);
}

std::vector<std::size_t> joint_targets(const LabeledSet& set, const LabelPartition& part) {
    std::vector<std::size_t> t(set.size());
    for (std::size_t i = 0; i < set.size(); ++i) t[i] = part.index_of(set.labels[i]);
    return t;
}

std::vector<std::size_t> identity_outputs(std::size_t n) {
    std::vector<std::size_t> v(n);
    std::iota(v.begin(), v.end(), 0);
    return v;
}

// Classifier-only training of a single head with fixed g features.
template <typename LogitsFn, typename BackwardFn>
std::vector<double> train_classifier(SingleHead& head, const LabeledSet& data, const std::vector<std::size_t>& targets,
                                     const SgdConfig& cfg, Rng& rng, LogitsFn logits_fn, BackwardFn backward_fn) {
    const Matrix z_all = relu(linear_forward(head.g, as_columns(data.features)));
    const auto g_w = checksum(head.g.weight);
    const auto g_b = checksum(head.g.bias);
    auto trace = run_sgd(data.size(), cfg, rng, {&head.cls.weight}, [&](const std::vector<std::size_t>& rows, std::vector<Matrix>& grads) {
        Matrix z(z_all.rows(), rows.size());
        std::vector<std::size_t> y(rows.size());
        for (std::size_t k = 0; k < rows.size(); ++k) {
            z.set_col(k, z_all.col(rows[k]));
            y[k] = targets[rows[k]];
        }
        const Matrix logits = logits_fn(head.cls, z, y);
        Matrix dlogits;
        const double loss = cross_entropy_mean(softmax_columns(logits), y, dlogits);
        grads = {backward_fn(head.cls, z, y, dlogits).weight};
        return loss;
    });
    audit_frozen(g_w, head.g.weight, "g weight");
    audit_frozen(g_b, head.g.bias, "g bias");
    return trace;
}

}  // namespace

void SgdConfig::validate() const {
    if (!(lr > 0.0) || !std::isfinite(lr)) throw DataError("sgd: lr must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw DataError("sgd: momentum must lie in [0, 1)");
    if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) throw DataError("sgd: weight_decay must be >= 0");
    if (iterations < 0) throw DataError("sgd: iterations must be >= 0");
    if (batch_size <= 0) throw DataError("sgd: batch_size must be positive");
}

nlohmann::json SgdConfig::to_json() const {
    return {{"lr", lr}, {"momentum", momentum}, {"weight_decay", weight_decay},
            {"iterations", iterations}, {"batch_size", batch_size}, {"seed", seed}};
}

SgdConfig SgdConfig::from_json(const nlohmann::json& j) {
    SgdConfig c;
    try {
        c.lr = j.value("lr", c.lr);
        c.momentum = j.value("momentum", c.momentum);
        c.weight_decay = j.value("weight_decay", c.weight_decay);
        c.iterations = j.value("iterations", c.iterations);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.seed = j.value("seed", c.seed);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("sgd config JSON: ") + e.what());
    }
    c.validate();
    return c;
}

void sgd_step(const std::vector<Matrix*>& params, const std::vector<Matrix>& grads, SgdState& state,
              const SgdConfig& cfg) {
    if (params.size() != grads.size()) throw DataError("sgd: parameter and gradient counts differ");
    if (state.velocity.empty()) {
        for (const Matrix* p : params) state.velocity.emplace_back(p->rows(), p->cols());
    }
    if (state.velocity.size() != params.size()) throw DataError("sgd: state does not match parameters");
    for (std::size_t i = 0; i < params.size(); ++i) {
        Matrix& p = *params[i];
        Matrix& v = state.velocity[i];
        if (!p.same_shape(grads[i]) || !p.same_shape(v)) {
            throw DataError("sgd: parameter " + std::to_string(i) + " is " + shape_string(p) + " but gradient is " +
                            shape_string(grads[i]));
        }
        auto pf = p.flat();
        auto vf = v.flat();
        const auto gf = grads[i].flat();
        for (std::size_t k = 0; k < pf.size(); ++k) {
            vf[k] = cfg.momentum * vf[k] + gf[k] + cfg.weight_decay * pf[k];
            pf[k] -= cfg.lr * vf[k];
        }
    }
}

nlohmann::json InitOptions::to_json() const {
    return {{"random_fc2_prime", random_fc2_prime},
            {"random_novel_rows", random_novel_rows},
            {"reinit_base_rows", reinit_base_rows}};
}

InitOptions InitOptions::from_json(const nlohmann::json& j) {
    InitOptions o;
    try {
        o.random_fc2_prime = j.value("random_fc2_prime", false);
        o.random_novel_rows = j.value("random_novel_rows", false);
        o.reinit_base_rows = j.value("reinit_base_rows", false);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("init options JSON: ") + e.what());
    }
    return o;
}

nlohmann::json TfaOptions::to_json() const {
    const char* name = loss == TfaLoss::kCosFace ? "cosface" : loss == TfaLoss::kArcFace ? "arcface" : "cosine";
    return {{"loss", name}, {"m", m}, {"novel_only", novel_only}};
}

TfaOptions TfaOptions::from_json(const nlohmann::json& j) {
    TfaOptions o;
    try {
        const auto name = j.value("loss", std::string("cosine"));
        if (name == "cosine") o.loss = TfaLoss::kCosine;
        else if (name == "cosface") o.loss = TfaLoss::kCosFace;
        else if (name == "arcface") o.loss = TfaLoss::kArcFace;
        else throw DataError("tfa: unknown loss '" + name + "'");
        o.m = j.value("m", 0.0);
        o.novel_only = j.value("novel_only", false);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("tfa options JSON: ") + e.what());
    }
    if (o.m < 0.0) throw DataError("tfa: margin must be >= 0");
    return o;
}

StageResult<PretrainedHead> base_train(const Episode& episode, std::size_t d_hidden, double tau,
                                       const SgdConfig& cfg) {
    cfg.validate();
    const auto t0 = Clock::now();
    const auto& part = episode.partition;
    const auto& data = episode.abundant_base;
    if (part.base_ids.empty()) throw DataError("base_train: empty base set");
    if (d_hidden == 0) throw DataError("base_train: d_hidden must be positive");
    const std::size_t nb = part.base_ids.size();
    std::vector<std::size_t> targets(data.size());
    bool any_base = false;
    for (std::size_t i = 0; i < data.size(); ++i) {
        switch (part.set_of(data.labels[i])) {
            case ClassSet::kBase: targets[i] = part.index_of(data.labels[i]); any_base = true; break;
            case ClassSet::kBackground: targets[i] = nb; break;
            case ClassSet::kNovel: throw DataError("base_train: abundant set contains novel label '" + data.labels[i] + "'");
        }
    }
    if (!any_base) throw DataError("base_train: empty base set");

    Rng rng = make_rng(cfg.seed, kBaseStream);
    StageResult<PretrainedHead> res;
    res.stage = "base";
    auto& head = res.params;
    head.g = LinearLayer::random(d_hidden, data.dim(), rng);
    head.cls = CosineClassifier::random(nb + 1, d_hidden, tau, rng);
    head.cls.validate();
    head.outputs = identity_outputs(nb);
    head.outputs.push_back(part.num_classes() - 1);

    res.loss_trace = run_sgd(data.size(), cfg, rng, {&head.g.weight, &head.g.bias, &head.cls.weight},
                             [&](const std::vector<std::size_t>& rows, std::vector<Matrix>& grads) {
        const Matrix q = gather_columns(data, rows);
        std::vector<std::size_t> y(rows.size());
        for (std::size_t k = 0; k < rows.size(); ++k) y[k] = targets[rows[k]];
        const Matrix h = linear_forward(head.g, q);
        const Matrix z = relu(h);
        const Matrix probs = softmax_columns(cosine_logits(head.cls, z));
        Matrix dlogits;
        const double loss = cross_entropy_mean(probs, y, dlogits);
        const CosineGrads cg = cosine_backward(head.cls, z, dlogits);
        const LinearGrads lg = linear_backward(head.g, q, relu_backward(h, cg.input));
        grads = {lg.weight, lg.bias, cg.weight};
        return loss;
    });
    res.wall_seconds = seconds_since(t0);
    return res;
}

LabeledSet association_training_set(const Episode& episode, const AssociationMap& map) {
    require_map_covers(map, episode.partition);
    return pseudo_relabel(episode.balanced_kshot, map, episode.partition);
}

StageResult<LinearLayer> association_step(const PretrainedHead& pretrained, const Episode& episode,
                                          const AssociationMap& map, const SgdConfig& cfg,
                                          const InitOptions& init) {
    cfg.validate();
    require_pretrained(pretrained, episode);
    const auto t0 = Clock::now();
    const auto& part = episode.partition;
    const LabeledSet data = association_training_set(episode, map);
    std::vector<std::size_t> targets(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) targets[i] = pretrained_row(pretrained, part, data.labels[i]);

    Rng rng = make_rng(cfg.seed, kAssociateStream);
    StageResult<LinearLayer> res;
    res.stage = "associate";
    LinearLayer& fc2p = res.params;
    fc2p = init.random_fc2_prime ? LinearLayer::random(pretrained.g.out_dim(), pretrained.g.in_dim(), rng)
                                 : pretrained.g;
    fc2p.frozen = false;
    const CosineClassifier& cls = pretrained.cls;
    const auto cls_sum = checksum(cls.weight);

    res.loss_trace = run_sgd(data.size(), cfg, rng, {&fc2p.weight, &fc2p.bias},
                             [&](const std::vector<std::size_t>& rows, std::vector<Matrix>& grads) {
        const Matrix q = gather_columns(data, rows);
        std::vector<std::size_t> y(rows.size());
        for (std::size_t k = 0; k < rows.size(); ++k) y[k] = targets[rows[k]];
        const Matrix h = linear_forward(fc2p, q);
        const Matrix z = relu(h);
        const Matrix probs = softmax_columns(cosine_logits(cls, z));
        Matrix dlogits;
        const double loss = cross_entropy_mean(probs, y, dlogits);
        const CosineGrads cg = cosine_backward(cls, z, dlogits);
        const LinearGrads lg = linear_backward(fc2p, q, relu_backward(h, cg.input));
        grads = {lg.weight, lg.bias};
        return loss;
    });
    audit_frozen(cls_sum, cls.weight, "pretrained classifier");
    res.wall_seconds = seconds_since(t0);
    return res;
}

StageResult<Discriminated> discrimination_step(const PretrainedHead& pretrained, const LinearLayer& w_asso,
                                               const AssociationMap& map, const Episode& episode,
                                               const MarginConfig& mcfg, const SgdConfig& cfg,
                                               bool with_regression, const InitOptions& init) {
    cfg.validate();
    mcfg.validate();
    require_pretrained(pretrained, episode);
    if (!w_asso.weight.same_shape(pretrained.g.weight) || !w_asso.bias.same_shape(pretrained.g.bias)) {
        throw DataError("discrimination: FC2' is " + shape_string(w_asso.weight) + " but FC2 is " +
                        shape_string(pretrained.g.weight));
    }
    const auto& part = episode.partition;
    require_map_covers(map, part);
    const auto t0 = Clock::now();
    const std::size_t nb = part.base_ids.size();
    const std::size_t nn = part.novel_ids.size();
    const auto& data = episode.balanced_kshot;
    const auto targets = joint_targets(data, part);

    Rng rng = make_rng(cfg.seed, kDiscriminateStream);
    StageResult<Discriminated> res;
    res.stage = "discriminate";
    Discriminated& d = res.params;
    d.margin = mcfg;
    DualHead& head = d.head;
    head.g_base = pretrained.g;
    head.g_base.frozen = true;
    head.g_novel = w_asso;
    head.g_novel.frozen = true;
    const Matrix joint = joint_rows_from_pretrained(pretrained, map, part);
    std::vector<std::size_t> base_rows(nb), novel_rows(nn + 1);
    std::iota(base_rows.begin(), base_rows.end(), 0);
    std::iota(novel_rows.begin(), novel_rows.end(), nb);
    head.cls_base = {copy_rows(joint, base_rows), pretrained.cls.tau};
    head.cls_novel = {copy_rows(joint, novel_rows), pretrained.cls.tau};
    const double row_norm = mean_row_norm(pretrained.cls.weight);
    if (init.reinit_base_rows) randomize_rows(head.cls_base.weight, 0, nb, row_norm, rng);
    if (init.random_novel_rows) randomize_rows(head.cls_novel.weight, 0, nn, row_norm, rng);
    head.validate();
    head.cls_base.validate();
    head.cls_novel.validate();

    const std::size_t rdim = episode.kshot_regression.cols();
    std::vector<Matrix*> params{&head.cls_base.weight, &head.cls_novel.weight};
    if (with_regression) {
        require_shape(episode.kshot_regression, data.size(), rdim, "regression targets");
        if (rdim == 0) throw DataError("discrimination: regression requested but the episode has no targets");
        d.regressor = LinearLayer::random(rdim, pretrained.g.out_dim(), rng);
        params.push_back(&d.regressor->weight);
        params.push_back(&d.regressor->bias);
    }
    const auto gb_w = checksum(head.g_base.weight), gb_b = checksum(head.g_base.bias);
    const auto gn_w = checksum(head.g_novel.weight), gn_b = checksum(head.g_novel.bias);

    res.loss_trace = run_sgd(data.size(), cfg, rng, params, [&](const std::vector<std::size_t>& rows, std::vector<Matrix>& grads) {
        const Matrix q = gather_columns(data, rows);
        std::vector<std::size_t> y(rows.size());
        std::vector<std::string> labels(rows.size());
        for (std::size_t k = 0; k < rows.size(); ++k) {
            y[k] = targets[rows[k]];
            labels[k] = data.labels[rows[k]];
        }
        const DualActivations act = dual_forward(head, q);
        Matrix dlogits;
        const double ce = cross_entropy_mean(act.probs, y, dlogits);
        const BatchLoss margin = set_specialized_margin(act.probs, labels, part, mcfg);
        for (std::size_t s = 0; s < rows.size(); ++s) {
            const auto dl = softmax_backward(act.probs.col(s), margin.grad.col(s));
            for (std::size_t c = 0; c < dl.size(); ++c) dlogits(c, s) += dl[c];
        }
        const DualGrads dg = dual_backward(head, act, dlogits);
        grads = {dg.cls_base, dg.cls_novel};
        double reg = 0.0;
        if (d.regressor) {
            const Matrix pred = linear_forward(*d.regressor, act.z_base);
            Matrix dpred(rdim, rows.size());
            std::size_t fg = 0;
            for (std::size_t s = 0; s < rows.size(); ++s) fg += y[s] < nb + nn ? 1 : 0;
            for (std::size_t s = 0; s < rows.size() && fg > 0; ++s) {
                if (y[s] >= nb + nn) continue;
                const LossGrad l = smooth_l1(pred.col(s), episode.kshot_regression.row(rows[s]));
                reg += l.loss / static_cast<double>(fg);
                for (std::size_t o = 0; o < rdim; ++o) dpred(o, s) = 2.0 * l.grad[o] / static_cast<double>(fg);
            }
            const LinearGrads rg = linear_backward(*d.regressor, act.z_base, dpred);
            grads.push_back(rg.weight);
            grads.push_back(rg.bias);
        }
        return total_finetune_loss(ce, margin.loss, reg);
    });
    audit_frozen(gb_w, head.g_base.weight, "FC2 weight");
    audit_frozen(gb_b, head.g_base.bias, "FC2 bias");
    audit_frozen(gn_w, head.g_novel.weight, "FC2' weight");
    audit_frozen(gn_b, head.g_novel.bias, "FC2' bias");
    res.wall_seconds = seconds_since(t0);
    return res;
}

StageResult<SingleHead> association_only_finetune(const PretrainedHead& pretrained, const LinearLayer& w_asso,
                                                  const AssociationMap& map, const Episode& episode,
                                                  const SgdConfig& cfg) {
    cfg.validate();
    require_pretrained(pretrained, episode);
    if (!w_asso.weight.same_shape(pretrained.g.weight)) throw DataError("association-only: FC2' shape mismatch");
    const auto& part = episode.partition;
    require_map_covers(map, part);
    const auto t0 = Clock::now();
    Rng rng = make_rng(cfg.seed, kAssociationOnlyStream);
    StageResult<SingleHead> res;
    res.stage = "association-only";
    SingleHead& head = res.params;
    head.g = w_asso;
    head.g.frozen = true;
    head.cls = {joint_rows_from_pretrained(pretrained, map, part), pretrained.cls.tau};
    head.outputs = identity_outputs(part.num_classes());
    const auto targets = joint_targets(episode.balanced_kshot, part);
    res.loss_trace = train_classifier(
        head, episode.balanced_kshot, targets, cfg, rng,
        [](const CosineClassifier& c, const Matrix& z, const std::vector<std::size_t>&) { return cosine_logits(c, z); },
        [](const CosineClassifier& c, const Matrix& z, const std::vector<std::size_t>&, const Matrix& dl) {
            return cosine_backward(c, z, dl);
        });
    res.wall_seconds = seconds_since(t0);
    return res;
}

StageResult<SingleHead> tfa_baseline_finetune(const PretrainedHead& pretrained, const Episode& episode,
                                              const SgdConfig& cfg, const TfaOptions& opts) {
    cfg.validate();
    require_pretrained(pretrained, episode);
    const auto& part = episode.partition;
    const auto& data = episode.balanced_kshot;
    std::size_t novel_samples = 0;
    for (const auto& l : data.labels) novel_samples += part.set_of(l) == ClassSet::kNovel ? 1 : 0;
    if (part.novel_ids.empty() || novel_samples == 0) throw DataError("tfa: empty novel set");
    const auto t0 = Clock::now();
    const std::size_t nb = part.base_ids.size();
    const std::size_t nn = part.novel_ids.size();

    Rng rng = make_rng(cfg.seed, kTfaStream);
    StageResult<SingleHead> res;
    res.stage = "tfa";
    SingleHead& head = res.params;
    head.g = pretrained.g;
    head.g.frozen = true;
    Matrix w(part.num_classes(), pretrained.cls.in_dim());
    for (std::size_t r = 0; r < nb; ++r) {
        const auto src = pretrained.cls.weight.row(pretrained_row(pretrained, part, part.base_ids[r]));
        std::copy(src.begin(), src.end(), w.row(r).begin());
    }
    const auto bg = pretrained.cls.weight.row(pretrained_row(pretrained, part, part.background_id));
    std::copy(bg.begin(), bg.end(), w.row(nb + nn).begin());
    randomize_rows(w, nb, nb + nn, mean_row_norm(pretrained.cls.weight), rng);
    head.cls = {std::move(w), pretrained.cls.tau};
    head.outputs = identity_outputs(part.num_classes());
    const auto targets = joint_targets(data, part);

    const MarginScope scope{opts.novel_only, nb, nb + nn};
    const double m = opts.m > 0.0 ? opts.m : (opts.loss == TfaLoss::kArcFace ? 0.5 : 0.35);
    switch (opts.loss) {
        case TfaLoss::kCosine:
            res.loss_trace = train_classifier(
                head, data, targets, cfg, rng,
                [](const CosineClassifier& c, const Matrix& z, const std::vector<std::size_t>&) { return cosine_logits(c, z); },
                [](const CosineClassifier& c, const Matrix& z, const std::vector<std::size_t>&, const Matrix& dl) {
                    return cosine_backward(c, z, dl);
                });
            break;
        case TfaLoss::kCosFace:
            res.loss_trace = train_classifier(
                head, data, targets, cfg, rng,
                [&](const CosineClassifier& c, const Matrix& z, const std::vector<std::size_t>& y) {
                    return cosface_logits(c, z, y, m, scope);
                },
                [](const CosineClassifier& c, const Matrix& z, const std::vector<std::size_t>&, const Matrix& dl) {
                    return cosface_backward(c, z, dl);
                });
            break;
        case TfaLoss::kArcFace:
            res.loss_trace = train_classifier(
                head, data, targets, cfg, rng,
                [&](const CosineClassifier& c, const Matrix& z, const std::vector<std::size_t>& y) {
                    return arcface_logits(c, z, y, m, scope);
                },
                [&](const CosineClassifier& c, const Matrix& z, const std::vector<std::size_t>& y, const Matrix& dl) {
                    return arcface_backward(c, z, y, m, scope, dl);
                });
            break;
    }
    res.wall_seconds = seconds_since(t0);
    return res;
}

double alignment_cosine(const LinearLayer& g, const CosineClassifier& base_cls, const Episode& episode,
                        const AssociationMap& map) {
    const auto& part = episode.partition;
    const auto& data = episode.balanced_kshot;
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (part.set_of(data.labels[i]) == ClassSet::kNovel) rows.push_back(i);
    }
    if (rows.empty()) return 0.0;
    const Matrix z = relu(linear_forward(g, gather_columns(data, rows)));
    double total = 0.0;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const std::size_t b = part.index_of(map.base_for(data.labels[rows[k]]));
        total += cosine(z.col(k), base_cls.weight.row(b));
    }
    return total / static_cast<double>(rows.size());
}

Model single_head_model(const SingleHead& head, const LabelPartition& partition) {
    Model m;
    m.num_outputs = partition.num_classes();
    m.predict = [head, n = m.num_outputs](const Matrix& q) {
        const Matrix local = softmax_columns(cosine_logits(head.cls, relu(linear_forward(head.g, q))));
        Matrix out(n, q.cols());
        for (std::size_t r = 0; r < head.outputs.size(); ++r) {
            for (std::size_t s = 0; s < q.cols(); ++s) out(head.outputs[r], s) = local(r, s);
        }
        return out;
    };
    m.embed = [g = head.g](const Matrix& q, ClassSet) { return relu(linear_forward(g, q)); };
    return m;
}

Model dual_head_model(const DualHead& head) {
    Model m;
    m.num_outputs = head.num_outputs();
    m.predict = [head](const Matrix& q) { return dual_forward(head, q).probs; };
    m.embed = [head](const Matrix& q, ClassSet set) {
        return relu(linear_forward(set == ClassSet::kBase ? head.g_base : head.g_novel, q));
    };
    return m;
}

Checkpoint to_checkpoint(const SingleHead& head, const std::string& prefix) {
    Checkpoint c;
    c.add(prefix + ".weight", head.g.weight, head.g.frozen);
    c.add(prefix + ".bias", head.g.bias, head.g.frozen);
    c.add("cls.weight", head.cls.weight, false);
    c.meta["tau"] = head.cls.tau;
    c.meta["outputs"] = head.outputs;
    c.meta["g"] = prefix;
    return c;
}

SingleHead single_head_from_checkpoint(const Checkpoint& ckpt, const std::string& prefix) {
    SingleHead h;
    const auto& w = ckpt.find(prefix + ".weight");
    h.g.weight = w.value;
    h.g.frozen = w.frozen;
    h.g.bias = ckpt.get(prefix + ".bias", h.g.weight.rows(), 1);
    const auto& cw = ckpt.find("cls.weight").value;
    require_shape(cw, cw.rows(), h.g.weight.rows(), "checkpoint parameter 'cls.weight'");
    try {
        h.cls = {cw, ckpt.meta.at("tau").get<double>()};
        h.outputs = ckpt.meta.at("outputs").get<std::vector<std::size_t>>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("checkpoint meta: ") + e.what());
    }
    if (h.outputs.size() != cw.rows()) throw DataError("checkpoint: output map does not match classifier rows");
    h.cls.validate();
    return h;
}

Checkpoint to_checkpoint(const Discriminated& d) {
    Checkpoint c;
    c.add("fc2.weight", d.head.g_base.weight, true);
    c.add("fc2.bias", d.head.g_base.bias, true);
    c.add("fc2_prime.weight", d.head.g_novel.weight, true);
    c.add("fc2_prime.bias", d.head.g_novel.bias, true);
    c.add("cls_base.weight", d.head.cls_base.weight, false);
    c.add("cls_novel.weight", d.head.cls_novel.weight, false);
    if (d.regressor) {
        c.add("regressor.weight", d.regressor->weight, false);
        c.add("regressor.bias", d.regressor->bias, false);
    }
    c.meta["tau"] = d.head.cls_base.tau;
    c.meta["margin"] = d.margin.to_json();
    return c;
}

Discriminated discriminated_from_checkpoint(const Checkpoint& ckpt) {
    Discriminated d;
    const Matrix& w = ckpt.find("fc2.weight").value;
    const std::size_t hidden = w.rows(), in = w.cols();
    d.head.g_base = {w, ckpt.get("fc2.bias", hidden, 1), true};
    d.head.g_novel = {ckpt.get("fc2_prime.weight", hidden, in), ckpt.get("fc2_prime.bias", hidden, 1), true};
    const Matrix& cb = ckpt.find("cls_base.weight").value;
    const Matrix& cn = ckpt.find("cls_novel.weight").value;
    require_shape(cb, cb.rows(), hidden, "checkpoint parameter 'cls_base.weight'");
    require_shape(cn, cn.rows(), hidden, "checkpoint parameter 'cls_novel.weight'");
    try {
        const double tau = ckpt.meta.at("tau").get<double>();
        d.head.cls_base = {cb, tau};
        d.head.cls_novel = {cn, tau};
        d.margin = MarginConfig::from_json(ckpt.meta.at("margin"));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("checkpoint meta: ") + e.what());
    }
    if (ckpt.has("regressor.weight")) {
        const Matrix& rw = ckpt.find("regressor.weight").value;
        require_shape(rw, rw.rows(), hidden, "checkpoint parameter 'regressor.weight'");
        d.regressor = LinearLayer{rw, ckpt.get("regressor.bias", rw.rows(), 1), false};
    }
    d.head.validate();
    return d;
}

Checkpoint to_checkpoint(const LinearLayer& w_asso) {
    Checkpoint c;
    c.add("fc2_prime.weight", w_asso.weight, false);
    c.add("fc2_prime.bias", w_asso.bias, false);
    return c;
}

LinearLayer fc2_prime_from_checkpoint(const Checkpoint& ckpt) {
    const Matrix& w = ckpt.find("fc2_prime.weight").value;
    return {w, ckpt.get("fc2_prime.bias", w.rows(), 1), false};
}

void write_loss_trace(const std::vector<double>& trace, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    out << "iteration,loss\n";
    for (std::size_t i = 0; i < trace.size(); ++i) out << i << ',' << detail::format_double(trace[i]) << '\n';
    if (!out) throw DataError("failed writing '" + path + "'");
}

}  // namespace fadi
