#include "train/trainer.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>

#include "core/errors.h"
#include "core/rng.h"
#include "train/evaluate.h"

namespace salseg {

namespace {

// AdamW: adaptive moments with decoupled weight decay.
class AdamW {
public:
    AdamW(double beta1, double beta2, double eps, double weight_decay)
        : beta1_(beta1), beta2_(beta2), eps_(eps), wd_(weight_decay) {}

    void step(const std::string& name, Tensor& param, const Tensor& grad, double lr, int t) {
        auto& m = m_[name];
        auto& v = v_[name];
        if (m.numel() == 0) {
            m = Tensor(param.shape());
            v = Tensor(param.shape());
        }
        const double bc1 = 1.0 - std::pow(beta1_, t);
        const double bc2 = 1.0 - std::pow(beta2_, t);
        for (int i = 0; i < param.numel(); ++i) {
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * grad[i];
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * grad[i] * grad[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            param[i] -= lr * (mhat / (std::sqrt(vhat) + eps_) + wd_ * param[i]);
        }
    }

private:
    double beta1_, beta2_, eps_, wd_;
    std::map<std::string, Tensor> m_, v_;
};

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

double lr_at(const TrainConfig& cfg, int iteration) {
    const int warmup = static_cast<int>(std::lround(cfg.warmup_frac * cfg.total_iters));
    if (warmup > 0 && iteration < warmup) {
        return cfg.lr_main * (iteration + 1) / warmup;
    }
    const int span = std::max(1, cfg.total_iters - warmup);
    const double p = static_cast<double>(iteration - warmup) / span;
    return cfg.lr_main * 0.5 * (1.0 + std::cos(p * 3.14159265358979323846));
}

std::string metrics_to_text(const std::vector<MetricRecord>& log) {
    std::string out = "iteration,loss_total,loss_ce,loss_itm,miou\n";
    for (const MetricRecord& r : log) {
        out += std::to_string(r.iteration);
        out += ",";
        out += fmt(r.loss_total);
        out += ",";
        out += fmt(r.loss_ce);
        out += ",";
        out += fmt(r.loss_aux);
        out += ",";
        if (r.has_miou) out += fmt(r.miou);
        out += "\n";
    }
    return out;
}

TrainResult train(Model& model, const SceneGenerator& gen, const FullConfig& full,
                  const std::string& checkpoint_dir) {
    const TrainConfig tc = validate_train(full.train);
    const DatasetSpec& spec = gen.spec();
    AdamW opt(0.9, 0.999, 1e-8, tc.weight_decay);
    auto itm_rng = make_rng(static_cast<uint64_t>(full.pipeline.seed), 0x17a1);
    TrainResult result;

    auto write_ckpt = [&](const std::string& name, int64_t iter) {
        if (checkpoint_dir.empty()) return;
        std::filesystem::create_directories(checkpoint_dir);
        save_checkpoint(Checkpoint::capture(model, full, iter, itm_rng),
                        checkpoint_dir + "/" + name);
    };

    for (int iter = 0; iter < tc.total_iters; ++iter) {
        Tape tape;
        Binder bind(tape, model.params(), /*trainable=*/true);
        Tape::Var ce_sum = -1, aux_sum = -1;
        bool have_aux = false;
        for (int b = 0; b < tc.batch_size; ++b) {
            const int scene_idx = (iter * tc.batch_size + b) % spec.n_scenes;
            GeneratedScene scene = gen.generate(scene_idx);
            auto [g1, g2] = gen.guidance(scene);
            SceneLabels labels(scene.gt_grid, scene.gt_out);
            ForwardResult fwd =
                model.forward(bind, ForwardInputs{scene.pair, g1, g2}, &labels, &itm_rng);
            ce_sum = (b == 0) ? fwd.ce_loss : tape.add(ce_sum, fwd.ce_loss);
            if (fwd.aux_loss >= 0) {
                aux_sum = have_aux ? tape.add(aux_sum, fwd.aux_loss) : fwd.aux_loss;
                have_aux = true;
            }
        }
        Tape::Var ce = tape.scale(ce_sum, 1.0 / tc.batch_size);
        Tape::Var total = tape.scale(ce, tc.ce_weight);
        Tape::Var aux = -1;
        if (have_aux) {
            aux = tape.scale(aux_sum, 1.0 / tc.batch_size);
            total = tape.add(total, tape.scale(aux, tc.itm_weight));
        }

        MetricRecord rec;
        rec.iteration = iter;
        rec.loss_ce = tape.val(ce)[0];
        rec.loss_aux = have_aux ? tape.val(aux)[0] : 0.0;
        rec.loss_total = tape.val(total)[0];
        if (!std::isfinite(rec.loss_total)) {
            write_ckpt("checkpoint_diverged.nar", iter);
            throw DivergenceError("loss became non-finite at iteration " + std::to_string(iter));
        }

        tape.backward(total);
        const double lr = lr_at(tc, iter);
        for (const auto& [name, var] : bind.bound()) {
            opt.step(name, model.params().get(name), tape.grad(var), lr, iter + 1);
        }

        if ((iter + 1) % tc.eval_every == 0 || iter + 1 == tc.total_iters) {
            rec.miou = evaluate(model, gen).miou;
            rec.has_miou = true;
        }
        result.log.push_back(rec);
        if ((iter + 1) % tc.checkpoint_every == 0 && iter + 1 != tc.total_iters) {
            char buf[40];
            std::snprintf(buf, sizeof(buf), "checkpoint_%06d.nar", iter + 1);
            write_ckpt(buf, iter + 1);
        }
    }

    result.final_miou =
        result.log.empty() || !result.log.back().has_miou ? evaluate(model, gen).miou
                                                          : result.log.back().miou;
    result.log_text = metrics_to_text(result.log);
    result.checkpoint = Checkpoint::capture(model, full, tc.total_iters, itm_rng);
    write_ckpt("checkpoint.nar", tc.total_iters);
    return result;
}

}  // namespace salseg
