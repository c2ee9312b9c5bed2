#include "cpmoe/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "cpmoe/rng.hpp"

namespace cpmoe::train {

using namespace cpmoe::nn;
using model::NnCtx;
using model::Variant;

std::vector<int> stride_origins(const std::vector<int>& origins, int stride) {
    if (stride < 1) throw std::runtime_error("stride must be >= 1");
    std::vector<int> out;
    for (size_t i = 0; i < origins.size(); i += static_cast<size_t>(stride))
        out.push_back(origins[i]);
    return out;
}

MetricReport evaluate_split(ParameterStore& ps, const model::ModelConfig& mcfg,
                            const model::GraphIndex& gi, const data::Dataset& ds,
                            const std::vector<int>& origins, int batch_size,
                            std::vector<PredRow>* dump) {
    if (origins.empty()) throw std::runtime_error("evaluate_split: no origins");
    Variant v = model::parse_variant(mcfg.variant);
    std::vector<int8_t> y, y_hat;
    NnCtx nc;  // inference: no noise, no dropout
    for (size_t at = 0; at < origins.size(); at += static_cast<size_t>(batch_size)) {
        std::vector<int> chunk(origins.begin() + at,
                               origins.begin() + std::min(at + batch_size, origins.size()));
        data::Batch batch = data::make_batch(ds, chunk, /*train_inputs=*/false);
        Graph g;
        ParamBinding p(g, ps);
        model::ModelOutput out = model::model_forward(g, p, mcfg, gi, batch, nc);
        const Tensor& logits = g.val(out.logits);
        std::vector<int8_t> pred = argmax_rows(logits);
        // labels are (b, step, link) rows, logits (b, link, step)
        for (int b = 0; b < batch.b; ++b)
            for (int s = 0; s < batch.t_f; ++s)
                for (int i = 0; i < batch.n; ++i) {
                    size_t li = (static_cast<size_t>(b) * batch.t_f + s) * batch.n + i;
                    int64_t row = (static_cast<int64_t>(b) * batch.n + i) * batch.t_f + s;
                    y.push_back(batch.labels[li]);
                    y_hat.push_back(pred[static_cast<size_t>(row)]);
                    if (!dump) continue;
                    PredRow pr;
                    pr.t = batch.origin[b];
                    pr.link = i;
                    pr.step = s;
                    pr.label = batch.labels[li];
                    pr.pred = pred[static_cast<size_t>(row)];
                    for (int c = 0; c < 3; ++c) pr.logit[c] = logits.at2(row, c);
                    if (out.w_per.valid()) {
                        pr.w_per = g.val(out.w_per)[row];
                        pr.w_tr = g.val(out.w_tr)[row];
                        pr.w_m = g.val(out.w_m)[row];
                    } else if (v == Variant::WA) {
                        pr.w_per = pr.w_tr = pr.w_m = 1.0 / 3.0;
                    } else {
                        pr.w_m = 1.0;  // mixture output only
                    }
                    dump->push_back(pr);
                }
    }
    return evaluate(y, y_hat);
}

TrainResult train_model(ParameterStore& ps, const model::ModelConfig& mcfg,
                        const model::GraphIndex& gi, const data::Dataset& ds,
                        const TrainConfig& tcfg) {
    std::vector<int> train_origins = stride_origins(ds.splits.train, tcfg.train_stride);
    std::vector<int> val_origins = stride_origins(ds.splits.val, tcfg.val_stride);
    if (train_origins.empty() || val_origins.empty())
        throw std::runtime_error("train_model: empty train or validation split");

    OrdinalSpec spec;
    spec.phi_steps = tcfg.phi_steps;
    spec.one_hot = model::parse_variant(mcfg.variant) == Variant::WoR;

    Adam opt(tcfg.adam);
    TrainResult res;
    ParameterStore best = ps;
    int stale = 0;

    for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
        std::vector<int> order = train_origins;
        RngStream shuffle(hash_combine(hash_combine(tcfg.seed, 0x65706f6368ull), epoch));
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle.below(static_cast<int64_t>(i))]);

        for (size_t at = 0; at < order.size(); at += static_cast<size_t>(tcfg.batch_size)) {
            std::vector<int> chunk(
                order.begin() + at,
                order.begin() + std::min(at + tcfg.batch_size, order.size()));
            data::Batch batch = data::make_batch(ds, chunk, /*train_inputs=*/true);

            NnCtx nc;
            nc.training = true;
            nc.dropout = mcfg.dropout;
            nc.key = hash_combine(hash_combine(tcfg.seed, 0x73746570ull),
                                  static_cast<uint64_t>(res.steps + 1));

            Graph g;
            ParamBinding p(g, ps);
            model::ModelOutput out = model::model_forward(g, p, mcfg, gi, batch, nc);
            LossOut lo = total_loss(g, out, batch, spec, tcfg.weights, mcfg.k);
            double loss = g.val(lo.total)[0];
            if (!std::isfinite(loss))
                throw std::runtime_error("training diverged: non-finite loss at step " +
                                         std::to_string(res.steps + 1));
            g.backward(lo.total);
            opt.step(ps, p.grads());

            ++res.steps;
            StepRow row;
            row.epoch = epoch;
            row.step = res.steps;
            row.loss = loss;
            row.l_ord = lo.l_ord;
            row.l_imp = lo.l_imp;
            row.l_load = lo.l_load;
            res.log.push_back(row);
        }

        double cf1 =
            evaluate_split(ps, mcfg, gi, ds, val_origins, tcfg.batch_size, nullptr).c_f1;
        res.log.back().val_cf1 = cf1;
        res.epochs_run = epoch + 1;
        if (cf1 > res.best_val_cf1) {
            res.best_val_cf1 = cf1;
            res.best_epoch = epoch;
            best = ps;
            stale = 0;
        } else if (++stale >= tcfg.patience) {
            break;
        }
    }

    ps = std::move(best);
    return res;
}

void save_train_log(const std::vector<StepRow>& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write training log: " + path);
    out << "epoch,step,loss,l_ord,l_imp,l_load,val_cf1\n";
    char buf[256];
    for (const StepRow& r : log) {
        std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g,%.17g,%.17g", r.epoch, r.step, r.loss,
                      r.l_ord, r.l_imp, r.l_load);
        out << buf;
        if (r.val_cf1 >= 0.0) {
            std::snprintf(buf, sizeof buf, ",%.17g", r.val_cf1);
            out << buf << "\n";
        } else {
            out << ",\n";
        }
    }
    if (!out.good()) throw std::runtime_error("failed writing training log: " + path);
}

}  // namespace cpmoe::train
