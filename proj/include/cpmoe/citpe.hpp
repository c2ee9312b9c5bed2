#pragma once

#include <string>

#include "cpmoe/dataset.hpp"
#include "cpmoe/magl.hpp"

namespace cpmoe::model {

// Parameter registration for the three auxiliary-expert blocks; names match
// what the forward functions bind (trend.*, periodic.*, conf.*).
void register_trend_params(nn::ParameterStore& ps, int c, int d, int t_p, int t_f,
                           uint64_t seed);
void register_periodic_params(nn::ParameterStore& ps, int c, int d, int d_l, int n_slices,
                              int t_f, uint64_t seed);
void register_confidence_params(nn::ParameterStore& ps, uint64_t seed);

// Low-frequency component of the recent window: per (sample, link, channel)
// series, multi-level Haar analysis with every detail band zeroed. Input data,
// not parameters, so this runs outside the autodiff graph.
Tensor extract_trend(const Tensor& recent, const SeqShape& s, int levels);

// Multi-head self-attention over the trend series' time axis, flattened into
// an MLP head. Returns [B*N, t_f*3] logits.
Var trend_expert(nn::Graph& g, nn::ParamBinding& p, const Tensor& trend_rows, const SeqShape& s,
                 int heads, const NnCtx& nc);

// Encodes the flattened day/week history slices (values plus each step's
// shared time-of-day / day-of-week embeddings), appends the link embedding,
// and maps to [B*N, t_f*3] logits. Requires batch.n_slices >= 1.
Var periodic_expert(nn::Graph& g, nn::ParamBinding& p, const data::Batch& batch,
                    const NnCtx& nc);

// Per-row [population variance of the 3 logits, negative entropy of their
// softmax]: logits3 [R,3] -> [R,2].
Var dispersion(nn::Graph& g, Var logits3);

// Sigmoid confidence per row from the logits' dispersion; which selects the
// conf.c1 / conf.c2 scorer. force in [0,1] substitutes a constant (test and
// report hook); negative means learned.
Var confidence(nn::Graph& g, nn::ParamBinding& p, Var logits3, int which, double force,
               const NnCtx& nc);

// Confidence cascade: the periodic expert overrides when C1 is high, the
// trend expert when C2 is high, the mixture head otherwise.
//   logits = C1*per + (1-C1)*(C2*tr + (1-C2)*m)
// Weights (each [R,1], summing to 1) are returned for interpretability.
struct CascadeOut {
    Var logits;
    Var w_per, w_tr, w_m;
};
CascadeOut cascade(nn::Graph& g, Var per3, Var tr3, Var m3, Var c1, Var c2);

}  // namespace cpmoe::model
