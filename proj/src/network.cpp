// Copyright 2026 The Bundlerec Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "bundlerec/network.hpp"

#include <map>

namespace bundlerec::model {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kFisr: return "fisr";
    case Variant::kNisr: return "nisr";
    case Variant::kHisr: return "hisr";
  }
  return "?";
}

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::kAttention: return "attention";
    case Strategy::kAverage: return "average";
    case Strategy::kConcat: return "concat";
    case Strategy::kNone: return "none";
  }
  return "?";
}

Variant parse_variant(std::string_view text) {
  if (text == "fisr") return Variant::kFisr;
  if (text == "nisr") return Variant::kNisr;
  if (text == "hisr") return Variant::kHisr;
  throw ConfigError("unknown variant '" + std::string(text) +
                    "' (expected fisr, nisr or hisr)");
}

Strategy parse_strategy(std::string_view text) {
  if (text == "attention") return Strategy::kAttention;
  if (text == "average") return Strategy::kAverage;
  if (text == "concat" || text == "concatenation") return Strategy::kConcat;
  if (text == "none") return Strategy::kNone;
  throw ConfigError("unknown strategy '" + std::string(text) +
                    "' (expected attention, average, concat or none)");
}

Pathway::Pathway(const std::string& name, int feature_dim, Strategy strategy,
                 const std::vector<int>& attention_units,
                 const std::vector<int>& interaction_units, Rng& rng)
    : dim_(feature_dim), strategy_(strategy) {
  if (strategy == Strategy::kAttention) {
    std::vector<int> units = attention_units;
    units.push_back(1);
    attention = nn::Mlp(name + ".attention", 4 * feature_dim, units, true, rng);
  }
  interaction = nn::Mlp(name + ".interaction",
                        2 * feature_dim + aggregate_dim(), interaction_units,
                        false, rng);
}

Matrix Pathway::aggregate(const Matrix& table, const PathwayInput& in,
                          Cache& cache, bool keep) const {
  const int B = in.size();
  const int d = dim_;
  if (table.rows() != d) {
    throw ShapeError("feature table has " + std::to_string(table.rows()) +
                     " rows, pathway expects " + std::to_string(d));
  }
  Matrix v_ss = Matrix::Zero(aggregate_dim(), B);
  cache.pair_offset.assign(B + 1, 0);
  for (int b = 0; b < B; ++b) {
    cache.pair_offset[b + 1] =
        cache.pair_offset[b] + static_cast<int>(in.selected[b].size());
  }
  const int P = cache.pair_offset[B];
  cache.weights = Vector::Zero(P);

  switch (strategy_) {
    case Strategy::kNone:
      break;
    case Strategy::kAverage:
      for (int b = 0; b < B; ++b) {
        const auto& sel = in.selected[b];
        if (sel.empty()) continue;
        const double w = 1.0 / static_cast<double>(sel.size());
        for (std::size_t i = 0; i < sel.size(); ++i) {
          cache.weights(cache.pair_offset[b] + i) = w;
          v_ss.col(b) += w * table.col(sel[i]);
        }
      }
      break;
    case Strategy::kConcat:
      for (int b = 0; b < B; ++b) {
        const auto& sel = in.selected[b];
        const int n = std::min<int>(kConcatSlots, static_cast<int>(sel.size()));
        for (int k = 0; k < n; ++k) {
          v_ss.block(k * d, b, d, 1) = table.col(sel[k]);
        }
      }
      break;
    case Strategy::kAttention: {
      if (P == 0) break;
      Matrix x(4 * d, P);
      for (int b = 0; b < B; ++b) {
        const auto vs = table.col(in.candidate[b]);
        for (int p = cache.pair_offset[b]; p < cache.pair_offset[b + 1]; ++p) {
          const auto vi = table.col(in.selected[b][p - cache.pair_offset[b]]);
          x.block(0, p, d, 1) = vi;
          x.block(d, p, d, 1) = vs;
          x.block(2 * d, p, d, 1) = vi.cwiseProduct(vs);
          x.block(3 * d, p, d, 1) = vi - vs;
        }
      }
      Matrix scores = keep ? attention.forward(x, cache.attention)
                           : attention.apply(x);
      for (int b = 0; b < B; ++b) {
        const int lo = cache.pair_offset[b];
        const int n = cache.pair_offset[b + 1] - lo;
        if (n == 0) continue;
        Vector w = nn::softmax(scores.block(0, lo, 1, n).transpose());
        cache.weights.segment(lo, n) = w;
        for (int i = 0; i < n; ++i) {
          v_ss.col(b) += w(i) * table.col(in.selected[b][i]);
        }
      }
      if (keep) cache.attention_input = std::move(x);
      break;
    }
  }
  return v_ss;
}

namespace {

Matrix interaction_input(const Matrix& table, const PathwayInput& in,
                         const Matrix& v_ss) {
  const int d = static_cast<int>(table.rows());
  const int B = in.size();
  Matrix x(2 * d + v_ss.rows(), B);
  for (int b = 0; b < B; ++b) {
    x.block(0, b, d, 1) = table.col(in.mashup[b]);
    x.block(d, b, v_ss.rows(), 1) = v_ss.col(b);
    x.block(d + v_ss.rows(), b, d, 1) = table.col(in.candidate[b]);
  }
  return x;
}

}  // namespace

Matrix Pathway::forward(const Matrix& table, const PathwayInput& in,
                        Cache& cache) const {
  Matrix v_ss = aggregate(table, in, cache, true);
  return interaction.forward(interaction_input(table, in, v_ss),
                             cache.interaction);
}

Matrix Pathway::apply(const Matrix& table, const PathwayInput& in) const {
  Cache scratch;
  Matrix v_ss = aggregate(table, in, scratch, false);
  return interaction.apply(interaction_input(table, in, v_ss));
}

Matrix Pathway::backward(const Matrix& di, const Matrix& table,
                         const PathwayInput& in, const Cache& cache,
                         bool want_table_grad) {
  const int B = in.size();
  const int d = dim_;
  const int a = aggregate_dim();
  Matrix dx = interaction.backward(di, cache.interaction, true);
  Matrix dtable;
  if (want_table_grad) {
    dtable = Matrix::Zero(table.rows(), table.cols());
    for (int b = 0; b < B; ++b) {
      dtable.col(in.mashup[b]) += dx.block(0, b, d, 1);
      dtable.col(in.candidate[b]) += dx.block(d + a, b, d, 1);
    }
  }
  const Matrix dv_ss = dx.middleRows(d, a);

  switch (strategy_) {
    case Strategy::kNone:
      break;
    case Strategy::kAverage:
      if (!want_table_grad) break;
      for (int b = 0; b < B; ++b) {
        for (int p = cache.pair_offset[b]; p < cache.pair_offset[b + 1]; ++p) {
          dtable.col(in.selected[b][p - cache.pair_offset[b]]) +=
              cache.weights(p) * dv_ss.col(b);
        }
      }
      break;
    case Strategy::kConcat:
      if (!want_table_grad) break;
      for (int b = 0; b < B; ++b) {
        const auto& sel = in.selected[b];
        const int n = std::min<int>(kConcatSlots, static_cast<int>(sel.size()));
        for (int k = 0; k < n; ++k) {
          dtable.col(sel[k]) += dv_ss.block(k * d, b, d, 1);
        }
      }
      break;
    case Strategy::kAttention: {
      const int P = cache.pair_offset[B];
      if (P == 0) break;
      Matrix dscores(1, P);
      for (int b = 0; b < B; ++b) {
        const int lo = cache.pair_offset[b];
        const int n = cache.pair_offset[b + 1] - lo;
        if (n == 0) continue;
        Vector dw(n);
        for (int i = 0; i < n; ++i) {
          const int col = in.selected[b][i];
          dw(i) = table.col(col).dot(dv_ss.col(b));
          if (want_table_grad) {
            dtable.col(col) += cache.weights(lo + i) * dv_ss.col(b);
          }
        }
        dscores.block(0, lo, 1, n) =
            nn::softmax_backward(cache.weights.segment(lo, n), dw).transpose();
      }
      Matrix dx_att =
          attention.backward(dscores, cache.attention, want_table_grad);
      if (!want_table_grad) break;
      const Matrix& x = cache.attention_input;
      for (int b = 0; b < B; ++b) {
        const int s = in.candidate[b];
        for (int p = cache.pair_offset[b]; p < cache.pair_offset[b + 1]; ++p) {
          const int i = in.selected[b][p - cache.pair_offset[b]];
          const auto vi = x.block(0, p, d, 1);
          const auto vs = x.block(d, p, d, 1);
          const auto g_mul = dx_att.block(2 * d, p, d, 1);
          const auto g_sub = dx_att.block(3 * d, p, d, 1);
          dtable.col(i) += dx_att.block(0, p, d, 1) + g_mul.cwiseProduct(vs) +
                           g_sub;
          dtable.col(s) += dx_att.block(d, p, d, 1) + g_mul.cwiseProduct(vi) -
                           g_sub;
        }
      }
      break;
    }
  }
  return dtable;
}

std::vector<double> Pathway::weights(const Cache& cache, int b) const {
  if (strategy_ != Strategy::kAttention && strategy_ != Strategy::kAverage) {
    return {};
  }
  std::vector<double> out;
  for (int p = cache.pair_offset.at(b); p < cache.pair_offset.at(b + 1); ++p) {
    out.push_back(cache.weights(p));
  }
  return out;
}

void Pathway::collect(nn::ParamRefs& out) {
  attention.collect(out);
  interaction.collect(out);
}

Aggregate aggregate_selected(Strategy strategy, const Matrix& selected,
                             const Vector& candidate,
                             const nn::Mlp& attention) {
  const int d = static_cast<int>(candidate.size());
  if (selected.cols() > 0 && selected.rows() != d) {
    throw ShapeError("selected feature dim " + std::to_string(selected.rows()) +
                     " differs from candidate dim " + std::to_string(d));
  }
  if (strategy == Strategy::kAttention && !attention.empty() &&
      attention.in_dim() != 4 * d) {
    throw ShapeError("attention block expects feature dim " +
                     std::to_string(attention.in_dim() / 4));
  }
  Matrix table(d, selected.cols() + 1);
  table.leftCols(selected.cols()) = selected;
  table.col(selected.cols()) = candidate;
  PathwayInput in;
  std::vector<int> sel(selected.cols());
  for (int i = 0; i < static_cast<int>(selected.cols()); ++i) sel[i] = i;
  const int last = static_cast<int>(selected.cols());
  in.push(last, sel, last);

  Rng unused(0);
  Pathway p("aggregate", d, strategy, {}, {1}, unused);
  if (strategy == Strategy::kAttention) p.attention = attention;
  Pathway::Cache cache;
  Aggregate out;
  out.v_ss = p.aggregate(table, in, cache).col(0);
  out.weights = p.weights(cache, 0);
  return out;
}

nlohmann::json NetworkConfig::to_json() const {
  return {{"variant", to_string(variant)},
          {"strategy", to_string(strategy)},
          {"vocab_size", vocab_size},
          {"text",
           {{"seq_len", text.seq_len},
            {"embed_dim", text.embed_dim},
            {"windows", text.windows},
            {"channels", text.channels},
            {"seq_out", text.seq_out}}},
          {"node_dim", node_dim},
          {"attention_units", attention_units},
          {"interaction_units", interaction_units},
          {"integration_units", integration_units}};
}

NetworkConfig NetworkConfig::from_json(const nlohmann::json& j) {
  NetworkConfig c;
  c.variant = parse_variant(j.at("variant").get<std::string>());
  c.strategy = parse_strategy(j.at("strategy").get<std::string>());
  c.vocab_size = j.at("vocab_size").get<int>();
  const auto& t = j.at("text");
  c.text.seq_len = t.at("seq_len").get<int>();
  c.text.embed_dim = t.at("embed_dim").get<int>();
  c.text.windows = t.at("windows").get<std::vector<int>>();
  c.text.channels = t.at("channels").get<int>();
  c.text.seq_out = t.at("seq_out").get<int>();
  c.node_dim = j.at("node_dim").get<int>();
  c.attention_units = j.at("attention_units").get<std::vector<int>>();
  c.interaction_units = j.at("interaction_units").get<std::vector<int>>();
  c.integration_units = j.at("integration_units").get<std::vector<int>>();
  return c;
}

Network::Network(const NetworkConfig& config, Rng& rng) : config_(config) {
  if (config.interaction_units.empty() || config.integration_units.empty()) {
    throw ConfigError("interaction and integration MLPs need hidden layers");
  }
  if (config.has_content()) {
    if (config.vocab_size < 2) {
      throw ConfigError("content pathway needs a vocabulary");
    }
    extractor.emplace("content.extractor", config.vocab_size, config.text, rng);
    content.emplace("content", extractor->output_dim(), config.strategy,
                    config.attention_units, config.interaction_units, rng);
  }
  if (config.has_invocation()) {
    invocation.emplace("invocation", config.node_dim, config.strategy,
                       config.attention_units, config.interaction_units, rng);
  }
  int head_in = interaction_dim();
  if (config.variant == Variant::kHisr) {
    integration = nn::Mlp("integration", head_in, config.integration_units,
                          false, rng);
    head_in = integration.out_dim();
  }
  output = nn::DenseLayer("output", head_in, 2, nn::Activation::kLinear, rng);
}

int Network::interaction_dim() const {
  int dim = 0;
  if (content) dim += content->output_dim();
  if (invocation) dim += invocation->output_dim();
  return dim;
}

Matrix Network::content_table(const Batch& batch, Cache* cache) const {
  if (batch.content_features) return *batch.content_features;
  std::span<const text::ContentInput* const> entities(batch.entities);
  if (cache) {
    cache->ran_extractor = true;
    return extractor->forward(entities, cache->extractor);
  }
  return extractor->apply(entities);
}

namespace {

Matrix stack(const Matrix& top, const Matrix& bottom) {
  if (top.size() == 0) return bottom;
  if (bottom.size() == 0) return top;
  Matrix out(top.rows() + bottom.rows(), top.cols());
  out << top, bottom;
  return out;
}

}  // namespace

Vector Network::forward(const Batch& batch, Cache& cache) const {
  Matrix ci, hi;
  cache.ran_extractor = false;
  if (content) {
    cache.content_table = content_table(batch, &cache);
    ci = content->forward(cache.content_table, batch.content, cache.content);
  }
  if (invocation) {
    hi = invocation->forward(batch.invocation_table, batch.invocation,
                             cache.invocation);
  }
  return head_forward(stack(ci, hi), cache.head);
}

Matrix Network::interaction(const Batch& batch) const {
  Matrix ci, hi;
  if (content) ci = content->apply(content_table(batch, nullptr), batch.content);
  if (invocation) {
    hi = invocation->apply(batch.invocation_table, batch.invocation);
  }
  return stack(ci, hi);
}

Vector Network::predict(const Batch& batch) const {
  HeadCache head;
  return head_forward(interaction(batch), head);
}

Vector Network::head_forward(const Matrix& interaction,
                             HeadCache& cache) const {
  if (interaction.rows() != interaction_dim()) {
    throw ShapeError("interaction vectors have " +
                     std::to_string(interaction.rows()) + " rows, expected " +
                     std::to_string(interaction_dim()));
  }
  Matrix h = config_.variant == Variant::kHisr
                 ? integration.forward(interaction, cache.integration)
                 : interaction;
  cache.probs = nn::softmax_columns(output.forward(h, cache.output));
  return cache.probs.row(1).transpose();
}

double Network::head_backward(const HeadCache& cache, const Vector& pred,
                              std::span<const int> labels,
                              Matrix* d_interaction) {
  const int B = static_cast<int>(pred.size());
  if (static_cast<int>(labels.size()) != B) {
    throw ShapeError("label count does not match the batch");
  }
  if (B == 0) throw ShapeError("empty batch");
  double loss = 0;
  Matrix dlogits(2, B);
  for (int b = 0; b < B; ++b) {
    loss += nn::cross_entropy(pred(b), labels[b]);
    const double g = nn::cross_entropy_grad(pred(b), labels[b]) / B;
    const double t = cache.probs(0, b) * cache.probs(1, b);
    dlogits(0, b) = -g * t;
    dlogits(1, b) = g * t;
  }
  const bool hybrid = config_.variant == Variant::kHisr;
  Matrix dh = output.backward(dlogits, cache.output,
                              hybrid || d_interaction != nullptr);
  if (hybrid) {
    dh = integration.backward(dh, cache.integration, d_interaction != nullptr);
  }
  if (d_interaction) *d_interaction = std::move(dh);
  return loss / B;
}

double Network::backward(const Batch& batch, const Cache& cache,
                         const Vector& pred) {
  Matrix di;
  const double loss = head_backward(cache.head, pred, batch.labels, &di);
  int row = 0;
  if (content) {
    const int n = content->output_dim();
    const bool into_extractor = cache.ran_extractor;
    Matrix dtable = content->backward(di.middleRows(row, n),
                                      cache.content_table, batch.content,
                                      cache.content, into_extractor);
    if (into_extractor) extractor->backward(dtable, cache.extractor);
    row += n;
  }
  if (invocation) {
    invocation->backward(di.middleRows(row, invocation->output_dim()),
                         batch.invocation_table, batch.invocation,
                         cache.invocation, false);
  }
  return loss;
}

std::vector<double> Network::attention_weights(const Cache& cache,
                                               int b) const {
  std::vector<double> wc, wi;
  if (content) wc = content->weights(cache.content, b);
  if (invocation) wi = invocation->weights(cache.invocation, b);
  if (wc.empty()) return wi;
  if (wi.empty()) return wc;
  for (std::size_t i = 0; i < wc.size(); ++i) wc[i] = 0.5 * (wc[i] + wi[i]);
  return wc;
}

nn::ParamRefs Network::underlying_params() {
  nn::ParamRefs out;
  if (extractor) extractor->collect(out);
  if (content) content->collect(out);
  if (invocation) invocation->collect(out);
  return out;
}

nn::ParamRefs Network::head_params() {
  nn::ParamRefs out;
  integration.collect(out);
  output.collect(out);
  return out;
}

nn::ParamRefs Network::params() {
  nn::ParamRefs out = underlying_params();
  for (auto* p : head_params()) out.push_back(p);
  return out;
}

void Network::save(Checkpoint& ckpt, const std::string& prefix) const {
  ckpt.put_params(const_cast<Network*>(this)->params(), prefix);
}

void Network::load(const Checkpoint& ckpt, const std::string& prefix) {
  ckpt.get_params(params(), prefix);
}

void Network::import_underlying(const Network& source) {
  if (source.config_.variant == Variant::kHisr) {
    throw IntegrityError("hybrid networks import from FISR or NISR only");
  }
  if (source.config_.strategy != config_.strategy) {
    throw IntegrityError("strategy mismatch: underlying network uses " +
                         to_string(source.config_.strategy) + ", hybrid uses " +
                         to_string(config_.strategy));
  }
  std::map<std::string, nn::Parameter*> mine;
  for (auto* p : underlying_params()) mine.emplace(p->name, p);
  for (auto* p : const_cast<Network&>(source).underlying_params()) {
    auto it = mine.find(p->name);
    if (it == mine.end()) {
      throw IntegrityError("architecture mismatch: no parameter " + p->name);
    }
    if (it->second->value.rows() != p->value.rows() ||
        it->second->value.cols() != p->value.cols()) {
      throw IntegrityError("architecture mismatch: shape of " + p->name);
    }
    it->second->value = p->value;
    it->second->zero_grad();
  }
}

}  // namespace bundlerec::model
