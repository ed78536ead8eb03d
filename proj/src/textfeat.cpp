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

#include "bundlerec/textfeat.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <set>

namespace bundlerec::text {

Vocab::Vocab() {
  tokens_ = {"<pad>", "<unk>"};
  ids_.emplace("<pad>", kPad);
  ids_.emplace("<unk>", kUnk);
}

Vocab Vocab::from_tokens(const std::vector<std::string>& tokens) {
  Vocab v;
  for (const auto& t : tokens) {
    if (v.ids_.count(t)) throw IntegrityError("duplicate vocab token: " + t);
    v.ids_.emplace(t, static_cast<int>(v.tokens_.size()));
    v.tokens_.push_back(t);
  }
  return v;
}

int Vocab::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  if (it == ids_.end() || it->second < 2) return kUnk;
  return it->second;
}

std::vector<std::string> Vocab::words() const {
  return {tokens_.begin() + 2, tokens_.end()};
}

void Vocab::write(std::ostream& out) const {
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    out << tokens_[i] << '\t' << i << '\n';
  }
}

Vocab Vocab::read(std::istream& in) {
  std::vector<std::pair<int, std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto tab = line.rfind('\t');
    if (tab == std::string::npos) throw Error("bad vocab line: " + line);
    rows.emplace_back(std::stoi(line.substr(tab + 1)), line.substr(0, tab));
  }
  std::sort(rows.begin(), rows.end());
  std::vector<std::string> words;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].first != static_cast<int>(i)) {
      throw Error("vocab ids must be contiguous from 0");
    }
    if (i >= 2) words.push_back(rows[i].second);
  }
  return from_tokens(words);
}

Vocab build_vocab(const corpus::Repository& repo,
                  std::span<const int> train_mashups) {
  std::map<std::string, int> counts;
  auto add = [&](const std::vector<std::string>& tokens) {
    for (const auto& t : tokens) ++counts[t];
  };
  for (const auto& s : repo.services()) {
    add(s.description);
    add(s.tags);
  }
  for (int m : train_mashups) {
    add(repo.mashup(m).description);
    add(repo.mashup(m).tags);
  }
  std::vector<std::pair<int, std::string>> order;
  for (auto& [tok, c] : counts) {
    if (tok == "<pad>" || tok == "<unk>") continue;
    order.emplace_back(-c, tok);
  }
  std::sort(order.begin(), order.end());
  std::vector<std::string> words;
  words.reserve(order.size());
  for (auto& [neg, tok] : order) words.push_back(tok);
  return Vocab::from_tokens(words);
}

std::vector<bool> EncodedText::mask() const {
  std::vector<bool> m(ids.size(), false);
  for (int i = 0; i < length; ++i) m[i] = true;
  return m;
}

EncodedText encode_sequence(const std::vector<std::string>& tokens,
                            const Vocab& vocab, int seq_len) {
  EncodedText enc;
  enc.ids.assign(seq_len, Vocab::kPad);
  enc.length = std::min<int>(seq_len, static_cast<int>(tokens.size()));
  for (int i = 0; i < enc.length; ++i) enc.ids[i] = vocab.id(tokens[i]);
  return enc;
}

ContentInput make_content_input(const std::vector<std::string>& description,
                                const std::vector<std::string>& tags,
                                const Vocab& vocab, int seq_len) {
  ContentInput in;
  in.sequence = encode_sequence(description, vocab, seq_len);
  std::set<std::string> uniq(tags.begin(), tags.end());
  for (const auto& t : uniq) in.tag_ids.push_back(vocab.id(t));
  return in;
}

ContentExtractor::ContentExtractor(const std::string& name, int vocab_size,
                                   const TextConfig& config, Rng& rng)
    : config_(config) {
  for (int w : config.windows) {
    if (config.seq_len < 2 * w - 1) {
      throw ShapeError("sequence length " + std::to_string(config.seq_len) +
                       " too short for window " + std::to_string(w));
    }
  }
  Matrix table(config.embed_dim, vocab_size);
  nn::glorot_init(table, vocab_size, config.embed_dim, rng);
  table.col(0).setZero();
  embedding = nn::Parameter(name + ".embedding", std::move(table));
  for (std::size_t b = 0; b < config.windows.size(); ++b) {
    const int w = config.windows[b];
    const std::string branch = name + ".branch" + std::to_string(w);
    conv1.emplace_back(branch + ".conv1", w * config.embed_dim,
                       config.channels, nn::Activation::kPRelu, rng);
    conv2.emplace_back(branch + ".conv2", w * config.channels,
                       config.channels, nn::Activation::kPRelu, rng);
  }
  projection = nn::DenseLayer(
      name + ".projection",
      static_cast<int>(config.windows.size()) * config.channels,
      config.seq_out, nn::Activation::kPRelu, rng);
}

Matrix ContentExtractor::run(std::span<const ContentInput* const> inputs,
                             Cache* cache) const {
  const int E = static_cast<int>(inputs.size());
  const int d = config_.embed_dim;
  const int C = config_.channels;
  const int L = config_.seq_len;
  const int nb = static_cast<int>(config_.windows.size());
  if (cache) {
    cache->inputs.assign(inputs.begin(), inputs.end());
    cache->branches.assign(nb, {});
  }
  for (const auto* in : inputs) {
    if (static_cast<int>(in->sequence.ids.size()) != L) {
      throw ShapeError("encoded text length " +
                       std::to_string(in->sequence.ids.size()) +
                       " does not match configured length " +
                       std::to_string(L));
    }
  }

  Matrix pooled(nb * C, E);
  for (int b = 0; b < nb; ++b) {
    const int w = config_.windows[b];
    const int L2 = L - 2 * w + 2;
    BranchCache local;
    BranchCache& bc = cache ? cache->branches[b] : local;
    bc.pooled_len = L2;
    bc.conv1_offset.resize(E);
    bc.conv1_count.resize(E);
    bc.conv2_offset.resize(E);
    bc.conv2_count.resize(E);
    int cols1 = 0, cols2 = 0;
    for (int e = 0; e < E; ++e) {
      const int n2 = std::min(L2, inputs[e]->sequence.length);
      const int n1 = n2 > 0 ? n2 + w - 1 : 0;
      bc.conv1_offset[e] = cols1;
      bc.conv1_count[e] = n1;
      bc.conv2_offset[e] = cols2;
      bc.conv2_count[e] = n2;
      cols1 += n1;
      cols2 += n2;
    }
    // One extra column for the all-padding tail, whose activations are the
    // same for every input.
    bc.conv1_tail = cols1;
    bc.conv2_tail = cols2;

    Matrix x1 = Matrix::Zero(w * d, cols1 + 1);
    for (int e = 0; e < E; ++e) {
      const auto& ids = inputs[e]->sequence.ids;
      for (int j = 0; j < bc.conv1_count[e]; ++j) {
        for (int k = 0; k < w; ++k) {
          const int id = ids[j + k];
          if (id == text::Vocab::kPad) continue;
          x1.block(k * d, bc.conv1_offset[e] + j, d, 1) = embedding.value.col(id);
        }
      }
    }
    Matrix h1 = cache ? conv1[b].forward(x1, bc.conv1) : conv1[b].apply(x1);

    Matrix x2(w * C, cols2 + 1);
    for (int e = 0; e < E; ++e) {
      for (int k = 0; k < bc.conv2_count[e]; ++k) {
        for (int kk = 0; kk < w; ++kk) {
          x2.block(kk * C, bc.conv2_offset[e] + k, C, 1) =
              h1.col(bc.conv1_offset[e] + k + kk);
        }
      }
    }
    for (int kk = 0; kk < w; ++kk) {
      x2.block(kk * C, cols2, C, 1) = h1.col(bc.conv1_tail);
    }
    Matrix h2 = cache ? conv2[b].forward(x2, bc.conv2) : conv2[b].apply(x2);

    for (int e = 0; e < E; ++e) {
      const int n2 = bc.conv2_count[e];
      Vector sum = static_cast<double>(L2 - n2) * h2.col(bc.conv2_tail);
      if (n2 > 0) sum += h2.middleCols(bc.conv2_offset[e], n2).rowwise().sum();
      pooled.block(b * C, e, C, 1) = sum / static_cast<double>(L2);
    }
  }

  Matrix v_seq = cache ? projection.forward(pooled, cache->projection)
                       : projection.apply(pooled);
  Matrix out(output_dim(), E);
  out.topRows(config_.seq_out) = v_seq;
  for (int e = 0; e < E; ++e) {
    out.block(config_.seq_out, e, d, 1) = tagset_embed(inputs[e]->tag_ids);
  }
  return out;
}

Matrix ContentExtractor::apply(
    std::span<const ContentInput* const> inputs) const {
  return run(inputs, nullptr);
}

Matrix ContentExtractor::forward(std::span<const ContentInput* const> inputs,
                                 Cache& cache) const {
  return run(inputs, &cache);
}

void ContentExtractor::backward(const Matrix& dv, const Cache& cache) {
  const int E = static_cast<int>(cache.inputs.size());
  const int d = config_.embed_dim;
  const int C = config_.channels;
  const int nb = static_cast<int>(config_.windows.size());
  if (dv.rows() != output_dim() || dv.cols() != E) {
    throw ShapeError("content feature gradient shape mismatch");
  }

  for (int e = 0; e < E; ++e) {
    const auto& tags = cache.inputs[e]->tag_ids;
    if (tags.empty()) continue;
    const double scale = 1.0 / static_cast<double>(tags.size());
    for (int id : tags) {
      embedding.grad.col(id) += scale * dv.block(config_.seq_out, e, d, 1);
    }
  }

  Matrix dpooled = projection.backward(dv.topRows(config_.seq_out),
                                       cache.projection);
  for (int b = 0; b < nb; ++b) {
    const int w = config_.windows[b];
    const BranchCache& bc = cache.branches[b];
    const double inv = 1.0 / static_cast<double>(bc.pooled_len);

    Matrix dh2 = Matrix::Zero(C, bc.conv2_tail + 1);
    for (int e = 0; e < E; ++e) {
      const Vector g = dpooled.block(b * C, e, C, 1) * inv;
      for (int k = 0; k < bc.conv2_count[e]; ++k) {
        dh2.col(bc.conv2_offset[e] + k) = g;
      }
      dh2.col(bc.conv2_tail) +=
          static_cast<double>(bc.pooled_len - bc.conv2_count[e]) * g;
    }
    Matrix dx2 = conv2[b].backward(dh2, bc.conv2);

    Matrix dh1 = Matrix::Zero(C, bc.conv1_tail + 1);
    for (int e = 0; e < E; ++e) {
      for (int k = 0; k < bc.conv2_count[e]; ++k) {
        for (int kk = 0; kk < w; ++kk) {
          dh1.col(bc.conv1_offset[e] + k + kk) +=
              dx2.block(kk * C, bc.conv2_offset[e] + k, C, 1);
        }
      }
    }
    for (int kk = 0; kk < w; ++kk) {
      dh1.col(bc.conv1_tail) += dx2.block(kk * C, bc.conv2_tail, C, 1);
    }
    Matrix dx1 = conv1[b].backward(dh1, bc.conv1);

    for (int e = 0; e < E; ++e) {
      const auto& ids = cache.inputs[e]->sequence.ids;
      for (int j = 0; j < bc.conv1_count[e]; ++j) {
        for (int k = 0; k < w; ++k) {
          const int id = ids[j + k];
          if (id == text::Vocab::kPad) continue;
          embedding.grad.col(id) +=
              dx1.block(k * d, bc.conv1_offset[e] + j, d, 1);
        }
      }
    }
  }
  mask_padding_grad();
}

Vector ContentExtractor::text_inception(const EncodedText& encoded) const {
  ContentInput in;
  in.sequence = encoded;
  const ContentInput* ptr = &in;
  return apply(std::span<const ContentInput* const>(&ptr, 1))
      .col(0)
      .head(config_.seq_out);
}

Vector ContentExtractor::tagset_embed(const std::vector<int>& tag_ids) const {
  Vector out = Vector::Zero(config_.embed_dim);
  if (tag_ids.empty()) return out;
  for (int id : tag_ids) out += embedding.value.col(id);
  return out / static_cast<double>(tag_ids.size());
}

ContentFeature ContentExtractor::content_feature(
    const ContentInput& input) const {
  const ContentInput* ptr = &input;
  Vector v = apply(std::span<const ContentInput* const>(&ptr, 1)).col(0);
  return {v.head(config_.seq_out), v.tail(config_.embed_dim), v};
}

void ContentExtractor::collect(nn::ParamRefs& out) {
  out.push_back(&embedding);
  for (std::size_t b = 0; b < conv1.size(); ++b) {
    conv1[b].collect(out);
    conv2[b].collect(out);
  }
  projection.collect(out);
}

void ContentExtractor::mask_padding_grad() {
  embedding.grad.col(text::Vocab::kPad).setZero();
}

Vector tagset_embed(const std::vector<std::string>& tags,
                    const ContentExtractor& extractor, const Vocab& vocab) {
  std::set<std::string> uniq(tags.begin(), tags.end());
  std::vector<int> ids;
  for (const auto& t : uniq) ids.push_back(vocab.id(t));
  return extractor.tagset_embed(ids);
}

ContentFeature content_feature(const corpus::Service& service,
                               const Vocab& vocab,
                               const ContentExtractor& extractor) {
  return extractor.content_feature(make_content_input(
      service.description, service.tags, vocab, extractor.config().seq_len));
}

ContentFeature content_feature(const corpus::Mashup& mashup,
                               const Vocab& vocab,
                               const ContentExtractor& extractor) {
  return extractor.content_feature(make_content_input(
      mashup.description, mashup.tags, vocab, extractor.config().seq_len));
}

}  // namespace bundlerec::text
