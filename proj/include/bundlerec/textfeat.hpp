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

#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "bundlerec/corpus.hpp"
#include "bundlerec/neural.hpp"

namespace bundlerec::text {

using nn::Matrix;
using nn::Vector;

// Token <-> id map. Id 0 is padding, id 1 is out-of-vocabulary.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  Vocab();
  // `tokens[i]` becomes id i + 2.
  static Vocab from_tokens(const std::vector<std::string>& tokens);

  int id(std::string_view token) const;
  const std::string& token(int id) const { return tokens_.at(id); }
  int size() const { return static_cast<int>(tokens_.size()); }
  // Tokens with ids >= 2, in id order.
  std::vector<std::string> words() const;

  // `token<TAB>id` lines sorted by id, including the two reserved ids.
  void write(std::ostream& out) const;
  static Vocab read(std::istream& in);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

// Vocabulary over training-fold mashup text plus all service text (service
// descriptions are catalog data, never held out). Ordered by descending
// frequency, then lexicographically.
Vocab build_vocab(const corpus::Repository& repo,
                  std::span<const int> train_mashups);

struct EncodedText {
  std::vector<int> ids;  // exactly L entries, padding only in the tail
  int length = 0;        // real (non-padding) positions

  std::vector<bool> mask() const;
};

EncodedText encode_sequence(const std::vector<std::string>& tokens,
                            const Vocab& vocab, int seq_len);

// Everything the content extractor needs about one mashup or service.
struct ContentInput {
  EncodedText sequence;
  std::vector<int> tag_ids;  // one entry per distinct tag string
};

ContentInput make_content_input(const std::vector<std::string>& description,
                                const std::vector<std::string>& tags,
                                const Vocab& vocab, int seq_len);

struct TextConfig {
  int seq_len = 50;
  int embed_dim = 50;
  std::vector<int> windows{2, 3, 4};
  int channels = 32;
  int seq_out = 50;
};

struct ContentFeature {
  Vector v_seq;
  Vector v_set;
  Vector v;  // v_seq followed by v_set
};

// Content pathway feature extractor: an embedding table shared by word
// sequences and tag sets, parallel stacked 1-D convolution branches with
// global average pooling and a PReLU projection for the sequence part, and
// the mean tag embedding for the set part.
class ContentExtractor {
 public:
  ContentExtractor() = default;
  ContentExtractor(const std::string& name, int vocab_size,
                   const TextConfig& config, Rng& rng);

  const TextConfig& config() const { return config_; }
  int vocab_size() const { return static_cast<int>(embedding.value.cols()); }
  int output_dim() const { return config_.seq_out + config_.embed_dim; }

  struct BranchCache {
    nn::DenseCache conv1;
    nn::DenseCache conv2;
    std::vector<int> conv1_offset;  // first H1 column of each input
    std::vector<int> conv1_count;
    std::vector<int> conv2_offset;
    std::vector<int> conv2_count;
    int conv1_tail = 0;
    int conv2_tail = 0;
    int pooled_len = 0;
  };
  struct Cache {
    std::vector<const ContentInput*> inputs;
    std::vector<BranchCache> branches;
    nn::DenseCache projection;
  };

  // One column of output_dim() per input.
  Matrix apply(std::span<const ContentInput* const> inputs) const;
  Matrix forward(std::span<const ContentInput* const> inputs,
                 Cache& cache) const;
  void backward(const Matrix& dv, const Cache& cache);

  Vector text_inception(const EncodedText& encoded) const;
  Vector tagset_embed(const std::vector<int>& tag_ids) const;
  ContentFeature content_feature(const ContentInput& input) const;

  void collect(nn::ParamRefs& out);
  // The padding column of the embedding table never receives gradient.
  void mask_padding_grad();

  nn::Parameter embedding;  // embed_dim x vocab_size, column per token id
  std::vector<nn::DenseLayer> conv1;
  std::vector<nn::DenseLayer> conv2;
  nn::DenseLayer projection;

 private:
  Matrix run(std::span<const ContentInput* const> inputs, Cache* cache) const;
  TextConfig config_;
};

Vector tagset_embed(const std::vector<std::string>& tags,
                    const ContentExtractor& extractor, const Vocab& vocab);

ContentFeature content_feature(const corpus::Service& service,
                               const Vocab& vocab,
                               const ContentExtractor& extractor);
ContentFeature content_feature(const corpus::Mashup& mashup,
                               const Vocab& vocab,
                               const ContentExtractor& extractor);

}  // namespace bundlerec::text
