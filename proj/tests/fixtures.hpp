#pragma once

// Tiny models and random samples shared by several suites.

#include "vimonet/model.hpp"

namespace vimonet::testing {

inline Model small_model(std::uint64_t seed, int d = 16) {
  std::vector<std::string> words;
  for (int i = 0; i < 20; ++i) words.push_back("w" + std::to_string(i));
  ModelShape shape;
  shape.lm = {d, 2, 2, 2 * d, 64, 0};
  shape.encoder.d_motion = 8;
  shape.encoder.d_video = 8;
  shape.encoder.motion_tokens = 4;
  return Model::create(Vocabulary(words), shape, seed);
}

inline EncodedSample random_sample(const Model& m, Rng& rng, Modality mod) {
  EncodedSample s;
  s.modality = mod;
  const int k = 2 + static_cast<int>(rng() % 4);
  s.features = normal_matrix(k, mod == Modality::motion ? m.motion.in_width() : m.video.in_width(), rng, 1.0);
  const auto& sp = m.vocab.specials();
  s.prompt_ids = {sp.bos, sp.vis};
  const int n = 1 + static_cast<int>(rng() % 5);
  for (int i = 0; i < n; ++i) s.prompt_ids.push_back(5 + static_cast<TokenId>(rng() % 20));
  const int r = 1 + static_cast<int>(rng() % 3);
  for (int i = 0; i < r; ++i) s.response.ids.push_back(5 + static_cast<TokenId>(rng() % 20));
  s.response.ids.push_back(sp.eos);
  return s;
}

}  // namespace vimonet::testing
