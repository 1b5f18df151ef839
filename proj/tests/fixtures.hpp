#pragma once

#include <filesystem>
#include <string>

#include <unistd.h>

#include "earlycorr/experiment.hpp"

namespace fixtures {

/// A model small enough to train in well under a second per epoch.
inline earlycorr::ModelConfig tiny_model() {
  earlycorr::ModelConfig c;
  c.raw_packets = 2;
  c.raw_bytes = 16;
  c.seq_length = 16;
  c.vocab = 100;
  c.conv_channels = {2, 3, 4};
  c.conv_kernel = 3;
  c.cnn_hidden = 16;
  c.branch_dim = 16;
  c.ipd_embed_dim = 4;
  c.lstm_hidden = 4;
  c.lstm_layers = 1;
  c.integ_channels = 2;
  c.embedding_dim = 16;
  c.reconstruct_hidden = 8;
  c.rnn_steps = 4;
  c.rnn_features = 4;
  c.rnn_hidden = 16;
  return c;
}

/// 60 short synthetic pairs (48 train, 12 test), two epochs.
inline earlycorr::ExperimentConfig small_experiment(const std::filesystem::path& out) {
  earlycorr::ExperimentConfig c;
  c.out_dir = out;
  c.synth.n_pairs = 60;
  c.synth.min_packets = 20;
  c.synth.max_packets = 40;
  c.model = tiny_model();
  c.windows.sample.n_packets = c.model.raw_packets;
  c.windows.sample.n_bytes = c.model.raw_bytes;
  c.windows.sample.seq_length = c.model.seq_length;
  c.windows.sample.vocab = c.model.vocab;
  c.train.epochs = 2;
  c.train.batch_size = 16;
  c.n_neg = {3, 5};
  c.plus_packet_counts = {10, 20};
  return c;
}

inline std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() /
           ("earlycorr_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace fixtures
