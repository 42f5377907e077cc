#ifndef CAMIB_SYNTHETIC_HPP
#define CAMIB_SYNTHETIC_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "camib/heads.hpp"
#include "camib/rng.hpp"
#include "camib/tensor.hpp"

namespace camib {

// Controllable-bias multimodal generator. Every sample carries a causal
// factor c (which determines the label) and a shortcut factor s (which does
// not). The two factors live in disjoint feature blocks so that a probe can
// measure exactly how much signal each pathway carries, and the train/OOD
// coupling probabilities control how tempting the shortcut is.
//
// Placement is deliberately asymmetric: the shortcut block repeats at every
// token position, while the causal block is written only at one designated
// token per modality (see causal_token_position). Sequence-mean pooling
// therefore dilutes the causal signal by 1/seq_len unless a model learns to
// locate the informative token — which is precisely the job of the
// attention-based instrument. The default amplitudes compensate: causal_snr
// is several times shortcut_snr so that after dilution the shortcut is still
// the fast feature for a pooled learner while the causal factor remains
// recoverable, which is the regime the OOD benchmark needs.
struct BiasSpec {
  std::size_t n_train = 2000;
  std::size_t n_eval = 1000;  // size of each of val / test-ID / test-OOD
  std::size_t modalities = 3;
  std::size_t seq_len = 8;
  std::size_t input_dim = 16;
  TaskKind task_kind = TaskKind::classification;
  std::size_t num_classes = 2;  // classification only
  double rho_train = 0.9;      // P(s = c) on train / val / test-ID
  double rho_test = 0.1;       // P(s = c) on test-OOD
  double causal_snr = 4.6;
  double shortcut_snr = 1.0;
  double noise_sigma = 1.0;
  std::uint64_t seed = 1;

  void validate() const;  // throws ConfigError on any violated invariant
};

// Feature-column ranges (half-open) for the two signal blocks.
struct FeatureBlocks {
  std::size_t causal_begin, causal_end;
  std::size_t shortcut_begin, shortcut_end;
};

FeatureBlocks feature_blocks(const BiasSpec& spec);

// Token position that carries the causal block for one modality
// (modality index modulo seq_len); every other position holds only noise in
// the causal columns.
std::size_t causal_token_position(const BiasSpec& spec, std::size_t modality);

// One split: per-modality token features with rows in sample-major order
// (row n * seq_len + t is token t of sample n), labels, and the ground-truth
// factors that produced each sample.
struct ModalitySplit {
  std::vector<Tensor> features;  // modalities tensors, each (batch*seq_len) x input_dim
  Labels labels;
  Tensor causal_factor;    // batch entries (class index or scalar)
  Tensor shortcut_factor;  // batch entries
  std::size_t batch = 0;
  std::size_t seq_len = 0;
};

struct SyntheticDataset {
  BiasSpec spec;
  ModalitySplit train, val, test_id, test_ood;
};

// Coupled factor draw: s equals c with probability rho, otherwise an
// independent draw over the remaining classes (classification) or a fresh
// uniform scalar (regression). rho = 1/K therefore makes s exactly
// independent of c for classification.
SyntheticDataset generate(const BiasSpec& spec);

// Same generator with the OOD coupling replaced. Per-split RNG streams are
// derived from the master seed by split name, so the train / val / test-ID
// splits of the shifted spec regenerate bit-identically.
BiasSpec ood_shift(const BiasSpec& spec, double rho_test);

// Ridge-regression linear probe restricted to one feature block, fit on the
// train split and scored on test-ID / test-OOD. Classification only: the
// probe targets one-hot labels and predicts by arg-max.
enum class ProbeBlock { causal, shortcut };

struct ProbeResult {
  double id_accuracy = 0.0;
  double ood_accuracy = 0.0;
};

ProbeResult linear_probe(const SyntheticDataset& dataset, ProbeBlock block);

// Flat binary container: one JSON metadata line terminated by '\n', then raw
// little-endian IEEE-754 doubles — for each split in the order train, val,
// test_id, test_ood: each modality's feature matrix, then labels, then the
// causal and shortcut factors.
void save_dataset(const std::string& path, const SyntheticDataset& dataset);
SyntheticDataset load_dataset(const std::string& path);

}  // namespace camib

#endif  // CAMIB_SYNTHETIC_HPP
