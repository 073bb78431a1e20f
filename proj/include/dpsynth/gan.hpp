#ifndef DPSYNTH_GAN_HPP
#define DPSYNTH_GAN_HPP

#include <memory>
#include <vector>

#include "dpsynth/nets.hpp"
#include "dpsynth/synth.hpp"

namespace dpsynth {

struct GanConfig {
  size_t noise_dim = 64;
  std::vector<size_t> hidden = {128, 128};
  size_t batch = 64;
  // Fixed epoch count; iterations per epoch scale with the data.
  size_t epochs = 100;
  double learning_rate = 0.2;
  // DP-SGD per-example clip bound (critic).
  double clip_norm = 1.0;
  // WGAN critic weight bound and critic updates per generator update. The
  // accountant sees every critic step.
  double weight_clip = 0.01;
  size_t critic_rounds = 1;
  // Learning-rate scales relative to learning_rate: the critic/student side
  // keeps pace with the generator, while teachers learn slowly so their votes
  // stay informative instead of saturating to all-fake.
  double disc_lr_scale = 1.0;
  double teacher_lr_scale = 0.1;
  // PATE: teacher count, Laplace scale on vote counts (per-query
  // epsilon = 2 / vote_noise), and the fraction of its shard each teacher
  // sees per iteration (at least 4 rows).
  size_t teachers = 10;
  double vote_noise = 4.0;
  double teacher_fraction = 1.0 / 256.0;
  // Temperature of the per-block softmax on the generator's categorical
  // outputs; continuous outputs go through tanh.
  double softmax_temperature = 0.2;
  // Scale on the generator's final-layer init so the first fake clouds
  // blanket the encoded range instead of huddling near the center.
  double generator_init_scale = 4.0;
  // Records the largest post-clip per-example gradient norm during training.
  bool track_clip_norms = false;
};

// Maps raw generator outputs onto the encoded-row geometry: tanh for
// continuous positions, softmax over each one-hot block.
void apply_output_transform(Eigen::MatrixXd& raw, const RowEncoder& encoder,
                            double temperature);

// Given transformed outputs y and dL/dy, returns dL/draw.
Eigen::MatrixXd output_transform_grad(const Eigen::MatrixXd& transformed,
                                      const Eigen::MatrixXd& d_transformed,
                                      const RowEncoder& encoder, double temperature);

// Generator wrapper shared by both trainers: noise -> net -> decoded rows.
class GanModel : public FittedSynthesizer {
 public:
  GanModel(Schema schema, RowEncoder encoder, DenseNet generator,
           BudgetLedger ledger, size_t noise_dim, double softmax_temperature);

  Table sample(size_t n_prime, uint64_t seed) const override;
  const BudgetLedger& ledger() const override { return ledger_; }
  const Schema& schema() const override { return schema_; }
  const DenseNet& generator() const { return generator_; }

 protected:
  Schema schema_;
  RowEncoder encoder_;
  DenseNet generator_;
  BudgetLedger ledger_;
  size_t noise_dim_;
  double softmax_temperature_;
};

class DpWganModel final : public GanModel {
 public:
  DpWganModel(Schema schema, RowEncoder encoder, DenseNet generator, DenseNet critic,
              BudgetLedger ledger, size_t noise_dim, double softmax_temperature,
              double noise_multiplier, double accountant_epsilon,
              size_t critic_steps, double max_clipped_norm);

  const DenseNet& critic() const { return critic_; }
  double noise_multiplier() const { return noise_multiplier_; }
  double accountant_epsilon() const { return accountant_epsilon_; }
  size_t critic_steps() const { return critic_steps_; }
  double max_clipped_norm() const { return max_clipped_norm_; }

 private:
  DenseNet critic_;
  double noise_multiplier_;
  double accountant_epsilon_;
  size_t critic_steps_;
  double max_clipped_norm_;
};

// Wasserstein critic trained with per-example clipping plus Gaussian noise on
// the real-batch gradients; the noise multiplier comes from inverting the
// accountant for the full step count before training starts.
std::unique_ptr<DpWganModel> dpwgan_fit(const Table& train, const PrivacySpec& spec,
                                        const GanConfig& config, uint64_t seed);

class PateGanModel final : public GanModel {
 public:
  PateGanModel(Schema schema, RowEncoder encoder, DenseNet generator,
               DenseNet student, std::vector<DenseNet> teachers,
               std::vector<size_t> shard_of_row, BudgetLedger ledger,
               size_t noise_dim, double softmax_temperature, size_t query_count,
               double accountant_epsilon, bool budget_exhausted);

  const DenseNet& student() const { return student_; }
  const std::vector<DenseNet>& teachers() const { return teachers_; }
  const std::vector<size_t>& shard_of_row() const { return shard_of_row_; }
  size_t query_count() const { return query_count_; }
  double accountant_epsilon() const { return accountant_epsilon_; }
  bool budget_exhausted() const { return budget_exhausted_; }

 private:
  DenseNet student_;
  std::vector<DenseNet> teachers_;
  std::vector<size_t> shard_of_row_;
  size_t query_count_;
  double accountant_epsilon_;
  bool budget_exhausted_;
};

// Teachers train on disjoint shards; the student learns from Laplace-noised
// teacher votes on generated records and the generator trains against the
// student. Training stops cleanly once another vote batch would push the
// accountant past the budget.
std::unique_ptr<PateGanModel> pategan_fit(const Table& train, const PrivacySpec& spec,
                                          const GanConfig& config, uint64_t seed);

// Plurality vote over noised counts; noise_scale 0 means exact counts.
bool noisy_vote(size_t votes_for, size_t votes_against, double noise_scale, Rng& rng);

}  // namespace dpsynth

#endif  // DPSYNTH_GAN_HPP
