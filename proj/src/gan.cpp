#include "dpsynth/gan.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dpsynth {

namespace {

Eigen::MatrixXd gaussian_matrix(size_t rows, size_t cols, Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.next_gaussian();
  return m;
}

std::vector<size_t> layer_plan(size_t in, const std::vector<size_t>& hidden, size_t out) {
  std::vector<size_t> sizes{in};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  return sizes;
}

DenseNet make_generator(const GanConfig& config, size_t data_width, Rng& rng) {
  std::vector<Activation> acts(config.hidden.size(), Activation::relu);
  acts.push_back(Activation::identity);
  DenseNet net(layer_plan(config.noise_dim, config.hidden, data_width), acts, rng);
  net.weights().back() *= config.generator_init_scale;
  return net;
}

DenseNet make_scorer(const GanConfig& config, size_t data_width, Rng& rng) {
  std::vector<Activation> acts(config.hidden.size(), Activation::leaky_relu);
  acts.push_back(Activation::identity);
  return DenseNet(layer_plan(data_width, config.hidden, 1), acts, rng);
}

Eigen::MatrixXd sample_rows(const Eigen::MatrixXd& data,
                            const std::vector<size_t>& pool, size_t count, Rng& rng) {
  Eigen::MatrixXd out(count, data.cols());
  for (size_t i = 0; i < count; ++i) {
    out.row(i) = data.row(pool[rng.next_index(pool.size())]);
  }
  return out;
}

void validate_config(const GanConfig& config, size_t n) {
  if (config.batch == 0 || config.epochs == 0 || config.noise_dim == 0 ||
      config.hidden.empty()) {
    throw InputError("gan config values must be positive");
  }
  if (!(config.learning_rate > 0.0) || !(config.clip_norm > 0.0) ||
      !(config.weight_clip > 0.0) || config.critic_rounds == 0) {
    throw InputError("gan config values must be positive");
  }
  if (config.batch > n) throw InputError("batch size exceeds the training rows");
}

// d loss / d logit for binary cross-entropy with logits. Targets are
// smoothed toward [0.1, 0.9] so optimal logits stay bounded and the scorer
// keeps nonzero input gradients everywhere.
constexpr double kLabelSmoothing = 0.1;

Eigen::MatrixXd bce_logit_grad(const Eigen::MatrixXd& logits,
                               const Eigen::VectorXd& labels) {
  Eigen::MatrixXd g(logits.rows(), 1);
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double p = 1.0 / (1.0 + std::exp(-logits(i, 0)));
    const double target = kLabelSmoothing + (1.0 - 2.0 * kLabelSmoothing) * labels(i);
    g(i, 0) = (p - target) / static_cast<double>(logits.rows());
  }
  return g;
}

}  // namespace

void apply_output_transform(Eigen::MatrixXd& raw, const RowEncoder& encoder,
                            double temperature) {
  if (!(temperature > 0.0)) throw InputError("softmax temperature must be positive");
  for (const auto& block : encoder.blocks()) {
    if (!block.categorical) {
      for (Eigen::Index r = 0; r < raw.rows(); ++r) {
        raw(r, block.offset) = std::tanh(raw(r, block.offset));
      }
      continue;
    }
    for (Eigen::Index r = 0; r < raw.rows(); ++r) {
      double mx = -std::numeric_limits<double>::infinity();
      for (size_t k = 0; k < block.size; ++k) {
        mx = std::max(mx, raw(r, block.offset + k));
      }
      double total = 0.0;
      for (size_t k = 0; k < block.size; ++k) {
        double& v = raw(r, block.offset + k);
        v = std::exp((v - mx) / temperature);
        total += v;
      }
      for (size_t k = 0; k < block.size; ++k) raw(r, block.offset + k) /= total;
    }
  }
}

Eigen::MatrixXd output_transform_grad(const Eigen::MatrixXd& transformed,
                                      const Eigen::MatrixXd& d_transformed,
                                      const RowEncoder& encoder, double temperature) {
  Eigen::MatrixXd d_raw(transformed.rows(), transformed.cols());
  for (const auto& block : encoder.blocks()) {
    if (!block.categorical) {
      for (Eigen::Index r = 0; r < transformed.rows(); ++r) {
        const double y = transformed(r, block.offset);
        d_raw(r, block.offset) = d_transformed(r, block.offset) * (1.0 - y * y);
      }
      continue;
    }
    // Softmax Jacobian: dz = (y .* dy - y * (y . dy)) / temperature.
    for (Eigen::Index r = 0; r < transformed.rows(); ++r) {
      double dot = 0.0;
      for (size_t k = 0; k < block.size; ++k) {
        dot += transformed(r, block.offset + k) * d_transformed(r, block.offset + k);
      }
      for (size_t k = 0; k < block.size; ++k) {
        const double y = transformed(r, block.offset + k);
        d_raw(r, block.offset + k) =
            y * (d_transformed(r, block.offset + k) - dot) / temperature;
      }
    }
  }
  return d_raw;
}

GanModel::GanModel(Schema schema, RowEncoder encoder, DenseNet generator,
                   BudgetLedger ledger, size_t noise_dim, double softmax_temperature)
    : schema_(std::move(schema)),
      encoder_(std::move(encoder)),
      generator_(std::move(generator)),
      ledger_(std::move(ledger)),
      noise_dim_(noise_dim),
      softmax_temperature_(softmax_temperature) {}

Table GanModel::sample(size_t n_prime, uint64_t seed) const {
  if (n_prime == 0) throw InputError("sample size must be positive");
  Rng rng(seed);
  const Eigen::MatrixXd z = gaussian_matrix(n_prime, noise_dim_, rng);
  Eigen::MatrixXd out = generator_.forward(z);
  apply_output_transform(out, encoder_, softmax_temperature_);
  return encoder_.decode(out);
}

DpWganModel::DpWganModel(Schema schema, RowEncoder encoder, DenseNet generator,
                         DenseNet critic, BudgetLedger ledger, size_t noise_dim,
                         double softmax_temperature, double noise_multiplier,
                         double accountant_epsilon, size_t critic_steps,
                         double max_clipped_norm)
    : GanModel(std::move(schema), std::move(encoder), std::move(generator),
               std::move(ledger), noise_dim, softmax_temperature),
      critic_(std::move(critic)),
      noise_multiplier_(noise_multiplier),
      accountant_epsilon_(accountant_epsilon),
      critic_steps_(critic_steps),
      max_clipped_norm_(max_clipped_norm) {}

std::unique_ptr<DpWganModel> dpwgan_fit(const Table& train, const PrivacySpec& spec,
                                        const GanConfig& config, uint64_t seed) {
  const size_t n = train.rows();
  validate_config(config, n);
  if (!spec.noise_free() && !(spec.delta > 0.0)) {
    throw InputError("dpwgan_fit needs delta > 0 for finite epsilon");
  }

  const size_t batches_per_epoch = (n + config.batch - 1) / config.batch;
  const size_t steps = config.epochs * batches_per_epoch;
  const double sampling_rate =
      std::min(1.0, static_cast<double>(config.batch) / static_cast<double>(n));

  // Calibration happens before any training so failures surface immediately.
  double sigma = 0.0;
  if (!spec.noise_free()) {
    sigma = calibrate_noise_multiplier(spec, sampling_rate, steps);
  }

  Rng rng(seed);
  const RowEncoder encoder(train.schema());
  const Eigen::MatrixXd data = encoder.encode(train);
  DenseNet generator = make_generator(config, encoder.width(), rng);
  DenseNet critic = make_scorer(config, encoder.width(), rng);
  critic.clamp_weights(config.weight_clip);

  std::vector<size_t> all_rows(n);
  std::iota(all_rows.begin(), all_rows.end(), 0);

  const double b = static_cast<double>(config.batch);
  double max_clipped = 0.0;
  for (size_t step = 0; step < steps; ++step) {
    // Critic ascent on mean f(real) - mean f(fake). Only the real-batch
    // gradients touch private data; they are clipped per example and noised.
    const Eigen::MatrixXd real = sample_rows(data, all_rows, config.batch, rng);
    Eigen::MatrixXd fake =
        generator.forward(gaussian_matrix(config.batch, config.noise_dim, rng));
    apply_output_transform(fake, encoder, config.softmax_temperature);

    DenseNet::Cache real_cache;
    critic.forward(real, real_cache);
    const Eigen::MatrixXd minus_ones = Eigen::MatrixXd::Constant(config.batch, 1, -1.0);
    DenseNet::Gradients critic_grads;
    if (spec.noise_free()) {
      critic_grads = critic.backward(real_cache, minus_ones);
    } else {
      critic_grads = critic.clipped_sum_backward(
          real_cache, minus_ones, config.clip_norm,
          config.track_clip_norms ? &max_clipped : nullptr);
      const double noise = sigma * config.clip_norm;
      for (auto& w : critic_grads.weights) {
        for (Eigen::Index i = 0; i < w.size(); ++i) {
          w.data()[i] += noise * rng.next_gaussian();
        }
      }
      for (auto& bias : critic_grads.biases) {
        for (Eigen::Index i = 0; i < bias.size(); ++i) {
          bias.data()[i] += noise * rng.next_gaussian();
        }
      }
    }
    critic_grads.scale(1.0 / b);

    DenseNet::Cache fake_cache;
    critic.forward(fake, fake_cache);
    const Eigen::MatrixXd plus = Eigen::MatrixXd::Constant(config.batch, 1, 1.0 / b);
    critic_grads.add(critic.backward(fake_cache, plus));
    critic.apply_sgd(critic_grads, config.learning_rate * config.disc_lr_scale);
    critic.clamp_weights(config.weight_clip);

    if ((step + 1) % config.critic_rounds != 0) continue;

    // Generator ascent on mean f(fake) through the fixed critic.
    DenseNet::Cache gen_cache;
    const Eigen::MatrixXd z = gaussian_matrix(config.batch, config.noise_dim, rng);
    Eigen::MatrixXd gen_out = generator.forward(z, gen_cache);
    apply_output_transform(gen_out, encoder, config.softmax_temperature);
    DenseNet::Cache critic_cache;
    critic.forward(gen_out, critic_cache);
    Eigen::MatrixXd d_gen_out;
    critic.backward(critic_cache, Eigen::MatrixXd::Constant(config.batch, 1, -1.0 / b),
                    &d_gen_out);
    generator.apply_sgd(
        generator.backward(gen_cache, output_transform_grad(gen_out, d_gen_out, encoder,
                                                            config.softmax_temperature)),
        config.learning_rate);
  }

  BudgetLedger ledger(spec);
  double achieved = kInfiniteEpsilon;
  if (spec.noise_free()) {
    ledger.spend("dp-sgd", kInfiniteEpsilon, 0.0);
  } else {
    achieved = sgd_accountant_epsilon(sigma, sampling_rate, steps, spec.delta);
    ledger.spend("dp-sgd", achieved, spec.delta);
  }
  return std::make_unique<DpWganModel>(train.schema(), encoder, std::move(generator),
                                       std::move(critic), std::move(ledger),
                                       config.noise_dim, config.softmax_temperature,
                                       sigma, achieved, steps, max_clipped);
}

bool noisy_vote(size_t votes_for, size_t votes_against, double noise_scale, Rng& rng) {
  double for_count = static_cast<double>(votes_for);
  double against_count = static_cast<double>(votes_against);
  if (noise_scale > 0.0) {
    for_count += rng.next_laplace(noise_scale);
    against_count += rng.next_laplace(noise_scale);
  }
  return for_count > against_count;
}

PateGanModel::PateGanModel(Schema schema, RowEncoder encoder, DenseNet generator,
                           DenseNet student, std::vector<DenseNet> teachers,
                           std::vector<size_t> shard_of_row, BudgetLedger ledger,
                           size_t noise_dim, double softmax_temperature,
                           size_t query_count, double accountant_epsilon,
                           bool budget_exhausted)
    : GanModel(std::move(schema), std::move(encoder), std::move(generator),
               std::move(ledger), noise_dim, softmax_temperature),
      student_(std::move(student)),
      teachers_(std::move(teachers)),
      shard_of_row_(std::move(shard_of_row)),
      query_count_(query_count),
      accountant_epsilon_(accountant_epsilon),
      budget_exhausted_(budget_exhausted) {}

std::unique_ptr<PateGanModel> pategan_fit(const Table& train, const PrivacySpec& spec,
                                          const GanConfig& config, uint64_t seed) {
  const size_t n = train.rows();
  validate_config(config, n);
  const size_t t = config.teachers;
  if (t < 2) throw InputError("pategan_fit needs at least two teachers");
  if (n < t) throw InputError("pategan_fit needs at least one row per teacher");
  if (!spec.noise_free()) {
    if (!(spec.delta > 0.0)) throw InputError("pategan_fit needs delta > 0 for finite epsilon");
    if (!(config.vote_noise > 0.0)) {
      throw InputError("pategan_fit needs a positive vote noise scale for finite epsilon");
    }
  }

  Rng rng(seed);
  const RowEncoder encoder(train.schema());
  const Eigen::MatrixXd data = encoder.encode(train);

  // Disjoint shards: a seeded shuffle cut into t nearly equal parts.
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (size_t i = n; i-- > 1;) std::swap(order[i], order[rng.next_index(i + 1)]);
  std::vector<std::vector<size_t>> shards(t);
  std::vector<size_t> shard_of_row(n);
  for (size_t i = 0; i < n; ++i) {
    shards[i % t].push_back(order[i]);
    shard_of_row[order[i]] = i % t;
  }

  DenseNet generator = make_generator(config, encoder.width(), rng);
  DenseNet student = make_scorer(config, encoder.width(), rng);
  std::vector<DenseNet> teachers;
  teachers.reserve(t);
  for (size_t k = 0; k < t; ++k) teachers.push_back(make_scorer(config, encoder.width(), rng));

  // Teachers see a fixed fraction of their shard per iteration, so teacher
  // training work grows with the shard size.
  const size_t shard_size = shards[0].size();
  const size_t teacher_batch = std::max<size_t>(
      4, static_cast<size_t>(std::llround(config.teacher_fraction * shard_size)));

  const double per_query_eps = spec.noise_free() ? 0.0 : 2.0 / config.vote_noise;
  const double vote_scale = spec.noise_free() ? 0.0 : config.vote_noise;
  const size_t batches_per_epoch = (n + config.batch - 1) / config.batch;
  const size_t iterations = config.epochs * batches_per_epoch;
  const double b = static_cast<double>(config.batch);

  size_t queries = 0;
  bool exhausted = false;
  const Eigen::VectorXd ones_tb = Eigen::VectorXd::Ones(teacher_batch);
  const Eigen::VectorXd zeros_tb = Eigen::VectorXd::Zero(teacher_batch);

  // Replay buffer of labeled fakes. Noisy labels are post-processing once
  // paid for, so replaying them costs no extra budget and keeps the student's
  // view of past generator regions alive.
  const size_t replay_cap = 128 * config.batch;
  Eigen::MatrixXd replay_rows(replay_cap, encoder.width());
  Eigen::VectorXd replay_labels(replay_cap);
  size_t replay_size = 0, replay_next = 0;

  for (size_t step = 0; step < iterations && !exhausted; ++step) {
    // Budget check before this iteration's vote batch.
    if (!spec.noise_free() &&
        pate_accountant_epsilon(queries + config.batch, per_query_eps, spec.delta) >
            spec.epsilon) {
      exhausted = true;
      break;
    }

    // Teachers: one step on a mini-batch of their own shard vs fresh fakes.
    for (size_t k = 0; k < t; ++k) {
      const Eigen::MatrixXd real = sample_rows(data, shards[k], teacher_batch, rng);
      Eigen::MatrixXd fake =
          generator.forward(gaussian_matrix(teacher_batch, config.noise_dim, rng));
      apply_output_transform(fake, encoder, config.softmax_temperature);
      DenseNet::Cache cache;
      Eigen::MatrixXd logits = teachers[k].forward(real, cache);
      auto grads = teachers[k].backward(cache, bce_logit_grad(logits, ones_tb));
      logits = teachers[k].forward(fake, cache);
      grads.add(teachers[k].backward(cache, bce_logit_grad(logits, zeros_tb)));
      teachers[k].apply_sgd(grads, config.learning_rate * config.teacher_lr_scale);
    }

    // Student: fakes labeled by noisy teacher votes.
    Eigen::MatrixXd student_fakes =
        generator.forward(gaussian_matrix(config.batch, config.noise_dim, rng));
    apply_output_transform(student_fakes, encoder, config.softmax_temperature);
    std::vector<size_t> votes(config.batch, 0);
    for (size_t k = 0; k < t; ++k) {
      const Eigen::MatrixXd logits = teachers[k].forward(student_fakes);
      for (size_t i = 0; i < config.batch; ++i) {
        if (logits(i, 0) > 0.0) ++votes[i];
      }
    }
    Eigen::VectorXd labels(config.batch);
    for (size_t i = 0; i < config.batch; ++i) {
      labels(i) = noisy_vote(votes[i], t - votes[i], vote_scale, rng) ? 1.0 : 0.0;
    }
    queries += config.batch;

    for (size_t i = 0; i < config.batch; ++i) {
      replay_rows.row(replay_next) = student_fakes.row(i);
      replay_labels(replay_next) = labels(i);
      replay_next = (replay_next + 1) % replay_cap;
      replay_size = std::min(replay_cap, replay_size + 1);
    }

    DenseNet::Cache student_cache;
    const Eigen::MatrixXd student_logits = student.forward(student_fakes, student_cache);
    student.apply_sgd(student.backward(student_cache, bce_logit_grad(student_logits, labels)),
                      config.learning_rate * config.disc_lr_scale);
    if (replay_size > config.batch) {
      Eigen::MatrixXd rows(config.batch, encoder.width());
      Eigen::VectorXd lab(config.batch);
      for (size_t i = 0; i < config.batch; ++i) {
        const size_t j = rng.next_index(replay_size);
        rows.row(i) = replay_rows.row(j);
        lab(i) = replay_labels(j);
      }
      DenseNet::Cache replay_cache;
      const Eigen::MatrixXd logits = student.forward(rows, replay_cache);
      student.apply_sgd(student.backward(replay_cache, bce_logit_grad(logits, lab)),
                        config.learning_rate * config.disc_lr_scale);
    }

    // Generator: make the student call its output real (non-saturating loss).
    DenseNet::Cache gen_cache;
    const Eigen::MatrixXd z = gaussian_matrix(config.batch, config.noise_dim, rng);
    Eigen::MatrixXd gen_out = generator.forward(z, gen_cache);
    apply_output_transform(gen_out, encoder, config.softmax_temperature);
    DenseNet::Cache s_cache;
    const Eigen::MatrixXd logits = student.forward(gen_out, s_cache);
    Eigen::MatrixXd d_logits(config.batch, 1);
    for (size_t i = 0; i < config.batch; ++i) {
      const double p = 1.0 / (1.0 + std::exp(-logits(i, 0)));
      d_logits(i, 0) = (p - 1.0) / b;
    }
    Eigen::MatrixXd d_gen_out;
    student.backward(s_cache, d_logits, &d_gen_out);
    generator.apply_sgd(
        generator.backward(gen_cache, output_transform_grad(gen_out, d_gen_out, encoder,
                                                            config.softmax_temperature)),
        config.learning_rate);
  }

  BudgetLedger ledger(spec);
  double achieved = kInfiniteEpsilon;
  if (spec.noise_free()) {
    ledger.spend("pate", kInfiniteEpsilon, 0.0);
  } else {
    achieved = queries == 0 ? 0.0
                            : pate_accountant_epsilon(queries, per_query_eps, spec.delta);
    ledger.spend("pate", achieved, spec.delta);
  }
  return std::make_unique<PateGanModel>(train.schema(), encoder, std::move(generator),
                                        std::move(student), std::move(teachers),
                                        std::move(shard_of_row), std::move(ledger),
                                        config.noise_dim, config.softmax_temperature,
                                        queries, achieved, exhausted);
}

}  // namespace dpsynth
