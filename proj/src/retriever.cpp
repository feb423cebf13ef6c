#include "navpruner/retriever.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "navpruner/errors.hpp"

namespace navpruner {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// --- base64 (RFC 4648, with padding) for raw parameter blobs ---

const char kB64Alphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string b64_encode(const std::uint8_t* data, std::size_t len) {
  std::string out;
  out.reserve((len + 2) / 3 * 4);
  for (std::size_t i = 0; i < len; i += 3) {
    std::uint32_t chunk = static_cast<std::uint32_t>(data[i]) << 16;
    if (i + 1 < len) chunk |= static_cast<std::uint32_t>(data[i + 1]) << 8;
    if (i + 2 < len) chunk |= data[i + 2];
    out += kB64Alphabet[(chunk >> 18) & 63];
    out += kB64Alphabet[(chunk >> 12) & 63];
    out += (i + 1 < len) ? kB64Alphabet[(chunk >> 6) & 63] : '=';
    out += (i + 2 < len) ? kB64Alphabet[chunk & 63] : '=';
  }
  return out;
}

std::vector<std::uint8_t> b64_decode(const std::string& text) {
  std::array<int, 256> lut;
  lut.fill(-1);
  for (int i = 0; i < 64; ++i)
    lut[static_cast<unsigned char>(kB64Alphabet[i])] = i;
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  std::uint32_t chunk = 0;
  int bits = 0;
  for (const char c : text) {
    if (c == '=' || c == '\n' || c == '\r') continue;
    const int v = lut[static_cast<unsigned char>(c)];
    if (v < 0) throw FormatVersionMismatch("invalid base64 payload");
    chunk = (chunk << 6) | static_cast<std::uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<std::uint8_t>((chunk >> bits) & 0xff));
    }
  }
  return out;
}

std::string encode_doubles(const std::vector<double>& values) {
  std::vector<std::uint8_t> bytes(values.size() * sizeof(double));
  std::memcpy(bytes.data(), values.data(), bytes.size());
  return b64_encode(bytes.data(), bytes.size());
}

std::vector<double> decode_doubles(const std::string& text,
                                   std::size_t expected) {
  const auto bytes = b64_decode(text);
  if (bytes.size() != expected * sizeof(double))
    throw FormatVersionMismatch("parameter blob has wrong size");
  std::vector<double> values(expected);
  std::memcpy(values.data(), bytes.data(), bytes.size());
  return values;
}

// Forward pass for one direction; optionally records pre-activations.
double forward_one(const RetrieverModel& m, const std::vector<double>& input,
                   std::vector<double>* pre_activation) {
  const int hidden = m.hidden;
  const int in_dim = m.input_dim();
  double logit = m.b2;
  if (pre_activation) pre_activation->assign(hidden, 0.0);
  for (int h = 0; h < hidden; ++h) {
    const double* row = &m.w1[static_cast<std::size_t>(h) * in_dim];
    double a = m.b1[h];
    for (int i = 0; i < in_dim; ++i) a += row[i] * input[i];
    if (pre_activation) (*pre_activation)[h] = a;
    if (a > 0.0) logit += m.w2[h] * a;
  }
  return logit;
}

struct EncodedExample {
  Embedding context;
  std::array<Embedding, kNumSectors> directions;
  std::array<bool, kNumSectors> mask{};
  int label = 0;
};

EncodedExample encode_example(const TextEncoder& encoder,
                              const TrainingExample& ex) {
  EncodedExample enc;
  enc.context = encoder.encode(ex.context);
  enc.mask = ex.mask;
  enc.label = ex.label;
  for (int k = 0; k < kNumSectors; ++k)
    if (ex.mask[k]) enc.directions[k] = encoder.encode(ex.direction_texts[k]);
  return enc;
}

// Accumulates loss and gradients for one encoded example.
double accumulate_example(const RetrieverModel& m, const EncodedExample& ex,
                          ModelGradients& grads) {
  const int in_dim = m.input_dim();
  const int dim = m.encoder_config.dim;
  const int hidden = m.hidden;

  std::vector<double> input(in_dim);
  std::copy(ex.context.begin(), ex.context.end(), input.begin());

  std::array<double, kNumSectors> logits;
  logits.fill(kNegInf);
  std::array<std::vector<double>, kNumSectors> pre;
  std::array<std::vector<double>, kNumSectors> inputs;
  for (int k = 0; k < kNumSectors; ++k) {
    if (!ex.mask[k]) continue;
    std::copy(ex.directions[k].begin(), ex.directions[k].end(),
              input.begin() + dim);
    inputs[k] = input;
    logits[k] = forward_one(m, input, &pre[k]);
  }

  double max_logit = kNegInf;
  for (int k = 0; k < kNumSectors; ++k)
    if (ex.mask[k]) max_logit = std::max(max_logit, logits[k]);
  double denom = 0.0;
  std::array<double, kNumSectors> probs{};
  for (int k = 0; k < kNumSectors; ++k) {
    if (!ex.mask[k]) continue;
    probs[k] = std::exp(logits[k] - max_logit);
    denom += probs[k];
  }
  for (int k = 0; k < kNumSectors; ++k) probs[k] /= denom;

  const double loss = -(logits[ex.label] - max_logit - std::log(denom));

  for (int k = 0; k < kNumSectors; ++k) {
    if (!ex.mask[k]) continue;
    const double dlogit = probs[k] - (k == ex.label ? 1.0 : 0.0);
    grads.b2 += dlogit;
    const auto& a = pre[k];
    const auto& x = inputs[k];
    for (int h = 0; h < hidden; ++h) {
      if (a[h] > 0.0) {
        grads.w2[h] += dlogit * a[h];
        const double da = dlogit * m.w2[h];
        grads.b1[h] += da;
        double* grow = &grads.w1[static_cast<std::size_t>(h) * in_dim];
        for (int i = 0; i < in_dim; ++i) grow[i] += da * x[i];
      }
    }
  }
  return loss;
}

std::pair<double, ModelGradients> loss_and_grad_encoded(
    const RetrieverModel& model, const std::vector<EncodedExample>& batch) {
  model.check_shapes();
  ModelGradients grads;
  grads.w1.assign(model.w1.size(), 0.0);
  grads.b1.assign(model.b1.size(), 0.0);
  grads.w2.assign(model.w2.size(), 0.0);
  grads.b2 = 0.0;

  double total = 0.0;
  for (const auto& ex : batch) total += accumulate_example(model, ex, grads);

  const double inv = 1.0 / static_cast<double>(batch.size());
  total *= inv;
  for (auto& g : grads.w1) g *= inv;
  for (auto& g : grads.b1) g *= inv;
  for (auto& g : grads.w2) g *= inv;
  grads.b2 *= inv;
  return {total, std::move(grads)};
}

// Decoupled-weight-decay Adam over the four parameter tensors.
class AdamW {
 public:
  AdamW(const TrainingConfig& cfg, std::size_t w1_size, std::size_t hidden)
      : cfg_(cfg),
        m_w1_(w1_size, 0.0), v_w1_(w1_size, 0.0),
        m_b1_(hidden, 0.0), v_b1_(hidden, 0.0),
        m_w2_(hidden, 0.0), v_w2_(hidden, 0.0) {}

  void step(RetrieverModel& model, const ModelGradients& grads) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
    update(model.w1, grads.w1, m_w1_, v_w1_, bc1, bc2);
    update(model.b1, grads.b1, m_b1_, v_b1_, bc1, bc2);
    update(model.w2, grads.w2, m_w2_, v_w2_, bc1, bc2);
    update_scalar(model.b2, grads.b2, m_b2_, v_b2_, bc1, bc2);
  }

 private:
  void update_scalar(double& p, double g, double& m, double& v, double bc1,
                     double bc2) {
    p -= cfg_.learning_rate * cfg_.weight_decay * p;
    m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
    v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g * g;
    p -= cfg_.learning_rate * (m / bc1) / (std::sqrt(v / bc2) + cfg_.eps);
  }
  void update(std::vector<double>& p, const std::vector<double>& g,
              std::vector<double>& m, std::vector<double>& v, double bc1,
              double bc2) {
    for (std::size_t i = 0; i < p.size(); ++i)
      update_scalar(p[i], g[i], m[i], v[i], bc1, bc2);
  }

  TrainingConfig cfg_;
  long t_ = 0;
  std::vector<double> m_w1_, v_w1_, m_b1_, v_b1_, m_w2_, v_w2_;
  double m_b2_ = 0.0, v_b2_ = 0.0;
};

}  // namespace

void RetrieverModel::check_shapes() const {
  const std::size_t in = static_cast<std::size_t>(input_dim());
  if (encoder_config.dim <= 0 || hidden <= 0 ||
      w1.size() != in * static_cast<std::size_t>(hidden) ||
      b1.size() != static_cast<std::size_t>(hidden) ||
      w2.size() != static_cast<std::size_t>(hidden))
    throw DimensionMismatch("model parameter shapes are inconsistent");
  for (const double x : w1)
    if (!std::isfinite(x)) throw DimensionMismatch("non-finite weight in W1");
}

std::string build_context(const std::string& instruction,
                          const History& history) {
  return instruction + "\n" + summarize_history(history);
}

DirectionScores score_directions(const RetrieverModel& model,
                                 const std::string& context,
                                 const Observation& observation) {
  model.check_shapes();
  const TextEncoder encoder(model.encoder_config);
  const Embedding u = encoder.encode(context);
  const int dim = model.encoder_config.dim;

  DirectionScores scores;
  scores.logits.fill(kNegInf);
  std::vector<double> input(model.input_dim());
  std::copy(u.begin(), u.end(), input.begin());
  for (const auto& sector : observation.sectors) {
    const int k = sector.index;
    scores.mask[k] = !sector.navigable.empty();
    if (!scores.mask[k]) continue;
    const Embedding z = encoder.encode(sector.rendered);
    std::copy(z.begin(), z.end(), input.begin() + dim);
    scores.logits[k] = forward_one(model, input, nullptr);
  }
  return scores;
}

PruneSelection select_topk(const DirectionScores& scores, int k) {
  if (k < 1) throw InvalidConfig("select_topk requires k >= 1");
  std::vector<int> unmasked;
  for (int i = 0; i < kNumSectors; ++i)
    if (scores.mask[i]) unmasked.push_back(i);
  std::stable_sort(unmasked.begin(), unmasked.end(), [&](int a, int b) {
    if (scores.logits[a] != scores.logits[b])
      return scores.logits[a] > scores.logits[b];
    return a < b;
  });
  if (static_cast<int>(unmasked.size()) > k) unmasked.resize(k);
  std::sort(unmasked.begin(), unmasked.end());
  return {std::move(unmasked)};
}

PrunedObservation prune_observation(const Observation& observation,
                                    const PruneSelection& sel) {
  PrunedObservation out;
  out.viewpoint = observation.viewpoint;
  out.heading = observation.heading;
  out.scene_summary = observation.scene_summary;
  out.selected_indices = sel.indices;
  std::sort(out.selected_indices.begin(), out.selected_indices.end());
  for (const int k : out.selected_indices) {
    if (k < 0 || k >= static_cast<int>(observation.sectors.size()))
      throw InvalidConfig("prune selection index out of range");
    out.sectors.push_back(observation.sectors[k]);
  }
  return out;
}

std::vector<TrainingExample> make_training_examples(
    const World& world, const std::vector<Episode>& episodes,
    int history_window) {
  std::vector<TrainingExample> examples;
  for (const auto& ep : episodes) {
    validate_episode(world, ep);
    double heading = ep.start_heading;
    History history;
    history.window = history_window;
    const auto& path = ep.reference_path;
    for (std::size_t t = 0; t + 1 < path.size(); ++t) {
      const auto& at = path[t];
      const auto& next = path[t + 1];
      const Observation obs = render_observation(world, at, heading);

      TrainingExample ex;
      ex.context = build_context(ep.instruction, history);
      for (int k = 0; k < kNumSectors; ++k) {
        ex.mask[k] = !obs.sectors[k].navigable.empty();
        if (ex.mask[k]) ex.direction_texts[k] = obs.sectors[k].rendered;
      }
      const int label =
          sector_of(relative_heading(world, at, heading, next));
      if (!ex.mask[label])
        throw InvalidEpisode(ep.id + ": label sector has no candidates");
      ex.label = label;
      examples.push_back(std::move(ex));

      TrajectoryStep step;
      step.index = static_cast<int>(t);
      step.viewpoint_before = at;
      step.action = Action::move(next);
      step.observation_summary = obs.scene_summary;
      history.steps.push_back(std::move(step));
      heading = bearing_deg(world.position(at), world.position(next));
    }
  }
  return examples;
}

std::pair<double, ModelGradients> loss_and_grad(
    const RetrieverModel& model, const std::vector<TrainingExample>& batch) {
  if (batch.empty()) throw EmptyDataset("loss_and_grad needs a non-empty batch");
  const TextEncoder encoder(model.encoder_config);
  std::vector<EncodedExample> encoded;
  encoded.reserve(batch.size());
  for (const auto& ex : batch) encoded.push_back(encode_example(encoder, ex));
  return loss_and_grad_encoded(model, encoded);
}

TrainingRun train_retriever(const std::vector<TrainingExample>& dataset,
                            const TrainingConfig& config, std::uint64_t seed) {
  if (dataset.empty()) throw EmptyDataset("training dataset is empty");
  if (config.epochs < 1 || config.batch_size < 1 || config.hidden < 1 ||
      config.learning_rate <= 0.0)
    throw InvalidConfig("bad training hyperparameters");

  TrainingRun run;
  RetrieverModel& model = run.model;
  model.encoder_config = config.encoder;
  model.hidden = config.hidden;
  const std::size_t in_dim = static_cast<std::size_t>(model.input_dim());
  model.w1.resize(in_dim * config.hidden);
  model.b1.assign(config.hidden, 0.0);
  model.w2.resize(config.hidden);
  model.b2 = 0.0;

  Rng rng(seed);
  const double lim1 = std::sqrt(6.0 / (static_cast<double>(in_dim) + config.hidden));
  for (auto& w : model.w1) w = rng.uniform(-lim1, lim1);
  const double lim2 = std::sqrt(6.0 / (config.hidden + 1.0));
  for (auto& w : model.w2) w = rng.uniform(-lim2, lim2);

  // The encoder is frozen; embed the corpus once.
  const TextEncoder encoder(config.encoder);
  std::vector<EncodedExample> encoded;
  encoded.reserve(dataset.size());
  for (const auto& ex : dataset) encoded.push_back(encode_example(encoder, ex));

  AdamW optimizer(config, model.w1.size(), model.w2.size());
  std::vector<std::size_t> order(encoded.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < order.size();
         begin += config.batch_size) {
      const std::size_t end =
          std::min(order.size(), begin + static_cast<std::size_t>(config.batch_size));
      std::vector<EncodedExample> batch;
      batch.reserve(end - begin);
      for (std::size_t i = begin; i < end; ++i)
        batch.push_back(encoded[order[i]]);
      auto [loss, grads] = loss_and_grad_encoded(model, batch);
      epoch_loss += loss * static_cast<double>(batch.size());
      optimizer.step(model, grads);
    }
    run.epoch_losses.push_back(epoch_loss / static_cast<double>(encoded.size()));
  }
  return run;
}

void save_model(const RetrieverModel& model, const std::string& path) {
  model.check_shapes();
  nlohmann::ordered_json doc;
  doc["version"] = 1;
  doc["dim"] = model.encoder_config.dim;
  doc["hidden"] = model.hidden;
  doc["encoder_config"] = {{"dim", model.encoder_config.dim},
                           {"max_ngram", model.encoder_config.max_ngram},
                           {"hash_seed", model.encoder_config.hash_seed}};
  doc["W1"] = encode_doubles(model.w1);
  doc["b1"] = encode_doubles(model.b1);
  doc["W2"] = encode_doubles(model.w2);
  doc["b2"] = encode_doubles({model.b2});
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << doc.dump(2) << "\n";
  if (!out) throw IoError("write failed: " + path);
}

RetrieverModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(ss.str());
  } catch (const std::exception& e) {
    throw FormatVersionMismatch(std::string("model file is not valid JSON: ") +
                                e.what());
  }
  RetrieverModel model;
  try {
    if (doc.at("version").get<int>() != 1)
      throw FormatVersionMismatch("unsupported model file version");
    model.encoder_config.dim = doc.at("encoder_config").at("dim").get<int>();
    model.encoder_config.max_ngram =
        doc.at("encoder_config").at("max_ngram").get<int>();
    model.encoder_config.hash_seed =
        doc.at("encoder_config").at("hash_seed").get<std::uint64_t>();
    if (doc.at("dim").get<int>() != model.encoder_config.dim)
      throw DimensionMismatch(
          "model header dim does not match encoder_config dim");
    model.hidden = doc.at("hidden").get<int>();
    const std::size_t in_dim = static_cast<std::size_t>(model.input_dim());
    model.w1 = decode_doubles(doc.at("W1").get<std::string>(),
                              in_dim * model.hidden);
    model.b1 = decode_doubles(doc.at("b1").get<std::string>(), model.hidden);
    model.w2 = decode_doubles(doc.at("W2").get<std::string>(), model.hidden);
    model.b2 = decode_doubles(doc.at("b2").get<std::string>(), 1)[0];
  } catch (const NavError&) {
    throw;
  } catch (const std::exception& e) {
    throw FormatVersionMismatch(std::string("model file is malformed: ") +
                                e.what());
  }
  model.check_shapes();
  return model;
}

void save_training_examples(const std::vector<TrainingExample>& examples,
                            const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  for (const auto& ex : examples) {
    nlohmann::ordered_json line;
    line["context"] = ex.context;
    line["direction_texts"] = ex.direction_texts;
    line["mask"] = ex.mask;
    line["label"] = ex.label;
    out << line.dump() << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace navpruner
